//! Error norms of finite element solutions against the series reference, and
//! convergence tables.
//!
//! Two routes are provided:
//! * [`fe_error_norms`]: element-wise Gauss quadrature of |u − u_h|² and
//!   |∇(u − u_h)|² with the series evaluated at the quadrature points;
//! * [`ErrorEvaluator`]: the exact expansion
//!   ‖u − u_h‖² = ‖u‖² − 2(u, u_h) + ‖u_h‖², where ‖u‖² comes from the
//!   coefficient sums, (u, u_h) from the Fourier transform of the hat
//!   functions, and ‖u_h‖² from the mass (stiffness) matrix. This needs no
//!   point values of u and stays accurate for measure-valued data, where the
//!   series converges too slowly for pointwise evaluation.

use std::collections::HashMap;
use std::f64::consts::{PI, SQRT_2};
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::data::{separable_coefficients, sine_coefficient_table, InitialDatum};
use crate::error::{Error, Result};
use crate::fem::{assemble_mass, assemble_stiffness, triangle_gradients, Mass};
use crate::mesh::Mesh;
use crate::par;
use crate::quadrature::{accurate_sum, gauss_legendre, CompensatedSum, TriangleRule};
use crate::sparse::Csr;
use crate::special::{rgamma, MittagLeffler};
use crate::spectral::{continuous_eigenvalue, evaluate_on_points, ml_table, SpectralSolution};

/// L2 and H1-seminorm errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
    /// False when the reference did not meet its truncation tolerance.
    pub reference_converged: bool,
}

/// Quadrature route: degree-4 rule (6 points) per triangle, 3-point Gauss per
/// interval in 1D.
pub fn fe_error_norms(u_h: &[f64], reference: &SpectralSolution, mesh: &Mesh) -> Result<ErrorNorms> {
    if reference.dim != mesh.dim || u_h.len() != mesh.num_dofs() {
        return Err(Error::Domain("solution, reference and mesh are incompatible".into()));
    }
    let nodal = mesh.extend_to_vertices(u_h);
    let k = mesh.dim + 1;
    let (ref_pts, ref_w): (Vec<[f64; 2]>, Vec<f64>) = if mesh.dim == 1 {
        let (x, w) = gauss_legendre(3);
        (x.iter().map(|x| [0.5 * (x + 1.0), 0.0]).collect(), w.iter().map(|w| 0.5 * w).collect())
    } else {
        let r = TriangleRule::degree4();
        (r.points.clone(), r.weights.clone())
    };
    let nq = ref_pts.len();
    let mut points = Vec::with_capacity(mesh.num_cells() * nq);
    for c in 0..mesh.num_cells() {
        let p = mesh.cell_coords(c);
        for q in &ref_pts {
            let lam = barycentric(mesh.dim, q);
            let mut x = [0.0; 2];
            for a in 0..k {
                x[0] += lam[a] * p[a][0];
                x[1] += lam[a] * p[a][1];
            }
            points.push(x);
        }
    }
    let exact = evaluate_on_points(reference, &points, true);
    let grads = exact.gradients.expect("gradients requested");
    let measure = mesh.cell_measure();
    let per_cell = par::map_range(mesh.num_cells(), |c| {
        let p = mesh.cell_coords(c);
        let verts = mesh.cell(c);
        let uh_grad = if mesh.dim == 1 {
            [(nodal[verts[1]] - nodal[verts[0]]) / mesh.h, 0.0]
        } else {
            let (g, _) = triangle_gradients(&p);
            let mut d = [0.0; 2];
            for a in 0..3 {
                d[0] += nodal[verts[a]] * g[a][0];
                d[1] += nodal[verts[a]] * g[a][1];
            }
            d
        };
        let (mut e0, mut e1) = (0.0, 0.0);
        for (qi, q) in ref_pts.iter().enumerate() {
            let lam = barycentric(mesh.dim, q);
            let uh: f64 = (0..k).map(|a| lam[a] * nodal[verts[a]]).sum();
            let idx = c * nq + qi;
            let w = ref_w[qi] * measure;
            e0 += w * (exact.values[idx] - uh).powi(2);
            e1 += w * ((grads[idx][0] - uh_grad[0]).powi(2) + (grads[idx][1] - uh_grad[1]).powi(2));
        }
        (e0, e1)
    });
    let (e0, e1) = per_cell.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(ErrorNorms {
        l2: e0.sqrt(),
        h1: e1.sqrt(),
        reference_converged: reference.converged,
    })
}

fn barycentric(dim: usize, q: &[f64; 2]) -> [f64; 3] {
    if dim == 1 {
        [1.0 - q[0], q[0], 0.0]
    } else {
        [1.0 - q[0] - q[1], q[0], q[1]]
    }
}

/// ‖u(t)‖² and |u(t)|₁² from the coefficient sums.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceNorms {
    pub l2_sq: f64,
    pub h1_sq: f64,
    /// Largest per-axis mode count summed.
    pub modes: usize,
    /// Relative change of the extrapolated sums over the last doubling.
    pub change: f64,
    pub converged: bool,
    /// Sums over rows (modes with max(n, m) = n) in blocks of `block` rows,
    /// kept so that tails beyond a cutoff can be formed without cancellation.
    pub row_blocks: Vec<(f64, f64)>,
    pub block: usize,
}

impl ReferenceNorms {
    /// (L2, H1) sums over the modes with max(n, m) > r, extrapolated like
    /// the totals. `None` when the rows were not kept or do not reach 4r.
    pub fn tail_beyond(&self, r: usize) -> Option<(f64, f64)> {
        if self.block == 0 || r % self.block != 0 || 4 * r > self.modes {
            return None;
        }
        let tail = |hi: usize| -> (f64, f64) {
            let blocks = &self.row_blocks[r / self.block..hi / self.block];
            (
                accurate_sum(blocks.iter().map(|b| b.0)),
                accurate_sum(blocks.iter().map(|b| b.1)),
            )
        };
        let top = self.modes;
        let (a, b, c) = (tail(top / 4), tail(top / 2), tail(top));
        Some(((8.0 * c.0 - 6.0 * b.0 + a.0) / 3.0, (8.0 * c.1 - 6.0 * b.1 + a.1) / 3.0))
    }
}

/// Options for [`reference_norms_with`].
#[derive(Debug, Clone, Copy)]
pub struct NormOptions {
    pub rel_tol: f64,
    pub max_modes: usize,
    /// Keep summing until at least this many modes per axis.
    pub min_modes: usize,
}

impl NormOptions {
    pub fn for_dim(dim: usize) -> Self {
        NormOptions {
            rel_tol: 1e-13,
            max_modes: if dim == 1 { 1 << 22 } else { 1 << 14 },
            min_modes: 0,
        }
    }
}

/// Reference norms with default options.
pub fn reference_norms(v: &InitialDatum, alpha: f64, t: f64) -> Result<ReferenceNorms> {
    reference_norms_with(v, alpha, t, NormOptions::for_dim(v.dim()))
}

/// Box sums S(R) = Σ_{n,m ≤ R} over doubling R, extrapolated as
/// (8S(R) − 6S(R/2) + S(R/4))/3, which removes tails of the form
/// C/R + D/R² (the decay for measure data); stops when the extrapolated
/// values change by less than `rel_tol` (and `min_modes` is reached).
pub fn reference_norms_with(v: &InitialDatum, alpha: f64, t: f64, opts: NormOptions) -> Result<ReferenceNorms> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let dim = v.dim();
    let ml = MittagLeffler::new(alpha, 1.0)?;
    let ta = t.powf(alpha);
    let Some(terms) = separable_coefficients(v, opts.max_modes) else {
        return dense_reference_norms(v, alpha, t);
    };
    // contribution of every mode with max(n, m) = n
    let row = |n: usize| -> Result<(f64, f64)> {
        let b = |i: usize, j: usize| -> f64 { terms.iter().map(|(x, y)| x[i - 1] * if dim == 1 { 1.0 } else { y[j - 1] }).sum() };
        if dim == 1 {
            let lam = continuous_eigenvalue(1, n, 0);
            let c = b(n, 0) * ml.eval(-lam * ta)?;
            return Ok((c * c, lam * c * c));
        }
        let (mut s0, mut s1) = (CompensatedSum::default(), CompensatedSum::default());
        for m in 1..=n {
            let lam = continuous_eigenvalue(2, n, m);
            let e = ml.eval(-lam * ta)?;
            let mut q = b(n, m).powi(2);
            if m != n {
                q += b(m, n).powi(2);
            }
            s0.add(q * e * e);
            s1.add(lam * q * e * e);
        }
        Ok((s0.value(), s1.value()))
    };
    let block = if dim == 1 { 1024 } else { 1 };
    let mut row_blocks = Vec::new();
    let mut current = (CompensatedSum::default(), CompensatedSum::default());
    let mut levels: Vec<(usize, f64, f64)> = Vec::new();
    let (mut s0, mut s1) = (CompensatedSum::default(), CompensatedSum::default());
    let mut lo = 0;
    let mut r = 16;
    let mut prev: Option<(f64, f64)> = None;
    loop {
        let rows = par::map_range(r - lo, |k| row(lo + k + 1));
        for (k, x) in rows.into_iter().enumerate() {
            let (a, b) = x?;
            s0.add(a);
            s1.add(b);
            current.0.add(a);
            current.1.add(b);
            if (lo + k + 1) % block == 0 {
                row_blocks.push((current.0.value(), current.1.value()));
                current = Default::default();
            }
        }
        levels.push((r, s0.value(), s1.value()));
        lo = r;
        if levels.len() >= 3 {
            let [(_, a0, a1), (_, b0, b1), (_, c0, c1)] = levels[levels.len() - 3..] else { unreachable!() };
            let rich = ((8.0 * c0 - 6.0 * b0 + a0) / 3.0, (8.0 * c1 - 6.0 * b1 + a1) / 3.0);
            if let Some(p) = prev {
                let change = rel_change(rich, p);
                if (change <= opts.rel_tol && r >= opts.min_modes) || 2 * r > opts.max_modes {
                    return Ok(ReferenceNorms {
                        l2_sq: rich.0,
                        h1_sq: rich.1,
                        modes: r,
                        change,
                        converged: change <= opts.rel_tol,
                        row_blocks,
                        block,
                    });
                }
            }
            prev = Some(rich);
        }
        r *= 2;
    }
}

fn rel_change(a: (f64, f64), b: (f64, f64)) -> f64 {
    let d0 = (a.0 - b.0).abs() / a.0.abs().max(f64::MIN_POSITIVE);
    let d1 = (a.1 - b.1).abs() / a.1.abs().max(f64::MIN_POSITIVE);
    d0.max(d1)
}

// expressions: dense quadrature tables at R = 64, 128, 256
fn dense_reference_norms(v: &InitialDatum, alpha: f64, t: f64) -> Result<ReferenceNorms> {
    let sums = [64, 128, 256]
        .iter()
        .map(|&r| Ok(crate::spectral::exact_solution_with_modes(v, alpha, t, r)?.norms_squared()))
        .collect::<Result<Vec<_>>>()?;
    let l2 = (8.0 * sums[2].0 - 6.0 * sums[1].0 + sums[0].0) / 3.0;
    let h1 = (8.0 * sums[2].1 - 6.0 * sums[1].1 + sums[0].1) / 3.0;
    let change = rel_change((l2, h1), sums[2]);
    Ok(ReferenceNorms {
        l2_sq: l2,
        h1_sq: h1,
        modes: 256,
        change,
        converged: change < 1e-6,
        row_blocks: Vec::new(),
        block: 0,
    })
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

/// (φ_nm, u_h) for n, m ≤ r (row-major), exactly, from the Fourier transform
/// of the hat functions: ĥ(ξ, η) = h² sinc(ξh/2) sinc(ηh/2) sinc((ξ+η)h/2)
/// on this mesh, and ĥ(ξ) = h sinc²(ξh/2) in 1D. Grid sums are 2N-periodic
/// in the mode index, so only 2N × 2N of them are formed.
pub fn mode_pairings(mesh: &Mesh, u_h: &[f64], r: usize) -> Vec<f64> {
    let n = mesh.n;
    let h = mesh.h;
    let period = 2 * n;
    let sines = DMatrix::from_fn(n - 1, period, |i, k| (k as f64 * PI * (i + 1) as f64 * h).sin());
    let sinc_half: Vec<f64> = (0..=2 * r).map(|k| sinc(k as f64 * PI * h / 2.0)).collect();
    if mesh.dim == 1 {
        let s = sines.transpose() * nalgebra::DVector::from_column_slice(u_h);
        return (1..=r)
            .map(|k| SQRT_2 * h * sinc_half[k].powi(2) * s[k % period])
            .collect();
    }
    let cosines = DMatrix::from_fn(n - 1, period, |i, k| (k as f64 * PI * (i + 1) as f64 * h).cos());
    let g = DMatrix::from_column_slice(n - 1, n - 1, u_h);
    let ss = sines.transpose() * &g * &sines;
    let cc = cosines.transpose() * &g * &cosines;
    let mut out = vec![0.0; r * r];
    par::for_each_chunk_mut(&mut out, r, |row, chunk| {
        let a = row + 1;
        for (col, o) in chunk.iter_mut().enumerate() {
            let b = col + 1;
            let base = h * h * sinc_half[a] * sinc_half[b];
            let hp = base * sinc_half[a + b];
            let hm = base * sinc_half[a.abs_diff(b)];
            let (ka, kb) = (a % period, b % period);
            *o = ss[(ka, kb)] * (hm + hp) + cc[(ka, kb)] * (hm - hp);
        }
    });
    out
}

/// Exact-expansion error evaluation for one datum on one mesh; reusable
/// across times, orders and schemes.
#[derive(Debug, Clone)]
pub struct ErrorEvaluator {
    pub mesh: Mesh,
    pub stiffness: Csr,
    pub mass: Csr,
    /// ⟨v, φ_i⟩.
    pub rhs: Vec<f64>,
    /// Mode cutoff for the cross term.
    pub cutoff: usize,
    coefficients: Vec<f64>,
}

impl ErrorEvaluator {
    pub fn new(v: &InitialDatum, mesh: &Mesh, rhs: Vec<f64>) -> Result<Self> {
        let cutoff = match (mesh.dim, separable_coefficients(v, 1).is_some()) {
            (1, _) => 1024 * mesh.n,
            (_, true) => 16 * mesh.n,
            (_, false) => (16 * mesh.n).min(256),
        };
        let Mass::Consistent(mass) = assemble_mass(mesh, false) else { unreachable!() };
        Ok(ErrorEvaluator {
            mesh: mesh.clone(),
            stiffness: assemble_stiffness(mesh),
            mass,
            rhs,
            cutoff,
            coefficients: sine_coefficient_table(v, cutoff)?,
        })
    }

    /// L2 and H1 errors of u_h against u(t) = E(t)v.
    ///
    /// The H1 cross term Σ λ c (φ, u_h) converges slowly for measure data,
    /// since λE_{α,1}(−λt^α) → a = 1/(Γ(1−α)t^α); the constant part is summed
    /// exactly as a·⟨v, u_h⟩ and only λE − a is summed over modes.
    /// Mode count the reference norms need for the tail beyond the cutoff.
    pub fn min_reference_modes(&self) -> usize {
        4 * self.cutoff
    }

    pub fn errors(&self, u_h: &[f64], alpha: f64, t: f64, norms: &ReferenceNorms) -> Result<ErrorNorms> {
        let dim = self.mesh.dim;
        let r = self.cutoff;
        let pr = mode_pairings(&self.mesh, u_h, r);
        let e = ml_table(alpha, t, dim, r)?;
        let a = rgamma(1.0 - alpha) / t.powf(alpha);
        // Parseval split: Σ_{k≤R}(u_k − P_k)² plus the tails of u and u_h.
        // The differences absorb most of the rounding in u_k, which the
        // expanded form ‖u‖² − 2(u, u_h) + ‖u_h‖² would amplify.
        let mut acc = [CompensatedSum::default(); 7];
        for k in 0..pr.len() {
            let (n, m) = if dim == 1 { (k + 1, 0) } else { (k / r + 1, k % r + 1) };
            let lam = continuous_eigenvalue(dim, n, m);
            let b = self.coefficients[k];
            let (u, p) = (b * e[k], pr[k]);
            let terms = [(u - p) * (u - p), u * u, p * p, lam * (u - p) * (u - p), lam * u * u, lam * p * p, b * p];
            for (a, x) in acc.iter_mut().zip(terms) {
                a.add(x);
            }
        }
        let [d0, su0, sp0, d1, su1, sp1, bp] = acc.map(|a| a.value());
        // beyond R, λ_k u_k → a b_k, so the H1 cross tail is a (v − Σ_{k≤R}, u_h)
        let pairing = accurate_sum(self.rhs.iter().zip(u_h).map(|(r, u)| r * u));
        let (tail0, tail1) = norms
            .tail_beyond(r)
            .unwrap_or((norms.l2_sq - su0, norms.h1_sq - su1));
        let e0 = d0 + tail0 + (self.mass.quad_form(u_h) - sp0);
        let e1 = d1 + tail1 + (self.stiffness.quad_form(u_h) - sp1) - 2.0 * a * (pairing - bp);
        Ok(ErrorNorms {
            l2: e0.max(0.0).sqrt(),
            h1: e1.max(0.0).sqrt(),
            reference_converged: norms.converged,
        })
    }
}

/// Spatial scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    Standard,
    Lumped,
}

impl Scheme {
    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Standard => "standard",
            Scheme::Lumped => "lumped",
        }
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "standard" | "galerkin" => Ok(Scheme::Standard),
            "lumped" => Ok(Scheme::Lumped),
            other => Err(Error::Domain(format!("unknown scheme '{other}'"))),
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One mesh level of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRecord {
    pub scheme: Scheme,
    pub example: String,
    pub alpha: f64,
    pub t: f64,
    pub h: f64,
    pub l2_error: f64,
    pub h1_error: f64,
    /// Errors divided by ‖v‖.
    pub normalized: bool,
    /// error(coarser) / error(this), when the coarser level exists.
    pub ratio_l2: Option<f64>,
    pub ratio_h1: Option<f64>,
    pub rate_l2: Option<f64>,
    pub rate_h1: Option<f64>,
    /// |ln h|.
    pub log_factor: f64,
}

impl ConvergenceRecord {
    pub fn new(scheme: Scheme, example: &str, alpha: f64, t: f64, h: f64, l2: f64, h1: f64, normalized: bool) -> Self {
        ConvergenceRecord {
            scheme,
            example: example.to_string(),
            alpha,
            t,
            h,
            l2_error: l2,
            h1_error: h1,
            normalized,
            ratio_l2: None,
            ratio_h1: None,
            rate_l2: None,
            rate_h1: None,
            log_factor: h.ln().abs(),
        }
    }
}

/// Records of one (scheme, example, α, t) series, coarse to fine.
#[derive(Debug, Clone)]
pub struct ConvergenceSeries {
    pub records: Vec<ConvergenceRecord>,
    /// Mesh levels whose coarser neighbour is not at ≈ 2h.
    pub gaps: Vec<f64>,
}

impl ConvergenceSeries {
    /// Geometric mean of the last two level ratios (the finest levels, where
    /// the asymptotic regime is best resolved).
    pub fn summary_ratio_l2(&self) -> Option<f64> {
        summary(self.records.iter().map(|r| r.ratio_l2))
    }

    pub fn summary_ratio_h1(&self) -> Option<f64> {
        summary(self.records.iter().map(|r| r.ratio_h1))
    }
}

fn summary(ratios: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = ratios.flatten().collect();
    match v.len() {
        0 => None,
        1 => Some(v[0]),
        n => Some((v[n - 2] * v[n - 1]).sqrt()),
    }
}

#[derive(Debug, Clone, Default)]
pub struct ConvergenceTable {
    pub series: Vec<ConvergenceSeries>,
}

/// Groups records by (scheme, example, α, t) in first-appearance order,
/// sorts each group from coarse to fine and fills ratios and rates between
/// consecutive levels whose mesh sizes differ by a factor ≈ 2.
pub fn build_convergence_table(records: &[ConvergenceRecord]) -> ConvergenceTable {
    let mut order: Vec<(Scheme, String, u64, u64)> = Vec::new();
    let mut groups: HashMap<(Scheme, String, u64, u64), Vec<ConvergenceRecord>> = HashMap::new();
    for r in records {
        let key = (r.scheme, r.example.clone(), r.alpha.to_bits(), r.t.to_bits());
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(r.clone());
    }
    let series = order
        .into_iter()
        .map(|key| {
            let mut recs = groups.remove(&key).unwrap_or_default();
            recs.sort_by(|a, b| b.h.total_cmp(&a.h));
            let mut gaps = Vec::new();
            for k in 1..recs.len() {
                let q = recs[k - 1].h / recs[k].h;
                if !(1.7..=2.3).contains(&q) {
                    gaps.push(recs[k].h);
                    continue;
                }
                let (c, f) = (recs[k - 1].clone(), &mut recs[k]);
                let ratio = |a: f64, b: f64| (b > 0.0).then(|| a / b);
                f.ratio_l2 = ratio(c.l2_error, f.l2_error);
                f.ratio_h1 = ratio(c.h1_error, f.h1_error);
                let rate = |x: Option<f64>| x.map(|x| x.ln() / q.ln());
                f.rate_l2 = rate(f.ratio_l2);
                f.rate_h1 = rate(f.ratio_h1);
            }
            ConvergenceSeries { records: recs, gaps }
        })
        .collect();
    ConvergenceTable { series }
}

fn opt(x: Option<f64>, prec: usize) -> String {
    x.map_or(String::new(), |v| format!("{v:.prec$}"))
}

impl ConvergenceTable {
    pub const CSV_HEADER: &'static str = "scheme,example,alpha,t,h,l2,h1,ratio_l2,ratio_h1,rate_l2,rate_h1";

    pub fn to_csv(&self) -> String {
        let mut s = String::from(Self::CSV_HEADER);
        s.push('\n');
        for r in self.series.iter().flat_map(|s| &s.records) {
            let _ = writeln!(
                s,
                "{},{},{},{},{:.10e},{:.6e},{:.6e},{},{},{},{}",
                r.scheme,
                r.example,
                r.alpha,
                r.t,
                r.h,
                r.l2_error,
                r.h1_error,
                opt(r.ratio_l2, 4),
                opt(r.ratio_h1, 4),
                opt(r.rate_l2, 4),
                opt(r.rate_h1, 4)
            );
        }
        s
    }

    /// One block per series: a row of mesh sizes, then the L2 and H1 rows
    /// with the summary ratio and rate.
    pub fn to_markdown(&self) -> String {
        let mut s = String::new();
        for ser in &self.series {
            let Some(first) = ser.records.first() else { continue };
            let _ = writeln!(
                s,
                "### {} scheme, example {}, alpha = {}, t = {}{}\n",
                first.scheme,
                first.example,
                first.alpha,
                first.t,
                if first.normalized { " (normalized)" } else { "" }
            );
            let hs: Vec<String> = ser.records.iter().map(|r| format!("1/{}", (1.0 / r.h).round())).collect();
            let _ = writeln!(s, "| norm | {} | ratio | rate |", hs.join(" | "));
            let _ = writeln!(s, "|---|{}---|---|", "---|".repeat(hs.len()));
            for (name, errs, ratio) in [
                ("L2", ser.records.iter().map(|r| r.l2_error).collect::<Vec<_>>(), ser.summary_ratio_l2()),
                ("H1", ser.records.iter().map(|r| r.h1_error).collect(), ser.summary_ratio_h1()),
            ] {
                let cells: Vec<String> = errs.iter().map(|e| format!("{e:.2e}")).collect();
                let rate = ratio.map(|q| q.log2());
                let _ = writeln!(s, "| {name} | {} | {} | {} |", cells.join(" | "), opt(ratio, 2), opt(rate, 2));
            }
            if !ser.gaps.is_empty() {
                let _ = writeln!(s, "\nbroken h-chain at h = {:?}", ser.gaps);
            }
            s.push('\n');
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, SpacingRule};
    use crate::spectral::{exact_solution_with_modes, LumpedSemidiscrete};

    #[test]
    fn ratio_arithmetic() {
        let recs: Vec<_> = [(0.25, 4e-2), (0.125, 1e-2), (0.0625, 2.5e-3)]
            .iter()
            .map(|&(h, e)| ConvergenceRecord::new(Scheme::Lumped, "c", 0.5, 0.1, h, e, 2.0 * e, true))
            .collect();
        let t = build_convergence_table(&recs);
        let s = &t.series[0];
        assert_eq!(s.records[0].ratio_l2, None);
        assert!((s.records[1].ratio_l2.unwrap() - 4.0).abs() < 1e-12);
        assert!((s.records[2].rate_l2.unwrap() - 2.0).abs() < 1e-12);
        assert!(t.to_csv().starts_with(ConvergenceTable::CSV_HEADER));
        assert!(t.to_markdown().contains("| L2 | 4.00e-2 | 1.00e-2 | 2.50e-3 | 4.00 | 2.00 |"));
    }

    #[test]
    fn broken_chain_is_flagged() {
        let recs: Vec<_> = [0.25, 0.0625]
            .iter()
            .map(|&h| ConvergenceRecord::new(Scheme::Standard, "a", 0.5, 0.1, h, h, h, true))
            .collect();
        let t = build_convergence_table(&recs);
        assert_eq!(t.series[0].gaps, vec![0.0625]);
        assert_eq!(t.series[0].records[1].ratio_l2, None);
    }

    #[test]
    fn mode_pairings_match_quadrature() {
        for dim in [1, 2] {
            let mesh = build_mesh(dim, 6, SpacingRule::Standard).unwrap();
            let u: Vec<f64> = (0..mesh.num_dofs()).map(|k| (k as f64 * 0.37).sin()).collect();
            let pr = mode_pairings(&mesh, &u, 20);
            let nodal = mesh.extend_to_vertices(&u);
            let rule = TriangleRule::degree5();
            let (gx, gw) = gauss_legendre(8);
            for (n, m) in [(1, 1), (3, 2), (7, 19), (12, 5)] {
                let phi = |x: f64, y: f64| {
                    if dim == 1 {
                        SQRT_2 * (n as f64 * PI * x).sin()
                    } else {
                        2.0 * (n as f64 * PI * x).sin() * (m as f64 * PI * y).sin()
                    }
                };
                // fine composite quadrature of φ·u_h
                let mut q = 0.0;
                for c in 0..mesh.num_cells() {
                    let p = mesh.cell_coords(c);
                    let v = mesh.cell(c);
                    if dim == 1 {
                        for s in 0..8 {
                            for (x, w) in gx.iter().zip(&gw) {
                                let loc = (s as f64 + 0.5 * (x + 1.0)) / 8.0;
                                let xx = p[0][0] + loc * mesh.h;
                                let uh = (1.0 - loc) * nodal[v[0]] + loc * nodal[v[1]];
                                q += w * 0.5 / 8.0 * mesh.h * phi(xx, 0.0) * uh;
                            }
                        }
                    } else {
                        // 4^5 sub-triangles via repeated midpoint refinement
                        let mut tris = vec![[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]];
                        for _ in 0..5 {
                            tris = tris
                                .iter()
                                .flat_map(|t: &[[f64; 2]; 3]| {
                                    let mid = |a: [f64; 2], b: [f64; 2]| [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                                    let (m01, m12, m02) = (mid(t[0], t[1]), mid(t[1], t[2]), mid(t[0], t[2]));
                                    [[t[0], m01, m02], [m01, t[1], m12], [m02, m12, t[2]], [m01, m12, m02]]
                                })
                                .collect();
                        }
                        for t in &tris {
                            let sub_area = 0.5
                                * ((t[1][0] - t[0][0]) * (t[2][1] - t[0][1]) - (t[2][0] - t[0][0]) * (t[1][1] - t[0][1]))
                                    .abs();
                            for (pt, w) in rule.points.iter().zip(&rule.weights) {
                                let xi = t[0][0] + pt[0] * (t[1][0] - t[0][0]) + pt[1] * (t[2][0] - t[0][0]);
                                let eta = t[0][1] + pt[0] * (t[1][1] - t[0][1]) + pt[1] * (t[2][1] - t[0][1]);
                                let lam = [1.0 - xi - eta, xi, eta];
                                let x = (0..3).map(|a| lam[a] * p[a][0]).sum::<f64>();
                                let y = (0..3).map(|a| lam[a] * p[a][1]).sum::<f64>();
                                let uh = (0..3).map(|a| lam[a] * nodal[v[a]]).sum::<f64>();
                                q += w * sub_area * 2.0 * mesh.cell_measure() * phi(x, y) * uh;
                            }
                        }
                    }
                }
                let k = if dim == 1 { n - 1 } else { (n - 1) * 20 + m - 1 };
                assert!((pr[k] - q).abs() < 1e-10, "dim {dim} ({n},{m}): {} vs {q}", pr[k]);
            }
        }
    }

    #[test]
    fn exact_route_agrees_with_quadrature_for_smooth_data() {
        let mesh = build_mesh(2, 16, SpacingRule::Standard).unwrap();
        let v = InitialDatum::SmoothA;
        let ls = LumpedSemidiscrete::new(&v, &mesh).unwrap();
        let u = ls.at(0.5, 0.1).unwrap();
        let reference = exact_solution_with_modes(&v, 0.5, 0.1, 64).unwrap();
        let q = fe_error_norms(&u, &reference, &mesh).unwrap();
        let norms = reference_norms(&v, 0.5, 0.1).unwrap();
        let ev = ErrorEvaluator::new(&v, &mesh, ls.rhs.clone()).unwrap();
        let x = ev.errors(&u, 0.5, 0.1, &norms).unwrap();
        assert!((q.l2 - x.l2).abs() < 1e-3 * x.l2, "{q:?} {x:?}");
        assert!((q.h1 - x.h1).abs() < 1e-3 * x.h1, "{q:?} {x:?}");
    }

    #[test]
    fn zero_solution_gives_reference_norm() {
        // u_h = 0 gives the norms of u itself
        let v = InitialDatum::parse("custom:2*sin(pi*x)*sin(pi*y)", 2).unwrap();
        let s = exact_solution_with_modes(&v, 0.5, 0.1, 4).unwrap();
        let mesh = build_mesh(2, 8, SpacingRule::Standard).unwrap();
        let e = fe_error_norms(&vec![0.0; mesh.num_dofs()], &s, &mesh).unwrap();
        let c = s.coefficient(1, 1);
        assert!((e.l2 - c).abs() < 1e-4 * c);
    }
}
