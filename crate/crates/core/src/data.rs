//! Initial data: the model examples, point and curve Dirac measures, and
//! user expressions; their pairings with the nodal basis, L2 projections and
//! sine-series coefficients.
//!
//! Sine coefficients are taken against the L2-orthonormal basis
//! φ_n = √2 sin(nπx) in 1D and φ_nm = 2 sin(nπx) sin(mπy) in 2D.

use std::f64::consts::{PI, SQRT_2};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::fem::{assemble_mass, Mass};
use crate::mesh::Mesh;
use crate::par;
use crate::quadrature::{gauss_legendre, TriangleRule};
use crate::sparse::{cg, relative_residual, BandLdl};

/// Boundary of [1/4, 3/4]², the support of the curve Dirac measure.
pub const GAMMA_LO: f64 = 0.25;
pub const GAMMA_HI: f64 = 0.75;

#[derive(Debug, Clone)]
pub enum InitialDatum {
    /// x(1−x)y(1−y).
    SmoothA,
    /// (x−½)(x−1)(y−½)(y−1) on [½,1]², zero elsewhere.
    IntermediateB,
    /// Indicator of [¼,¾]².
    NonsmoothC,
    /// Point mass; `at[1]` is ignored in 1D.
    DeltaPoint { at: [f64; 2], dim: usize },
    /// Line measure on the boundary of [¼,¾]².
    DeltaCurve,
    /// Arithmetic expression in x (and y in 2D).
    Custom {
        source: String,
        expr: meval::Expr,
        dim: usize,
        smooth: bool,
    },
}

impl InitialDatum {
    /// Parses a datum token: `a`, `b`, `c`, `d` or `custom:<expr>`. In 1D, `d`
    /// is the point mass at ½; in 2D it is the curve measure.
    pub fn parse(token: &str, dim: usize) -> Result<Self> {
        let t = token.trim();
        let d = match t {
            "a" | "b" | "c" if dim != 2 => {
                return Err(Error::Unsupported(format!("example {t} is two-dimensional")))
            }
            "a" => InitialDatum::SmoothA,
            "b" => InitialDatum::IntermediateB,
            "c" => InitialDatum::NonsmoothC,
            "d" if dim == 1 => InitialDatum::DeltaPoint {
                at: [0.5, 0.0],
                dim: 1,
            },
            "d" => InitialDatum::DeltaCurve,
            _ => match t.strip_prefix("custom:") {
                Some(src) => InitialDatum::custom(src, dim)?,
                None => return Err(Error::Domain(format!("unknown example '{t}'"))),
            },
        };
        Ok(d)
    }

    /// Builds a user datum; `dim` decides whether `y` is a free variable.
    pub fn custom(source: &str, dim: usize) -> Result<Self> {
        let expr = meval::Expr::from_str(source).map_err(|e| Error::Expression(e.to_string()))?;
        // bind once to reject unknown variables early
        if dim == 1 {
            let _ = expr
                .clone()
                .bind("x")
                .map_err(|e| Error::Expression(e.to_string()))?;
        } else {
            let _ = expr
                .clone()
                .bind2("x", "y")
                .map_err(|e| Error::Expression(e.to_string()))?;
        }
        Ok(InitialDatum::Custom {
            source: source.to_string(),
            expr,
            dim,
            smooth: true,
        })
    }

    /// Token used in tables and file names.
    pub fn token(&self) -> String {
        match self {
            InitialDatum::SmoothA => "a".into(),
            InitialDatum::IntermediateB => "b".into(),
            InitialDatum::NonsmoothC => "c".into(),
            InitialDatum::DeltaPoint { .. } | InitialDatum::DeltaCurve => "d".into(),
            InitialDatum::Custom { source, .. } => format!("custom:{source}"),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            InitialDatum::DeltaPoint { dim, .. } | InitialDatum::Custom { dim, .. } => *dim,
            _ => 2,
        }
    }

    pub fn is_measure(&self) -> bool {
        matches!(self, InitialDatum::DeltaPoint { .. } | InitialDatum::DeltaCurve)
    }

    /// ‖v‖ in L2, `None` for measures.
    pub fn l2_norm(&self) -> Option<f64> {
        match self {
            InitialDatum::SmoothA => Some(1.0 / 30.0),
            InitialDatum::IntermediateB => Some(1.0 / 960.0),
            InitialDatum::NonsmoothC => Some(0.5),
            InitialDatum::DeltaPoint { .. } | InitialDatum::DeltaCurve => None,
            InitialDatum::Custom { .. } => {
                let f = self.pointwise()?;
                let (x, w) = gauss_legendre(64);
                let nodes: Vec<(f64, f64)> = x
                    .iter()
                    .zip(&w)
                    .map(|(x, w)| (0.5 * (x + 1.0), 0.5 * w))
                    .collect();
                let s: f64 = if self.dim() == 1 {
                    nodes.iter().map(|&(x, w)| w * f(x, 0.0).powi(2)).sum()
                } else {
                    nodes
                        .iter()
                        .flat_map(|&(x, wx)| nodes.iter().map(move |&(y, wy)| (x, y, wx * wy)))
                        .map(|(x, y, w)| w * f(x, y).powi(2))
                        .sum()
                };
                Some(s.sqrt())
            }
        }
    }

    /// Point evaluation for function-type data (not thread-safe: build one
    /// per worker).
    pub fn pointwise(&self) -> Option<Box<dyn Fn(f64, f64) -> f64>> {
        match self {
            InitialDatum::SmoothA => Some(Box::new(|x, y| x * (1.0 - x) * y * (1.0 - y))),
            InitialDatum::IntermediateB => Some(Box::new(|x, y| {
                if x >= 0.5 && y >= 0.5 {
                    (x - 0.5) * (x - 1.0) * (y - 0.5) * (y - 1.0)
                } else {
                    0.0
                }
            })),
            InitialDatum::NonsmoothC => Some(Box::new(|x, y| {
                let inside = |s: f64| (GAMMA_LO..=GAMMA_HI).contains(&s);
                if inside(x) && inside(y) {
                    1.0
                } else {
                    0.0
                }
            })),
            InitialDatum::Custom { expr, dim, .. } => {
                if *dim == 1 {
                    let f = expr.clone().bind("x").ok()?;
                    Some(Box::new(move |x, _| f(x)))
                } else {
                    let f = expr.clone().bind2("x", "y").ok()?;
                    Some(Box::new(f))
                }
            }
            _ => None,
        }
    }

    /// Lines (x = c or y = c) along which the datum jumps or kinks.
    fn breaklines(&self) -> &'static [f64] {
        match self {
            InitialDatum::IntermediateB => &[0.5],
            InitialDatum::NonsmoothC => &[GAMMA_LO, GAMMA_HI],
            _ => &[],
        }
    }
}

/// Value at `p` of the P1 hat function attached to grid point `z`.
pub fn hat(mesh: &Mesh, z: [f64; 2], p: [f64; 2]) -> f64 {
    let s = (p[0] - z[0]) / mesh.h;
    if mesh.dim == 1 {
        return (1.0 - s.abs()).max(0.0);
    }
    let r = (p[1] - z[1]) / mesh.h;
    // three-direction hat for diagonals along (1, 1)
    (1.0 - s.abs().max(r.abs()).max((s - r).abs())).max(0.0)
}

/// Options for [`pair_with_basis`].
#[derive(Debug, Clone, Copy)]
pub struct PairingOptions {
    /// Refine quadrature on cells cut by a discontinuity of the datum that
    /// does not lie on mesh lines.
    pub split_misaligned: bool,
    /// Refinement depth (each level splits a triangle into four).
    pub split_levels: usize,
}

impl Default for PairingOptions {
    fn default() -> Self {
        PairingOptions {
            split_misaligned: true,
            split_levels: 5,
        }
    }
}

fn on_grid(c: f64, n: usize) -> bool {
    let k = c * n as f64;
    (k - k.round()).abs() < 1e-12
}

/// ⟨v, φ_i⟩ for every interior basis function.
pub fn pair_with_basis(v: &InitialDatum, mesh: &Mesh) -> Result<Vec<f64>> {
    pair_with_basis_opts(v, mesh, PairingOptions::default())
}

pub fn pair_with_basis_opts(v: &InitialDatum, mesh: &Mesh, opts: PairingOptions) -> Result<Vec<f64>> {
    if v.dim() != mesh.dim {
        return Err(Error::Domain(format!(
            "datum is {}D but the mesh is {}D",
            v.dim(),
            mesh.dim
        )));
    }
    match v {
        InitialDatum::DeltaPoint { at, .. } => {
            let inside = |s: f64| (0.0..=1.0).contains(&s);
            if !inside(at[0]) || (mesh.dim == 2 && !inside(at[1])) {
                return Err(Error::Domain(format!("point mass at {at:?} lies outside the domain")));
            }
            Ok((0..mesh.num_dofs())
                .map(|k| hat(mesh, mesh.dof_coords(k), *at))
                .collect())
        }
        InitialDatum::DeltaCurve => Ok(pair_curve(mesh)),
        _ if mesh.dim == 1 => pair_function_1d(v, mesh),
        _ => {
            let misaligned = v.breaklines().iter().any(|&c| !on_grid(c, mesh.n));
            if misaligned && !opts.split_misaligned {
                log::warn!(
                    "discontinuities of example {} are not on mesh lines for N = {}; \
                     pairing carries an O(h) consistency error",
                    v.token(),
                    mesh.n
                );
            }
            let levels = if misaligned && opts.split_misaligned {
                opts.split_levels
            } else {
                0
            };
            Ok(pair_function_2d(v, mesh, levels))
        }
    }
}

fn pair_function_1d(v: &InitialDatum, mesh: &Mesh) -> Result<Vec<f64>> {
    let f = v
        .pointwise()
        .ok_or_else(|| Error::Unsupported("datum has no point values".into()))?;
    let (gx, gw) = gauss_legendre(6);
    let mut out = vec![0.0; mesh.num_dofs()];
    for c in 0..mesh.num_cells() {
        let verts = mesh.cell(c);
        let (a, b) = (mesh.vertices[verts[0]][0], mesh.vertices[verts[1]][0]);
        for (x, w) in gx.iter().zip(&gw) {
            let p = 0.5 * (a + b) + 0.5 * (b - a) * x;
            let fw = f(p, 0.0) * w * 0.5 * (b - a);
            for (k, &vert) in verts.iter().enumerate() {
                if let Some(i) = mesh.interior_dof[vert] {
                    let phi = if k == 0 { (b - p) / (b - a) } else { (p - a) / (b - a) };
                    out[i] += fw * phi;
                }
            }
        }
    }
    Ok(out)
}

fn pair_function_2d(v: &InitialDatum, mesh: &Mesh, split_levels: usize) -> Vec<f64> {
    let rule = TriangleRule::degree5();
    let lines = v.breaklines();
    // per-cell contributions in parallel (one evaluator per block), then an
    // ordered scatter
    let block = 256;
    let nblocks = mesh.num_cells().div_ceil(block);
    let contributions = par::map_range(nblocks, |b| {
        let f = v.pointwise().expect("function datum");
        let lo = b * block;
        let hi = (lo + block).min(mesh.num_cells());
        (lo..hi)
            .map(|c| {
                let p = mesh.cell_coords(c);
                let cut = split_levels > 0 && cell_is_cut(&p, lines);
                let levels = if cut { split_levels } else { 0 };
                integrate_against_barycentrics(&p, &*f, &rule, levels)
            })
            .collect::<Vec<_>>()
    });
    let mut out = vec![0.0; mesh.num_dofs()];
    for (c, loc) in contributions.into_iter().flatten().enumerate() {
        for (k, &vert) in mesh.cell(c).iter().enumerate() {
            if let Some(i) = mesh.interior_dof[vert] {
                out[i] += loc[k];
            }
        }
    }
    out
}

fn cell_is_cut(p: &[[f64; 2]; 3], lines: &[f64]) -> bool {
    lines.iter().any(|&c| {
        (0..2).any(|axis| {
            let lo = p.iter().map(|q| q[axis]).fold(f64::INFINITY, f64::min);
            let hi = p.iter().map(|q| q[axis]).fold(f64::NEG_INFINITY, f64::max);
            lo < c && c < hi
        })
    })
}

/// ∫_T f λ_k for the three barycentric coordinates λ_k of triangle `p`,
/// optionally on a uniformly refined copy of the triangle.
fn integrate_against_barycentrics(
    p: &[[f64; 2]; 3],
    f: &dyn Fn(f64, f64) -> f64,
    rule: &TriangleRule,
    levels: usize,
) -> [f64; 3] {
    let area = 0.5
        * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
            .abs();
    let mut acc = [0.0; 3];
    let parts = 1usize << levels;
    let inv = 1.0 / parts as f64;
    // sub-triangles of the reference triangle on a parts × parts lattice
    for i in 0..parts {
        for j in 0..parts - i {
            let mut subs = vec![[[i as f64, j as f64], [i as f64 + 1.0, j as f64], [i as f64, j as f64 + 1.0]]];
            if i + j + 1 < parts {
                subs.push([
                    [i as f64 + 1.0, j as f64],
                    [i as f64 + 1.0, j as f64 + 1.0],
                    [i as f64, j as f64 + 1.0],
                ]);
            }
            for s in subs {
                for (q, w) in rule.points.iter().zip(&rule.weights) {
                    // sub-triangle local → reference coordinates
                    let xi = (s[0][0] + q[0] * (s[1][0] - s[0][0]) + q[1] * (s[2][0] - s[0][0])) * inv;
                    let eta = (s[0][1] + q[0] * (s[1][1] - s[0][1]) + q[1] * (s[2][1] - s[0][1])) * inv;
                    let lam = [1.0 - xi - eta, xi, eta];
                    let x = lam[0] * p[0][0] + lam[1] * p[1][0] + lam[2] * p[2][0];
                    let y = lam[0] * p[0][1] + lam[1] * p[1][1] + lam[2] * p[2][1];
                    let fw = f(x, y) * w * area * inv * inv;
                    for k in 0..3 {
                        acc[k] += fw * lam[k];
                    }
                }
            }
        }
    }
    acc
}

/// ∫_Γ φ_i ds for Γ = ∂[¼,¾]², exact for P1 hats: Γ is cut at every mesh
/// line (horizontal, vertical and diagonal) so each piece lies in one cell,
/// then integrated with two-point Gauss.
fn pair_curve(mesh: &Mesh) -> Vec<f64> {
    let (lo, hi) = (GAMMA_LO, GAMMA_HI);
    let sides = [
        ([lo, lo], [hi, lo]),
        ([hi, lo], [hi, hi]),
        ([hi, hi], [lo, hi]),
        ([lo, hi], [lo, lo]),
    ];
    let n = mesh.n as f64;
    let g = 0.5 / 3f64.sqrt();
    let mut out = vec![0.0; mesh.num_dofs()];
    for (a, b) in sides {
        let d = [b[0] - a[0], b[1] - a[1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        // parameters where the side crosses x = k h, y = k h, x − y = k h
        let mut ts = vec![0.0, 1.0];
        let mut crossings = |u0: f64, du: f64| {
            if du.abs() < 1e-15 {
                return;
            }
            let (k0, k1) = ((u0 * n).min((u0 + du) * n), (u0 * n).max((u0 + du) * n));
            for k in (k0.ceil() as i64)..=(k1.floor() as i64) {
                let t = (k as f64 / n - u0) / du;
                if t > 0.0 && t < 1.0 {
                    ts.push(t);
                }
            }
        };
        crossings(a[0], d[0]);
        crossings(a[1], d[1]);
        crossings(a[0] - a[1], d[0] - d[1]);
        ts.sort_by(f64::total_cmp);
        ts.dedup_by(|x, y| (*x - *y).abs() < 1e-14);
        for w in ts.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let seg = (t1 - t0) * len;
            for s in [0.5 - g, 0.5 + g] {
                let t = t0 + s * (t1 - t0);
                let p = [a[0] + t * d[0], a[1] + t * d[1]];
                // only grid points within one cell of p can see it
                let (ci, cj) = ((p[0] * n).floor() as i64, (p[1] * n).floor() as i64);
                for j in (cj - 1)..=(cj + 2) {
                    for i in (ci - 1)..=(ci + 2) {
                        if i < 1 || j < 1 || i >= mesh.n as i64 || j >= mesh.n as i64 {
                            continue;
                        }
                        let k = mesh.grid_dof(i as usize, j as usize);
                        let phi = hat(mesh, mesh.dof_coords(k), p);
                        out[k] += 0.5 * seg * phi;
                    }
                }
            }
        }
    }
    out
}

/// Linear solver used for the L2 projection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProjectionSolver {
    #[default]
    Direct,
    ConjugateGradient,
}

#[derive(Debug, Clone)]
pub struct ProjectedData {
    /// Nodal coefficients of P_h v.
    pub coefficients: Vec<f64>,
    /// ⟨v, φ_i⟩.
    pub rhs: Vec<f64>,
    /// ‖v‖, `None` if v is not a function.
    pub l2_norm_of_v: Option<f64>,
    pub relative_residual: f64,
}

/// L2 projection: solves M c = ⟨v, φ⟩ with the consistent mass matrix.
pub fn l2_project(v: &InitialDatum, mesh: &Mesh) -> Result<ProjectedData> {
    l2_project_with(v, mesh, ProjectionSolver::Direct)
}

pub fn l2_project_with(v: &InitialDatum, mesh: &Mesh, solver: ProjectionSolver) -> Result<ProjectedData> {
    let rhs = pair_with_basis(v, mesh)?;
    let Mass::Consistent(m) = assemble_mass(mesh, false) else {
        unreachable!("consistent mass requested")
    };
    let coefficients = match solver {
        ProjectionSolver::Direct => BandLdl::factor(&m)?.solve(&rhs),
        ProjectionSolver::ConjugateGradient => cg(&m, &rhs, 1e-14, 10 * m.n + 100)?.x,
    };
    let res = relative_residual(&m, &coefficients, &rhs);
    if res > 1e-12 {
        return Err(Error::Solver {
            reason: "L2 projection did not reach the residual target".into(),
            residual: res,
        });
    }
    Ok(ProjectedData {
        coefficients,
        rhs,
        l2_norm_of_v: v.l2_norm(),
        relative_residual: res,
    })
}

/// Nodal interpolant of a function datum.
pub fn interpolate(v: &InitialDatum, mesh: &Mesh) -> Result<Vec<f64>> {
    let f = v
        .pointwise()
        .ok_or_else(|| Error::Unsupported("measures cannot be interpolated".into()))?;
    Ok((0..mesh.num_dofs())
        .map(|k| {
            let p = mesh.dof_coords(k);
            f(p[0], p[1])
        })
        .collect())
}

// ∫_{1/4}^{3/4} sin(lπs) ds
fn ind_1d(l: f64) -> f64 {
    ((l * PI / 4.0).cos() - (3.0 * l * PI / 4.0).cos()) / (l * PI)
}

// ∫_0^1 s(1−s) sin(lπs) ds
fn smooth_1d(l: f64) -> f64 {
    2.0 * (1.0 - (l * PI).cos()) / (l * PI).powi(3)
}

// ∫_{1/2}^1 (s−½)(s−1) sin(lπs) ds
fn intermediate_1d(l: f64) -> f64 {
    let lp = l * PI;
    (lp * ((lp / 2.0).sin() + lp.sin()) - 4.0 * (lp / 2.0).cos() + 4.0 * lp.cos())
        / (2.0 * PI.powi(3) * l.powi(3))
}

/// (v, φ_nm) for the closed-form data (`m` ignored in 1D).
pub fn sine_coefficients(v: &InitialDatum, n: usize, m: usize) -> Result<f64> {
    let (nf, mf) = (n as f64, m as f64);
    let s = |l: f64, x: f64| (l * PI * x).sin();
    match v {
        InitialDatum::SmoothA => Ok(2.0 * smooth_1d(nf) * smooth_1d(mf)),
        InitialDatum::IntermediateB => Ok(2.0 * intermediate_1d(nf) * intermediate_1d(mf)),
        InitialDatum::NonsmoothC => Ok(2.0 * ind_1d(nf) * ind_1d(mf)),
        InitialDatum::DeltaCurve => Ok(2.0
            * ((s(mf, GAMMA_LO) + s(mf, GAMMA_HI)) * ind_1d(nf)
                + (s(nf, GAMMA_LO) + s(nf, GAMMA_HI)) * ind_1d(mf))),
        InitialDatum::DeltaPoint { at, dim: 1 } => Ok(SQRT_2 * s(nf, at[0])),
        InitialDatum::DeltaPoint { at, .. } => Ok(2.0 * s(nf, at[0]) * s(mf, at[1])),
        InitialDatum::Custom { .. } => Err(Error::Unsupported(
            "no closed-form sine coefficients for expressions; use sine_coefficient_table".into(),
        )),
    }
}

/// (v, φ_nm) as a sum of rank-one terms Σ_k x_k[n−1]·y_k[m−1] for
/// n, m ≤ r (in 1D the y factors are empty and (v, φ_n) = Σ_k x_k[n−1]).
/// `None` for expressions.
pub fn separable_coefficients(v: &InitialDatum, r: usize) -> Option<Vec<(Vec<f64>, Vec<f64>)>> {
    let axis = |f: &dyn Fn(f64) -> f64| -> Vec<f64> { (1..=r).map(|l| SQRT_2 * f(l as f64)).collect() };
    let square = |a: Vec<f64>| vec![(a.clone(), a)];
    match v {
        InitialDatum::SmoothA => Some(square(axis(&smooth_1d))),
        InitialDatum::IntermediateB => Some(square(axis(&intermediate_1d))),
        InitialDatum::NonsmoothC => Some(square(axis(&ind_1d))),
        InitialDatum::DeltaCurve => {
            let i = axis(&ind_1d);
            let s = axis(&|l| (l * PI * GAMMA_LO).sin() + (l * PI * GAMMA_HI).sin());
            Some(vec![(i.clone(), s.clone()), (s, i)])
        }
        InitialDatum::DeltaPoint { at, dim: 1 } => {
            Some(vec![(axis(&|l| (l * PI * at[0]).sin()), Vec::new())])
        }
        InitialDatum::DeltaPoint { at, .. } => Some(vec![(
            axis(&|l| (l * PI * at[0]).sin()),
            axis(&|l| (l * PI * at[1]).sin()),
        )]),
        InitialDatum::Custom { .. } => None,
    }
}

/// Coefficients for modes 1..=r (row-major n, m in 2D), from closed forms
/// where available and otherwise by tensor Gauss-Legendre quadrature.
pub fn sine_coefficient_table(v: &InitialDatum, r: usize) -> Result<Vec<f64>> {
    let dim = v.dim();
    if let Some(terms) = separable_coefficients(v, r) {
        if dim == 1 {
            return Ok((0..r).map(|n| terms.iter().map(|(x, _)| x[n]).sum()).collect());
        }
        let mut out = vec![0.0; r * r];
        par::for_each_chunk_mut(&mut out, r, |n, row| {
            for (x, y) in &terms {
                for (o, ym) in row.iter_mut().zip(y) {
                    *o += x[n] * ym;
                }
            }
        });
        return Ok(out);
    }
    let f = v.pointwise().ok_or_else(|| Error::Expression("cannot bind expression".into()))?;
    // composite Gauss-Legendre: enough panels to resolve the highest mode
    let panels = (r / 2).max(4);
    let (gx, gw) = gauss_legendre(8);
    let mut nodes = Vec::new();
    for p in 0..panels {
        let (a, b) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
        for (x, w) in gx.iter().zip(&gw) {
            nodes.push((0.5 * (a + b) + 0.5 * (b - a) * x, 0.5 * (b - a) * w));
        }
    }
    let basis: Vec<Vec<f64>> = (1..=r)
        .map(|n| nodes.iter().map(|&(x, w)| w * SQRT_2 * (n as f64 * PI * x).sin()).collect())
        .collect();
    if dim == 1 {
        let fx: Vec<f64> = nodes.iter().map(|&(x, _)| f(x, 0.0)).collect();
        return Ok(basis
            .iter()
            .map(|b| b.iter().zip(&fx).map(|(b, f)| b * f).sum())
            .collect());
    }
    let q = nodes.len();
    let fv: Vec<f64> = (0..q * q).map(|k| f(nodes[k % q].0, nodes[k / q].0)).collect();
    // t[n][j] = Σ_i B_n(x_i) f(x_i, y_j)
    let t: Vec<Vec<f64>> = basis
        .iter()
        .map(|b| (0..q).map(|j| (0..q).map(|i| b[i] * fv[i + q * j]).sum()).collect())
        .collect();
    let mut out = Vec::with_capacity(r * r);
    for tn in &t {
        for bm in &basis {
            out.push(tn.iter().zip(bm).map(|(a, b)| a * b).sum());
        }
    }
    Ok(out)
}
