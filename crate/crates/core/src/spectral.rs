//! Reference solutions: the sine-series solution of the continuous problem,
//! and exact (in time) semidiscrete finite element solutions.
//!
//! Mode tables are stored row-major in (n, m), n, m ≥ 1, so entry
//! `(n − 1)·r + (m − 1)` belongs to mode (n, m); in 1D they are plain vectors.
//! Nodal grid vectors follow the mesh equation order, i.e. column-major in
//! (i, j).

use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::data::{l2_project, sine_coefficient_table, InitialDatum};
use crate::error::{Error, Result};
use crate::fem::{Mass, OperatorPair};
use crate::mesh::Mesh;
use crate::par;
use crate::sparse::{BandLdl, Csr};
use crate::special::MittagLeffler;

/// Largest per-axis truncation tried by [`exact_solution`].
pub const MAX_MODES_2D: usize = 2048;
pub const MAX_MODES_1D: usize = 1 << 20;
/// Largest system [`GalerkinEigen1d`] will decompose densely.
pub const MAX_DENSE_DOFS: usize = 4096;

/// λ_n = (nπ)² in 1D, λ_nm = (n² + m²)π² in 2D.
pub fn continuous_eigenvalue(dim: usize, n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    if dim == 1 {
        (n * PI).powi(2)
    } else {
        (n * n + m * m) * PI * PI
    }
}

/// E_{α,1}(−λ t^α) for every mode in the (1D or 2D) box of size `r`.
pub fn ml_table(alpha: f64, t: f64, dim: usize, r: usize) -> Result<Vec<f64>> {
    let ml = MittagLeffler::new(alpha, 1.0)?;
    let ta = t.powf(alpha);
    if dim == 1 {
        let vals = par::map_range(r, |k| ml.eval(-continuous_eigenvalue(1, k + 1, 0) * ta));
        return vals.into_iter().collect();
    }
    // λ is symmetric in (n, m): evaluate the upper triangle only
    let rows = par::map_range(r, |n| {
        (n..r)
            .map(|m| ml.eval(-continuous_eigenvalue(2, n + 1, m + 1) * ta))
            .collect::<Result<Vec<_>>>()
    });
    let mut out = vec![0.0; r * r];
    for (n, row) in rows.into_iter().enumerate() {
        for (k, e) in row?.into_iter().enumerate() {
            let m = n + k;
            out[n * r + m] = e;
            out[m * r + n] = e;
        }
    }
    Ok(out)
}

/// Truncated sine series of u(t) = E(t)v.
#[derive(Debug, Clone)]
pub struct SpectralSolution {
    pub dim: usize,
    pub alpha: f64,
    pub t: f64,
    /// Modes per axis.
    pub modes: usize,
    /// (v, φ_nm)·E_{α,1}(−λ_nm t^α).
    pub coefficients: Vec<f64>,
    /// L2 norm of the modes added by the last doubling of the truncation.
    pub tail_estimate: f64,
    /// False when the mode budget ran out before the tail met the tolerance.
    pub converged: bool,
}

impl SpectralSolution {
    pub fn lambda(&self, n: usize, m: usize) -> f64 {
        continuous_eigenvalue(self.dim, n, m)
    }

    pub fn coefficient(&self, n: usize, m: usize) -> f64 {
        if self.dim == 1 {
            self.coefficients[n - 1]
        } else {
            self.coefficients[(n - 1) * self.modes + m - 1]
        }
    }

    /// ‖u‖² and |u|₁² of the truncated series.
    pub fn norms_squared(&self) -> (f64, f64) {
        let r = self.modes;
        let mut s0 = 0.0;
        let mut s1 = 0.0;
        for (k, c) in self.coefficients.iter().enumerate() {
            let (n, m) = if self.dim == 1 { (k + 1, 0) } else { (k / r + 1, k % r + 1) };
            s0 += c * c;
            s1 += self.lambda(n, m) * c * c;
        }
        (s0, s1)
    }
}

/// Series solution with a fixed truncation.
pub fn exact_solution_with_modes(v: &InitialDatum, alpha: f64, t: f64, modes: usize) -> Result<SpectralSolution> {
    if !(t > 0.0) {
        return Err(Error::Domain(format!("t must be positive, got {t}")));
    }
    let dim = v.dim();
    let mut coefficients = sine_coefficient_table(v, modes)?;
    let e = ml_table(alpha, t, dim, modes)?;
    for (c, e) in coefficients.iter_mut().zip(&e) {
        *c *= e;
    }
    Ok(SpectralSolution {
        dim,
        alpha,
        t,
        modes,
        coefficients,
        tail_estimate: f64::NAN,
        converged: true,
    })
}

/// Series solution whose truncation doubles until the L2 norm of the newly
/// added modes drops below `tol` (or the mode budget is exhausted, in which
/// case `converged` is false).
pub fn exact_solution(v: &InitialDatum, alpha: f64, t: f64, tol: f64) -> Result<SpectralSolution> {
    let dim = v.dim();
    let budget = if dim == 1 { MAX_MODES_1D } else { MAX_MODES_2D };
    let mut r = 16;
    let mut prev = exact_solution_with_modes(v, alpha, t, r)?;
    loop {
        let next = exact_solution_with_modes(v, alpha, t, 2 * r)?;
        let (a, b) = (prev.norms_squared().0, next.norms_squared().0);
        let tail = (b - a).max(0.0).sqrt();
        if tail < tol || 4 * r > budget {
            return Ok(SpectralSolution {
                tail_estimate: tail,
                converged: tail < tol,
                ..next
            });
        }
        prev = next;
        r *= 2;
    }
}

/// Values (and optionally gradients) at a batch of points.
#[derive(Debug, Clone, Default)]
pub struct PointValues {
    pub values: Vec<f64>,
    pub gradients: Option<Vec<[f64; 2]>>,
}

// distinct coordinates, with the index of each input in the distinct list
fn distinct(coords: impl Iterator<Item = f64>) -> (Vec<f64>, Vec<usize>) {
    let coords: Vec<f64> = coords.collect();
    let mut keys: Vec<u64> = coords.iter().map(|x| x.to_bits()).collect();
    keys.sort_unstable();
    keys.dedup();
    let index = coords
        .iter()
        .map(|x| keys.binary_search(&x.to_bits()).expect("present"))
        .collect();
    (keys.into_iter().map(f64::from_bits).collect(), index)
}

/// Evaluates the series at `points` with a tensor-product factorization:
/// per distinct x the inner sums over n are formed once, then contracted with
/// per-distinct-y tables.
pub fn evaluate_on_points(s: &SpectralSolution, points: &[[f64; 2]], with_gradient: bool) -> PointValues {
    let r = s.modes;
    let freqs: Vec<f64> = (1..=r).map(|k| k as f64 * PI).collect();
    if s.dim == 1 {
        let out = par::map_slice(points, |p| {
            let mut v = 0.0;
            let mut g = 0.0;
            for (c, w) in s.coefficients.iter().zip(&freqs) {
                v += c * (w * p[0]).sin();
                if with_gradient {
                    g += c * w * (w * p[0]).cos();
                }
            }
            (SQRT_2 * v, SQRT_2 * g)
        });
        return PointValues {
            values: out.iter().map(|o| o.0).collect(),
            gradients: with_gradient.then(|| out.iter().map(|o| [o.1, 0.0]).collect()),
        };
    }
    let (xs, xi) = distinct(points.iter().map(|p| p[0]));
    let (ys, yi) = distinct(points.iter().map(|p| p[1]));
    // tx[x][m] = Σ_n c_nm sin(nπx), gx[x][m] = Σ_n c_nm nπ cos(nπx)
    let inner = par::map_slice(&xs, |&x| {
        let mut tx = vec![0.0; r];
        let mut gx = vec![0.0; if with_gradient { r } else { 0 }];
        for (n, w) in freqs.iter().enumerate() {
            let (sn, cn) = (w * x).sin_cos();
            let row = &s.coefficients[n * r..(n + 1) * r];
            for (t, c) in tx.iter_mut().zip(row) {
                *t += c * sn;
            }
            if with_gradient {
                for (g, c) in gx.iter_mut().zip(row) {
                    *g += c * w * cn;
                }
            }
        }
        (tx, gx)
    });
    let ytab = par::map_slice(&ys, |&y| freqs.iter().map(|w| (w * y).sin_cos()).collect::<Vec<_>>());
    let out = par::map_range(points.len(), |p| {
        let (tx, gx) = &inner[xi[p]];
        let yt = &ytab[yi[p]];
        let mut v = 0.0;
        let (mut dx, mut dy) = (0.0, 0.0);
        for m in 0..r {
            let (sm, cm) = yt[m];
            v += tx[m] * sm;
            if with_gradient {
                dx += gx[m] * sm;
                dy += tx[m] * freqs[m] * cm;
            }
        }
        (2.0 * v, [2.0 * dx, 2.0 * dy])
    });
    PointValues {
        values: out.iter().map(|o| o.0).collect(),
        gradients: with_gradient.then(|| out.iter().map(|o| o.1).collect()),
    }
}

/// Eigenpairs of the lumped-mass operator on the uniform mesh: grid samples
/// of √2 sin(nπx) (1D) or 2 sin(nπx) sin(mπy) (2D), orthonormal in the lumped
/// inner product, with λʰ_n = (4/h²) sin²(nπh/2) per axis.
#[derive(Debug, Clone)]
pub struct DiscreteEigenBasis {
    pub dim: usize,
    pub n: usize,
    pub h: f64,
    /// sin(kπ x_i), i, k = 1..N−1.
    sines: DMatrix<f64>,
    axis_eigenvalues: Vec<f64>,
}

impl DiscreteEigenBasis {
    pub fn new(mesh: &Mesh) -> Self {
        let n = mesh.n;
        let h = mesh.h;
        let sines = DMatrix::from_fn(n - 1, n - 1, |i, k| ((k + 1) as f64 * PI * (i + 1) as f64 * h).sin());
        let axis_eigenvalues = (1..n)
            .map(|k| 4.0 / (h * h) * (k as f64 * PI * h / 2.0).sin().powi(2))
            .collect();
        DiscreteEigenBasis {
            dim: mesh.dim,
            n,
            h,
            sines,
            axis_eigenvalues,
        }
    }

    /// Number of modes per axis (N − 1).
    pub fn modes(&self) -> usize {
        self.n - 1
    }

    pub fn eigenvalue(&self, n: usize, m: usize) -> f64 {
        if self.dim == 1 {
            self.axis_eigenvalues[n - 1]
        } else {
            self.axis_eigenvalues[n - 1] + self.axis_eigenvalues[m - 1]
        }
    }

    /// All eigenvalues in mode-table order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let r = self.modes();
        if self.dim == 1 {
            return self.axis_eigenvalues.clone();
        }
        (0..r * r).map(|k| self.eigenvalue(k / r + 1, k % r + 1)).collect()
    }

    /// Nodal vector of the eigenfunction (n, m).
    pub fn eigenvector(&self, n: usize, m: usize) -> Vec<f64> {
        let r = self.modes();
        if self.dim == 1 {
            return (0..r).map(|i| SQRT_2 * self.sines[(i, n - 1)]).collect();
        }
        let mut out = Vec::with_capacity(r * r);
        for j in 0..r {
            for i in 0..r {
                out.push(2.0 * self.sines[(i, n - 1)] * self.sines[(j, m - 1)]);
            }
        }
        out
    }

    /// Lumped inner products (u, φʰ_nm)_h, in mode-table order.
    pub fn analysis(&self, u: &[f64]) -> Vec<f64> {
        let r = self.modes();
        if self.dim == 1 {
            let c = self.sines.transpose() * DVector::from_column_slice(u);
            return c.iter().map(|c| SQRT_2 * self.h * c).collect();
        }
        let g = DMatrix::from_column_slice(r, r, u);
        let c = self.sines.transpose() * g * &self.sines * (2.0 * self.h * self.h);
        // c is indexed (n, m); store row-major
        c.transpose().as_slice().to_vec()
    }

    /// Σ c_nm φʰ_nm as a nodal vector.
    pub fn synthesis(&self, c: &[f64]) -> Vec<f64> {
        let r = self.modes();
        if self.dim == 1 {
            let u = &self.sines * DVector::from_column_slice(c);
            return u.iter().map(|u| SQRT_2 * u).collect();
        }
        let cm = DMatrix::from_row_slice(r, r, c);
        let g = &self.sines * cm * self.sines.transpose() * 2.0;
        g.as_slice().to_vec()
    }
}

/// Exact semidiscrete lumped-mass solution by discrete eigen-expansion of
/// the L2-projected initial data.
#[derive(Debug, Clone)]
pub struct LumpedSemidiscrete {
    pub basis: DiscreteEigenBasis,
    /// (P_h v, φʰ_nm)_h.
    pub initial_modes: Vec<f64>,
    /// Nodal coefficients of P_h v.
    pub initial: Vec<f64>,
    /// ⟨v, φ_i⟩.
    pub rhs: Vec<f64>,
}

impl LumpedSemidiscrete {
    pub fn new(v: &InitialDatum, mesh: &Mesh) -> Result<Self> {
        let p = l2_project(v, mesh)?;
        Ok(Self::from_initial(mesh, p.coefficients, p.rhs))
    }

    /// Starts from a given nodal initial vector (`rhs` is M·initial for the
    /// consistent mass when the vector is an L2 projection).
    pub fn from_initial(mesh: &Mesh, initial: Vec<f64>, rhs: Vec<f64>) -> Self {
        let basis = DiscreteEigenBasis::new(mesh);
        let initial_modes = basis.analysis(&initial);
        LumpedSemidiscrete {
            basis,
            initial_modes,
            initial,
            rhs,
        }
    }

    /// Modal coefficients at time t.
    pub fn modes_at(&self, alpha: f64, t: f64) -> Result<Vec<f64>> {
        let ml = MittagLeffler::new(alpha, 1.0)?;
        let ta = t.powf(alpha);
        let lam = self.basis.eigenvalues();
        lam.iter()
            .zip(&self.initial_modes)
            .map(|(l, c)| Ok(c * ml.eval(-l * ta)?))
            .collect()
    }

    pub fn at(&self, alpha: f64, t: f64) -> Result<Vec<f64>> {
        Ok(self.basis.synthesis(&self.modes_at(alpha, t)?))
    }
}

/// ū_h(t) for the lumped-mass scheme.
pub fn semidiscrete_lumped(v: &InitialDatum, mesh: &Mesh, alpha: f64, t: f64) -> Result<Vec<f64>> {
    LumpedSemidiscrete::new(v, mesh)?.at(alpha, t)
}

/// Consistent-mass 1D semidiscrete solution via the dense generalized
/// eigenproblem A w = λ M w.
#[derive(Debug, Clone)]
pub struct GalerkinEigen1d {
    pub eigenvalues: Vec<f64>,
    /// M-orthonormal eigenvectors as columns.
    pub eigenvectors: DMatrix<f64>,
    /// Wᵀ M P_h v.
    pub initial_modes: Vec<f64>,
    pub initial: Vec<f64>,
    pub rhs: Vec<f64>,
}

impl GalerkinEigen1d {
    pub fn new(v: &InitialDatum, mesh: &Mesh) -> Result<Self> {
        if mesh.dim != 1 {
            return Err(Error::Unsupported("dense eigen path is 1D only".into()));
        }
        if mesh.num_dofs() > MAX_DENSE_DOFS {
            return Err(Error::Unsupported(format!(
                "{} unknowns exceed the dense eigen limit {MAX_DENSE_DOFS}",
                mesh.num_dofs()
            )));
        }
        let ops = OperatorPair::new(mesh, false);
        let p = l2_project(v, mesh)?;
        let n = mesh.num_dofs();
        let dense = |a: &Csr| DMatrix::from_fn(n, n, |i, j| a.get(i, j));
        let a = dense(&ops.stiffness);
        let m = dense(&ops.mass.to_csr());
        let chol = m.cholesky().ok_or_else(|| Error::Solver {
            reason: "mass matrix is not positive definite".into(),
            residual: f64::NAN,
        })?;
        let l = chol.l();
        // C = L⁻¹ A L⁻ᵀ
        let linv_a = l.solve_lower_triangular(&a).ok_or_else(singular)?;
        let c = l.solve_lower_triangular(&linv_a.transpose()).ok_or_else(singular)?;
        let c = (&c + c.transpose()) * 0.5;
        let eig = c.symmetric_eigen();
        let w = l.transpose().solve_upper_triangular(&eig.eigenvectors).ok_or_else(singular)?;
        // M P = rhs, so Wᵀ M P = Wᵀ rhs
        let initial_modes = (w.transpose() * DVector::from_column_slice(&p.rhs)).as_slice().to_vec();
        Ok(GalerkinEigen1d {
            eigenvalues: eig.eigenvalues.as_slice().to_vec(),
            eigenvectors: w,
            initial_modes,
            initial: p.coefficients,
            rhs: p.rhs,
        })
    }

    pub fn at(&self, alpha: f64, t: f64) -> Result<Vec<f64>> {
        let ml = MittagLeffler::new(alpha, 1.0)?;
        let ta = t.powf(alpha);
        let d = self
            .eigenvalues
            .iter()
            .zip(&self.initial_modes)
            .map(|(l, c)| Ok(c * ml.eval(-l * ta)?))
            .collect::<Result<Vec<_>>>()?;
        Ok((&self.eigenvectors * DVector::from_vec(d)).as_slice().to_vec())
    }
}

fn singular() -> Error {
    Error::Solver {
        reason: "singular triangular factor".into(),
        residual: f64::NAN,
    }
}

/// u_h(t) for the consistent-mass scheme in 1D.
pub fn semidiscrete_galerkin_1d(v: &InitialDatum, mesh: &Mesh, alpha: f64, t: f64) -> Result<Vec<f64>> {
    GalerkinEigen1d::new(v, mesh)?.at(alpha, t)
}

/// Semidiscrete solution by numerical Laplace inversion along a hyperbolic
/// contour: u(t) = (1/2πi)∫ e^{zt} z^{α−1}(z^α M + A)⁻¹ M u₀ dz, with the
/// trapezoidal rule in the contour parameter. Works for either mass matrix;
/// used for the consistent mass in 2D, where no sine diagonalization exists.
#[derive(Debug, Clone)]
pub struct ContourSolver {
    pub ops: OperatorPair,
    /// Quadrature nodes on the upper half of the contour.
    pub nodes: usize,
}

// hyperbola z(u) = μ(1 + sin(iu − a)), step c/K, μ = d·K/t
const CONTOUR_A: f64 = 1.1721;
const CONTOUR_STEP: f64 = 1.0818;
const CONTOUR_MU: f64 = 4.4920;
/// Default node count: more nodes shrink the quadrature error but amplify
/// rounding through e^{Re z·t}; 20 keeps both near 1e−12 relative.
pub const CONTOUR_NODES: usize = 20;

impl ContourSolver {
    pub fn new(ops: OperatorPair) -> Self {
        ContourSolver {
            ops,
            nodes: CONTOUR_NODES,
        }
    }

    /// Nodes z_k, derivatives z'_k and trapezoid weights for time t.
    pub fn contour(nodes: usize, t: f64) -> Vec<(Complex64, Complex64, f64)> {
        let k = nodes as f64;
        let step = CONTOUR_STEP / k;
        let mu = CONTOUR_MU * k / t;
        (0..=nodes)
            .map(|j| {
                let w = Complex64::new(-CONTOUR_A, j as f64 * step);
                let z = mu * (1.0 + w.sin());
                let dz = mu * Complex64::i() * w.cos();
                let weight = if j == 0 { 0.5 } else { 1.0 } * step / PI;
                (z, dz, weight)
            })
            .collect()
    }

    /// Applies the solution operator to the nodal initial vector `u0`.
    pub fn solve(&self, u0: &[f64], alpha: f64, t: f64) -> Result<Vec<f64>> {
        if !(t > 0.0) || !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::Domain(format!("need t > 0 and α ∈ (0, 1], got t = {t}, α = {alpha}")));
        }
        let mu0: Vec<Complex64> = self.ops.mass.matvec(u0).into_iter().map(Complex64::from).collect();
        let a = &self.ops.stiffness;
        let n = a.n;
        let b = match &self.ops.mass {
            Mass::Consistent(m) => a.bandwidth().max(m.bandwidth()),
            Mass::Lumped(_) => a.bandwidth(),
        };
        let pts = Self::contour(self.nodes, t);
        let terms = par::map_slice(&pts, |&(z, dz, weight)| -> Result<Vec<f64>> {
            let za = z.powf(alpha);
            // e^{−iψ/2}(z^α M + A) keeps both parts in a half plane
            let s = Complex64::from_polar(1.0, -0.5 * za.arg());
            let mass_entry = |i: usize, j: usize| match &self.ops.mass {
                Mass::Consistent(m) => m.get(i, j),
                Mass::Lumped(d) => {
                    if i == j {
                        d[i]
                    } else {
                        0.0
                    }
                }
            };
            let f = BandLdl::factor_with(n, b, |i, j| s * (za * mass_entry(i, j) + a.get(i, j)))?;
            let mut x: Vec<Complex64> = mu0.iter().map(|v| s * v).collect();
            f.solve_in_place(&mut x);
            let scale = (z * t).exp() * z.powf(alpha - 1.0) * dz * weight;
            Ok(x.iter().map(|x| (scale * x).im).collect())
        });
        let mut u = vec![0.0; n];
        for term in terms {
            for (u, v) in u.iter_mut().zip(term?) {
                *u += v;
            }
        }
        Ok(u)
    }
}

/// Consistent-mass semidiscrete solution in 1D (dense eigen) or 2D (contour).
pub fn semidiscrete_galerkin(v: &InitialDatum, mesh: &Mesh, alpha: f64, t: f64) -> Result<Vec<f64>> {
    if mesh.dim == 1 {
        return semidiscrete_galerkin_1d(v, mesh, alpha, t);
    }
    let p = l2_project(v, mesh)?;
    ContourSolver::new(OperatorPair::new(mesh, false)).solve(&p.coefficients, alpha, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, SpacingRule};
    use crate::special::{ml, MlQuery};

    #[test]
    fn rank_one_datum_stays_rank_one() {
        let v = InitialDatum::parse("custom:2*sin(pi*x)*sin(pi*y)", 2).unwrap();
        let s = exact_solution(&v, 0.5, 0.1, 1e-10).unwrap();
        let want = ml(&MlQuery::new(0.5, 1.0, -2.0 * PI * PI * 0.1f64.sqrt())).unwrap();
        assert!((s.coefficient(1, 1) - want).abs() < 1e-12);
        let rest: f64 = s.coefficients[1..].iter().map(|c| c.abs()).sum();
        assert!(rest < 1e-10);
        let p = evaluate_on_points(&s, &[[0.5, 0.5]], true);
        assert!((p.values[0] - 2.0 * want).abs() < 1e-10);
        let g = p.gradients.unwrap()[0];
        assert!(g[0].abs() < 1e-10 && g[1].abs() < 1e-10);
    }

    #[test]
    fn heat_limit() {
        let s = exact_solution_with_modes(&InitialDatum::SmoothA, 1.0, 0.03, 8).unwrap();
        let c = crate::data::sine_coefficients(&InitialDatum::SmoothA, 3, 5).unwrap();
        let want = c * (-continuous_eigenvalue(2, 3, 5) * 0.03).exp();
        assert!((s.coefficient(3, 5) - want).abs() < 1e-15);
    }

    #[test]
    fn factorized_evaluation_matches_direct_sum() {
        let s = exact_solution_with_modes(&InitialDatum::NonsmoothC, 0.5, 0.1, 40).unwrap();
        let pts = [[0.1, 0.2], [0.3, 0.2], [0.1, 0.77], [0.5, 0.5]];
        let p = evaluate_on_points(&s, &pts, true);
        for (k, q) in pts.iter().enumerate() {
            let (mut v, mut dx, mut dy) = (0.0, 0.0, 0.0);
            for n in 1..=40 {
                for m in 1..=40 {
                    let (a, b) = (n as f64 * PI, m as f64 * PI);
                    let c = 2.0 * s.coefficient(n, m);
                    v += c * (a * q[0]).sin() * (b * q[1]).sin();
                    dx += c * a * (a * q[0]).cos() * (b * q[1]).sin();
                    dy += c * b * (a * q[0]).sin() * (b * q[1]).cos();
                }
            }
            let g = p.gradients.as_ref().unwrap()[k];
            assert!((p.values[k] - v).abs() < 1e-12);
            assert!((g[0] - dx).abs() < 1e-10 && (g[1] - dy).abs() < 1e-10);
        }
    }

    #[test]
    fn discrete_basis_is_orthonormal_and_inverts() {
        for dim in [1, 2] {
            let mesh = build_mesh(dim, 8, SpacingRule::Standard).unwrap();
            let b = DiscreteEigenBasis::new(&mesh);
            let u: Vec<f64> = (0..mesh.num_dofs()).map(|k| ((k * 7919) % 13) as f64 - 6.0).collect();
            let back = b.synthesis(&b.analysis(&u));
            for (a, c) in u.iter().zip(&back) {
                assert!((a - c).abs() < 1e-12);
            }
            let e = b.eigenvector(2, 3);
            let c = b.analysis(&e);
            let k = if dim == 1 { 1 } else { 8 - 1 + 2 };
            for (i, c) in c.iter().enumerate() {
                assert!((c - if i == k { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lumped_expansion_solves_lumped_system() {
        // ū_h(t) from the contour integral with the lumped mass must agree
        let mesh = build_mesh(2, 8, SpacingRule::Standard).unwrap();
        let ls = LumpedSemidiscrete::new(&InitialDatum::NonsmoothC, &mesh).unwrap();
        let cs = ContourSolver::new(OperatorPair::new(&mesh, true));
        for (alpha, t) in [(0.5, 0.1), (0.9, 0.01), (0.1, 1.0), (1.0, 0.05)] {
            let a = ls.at(alpha, t).unwrap();
            let b = cs.solve(&ls.initial, alpha, t).unwrap();
            let err = a.iter().zip(&b).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let scale = a.iter().map(|a| a.abs()).fold(0.0, f64::max);
            assert!(err < 1e-10 * scale.max(1e-3), "α={alpha} t={t}: {err}");
        }
    }

    #[test]
    fn contour_reproduces_scalar_mittag_leffler() {
        for (alpha, lam, t) in [(0.5, 20.0, 0.1), (0.3, 1.0, 1.0), (0.95, 500.0, 1e-3), (1.0, 3.0, 0.5)] {
            let pts = ContourSolver::contour(CONTOUR_NODES, t);
            let mut u = 0.0;
            for (z, dz, w) in pts {
                let f = z.powf(alpha - 1.0) / (z.powf(alpha) + lam);
                u += w * ((z * t).exp() * f * dz).im;
            }
            let want = ml(&MlQuery::new(alpha, 1.0, -lam * t.powf(alpha))).unwrap();
            assert!((u - want).abs() < 1e-12, "α={alpha}: {u} vs {want}");
        }
    }

    #[test]
    fn galerkin_1d_single_dof() {
        let mesh = build_mesh(1, 2, SpacingRule::Standard).unwrap();
        let v = InitialDatum::parse("d", 1).unwrap();
        let g = GalerkinEigen1d::new(&v, &mesh).unwrap();
        let u = g.at(0.5, 0.3).unwrap();
        // A = 4, M = 1/3; P_h δ = 3
        let want = 3.0 * ml(&MlQuery::new(0.5, 1.0, -12.0 * 0.3f64.sqrt())).unwrap();
        assert!((u[0] - want).abs() < 1e-12);
    }

    #[test]
    fn galerkin_contour_agrees_with_eigen_in_1d() {
        let mesh = build_mesh(1, 16, SpacingRule::Standard).unwrap();
        let v = InitialDatum::parse("d", 1).unwrap();
        let g = GalerkinEigen1d::new(&v, &mesh).unwrap();
        let cs = ContourSolver::new(OperatorPair::new(&mesh, false));
        let a = g.at(0.5, 0.01).unwrap();
        let b = cs.solve(&g.initial, 0.5, 0.01).unwrap();
        for (a, b) in a.iter().zip(&b) {
            assert!((a - b).abs() < 1e-10);
        }
    }
}
