//! L1 time stepping for the Caputo derivative:
//!
//! ```text
//! κM[b₀Uⁿ − Σ_{j=1}^{n−1}(b_{j−1} − b_j)U^{n−j} − b_{n−1}U⁰] + AUⁿ = Fⁿ,
//! κ = 1/(Γ(2−α)τ^α),  b_j = (j+1)^{1−α} − j^{1−α}.
//! ```
//!
//! The full history is kept and convolved every step (O(n²) work overall).

use std::fmt::Write as _;

use crate::data::{l2_project, InitialDatum};
use crate::error::{Error, Result};
use crate::fem::{Mass, OperatorPair};
use crate::mesh::Mesh;
use crate::par;
use crate::sparse::BandLdl;
use crate::special::rgamma;
use crate::spectral::LumpedSemidiscrete;

/// Memory cap for the stored history.
pub const MAX_HISTORY_BYTES: usize = 2 << 30;

/// Uniform grid t_n = nτ, n = 0..=n_steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub tau: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(tau: f64, n_steps: usize) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::Domain(format!("time step must be positive, got {tau}")));
        }
        Ok(TimeGrid { tau, n_steps })
    }

    /// Smallest grid reaching `t_end`; `t_end` must be a grid time.
    pub fn covering(tau: f64, t_end: f64) -> Result<Self> {
        let g = TimeGrid::new(tau, 0)?;
        let n = g.step_of(t_end)?;
        Ok(TimeGrid { tau, n_steps: n })
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.tau
    }

    /// Step index of grid time t; other times are rejected.
    pub fn step_of(&self, t: f64) -> Result<usize> {
        let k = t / self.tau;
        let n = k.round();
        if n < 0.0 || (k - n).abs() > 1e-8 * n.max(1.0) {
            return Err(Error::OffGrid { t, tau: self.tau });
        }
        Ok(n as usize)
    }
}

/// b_j = (j+1)^{1−α} − j^{1−α}.
#[derive(Debug, Clone)]
pub struct L1Weights {
    pub alpha: f64,
    pub b: Vec<f64>,
}

impl L1Weights {
    pub fn new(alpha: f64, n: usize) -> Self {
        let p = 1.0 - alpha;
        let b = (0..n)
            .map(|j| {
                if j == 0 {
                    1.0
                } else {
                    // j^p((1 + 1/j)^p − 1) without cancellation
                    let jf = j as f64;
                    jf.powf(p) * (p * (1.0 / jf).ln_1p()).exp_m1()
                }
            })
            .collect();
        L1Weights { alpha, b }
    }

    /// Σ_{j<n} b_j with compensated summation (equals n^{1−α}).
    pub fn partial_sum(&self, n: usize) -> f64 {
        crate::quadrature::accurate_sum(self.b[..n].iter().copied())
    }
}

/// κ = 1/(Γ(2−α)τ^α).
pub fn l1_kappa(alpha: f64, tau: f64) -> f64 {
    rgamma(2.0 - alpha) / tau.powf(alpha)
}

/// Factorized κM + A, reused for every step.
#[derive(Debug, Clone)]
pub struct L1System {
    pub alpha: f64,
    pub tau: f64,
    pub kappa: f64,
    pub mass: Mass,
    factor: BandLdl<f64>,
}

impl L1System {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        self.factor.solve(rhs)
    }
}

pub fn l1_step_matrix(ops: &OperatorPair, alpha: f64, tau: f64) -> Result<L1System> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Domain(format!("α must lie in (0, 1], got {alpha}")));
    }
    TimeGrid::new(tau, 0)?;
    let kappa = l1_kappa(alpha, tau);
    let system = ops.stiffness.linear_combination(1.0, &ops.mass.to_csr(), kappa);
    Ok(L1System {
        alpha,
        tau,
        kappa,
        mass: ops.mass.clone(),
        factor: BandLdl::factor(&system)?,
    })
}

/// Load vector Fⁿ at time t_n.
pub type Source<'a> = &'a (dyn Fn(f64) -> Vec<f64> + Sync);

/// Result of [`l1_solve`].
#[derive(Debug, Clone, Default)]
pub struct L1Output {
    /// (t, Uⁿ) at the requested output times, in request order.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    /// (t_n, ‖Uⁿ‖_M) for every step including n = 0.
    pub trajectory: Vec<(f64, f64)>,
}

impl L1Output {
    pub fn trajectory_csv(&self) -> String {
        let mut s = String::from("t,norm\n");
        for (t, n) in &self.trajectory {
            let _ = writeln!(s, "{t:.10e},{n:.10e}");
        }
        s
    }
}

/// Runs the L1 scheme from `v_h` and returns Uⁿ at `output_times`, which
/// must all be grid times within the grid.
pub fn l1_solve(
    v_h: &[f64],
    ops: &OperatorPair,
    alpha: f64,
    grid: TimeGrid,
    source: Option<Source>,
    output_times: &[f64],
) -> Result<L1Output> {
    let system = l1_step_matrix(ops, alpha, grid.tau)?;
    l1_solve_with(&system, v_h, grid, source, output_times)
}

/// As [`l1_solve`] with a prebuilt system.
pub fn l1_solve_with(
    system: &L1System,
    v_h: &[f64],
    grid: TimeGrid,
    source: Option<Source>,
    output_times: &[f64],
) -> Result<L1Output> {
    let wanted = output_times
        .iter()
        .map(|&t| {
            let n = grid.step_of(t)?;
            if n > grid.n_steps {
                return Err(Error::OffGrid { t, tau: grid.tau });
            }
            Ok(n)
        })
        .collect::<Result<Vec<_>>>()?;
    let last = wanted.iter().copied().max().unwrap_or(0);
    let dofs = v_h.len();
    if (last + 1) * dofs * 8 > MAX_HISTORY_BYTES {
        return Err(Error::Unsupported(format!(
            "{last} steps × {dofs} unknowns exceed the history memory cap"
        )));
    }
    let w = L1Weights::new(system.alpha, last.max(1));
    let b = &w.b;
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(last + 1);
    history.push(v_h.to_vec());
    let mut trajectory = vec![(0.0, system.mass.quad_form(v_h).sqrt())];
    let mut conv = vec![0.0; dofs];
    for n in 1..=last {
        // Σ_{j=1}^{n−1}(b_{j−1} − b_j)U^{n−j} + b_{n−1}U⁰, blocked over unknowns
        par::for_each_chunk_mut(&mut conv, 4096, |chunk, out| {
            let lo = chunk * 4096;
            for (k, o) in out.iter_mut().enumerate() {
                let i = lo + k;
                let mut s = b[n - 1] * history[0][i];
                for j in 1..n {
                    s += (b[j - 1] - b[j]) * history[n - j][i];
                }
                *o = s;
            }
        });
        let mut rhs = system.mass.matvec(&conv);
        for r in rhs.iter_mut() {
            *r *= system.kappa;
        }
        if let Some(f) = source {
            for (r, f) in rhs.iter_mut().zip(f(grid.time(n))) {
                *r += f;
            }
        }
        let u = system.solve(&rhs);
        trajectory.push((grid.time(n), system.mass.quad_form(&u).sqrt()));
        history.push(u);
    }
    let snapshots = wanted
        .iter()
        .zip(output_times)
        .map(|(&n, &t)| (t, history[n].clone()))
        .collect();
    Ok(L1Output {
        snapshots,
        trajectory,
    })
}

/// The scalar L1 scheme for y′ = −λy (Caputo), y(0) = 1; returns y_0..y_n.
pub fn scalar_l1(lambda: f64, alpha: f64, tau: f64, n: usize) -> Vec<f64> {
    let kappa = l1_kappa(alpha, tau);
    let b = L1Weights::new(alpha, n.max(1)).b;
    let mut y = vec![1.0];
    for k in 1..=n {
        let mut s = b[k - 1] * y[0];
        for j in 1..k {
            s += (b[j - 1] - b[j]) * y[k - j];
        }
        y.push(kappa * s / (kappa + lambda));
    }
    y
}

/// One row of a temporal refinement study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalRecord {
    pub tau: f64,
    pub h: f64,
    pub l2: f64,
    pub h1: f64,
    /// Divided by ‖v‖.
    pub normalized: bool,
}

/// ‖ū_h(t) − U_h(t)‖ and ‖∇(ū_h(t) − U_h(t))‖ for each τ, with the lumped
/// scheme so that ū_h is available exactly; normalized by ‖v‖ when finite.
pub fn temporal_refinement_study(
    v: &InitialDatum,
    mesh: &Mesh,
    alpha: f64,
    t: f64,
    taus: &[f64],
) -> Result<Vec<TemporalRecord>> {
    let p = l2_project(v, mesh)?;
    let semi = LumpedSemidiscrete::from_initial(mesh, p.coefficients.clone(), p.rhs.clone());
    let exact = semi.at(alpha, t)?;
    let lumped = OperatorPair::new(mesh, true);
    let consistent = crate::fem::assemble_mass(mesh, false);
    let scale = p.l2_norm_of_v.unwrap_or(1.0);
    taus.iter()
        .map(|&tau| {
            let grid = TimeGrid::covering(tau, t)?;
            let out = l1_solve(&p.coefficients, &lumped, alpha, grid, None, &[t])?;
            let d: Vec<f64> = exact.iter().zip(&out.snapshots[0].1).map(|(a, b)| a - b).collect();
            Ok(TemporalRecord {
                tau,
                h: mesh.h,
                l2: consistent.quad_form(&d).sqrt() / scale,
                h1: lumped.stiffness.quad_form(&d).sqrt() / scale,
                normalized: p.l2_norm_of_v.is_some(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_mesh, SpacingRule};
    use crate::spectral::DiscreteEigenBasis;

    #[test]
    fn weights() {
        let w = L1Weights::new(0.3, 1000);
        assert_eq!(w.b[0], 1.0);
        assert!(w.b.windows(2).all(|p| p[0] > p[1] && p[1] > 0.0));
        for n in [1, 10, 1000] {
            let want = (n as f64).powf(0.7);
            assert!((w.partial_sum(n) - want).abs() < 1e-13 * want);
        }
    }

    #[test]
    fn grid_rejects_off_grid_times() {
        let g = TimeGrid::covering(0.01, 0.1).unwrap();
        assert_eq!(g.n_steps, 10);
        assert!(matches!(g.step_of(0.105), Err(Error::OffGrid { .. })));
        assert!(TimeGrid::new(0.0, 3).is_err());
    }

    #[test]
    fn backward_euler_limit() {
        assert!((l1_kappa(1.0, 0.01) - 100.0).abs() < 1e-12);
        let y = scalar_l1(2.0, 1.0, 0.1, 3);
        assert!((y[3] - (1.0f64 / 1.2).powi(3)).abs() < 1e-15);
    }

    #[test]
    fn single_mode_matches_scalar_recurrence() {
        let mesh = build_mesh(2, 8, SpacingRule::Standard).unwrap();
        let basis = DiscreteEigenBasis::new(&mesh);
        let v = basis.eigenvector(1, 1);
        let ops = OperatorPair::new(&mesh, true);
        let grid = TimeGrid::new(0.01, 20).unwrap();
        let out = l1_solve(&v, &ops, 0.5, grid, None, &[0.2]).unwrap();
        let y = scalar_l1(basis.eigenvalue(1, 1), 0.5, 0.01, 20);
        for (u, v) in out.snapshots[0].1.iter().zip(&v) {
            assert!((u - y[20] * v).abs() < 1e-12);
        }
        let zero = l1_solve(&vec![0.0; v.len()], &ops, 0.5, grid, None, &[0.1]).unwrap();
        assert!(zero.snapshots[0].1.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn scalar_system_by_hand() {
        let mesh = build_mesh(1, 2, SpacingRule::Standard).unwrap();
        let ops = OperatorPair::new(&mesh, false);
        let s = l1_step_matrix(&ops, 0.5, 0.01).unwrap();
        let kappa = 1.0 / (crate::special::gamma(1.5) * 0.1);
        assert!((s.kappa - kappa).abs() < 1e-12);
        // κ/3 + 4 for M = 1/3, A = 4
        assert!((s.solve(&[1.0])[0] - 1.0 / (kappa / 3.0 + 4.0)).abs() < 1e-15);
    }
}
