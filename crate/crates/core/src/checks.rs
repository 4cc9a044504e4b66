//! Fast property checks behind `fracfem check` and the acceptance suite.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{l2_project, InitialDatum};
use crate::error::Result;
use crate::fem::{assemble_mass, assemble_stiffness, OperatorPair};
use crate::harness::{Band, CheckResult};
use crate::mesh::{build_mesh, SpacingRule};
use crate::special::MittagLeffler;
use crate::spectral::{DiscreteEigenBasis, LumpedSemidiscrete};
use crate::stepper::{l1_solve, scalar_l1, L1Weights, TimeGrid};

fn result(name: String, expected: String, observed: f64, pass: bool) -> CheckResult {
    CheckResult {
        name,
        expected,
        observed,
        pass,
        informational: false,
    }
}

/// Lumped mass equals the row sums of the consistent mass.
pub fn lumped_row_sums(rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for dim in [1, 2] {
        let n = rng.gen_range(4..=24);
        let mesh = build_mesh(dim, n, SpacingRule::Standard)?;
        let sums = assemble_mass(&mesh, false).to_csr().row_sums();
        let lumped = assemble_mass(&mesh, true).to_csr().diagonal();
        // rows next to the boundary lose their Dirichlet columns
        let inner = |i: usize| (2..=n - 2).contains(&i);
        let dev = (0..mesh.num_dofs())
            .filter(|&k| {
                let (i, j) = mesh.dof_grid_index(k);
                inner(i) && (dim == 1 || inner(j))
            })
            .map(|k| (sums[k] - lumped[k]).abs() / lumped[k])
            .fold(0.0, f64::max);
        out.push(result(format!("lumped row sums, dim {dim}, N {n}"), "≤ 1e-12".into(), dev, dev <= 1e-12));
    }
    Ok(out)
}

/// ‖Aφ − λ M̄φ‖∞ for grid-sampled sine modes on a random mesh.
pub fn eigenpair_residuals(rng: &mut ChaCha8Rng) -> Result<Vec<CheckResult>> {
    let mut out = Vec::new();
    for dim in [1, 2] {
        let n = rng.gen_range(4..=24);
        let mesh = build_mesh(dim, n, SpacingRule::Standard)?;
        let basis = DiscreteEigenBasis::new(&mesh);
        let a = assemble_stiffness(&mesh);
        let m = assemble_mass(&mesh, true);
        let mut worst: f64 = 0.0;
        for _ in 0..8 {
            let (p, q) = (rng.gen_range(1..n), if dim == 2 { rng.gen_range(1..n) } else { 1 });
            let phi = basis.eigenvector(p, q);
            let lam = basis.eigenvalue(p, q);
            let r = a
                .matvec(&phi)
                .iter()
                .zip(m.matvec(&phi))
                .map(|(x, y)| (x - lam * y).abs())
                .fold(0.0, f64::max);
            worst = worst.max(r);
        }
        out.push(result(
            format!("eigenpair residual, dim {dim}, N {n}"),
            "≤ 1e-10".into(),
            worst,
            worst <= 1e-10,
        ));
    }
    Ok(out)
}

/// Σ_{j<n} b_j = n^{1−α}.
pub fn l1_telescoping(rng: &mut ChaCha8Rng) -> Vec<CheckResult> {
    let alpha = rng.gen_range(0.05..1.0);
    let w = L1Weights::new(alpha, 2000);
    let dev = [1usize, 7, 100, 2000]
        .iter()
        .map(|&n| {
            let want = (n as f64).powf(1.0 - alpha);
            (w.partial_sum(n) - want).abs() / want
        })
        .fold(0.0, f64::max);
    vec![result(format!("L1 weight telescoping, α {alpha:.4}"), "≤ 1e-12".into(), dev, dev <= 1e-12)]
}

/// Observed order of the scalar L1 scheme against E_α(−1) at t = 1, λ = 1,
/// from τ = 1/320 to 1/640.
pub fn scalar_l1_order(alpha: f64) -> Result<CheckResult> {
    let exact = MittagLeffler::new(alpha, 1.0)?.eval(-1.0)?;
    let err = |n: usize| (scalar_l1(1.0, alpha, 1.0 / n as f64, n)[n] - exact).abs();
    let slope = (err(320) / err(640)).log2();
    let band = Band::Around(2.0 - alpha, 0.2);
    Ok(result(
        format!("scalar L1 order vs Mittag-Leffler, α {alpha}"),
        band.describe(),
        slope,
        band.contains(slope),
    ))
}

/// Exact-in-time lumped solution at α = 0.999 against backward Euler
/// (L1 at α = 1) for the heat equation, relative L2 difference at t = 0.1.
pub fn near_heat_limit() -> Result<CheckResult> {
    let mesh = build_mesh(2, 16, SpacingRule::Standard)?;
    let v = InitialDatum::NonsmoothC;
    let p = l2_project(&v, &mesh)?;
    let semi = LumpedSemidiscrete::from_initial(&mesh, p.coefficients.clone(), p.rhs.clone());
    let frac = semi.at(0.999, 0.1)?;
    let ops = OperatorPair::new(&mesh, true);
    let be = l1_solve(&p.coefficients, &ops, 1.0, TimeGrid::covering(1e-4, 0.1)?, None, &[0.1])?;
    let heat = &be.snapshots[0].1;
    let m = assemble_mass(&mesh, false);
    let d: Vec<f64> = frac.iter().zip(heat).map(|(a, b)| a - b).collect();
    let rel = (m.quad_form(&d) / m.quad_form(heat)).sqrt();
    Ok(result(
        "α = 0.999 vs backward Euler heat solve, t = 0.1".into(),
        "≤ 0.02 relative".into(),
        rel,
        rel <= 0.02,
    ))
}

/// The whole smoke suite; `seed` drives mesh sizes, modes and α.
pub fn property_checks(seed: u64) -> Result<Vec<CheckResult>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = lumped_row_sums(&mut rng)?;
    out.extend(eigenpair_residuals(&mut rng)?);
    out.extend(l1_telescoping(&mut rng));
    for alpha in [0.1, 0.5, 0.9] {
        out.push(scalar_l1_order(alpha)?);
    }
    out.push(near_heat_limit()?);
    Ok(out)
}
