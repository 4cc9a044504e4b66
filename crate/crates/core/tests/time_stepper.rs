use fracfem_core::data::{l2_project, InitialDatum};
use fracfem_core::fem::{assemble_mass, Mass, OperatorPair};
use fracfem_core::mesh::{build_mesh, SpacingRule};
use fracfem_core::sparse::Csr;
use fracfem_core::special::gamma;
use fracfem_core::spectral::DiscreteEigenBasis;
use fracfem_core::stepper::{l1_kappa, l1_solve, scalar_l1, temporal_refinement_study, L1Weights, TimeGrid};
use fracfem_core::Error;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn weights_telescope_up_to_a_million_steps() {
    for alpha in [0.05, 0.3, 0.5, 0.77, 0.99] {
        let w = L1Weights::new(alpha, 1_000_000);
        assert_eq!(w.b[0], 1.0);
        assert!(w.b.windows(2).all(|p| p[0] > p[1] && p[1] > 0.0));
        for n in [1, 10, 1000, 123_457, 1_000_000] {
            let want = (n as f64).powf(1.0 - alpha);
            assert!(rel(w.partial_sum(n), want) <= 1e-13, "α {alpha}, n {n}");
        }
    }
}

#[test]
fn kappa_and_backward_euler_limit() {
    assert!(rel(l1_kappa(1.0, 0.01), 100.0) < 1e-15);
    assert!(rel(l1_kappa(0.5, 0.01), 1.0 / (gamma(1.5) * 0.1)) < 1e-14);
}

#[test]
fn single_dof_step_by_hand() {
    // N = 2, lumped: M = ½, A = 4, one step from U⁰ = 1
    let mesh = build_mesh(1, 2, SpacingRule::Standard).unwrap();
    let ops = OperatorPair::new(&mesh, true);
    let out = l1_solve(&[1.0], &ops, 0.5, TimeGrid::new(0.01, 1).unwrap(), None, &[0.01]).unwrap();
    let kappa = 1.0 / (gamma(1.5) * 0.1);
    let want = kappa * 0.5 / (kappa * 0.5 + 4.0);
    assert!(rel(out.snapshots[0].1[0], want) < 1e-14);
}

#[test]
fn zero_data_stays_zero() {
    let mesh = build_mesh(2, 8, SpacingRule::Standard).unwrap();
    let ops = OperatorPair::new(&mesh, false);
    let out = l1_solve(&vec![0.0; mesh.num_dofs()], &ops, 0.4, TimeGrid::new(0.01, 20).unwrap(), None, &[0.1, 0.2])
        .unwrap();
    assert!(out.snapshots.iter().all(|(_, u)| u.iter().all(|&x| x == 0.0)));
}

#[test]
fn off_grid_output_is_rejected() {
    let mesh = build_mesh(1, 4, SpacingRule::Standard).unwrap();
    let ops = OperatorPair::new(&mesh, true);
    let r = l1_solve(&[1.0; 3], &ops, 0.5, TimeGrid::new(0.01, 10).unwrap(), None, &[0.015]);
    assert!(matches!(r, Err(Error::OffGrid { .. })));
    let r = l1_solve(&[1.0; 3], &ops, 0.5, TimeGrid::new(0.01, 10).unwrap(), None, &[0.2]);
    assert!(r.is_err());
}

#[test]
fn trajectory_dump() {
    let mesh = build_mesh(1, 4, SpacingRule::Standard).unwrap();
    let ops = OperatorPair::new(&mesh, true);
    let out = l1_solve(&[1.0; 3], &ops, 0.5, TimeGrid::new(0.1, 3).unwrap(), None, &[0.3]).unwrap();
    let csv = out.trajectory_csv();
    assert_eq!(csv.lines().count(), 5);
    assert!(csv.starts_with("t,norm\n"));
}

#[test]
fn smooth_in_time_solution_converges_at_two_minus_alpha() {
    // y = 1 + t² on one unknown: m ∂ᵅy + a y = m·2t^{2−α}/Γ(3−α) + a(1 + t²)
    let mesh = build_mesh(1, 2, SpacingRule::Standard).unwrap();
    let ops = OperatorPair::new(&mesh, false);
    let m = ops.mass.to_csr().get(0, 0);
    let a = ops.stiffness.get(0, 0);
    for alpha in [0.3, 0.5, 0.7] {
        let source = move |t: f64| vec![m * 2.0 * t.powf(2.0 - alpha) / gamma(3.0 - alpha) + a * (1.0 + t * t)];
        let err = |n: usize| {
            let grid = TimeGrid::new(1.0 / n as f64, n).unwrap();
            let out = l1_solve(&[1.0], &ops, alpha, grid, Some(&source), &[1.0]).unwrap();
            (out.snapshots[0].1[0] - 2.0).abs()
        };
        let order = (err(200) / err(400)).log2();
        assert!((order - (2.0 - alpha)).abs() < 0.05, "α {alpha}: order {order}");
    }
}

#[test]
fn temporal_error_matches_reference_values() {
    let v = InitialDatum::NonsmoothC;
    for (n, taus, want) in [(16, vec![1e-2], vec![2.01e-3]), (32, vec![1e-2, 1e-4], vec![2.00e-3, 1.79e-5])] {
        let mesh = build_mesh(2, n, SpacingRule::Standard).unwrap();
        let rows = temporal_refinement_study(&v, &mesh, 0.5, 0.1, &taus).unwrap();
        for (r, w) in rows.iter().zip(want) {
            assert!(r.normalized);
            assert!(rel(r.l2, w) <= 0.05, "h = 1/{n}, τ = {}: {} vs {w}", r.tau, r.l2);
        }
    }
}

#[test]
fn backward_euler_limit_is_first_order_against_exponential() {
    let mesh = build_mesh(2, 8, SpacingRule::Standard).unwrap();
    let p = l2_project(&InitialDatum::NonsmoothC, &mesh).unwrap();
    let ops = OperatorPair::new(&mesh, true);
    let n = mesh.num_dofs();
    let a = DMatrix::from_row_slice(n, n, &ops.stiffness.to_dense().concat()) / (mesh.h * mesh.h);
    let eig = a.symmetric_eigen();
    let decay = DVector::from_iterator(n, eig.eigenvalues.iter().map(|l| (-0.1 * l).exp()));
    let q = &eig.eigenvectors;
    let exact = q * DMatrix::from_diagonal(&decay) * q.transpose() * DVector::from_column_slice(&p.coefficients);
    let m = assemble_mass(&mesh, false);
    let err = |tau: f64| {
        let out = l1_solve(&p.coefficients, &ops, 1.0, TimeGrid::covering(tau, 0.1).unwrap(), None, &[0.1]).unwrap();
        let d: Vec<f64> = out.snapshots[0].1.iter().zip(exact.iter()).map(|(a, b)| a - b).collect();
        m.quad_form(&d).sqrt()
    };
    let order = (err(1e-3) / err(5e-4)).log2();
    assert!((order - 1.0).abs() < 0.05, "order {order}");
}

#[test]
fn lumped_steps_match_scalar_recurrence_per_mode() {
    let mesh = build_mesh(2, 10, SpacingRule::Standard).unwrap();
    let basis = DiscreteEigenBasis::new(&mesh);
    let ops = OperatorPair::new(&mesh, true);
    for (p, q, alpha) in [(1, 1, 0.5), (3, 2, 0.2), (7, 9, 0.9)] {
        let phi = basis.eigenvector(p, q);
        let out = l1_solve(&phi, &ops, alpha, TimeGrid::new(0.01, 30).unwrap(), None, &[0.3]).unwrap();
        let y = scalar_l1(basis.eigenvalue(p, q), alpha, 0.01, 30)[30];
        let worst = out.snapshots[0].1.iter().zip(&phi).map(|(u, f)| (u - y * f).abs()).fold(0.0, f64::max);
        assert!(worst < 1e-12, "mode ({p}, {q}): {worst}");
    }
}

fn random_spd(rng: &mut ChaCha8Rng, n: usize, shift: f64) -> Csr {
    let b: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut t = Vec::new();
    for i in 0..n {
        for j in 0..n {
            let s: f64 = (0..n).map(|k| b[k * n + i] * b[k * n + j]).sum();
            t.push((i, j, s + if i == j { shift } else { 0.0 }));
        }
    }
    Csr::from_triplets(n, &t)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn mass_norm_never_increases(seed in any::<u64>(), n in 2usize..=6, alpha in 0.05f64..0.99, lumped in any::<bool>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let stiffness = random_spd(&mut rng, n, 0.1);
        let mass = if lumped {
            Mass::Lumped((0..n).map(|_| rng.gen_range(0.1..2.0)).collect())
        } else {
            Mass::Consistent(random_spd(&mut rng, n, 0.5))
        };
        let ops = OperatorPair { stiffness, mass };
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let tau = rng.gen_range(1e-3..1e-1);
        let grid = TimeGrid::new(tau, 60).unwrap();
        let out = l1_solve(&v, &ops, alpha, grid, None, &[grid.time(60)]).unwrap();
        prop_assert_eq!(out.trajectory.len(), 61);
        for w in out.trajectory.windows(2) {
            prop_assert!(w[1].1 <= w[0].1 * (1.0 + 1e-12), "{:?}", w);
        }
    }
}
