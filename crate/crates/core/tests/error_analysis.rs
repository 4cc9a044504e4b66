use std::f64::consts::PI;
use std::ops::RangeInclusive;
use std::path::Path;

use fracfem_core::data::{interpolate, InitialDatum};
use fracfem_core::error_analysis::{build_convergence_table, fe_error_norms, ConvergenceRecord, Scheme};
use fracfem_core::harness::{run_plan, table_spec, ExperimentPlan};
use fracfem_core::mesh::{build_mesh, SpacingRule};
use fracfem_core::special::MittagLeffler;
use fracfem_core::spectral::exact_solution_with_modes;

fn rank_one() -> InitialDatum {
    InitialDatum::custom("2*sin(pi*x)*sin(pi*y)", 2).unwrap()
}

fn series(errs: &[f64]) -> Vec<ConvergenceRecord> {
    errs.iter()
        .enumerate()
        .map(|(k, &e)| ConvergenceRecord::new(Scheme::Standard, "a", 0.5, 0.1, 0.125 / 2f64.powi(k as i32), e, e, true))
        .collect()
}

#[test]
fn zero_solution_measures_the_reference() {
    let s = exact_solution_with_modes(&rank_one(), 0.5, 0.1, 2).unwrap();
    let e = MittagLeffler::new(0.5, 1.0).unwrap().eval(-2.0 * PI * PI * 0.1f64.sqrt()).unwrap();
    let mesh = build_mesh(2, 64, SpacingRule::Standard).unwrap();
    let n = fe_error_norms(&vec![0.0; mesh.num_dofs()], &s, &mesh).unwrap();
    assert!((n.l2 - e).abs() <= 1e-8 * e);
    let h1 = (2.0 * PI * PI).sqrt() * e;
    assert!((n.h1 - h1).abs() <= 1e-8 * h1);
}

#[test]
fn interpolation_errors_converge_at_two_and_one() {
    let v = rank_one();
    let s = exact_solution_with_modes(&v, 0.5, 0.1, 2).unwrap();
    let c = s.coefficient(1, 1);
    let errs: Vec<(f64, f64)> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let mesh = build_mesh(2, n, SpacingRule::Standard).unwrap();
            let u: Vec<f64> = interpolate(&v, &mesh).unwrap().iter().map(|x| c * x).collect();
            let e = fe_error_norms(&u, &s, &mesh).unwrap();
            (e.l2, e.h1)
        })
        .collect();
    let (l2, h1) = ((errs[1].0 / errs[2].0).log2(), (errs[1].1 / errs[2].1).log2());
    assert!((l2 - 2.0).abs() < 0.05, "L2 order {l2}");
    assert!((h1 - 1.0).abs() < 0.05, "H1 order {h1}");
}

#[test]
fn halving_arithmetic() {
    let t = build_convergence_table(&series(&[4e-2, 1e-2, 2.5e-3]));
    let r = &t.series[0].records;
    assert_eq!(r[0].ratio_l2, None);
    for rec in &r[1..] {
        assert!((rec.ratio_l2.unwrap() - 4.0).abs() < 1e-12);
        assert!((rec.rate_l2.unwrap() - 2.0).abs() < 1e-12);
    }
}

#[test]
fn reference_rows_give_reference_ratios() {
    // smooth data, α = 0.5, L2: "≈ 4.02"
    let t = build_convergence_table(&series(&[1.45e-3, 3.84e-4, 9.78e-5, 2.41e-5, 5.93e-6]));
    let q = t.series[0].summary_ratio_l2().unwrap();
    assert!((q - 4.02).abs() <= 0.05, "{q}");
    // point mass, t = 1, H1: "≈ 1.41", rate ½
    let spec = table_spec(1).unwrap();
    let row = spec.rows.iter().find(|r| r.t == 1.0).unwrap();
    let t = build_convergence_table(&series(&row.h1));
    let q = t.series[0].summary_ratio_h1().unwrap();
    assert!((q - 1.41).abs() <= 0.05, "{q}");
    assert!((q.log2() - 0.5).abs() <= 0.05);
}

#[test]
fn csv_schema() {
    let t = build_convergence_table(&series(&[4e-2, 1e-2]));
    let csv = t.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("scheme,example,alpha,t,h,l2,h1,ratio_l2,ratio_h1,rate_l2,rate_h1"));
    assert_eq!(lines.count(), 2);
}

fn lumped_plan(dir: &Path, examples: &[&str], times: &[f64], levels: RangeInclusive<u32>) -> ExperimentPlan {
    ExperimentPlan {
        name: "rates".into(),
        schemes: vec![Scheme::Lumped],
        examples: examples.iter().map(|s| s.to_string()).collect(),
        alphas: vec![0.5],
        times: times.to_vec(),
        levels: levels.collect(),
        output_dir: dir.to_path_buf(),
        ..ExperimentPlan::default()
    }
}

#[test]
fn rate_envelopes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_plan(&lumped_plan(dir.path(), &["a", "b", "c", "d"], &[0.1], 3..=6)).unwrap();
    assert!(out.failures.is_empty(), "{:?}", out.failures);
    for s in &out.table.series {
        let last = s.records.last().unwrap();
        let (l2, h1) = (last.rate_l2.unwrap(), last.rate_h1.unwrap());
        let (l2_band, h1_band) = if s.records[0].example == "d" { ((1.4, 1.6), (0.4, 0.6)) } else { ((1.9, 2.1), (0.9, 1.1)) };
        let ex = &s.records[0].example;
        assert!(l2 >= l2_band.0 && l2 <= l2_band.1, "example {ex}: L2 rate {l2}");
        assert!(h1 >= h1_band.0 && h1 <= h1_band.1, "example {ex}: H1 rate {h1}");
    }
}

#[test]
fn nonsmooth_errors_decay_in_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_plan(&lumped_plan(dir.path(), &["c"], &[1e-3, 1e-2, 1e-1], 3..=5)).unwrap();
    let by_t: Vec<&_> = out.table.series.iter().collect();
    assert_eq!(by_t.len(), 3);
    for w in by_t.windows(2) {
        for (a, b) in w[0].records.iter().zip(&w[1].records) {
            assert!(a.t < b.t);
            assert!(b.l2_error < a.l2_error && b.h1_error < a.h1_error);
        }
    }
}

#[test]
fn nonsmooth_lumped_cell_at_coarsest_level() {
    // lumped scheme, example (c), α = 0.5, t = 0.1, h = 1/8: 2.12e-3
    let dir = tempfile::tempdir().unwrap();
    let out = run_plan(&lumped_plan(dir.path(), &["c"], &[0.1], 3..=3)).unwrap();
    let e = out.table.series[0].records[0].l2_error;
    assert!((e - 2.12e-3).abs() <= 0.05 * 2.12e-3, "{e}");
}
