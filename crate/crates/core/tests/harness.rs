use std::fs;
use std::path::Path;

use fracfem_core::error_analysis::Scheme;
use fracfem_core::harness::{reproduce_table_levels, run_plan, ExperimentPlan, SolverPath};
use fracfem_core::mesh::SpacingRule;
use fracfem_core::{par, Error};
use proptest::prelude::*;

fn plan(dir: &Path) -> ExperimentPlan {
    ExperimentPlan {
        name: "det".into(),
        schemes: vec![Scheme::Standard, Scheme::Lumped],
        examples: vec!["a".into(), "c".into(), "d".into()],
        alphas: vec![0.3, 0.7],
        times: vec![0.05],
        levels: vec![3, 4, 5],
        output_dir: dir.to_path_buf(),
        ..ExperimentPlan::default()
    }
}

#[test]
fn identical_plans_give_identical_csv() {
    let (d1, d2, d3) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let a = run_plan(&plan(d1.path())).unwrap();
    let b = run_plan(&plan(d2.path())).unwrap();
    let c = par::sequential(|| run_plan(&plan(d3.path()))).unwrap();
    assert!(a.failures.is_empty(), "{:?}", a.failures);
    let csv = |d: &Path| fs::read(d.join("det").join("det.csv")).unwrap();
    assert_eq!(csv(d1.path()), csv(d2.path()));
    assert_eq!(csv(d1.path()), csv(d3.path()));
    assert_eq!(a.records, b.records);
    assert_eq!(a.records, c.records);
}

#[test]
fn artifacts_include_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_plan(&plan(dir.path())).unwrap();
    let base = dir.path().join("det");
    for ext in ["csv", "md", "gp"] {
        assert!(base.join(format!("det.{ext}")).is_file(), "missing .{ext}");
    }
    let dats: Vec<_> = out.files.iter().filter(|f| f.extension().is_some_and(|e| e == "dat")).collect();
    // one curve per norm for each (scheme, example, α, t)
    assert_eq!(dats.len(), 2 * 2 * 3 * 2);
    let text = fs::read_to_string(dats[0]).unwrap();
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split_whitespace().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.len() == 2 && r[0] < 0.0));
    assert!((rows[0][0] - (0.125f64).log10()).abs() < 1e-8);
}

#[test]
fn failed_combinations_are_reported_and_the_rest_continues() {
    let dir = tempfile::tempdir().unwrap();
    let p = ExperimentPlan {
        name: "partial".into(),
        schemes: vec![Scheme::Lumped],
        examples: vec!["c".into()],
        alphas: vec![0.5],
        // 0.015 is not a multiple of τ
        times: vec![0.1, 0.015],
        levels: vec![3],
        solver: SolverPath::FullyDiscrete { tau: 0.01 },
        output_dir: dir.path().to_path_buf(),
        ..ExperimentPlan::default()
    };
    let out = run_plan(&p).unwrap();
    assert_eq!(out.records.len(), 1);
    assert_eq!(out.failures.len(), 1);
    assert!(out.failures[0].contains("0.015"), "{:?}", out.failures);
}

#[test]
fn empty_plan_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let p = ExperimentPlan {
        output_dir: dir.path().to_path_buf(),
        ..ExperimentPlan::default()
    };
    assert!(p.is_empty());
    let out = run_plan(&p).unwrap();
    assert!(out.records.is_empty() && out.files.is_empty() && out.failures.is_empty());
}

#[test]
fn validation() {
    let bad = |text: &str| ExperimentPlan::parse(text, "x.cfg").and_then(|p| p.validate());
    assert!(matches!(bad("dim = 2\nspacing = offset\n"), Err(Error::Config { .. })));
    assert!(bad("alpha = 1.5\n").is_err());
    assert!(bad("time = 0\n").is_err());
    assert!(bad("level = 13\n").is_err());
    assert!(bad("dim = 1\nexample = c\n").is_err());
    assert!(bad("solver = l1\n").is_err());
    assert!(bad("dim = 1\nspacing = offset\nexample = d\nlevel = 3\n").is_ok());
}

#[test]
fn table_reproduction_writes_report_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let report = reproduce_table_levels(4, dir.path(), Some(&[3, 4])).unwrap();
    assert_eq!(report.id, 4);
    assert!(report.failures.is_empty());
    // 3 α × 2 levels × 2 norms cells, plus 2 ratios per α
    assert_eq!(report.checks.len(), 3 * 2 * 2 + 3 * 2);
    assert!(dir.path().join("table4").join("table4_report.md").is_file());
    assert!(report.to_markdown().contains("| check | expected | observed | result |"));
}

fn arb_plan() -> impl Strategy<Value = ExperimentPlan> {
    (
        "[a-z][a-z0-9_]{0,8}",
        1usize..=2,
        prop::sample::subsequence(vec![Scheme::Standard, Scheme::Lumped], 0..=2),
        prop::collection::vec(0.01f64..1.0, 0..3),
        prop::collection::vec(1e-4f64..2.0, 0..3),
        prop::collection::vec(1u32..=12, 0..4),
        prop::option::of(1e-5f64..0.1),
        any::<bool>(),
        any::<u64>(),
        0usize..8,
    )
        .prop_map(|(name, dim, schemes, alphas, times, levels, tau, normalize, seed, jobs)| ExperimentPlan {
            name,
            dim,
            schemes,
            examples: if dim == 1 { vec!["d".into()] } else { vec!["a".into(), "d".into()] },
            alphas,
            times,
            levels,
            spacing: if dim == 1 && normalize { SpacingRule::Offset } else { SpacingRule::Standard },
            solver: tau.map_or(SolverPath::Eigen, |tau| SolverPath::FullyDiscrete { tau }),
            output_dir: "some/dir".into(),
            normalize,
            seed,
            jobs,
        })
}

proptest! {
    #[test]
    fn config_round_trips(p in arb_plan()) {
        let text = p.to_config_string();
        let q = ExperimentPlan::parse(&text, "round-trip").unwrap();
        prop_assert_eq!(&p, &q);
        prop_assert_eq!(text, q.to_config_string());
    }
}
