//! One pass/fail line per acceptance criterion; run with `--nocapture` to see them.

use fracfem_core::checks::property_checks;
use fracfem_core::harness::{reproduce_table, TableReport};
use fracfem_core::special::MittagLeffler;

struct Line {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn ml_identities() -> Line {
    let e1 = MittagLeffler::new(1.0, 1.0).unwrap();
    let eh = MittagLeffler::new(0.5, 1.0).unwrap();
    let mut worst: (f64, f64) = (0.0, 0.0);
    for i in 0..=60 {
        let x = 0.5 * i as f64;
        let r = ((e1.eval(-x).unwrap() - (-x).exp()) / (-x).exp()).abs();
        worst.0 = worst.0.max(r);
    }
    for i in 0..=80 {
        let x = 0.25 * i as f64;
        let w = (x * x).exp() * libm::erfc(x);
        worst.1 = worst.1.max(((eh.eval(-x).unwrap() - w) / w).abs());
    }
    Line {
        name: "Mittag-Leffler identities (exp, erfcx)",
        pass: worst.0 <= 1e-12 && worst.1 <= 1e-10,
        detail: format!("worst relative error {:.1e} (α = 1), {:.1e} (α = ½)", worst.0, worst.1),
    }
}

fn tables(name: &'static str, ids: &[u32]) -> Line {
    let dir = tempfile::tempdir().unwrap();
    let mut pass = true;
    let mut notes = Vec::new();
    for &id in ids {
        match reproduce_table(id, dir.path()) {
            Ok(r) => {
                pass &= r.passed();
                notes.push(summary(&r));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("table {id}: error {e}"));
            }
        }
    }
    Line { name, pass, detail: notes.join("; ") }
}

fn summary(r: &TableReport) -> String {
    let judged = r.checks.iter().filter(|c| !c.informational).count();
    let failed: Vec<_> = r.failed_checks().collect();
    let mut s = format!("table {}: {}/{} checks", r.id, judged - failed.len(), judged);
    if let Some(c) = failed.first() {
        s += &format!(", first miss {} = {:.4e} vs {}", c.name, c.observed, c.expected);
    }
    if !r.failures.is_empty() {
        s += &format!(", {} failed runs", r.failures.len());
    }
    s
}

fn properties() -> Line {
    match property_checks(0) {
        Ok(checks) => {
            let failed: Vec<_> = checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
            Line {
                name: "property checks",
                pass: failed.is_empty(),
                detail: format!("{}/{} pass{}", checks.len() - failed.len(), checks.len(),
                    if failed.is_empty() { String::new() } else { format!(", failing: {}", failed.join(", ")) }),
            }
        }
        Err(e) => Line { name: "property checks", pass: false, detail: format!("error {e}") },
    }
}

#[test]
fn acceptance() {
    let lines = [
        ml_identities(),
        tables("smooth data, lumped mass", &[4]),
        tables("intermediate data, lumped mass", &[6]),
        tables("nonsmooth data, lumped mass", &[7]),
        tables("temporal error of the L1 scheme", &[5]),
        tables("one-dimensional point mass", &[1, 2, 3]),
        tables("curve measure in two dimensions", &[8, 9]),
        properties(),
    ];
    for (i, l) in lines.iter().enumerate() {
        println!("criterion {} {}: {} ({})", i + 1, if l.pass { "pass" } else { "FAIL" }, l.name, l.detail);
    }
    let failed: Vec<usize> = lines.iter().enumerate().filter(|(_, l)| !l.pass).map(|(i, _)| i + 1).collect();
    assert!(failed.is_empty(), "failing criteria: {failed:?}");
}
