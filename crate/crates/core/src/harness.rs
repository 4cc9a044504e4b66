//! Experiment plans, the plan runner and the reference-table reproductions.
//!
//! Plans are plain text, one `key = value` per line, lists by repeating the
//! key, `#` starts a comment:
//!
//! ```text
//! name = nonsmooth
//! dim = 2
//! scheme = lumped
//! example = c
//! alpha = 0.5
//! time = 0.01
//! time = 0.1
//! level = 3
//! level = 4
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use crate::data::{l2_project, InitialDatum};
use crate::error::{Error, Result};
use crate::error_analysis::{
    build_convergence_table, reference_norms_with, ConvergenceRecord, ConvergenceTable, ErrorEvaluator, NormOptions,
    ReferenceNorms, Scheme,
};
use crate::fem::OperatorPair;
use crate::mesh::{build_mesh, Mesh, SpacingRule};
use crate::par;
use crate::spectral::{ContourSolver, GalerkinEigen1d, LumpedSemidiscrete, MAX_DENSE_DOFS};
use crate::stepper::{l1_solve, temporal_refinement_study, TimeGrid};

/// Environment variable overriding the output directory.
pub const OUTPUT_ENV: &str = "FRACFEM_OUT";

/// How u_h(t) is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverPath {
    /// Exact in time: discrete eigen-expansion (lumped, 1D standard) or
    /// contour integral (2D standard).
    Eigen,
    /// L1 time stepping with step τ.
    FullyDiscrete { tau: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub name: String,
    pub dim: usize,
    pub schemes: Vec<Scheme>,
    pub examples: Vec<String>,
    pub alphas: Vec<f64>,
    pub times: Vec<f64>,
    /// Mesh levels k: N = 2^k cells per axis (2^k + 1 with offset spacing).
    pub levels: Vec<u32>,
    pub spacing: SpacingRule,
    pub solver: SolverPath,
    pub output_dir: PathBuf,
    /// Divide errors by ‖v‖ where finite.
    pub normalize: bool,
    pub seed: u64,
    /// Worker cap, 0 for the default pool.
    pub jobs: usize,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            name: "plan".into(),
            dim: 2,
            schemes: Vec::new(),
            examples: Vec::new(),
            alphas: Vec::new(),
            times: Vec::new(),
            levels: Vec::new(),
            spacing: SpacingRule::Standard,
            solver: SolverPath::Eigen,
            output_dir: PathBuf::from("out"),
            normalize: true,
            seed: 0,
            jobs: 0,
        }
    }
}

fn parse_value<T: std::str::FromStr>(path: &str, line: usize, key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config {
        path: path.into(),
        line,
        msg: format!("invalid value '{v}' for '{key}'"),
    })
}

impl ExperimentPlan {
    /// Parses the config text; `path` is only used in error messages.
    pub fn parse(text: &str, path: &str) -> Result<Self> {
        let mut plan = ExperimentPlan::default();
        let mut tau = None;
        let mut l1 = false;
        for (no, raw) in text.lines().enumerate() {
            let line = no + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let Some((key, value)) = body.split_once('=') else {
                return Err(Error::Config {
                    path: path.into(),
                    line,
                    msg: format!("expected 'key = value', got '{body}'"),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "name" => plan.name = value.to_string(),
                "dim" => plan.dim = parse_value(path, line, key, value)?,
                "scheme" => plan.schemes.push(value.parse().map_err(|e: Error| Error::Config {
                    path: path.into(),
                    line,
                    msg: e.to_string(),
                })?),
                "example" => plan.examples.push(value.to_string()),
                "alpha" => plan.alphas.push(parse_value(path, line, key, value)?),
                "time" => plan.times.push(parse_value(path, line, key, value)?),
                "level" => plan.levels.push(parse_value(path, line, key, value)?),
                "spacing" => {
                    plan.spacing = match value {
                        "standard" => SpacingRule::Standard,
                        "offset" => SpacingRule::Offset,
                        _ => {
                            return Err(Error::Config {
                                path: path.into(),
                                line,
                                msg: format!("spacing must be 'standard' or 'offset', got '{value}'"),
                            })
                        }
                    }
                }
                "solver" => {
                    l1 = match value {
                        "eigen" => false,
                        "l1" => true,
                        _ => {
                            return Err(Error::Config {
                                path: path.into(),
                                line,
                                msg: format!("solver must be 'eigen' or 'l1', got '{value}'"),
                            })
                        }
                    }
                }
                "tau" => tau = Some(parse_value::<f64>(path, line, key, value)?),
                "output" => plan.output_dir = PathBuf::from(value),
                "normalize" => plan.normalize = parse_value(path, line, key, value)?,
                "seed" => plan.seed = parse_value(path, line, key, value)?,
                "jobs" => plan.jobs = parse_value(path, line, key, value)?,
                _ => {
                    return Err(Error::Config {
                        path: path.into(),
                        line,
                        msg: format!("unknown key '{key}'"),
                    })
                }
            }
        }
        plan.solver = match (l1, tau) {
            (false, _) => SolverPath::Eigen,
            (true, Some(tau)) => SolverPath::FullyDiscrete { tau },
            (true, None) => {
                return Err(Error::Config {
                    path: path.into(),
                    line: text.lines().count(),
                    msg: "solver = l1 needs tau".into(),
                })
            }
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Config text that parses back to an equal plan.
    pub fn to_config_string(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "name = {}", self.name);
        let _ = writeln!(s, "dim = {}", self.dim);
        for x in &self.schemes {
            let _ = writeln!(s, "scheme = {x}");
        }
        for x in &self.examples {
            let _ = writeln!(s, "example = {x}");
        }
        for x in &self.alphas {
            let _ = writeln!(s, "alpha = {x:?}");
        }
        for x in &self.times {
            let _ = writeln!(s, "time = {x:?}");
        }
        for x in &self.levels {
            let _ = writeln!(s, "level = {x}");
        }
        let spacing = match self.spacing {
            SpacingRule::Standard => "standard",
            SpacingRule::Offset => "offset",
        };
        let _ = writeln!(s, "spacing = {spacing}");
        match self.solver {
            SolverPath::Eigen => s.push_str("solver = eigen\n"),
            SolverPath::FullyDiscrete { tau } => {
                let _ = writeln!(s, "solver = l1\ntau = {tau:?}");
            }
        }
        let _ = writeln!(s, "output = {}", self.output_dir.display());
        let _ = writeln!(s, "normalize = {}", self.normalize);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "jobs = {}", self.jobs);
        s
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config {
            path: "<plan>".into(),
            line: 0,
            msg,
        });
        if self.dim != 1 && self.dim != 2 {
            return bad(format!("dim must be 1 or 2, got {}", self.dim));
        }
        if self.spacing == SpacingRule::Offset && self.dim != 1 {
            return bad("offset spacing is only available in 1D".into());
        }
        if let SolverPath::FullyDiscrete { tau } = self.solver {
            if !(tau > 0.0) {
                return bad(format!("tau must be positive, got {tau}"));
            }
        }
        if let Some(a) = self.alphas.iter().find(|a| !(**a > 0.0 && **a <= 1.0)) {
            return bad(format!("alpha must lie in (0, 1], got {a}"));
        }
        if let Some(t) = self.times.iter().find(|t| !(**t > 0.0)) {
            return bad(format!("times must be positive, got {t}"));
        }
        if let Some(k) = self.levels.iter().find(|k| !(1..=12).contains(*k)) {
            return bad(format!("mesh level {k} outside 1..=12"));
        }
        for e in &self.examples {
            InitialDatum::parse(e, self.dim).map_err(|err| Error::Config {
                path: "<plan>".into(),
                line: 0,
                msg: err.to_string(),
            })?;
        }
        Ok(())
    }

    /// Cells per axis at level k.
    pub fn cells(&self, k: u32) -> usize {
        match self.spacing {
            SpacingRule::Standard => 1 << k,
            SpacingRule::Offset => (1 << k) + 1,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.schemes.is_empty()
            || self.examples.is_empty()
            || self.alphas.is_empty()
            || self.times.is_empty()
            || self.levels.is_empty()
    }
}

/// Output directory: `FRACFEM_OUT` if set, else the given one.
pub fn resolve_output_dir(dir: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => dir.to_path_buf(),
    }
}

/// Everything [`run_plan`] produced.
#[derive(Debug, Clone, Default)]
pub struct PlanOutcome {
    pub records: Vec<ConvergenceRecord>,
    pub table: ConvergenceTable,
    /// One message per failed combination.
    pub failures: Vec<String>,
    pub files: Vec<PathBuf>,
}

type NormKey = (String, usize, u64, u64);
type NormSlot = Arc<Mutex<Option<ReferenceNorms>>>;

fn norm_cache() -> &'static Mutex<HashMap<NormKey, NormSlot>> {
    static CACHE: OnceLock<Mutex<HashMap<NormKey, NormSlot>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Reference norms memoized per (datum, α, t) for the process lifetime, the
/// measure-data sums being the most expensive part of a table; recomputed
/// when a caller needs more modes than the cached entry holds.
pub fn reference_norms_cached(v: &InitialDatum, alpha: f64, t: f64, min_modes: usize) -> Result<ReferenceNorms> {
    let key = (v.token(), v.dim(), alpha.to_bits(), t.to_bits());
    let slot = norm_cache().lock().expect("cache lock").entry(key).or_default().clone();
    let mut entry = slot.lock().expect("cache slot lock");
    if let Some(n) = entry.as_ref() {
        if n.modes >= min_modes || n.block == 0 || !n.converged {
            return Ok(n.clone());
        }
    }
    let mut opts = NormOptions::for_dim(v.dim());
    opts.min_modes = min_modes.min(opts.max_modes);
    let n = reference_norms_with(v, alpha, t, opts)?;
    if !n.converged {
        log::warn!(
            "reference norms for example {}, α = {alpha}, t = {t} stopped at {} modes (relative change {:e})",
            v.token(),
            n.modes,
            n.change
        );
    }
    *entry = Some(n.clone());
    Ok(n)
}

/// Solves and measures every combination for one (example, level) pair.
fn run_unit(plan: &ExperimentPlan, example: &str, k: u32) -> (Vec<ConvergenceRecord>, Vec<String>) {
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let tag = |scheme: &str| format!("{scheme} example {example} level {k}");
    let setup = || -> Result<(InitialDatum, Mesh, crate::data::ProjectedData, ErrorEvaluator)> {
        let v = InitialDatum::parse(example, plan.dim)?;
        let mesh = build_mesh(plan.dim, plan.cells(k), plan.spacing)?;
        let p = l2_project(&v, &mesh)?;
        let ev = ErrorEvaluator::new(&v, &mesh, p.rhs.clone())?;
        Ok((v, mesh, p, ev))
    };
    let (v, mesh, p, ev) = match setup() {
        Ok(x) => x,
        Err(e) => {
            failures.push(format!("{}: {e}", tag("setup")));
            return (records, failures);
        }
    };
    let scale = if plan.normalize { p.l2_norm_of_v.unwrap_or(1.0) } else { 1.0 };
    let normalized = plan.normalize && p.l2_norm_of_v.is_some();
    for &scheme in &plan.schemes {
        let result = (|| -> Result<()> {
            let solve: Box<dyn Fn(f64, f64) -> Result<Vec<f64>>> = match (plan.solver, scheme) {
                (SolverPath::Eigen, Scheme::Lumped) => {
                    let s = LumpedSemidiscrete::from_initial(&mesh, p.coefficients.clone(), p.rhs.clone());
                    Box::new(move |a, t| s.at(a, t))
                }
                (SolverPath::Eigen, Scheme::Standard) if mesh.dim == 1 && mesh.num_dofs() <= MAX_DENSE_DOFS => {
                    let s = GalerkinEigen1d::new(&v, &mesh)?;
                    Box::new(move |a, t| s.at(a, t))
                }
                (SolverPath::Eigen, Scheme::Standard) => {
                    let s = ContourSolver::new(OperatorPair::new(&mesh, false));
                    let u0 = p.coefficients.clone();
                    Box::new(move |a, t| s.solve(&u0, a, t))
                }
                (SolverPath::FullyDiscrete { tau }, scheme) => {
                    let ops = OperatorPair::new(&mesh, scheme == Scheme::Lumped);
                    let u0 = p.coefficients.clone();
                    Box::new(move |a, t| {
                        let grid = TimeGrid::covering(tau, t)?;
                        let out = l1_solve(&u0, &ops, a, grid, None, &[t])?;
                        Ok(out.snapshots.into_iter().next().expect("one snapshot").1)
                    })
                }
            };
            for &alpha in &plan.alphas {
                for &t in &plan.times {
                    let run = || -> Result<ConvergenceRecord> {
                        let u = solve(alpha, t)?;
                        let norms = reference_norms_cached(&v, alpha, t, ev.min_reference_modes())?;
                        let e = ev.errors(&u, alpha, t, &norms)?;
                        Ok(ConvergenceRecord::new(
                            scheme,
                            example,
                            alpha,
                            t,
                            mesh.h,
                            e.l2 / scale,
                            e.h1 / scale,
                            normalized,
                        ))
                    };
                    match run() {
                        Ok(r) => records.push(r),
                        Err(e) => failures.push(format!("{} α={alpha} t={t}: {e}", tag(scheme.as_str()))),
                    }
                }
            }
            Ok(())
        })();
        if let Err(e) = result {
            failures.push(format!("{}: {e}", tag(scheme.as_str())));
        }
    }
    (records, failures)
}

/// Runs every combination of the plan and writes CSV, markdown and plot data
/// under `<output>/<name>/`. Failed combinations are reported in the outcome
/// and do not stop the run.
pub fn run_plan(plan: &ExperimentPlan) -> Result<PlanOutcome> {
    plan.validate()?;
    if plan.is_empty() {
        return Ok(PlanOutcome::default());
    }
    let units: Vec<(String, u32)> = plan
        .examples
        .iter()
        .flat_map(|e| plan.levels.iter().map(move |&k| (e.clone(), k)))
        .collect();
    let results = par::with_jobs(plan.jobs, || par::map_slice(&units, |(e, k)| run_unit(plan, e, *k)));
    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, f) in results {
        records.extend(r);
        failures.extend(f);
    }
    // canonical order: scheme, example, α, t, then coarse to fine
    let ex_rank = |e: &str| plan.examples.iter().position(|x| x == e).unwrap_or(usize::MAX);
    let pos = |xs: &[f64], x: f64| xs.iter().position(|y| y.to_bits() == x.to_bits()).unwrap_or(usize::MAX);
    records.sort_by(|a, b| {
        let key = |r: &ConvergenceRecord| {
            (
                plan.schemes.iter().position(|s| *s == r.scheme).unwrap_or(usize::MAX),
                ex_rank(&r.example),
                pos(&plan.alphas, r.alpha),
                pos(&plan.times, r.t),
            )
        };
        key(a).cmp(&key(b)).then(b.h.total_cmp(&a.h))
    });
    let table = build_convergence_table(&records);
    let dir = resolve_output_dir(&plan.output_dir).join(&plan.name);
    let files = write_artifacts(&dir, &plan.name, &table)?;
    Ok(PlanOutcome {
        records,
        table,
        failures,
        files,
    })
}

fn fmt_num(x: f64) -> String {
    format!("{x}").replace('.', "p")
}

/// CSV, markdown, two-column log-log data per curve and a gnuplot script.
pub fn write_artifacts(dir: &Path, name: &str, table: &ConvergenceTable) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut files = Vec::new();
    let mut put = |file: String, body: String| -> Result<()> {
        let p = dir.join(file);
        fs::write(&p, body)?;
        files.push(p);
        Ok(())
    };
    put(format!("{name}.csv"), table.to_csv())?;
    put(format!("{name}.md"), table.to_markdown())?;
    let mut plot = String::from("set xlabel 'log10 h'\nset ylabel 'log10 error'\nset key left top\nplot \\\n");
    let mut curves = Vec::new();
    for s in &table.series {
        let Some(r0) = s.records.first() else { continue };
        for (norm, pick) in [("l2", 0usize), ("h1", 1)] {
            let file = format!(
                "{name}_{}_{}_a{}_t{}_{norm}.dat",
                r0.scheme,
                r0.example.replace(':', "_"),
                fmt_num(r0.alpha),
                fmt_num(r0.t)
            );
            let mut body = String::from("# log10(h) log10(error)\n");
            for r in &s.records {
                let e = if pick == 0 { r.l2_error } else { r.h1_error };
                let _ = writeln!(body, "{:.8} {:.8}", r.h.log10(), e.log10());
            }
            curves.push(format!(
                "  '{file}' using 1:2 with linespoints title '{} {} α={} t={} {norm}'",
                r0.scheme, r0.example, r0.alpha, r0.t
            ));
            put(file, body)?;
        }
    }
    plot.push_str(&curves.join(", \\\n"));
    plot.push('\n');
    put(format!("{name}.gp"), plot)?;
    Ok(files)
}

/// One check of a table reproduction.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub expected: String,
    pub observed: f64,
    pub pass: bool,
    /// Informational checks are reported but do not decide the outcome.
    pub informational: bool,
}

#[derive(Debug, Clone, Default)]
pub struct TableReport {
    pub id: u32,
    pub title: String,
    pub checks: Vec<CheckResult>,
    pub table: ConvergenceTable,
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
}

impl TableReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.checks.iter().all(|c| c.pass || c.informational)
    }

    pub fn failed_checks(&self) -> impl Iterator<Item = &CheckResult> {
        self.checks.iter().filter(|c| !c.pass && !c.informational)
    }

    pub fn to_markdown(&self) -> String {
        let mut s = format!("# Table {}: {}\n\n", self.id, self.title);
        let _ = writeln!(s, "| check | expected | observed | result |\n|---|---|---|---|");
        for c in &self.checks {
            let verdict = match (c.pass, c.informational) {
                (true, _) => "pass",
                (false, true) => "info",
                (false, false) => "FAIL",
            };
            let _ = writeln!(s, "| {} | {} | {:.4e} | {verdict} |", c.name, c.expected, c.observed);
        }
        for f in &self.failures {
            let _ = writeln!(s, "\nrun failure: {f}");
        }
        let _ = writeln!(
            s,
            "\n{}: {} of {} decisive checks failed",
            if self.passed() { "PASS" } else { "FAIL" },
            self.failed_checks().count(),
            self.checks.iter().filter(|c| !c.informational).count()
        );
        s
    }
}

/// Accepted band for a ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    /// |x − centre| ≤ tol.
    Around(f64, f64),
    /// lo ≤ x ≤ hi.
    Range(f64, f64),
}

impl Band {
    pub fn contains(self, x: f64) -> bool {
        match self {
            Band::Around(c, tol) => (x - c).abs() <= tol + 1e-12,
            Band::Range(lo, hi) => x >= lo - 1e-12 && x <= hi + 1e-12,
        }
    }

    pub fn describe(self) -> String {
        match self {
            Band::Around(c, tol) => format!("{c} ± {tol}"),
            Band::Range(lo, hi) => format!("[{lo:.3}, {hi:.3}]"),
        }
    }
}

/// Reference values of one (scheme, α, t) row pair.
#[derive(Debug, Clone)]
pub struct GoldenRow {
    pub alpha: f64,
    pub t: f64,
    pub l2: [f64; 5],
    pub h1: [f64; 5],
    pub ratio_l2: Band,
    pub ratio_h1: Band,
    /// Cells excluded from the decision (index into l2).
    pub excluded_l2: &'static [usize],
}

/// Definition of a reproducible table.
#[derive(Debug, Clone)]
pub struct TableSpec {
    pub id: u32,
    pub title: &'static str,
    pub plan: ExperimentPlan,
    pub rows: Vec<GoldenRow>,
    /// Relative per-cell tolerance; `None` when cells are informational.
    pub cell_tol: Option<f64>,
    pub cell_info_tol: f64,
}

// 3-significant-figure interval around a reference value
fn sig3(lo: f64, hi: f64) -> Band {
    Band::Range(lo - 0.005, hi + 0.005)
}

fn plan_for(id: u32, dim: usize, scheme: Scheme, example: &str, alphas: &[f64], times: &[f64]) -> ExperimentPlan {
    ExperimentPlan {
        name: format!("table{id}"),
        dim,
        schemes: vec![scheme],
        examples: vec![example.into()],
        alphas: alphas.to_vec(),
        times: times.to_vec(),
        levels: (3..=7).collect(),
        normalize: true,
        ..ExperimentPlan::default()
    }
}

/// The nine tables (Table 5 is a temporal study and carries no plan rows).
pub fn table_spec(id: u32) -> Result<TableSpec> {
    let row = |alpha: f64, t: f64, l2: [f64; 5], h1: [f64; 5], rl2: Band, rh1: Band| GoldenRow {
        alpha,
        t,
        l2,
        h1,
        ratio_l2: rl2,
        ratio_h1: rh1,
        excluded_l2: &[],
    };
    let d1_times = [0.005, 0.01, 1.0];
    let d2_times = [0.001, 0.01, 0.1];
    let spec = match id {
        1 => {
            let mut plan = plan_for(1, 1, Scheme::Standard, "d", &[0.5], &d1_times);
            plan.spacing = SpacingRule::Offset;
            let (l2b, h1b) = (sig3(2.75, 2.79), Band::Around(1.40, 0.05));
            TableSpec {
                id,
                title: "standard FEM, 1D point mass, offset meshes h = 1/(2^k+1)",
                plan,
                rows: vec![
                    row(0.5, 0.005, [3.95e-2, 1.59e-2, 6.00e-3, 2.19e-3, 7.89e-4], [1.21e0, 8.99e-1, 6.52e-1, 4.66e-1, 3.33e-1], l2b, h1b),
                    row(0.5, 0.01, [2.85e-2, 1.13e-2, 4.26e-3, 1.55e-3, 5.58e-4], [8.66e-1, 6.39e-1, 4.62e-1, 3.31e-1, 2.35e-1], l2b, h1b),
                    row(0.5, 1.0, [3.04e-3, 1.17e-3, 4.34e-4, 1.57e-4, 5.61e-5], [8.91e-2, 6.49e-2, 4.66e-2, 3.32e-2, 2.36e-2], l2b, h1b),
                ],
                cell_tol: Some(0.10),
                cell_info_tol: 0.10,
            }
        }
        2 => {
            let (l2b, h1b) = (sig3(2.75, 2.79), Band::Around(1.40, 0.05));
            TableSpec {
                id,
                title: "lumped mass FEM, 1D point mass, h = 1/2^k",
                plan: plan_for(2, 1, Scheme::Lumped, "d", &[0.5], &d1_times),
                rows: vec![
                    row(0.5, 0.005, [7.24e-2, 2.66e-2, 9.54e-3, 3.40e-3, 1.21e-3], [1.51e0, 1.07e0, 7.60e-1, 5.40e-1, 3.81e-1], l2b, h1b),
                    row(0.5, 0.01, [5.20e-2, 1.89e-2, 6.77e-3, 2.40e-3, 8.54e-4], [1.07e0, 7.59e-1, 5.37e-1, 3.80e-1, 2.70e-1], l2b, h1b),
                    row(0.5, 1.0, [5.47e-3, 1.93e-3, 6.84e-4, 2.42e-4, 8.56e-5], [1.07e-1, 7.58e-2, 5.37e-2, 3.80e-2, 2.70e-2], l2b, h1b),
                ],
                cell_tol: Some(0.10),
                cell_info_tol: 0.10,
            }
        }
        3 => {
            let (l2b, h1b) = (sig3(3.94, 3.99), Band::Around(1.41, 0.05));
            TableSpec {
                id,
                title: "standard FEM, 1D point mass on a grid point, h = 1/2^k",
                plan: plan_for(3, 1, Scheme::Standard, "d", &[0.5], &d1_times),
                rows: vec![
                    row(0.5, 0.005, [5.13e-3, 1.28e-3, 3.21e-4, 8.03e-5, 2.01e-5], [4.29e-1, 3.09e-1, 2.21e-1, 1.56e-1, 1.11e-1], l2b, h1b),
                    row(0.5, 0.01, [3.07e-3, 7.70e-4, 1.93e-4, 4.82e-5, 1.21e-5], [3.04e-1, 2.19e-1, 1.56e-1, 1.11e-1, 7.87e-2], l2b, h1b),
                    row(0.5, 1.0, [1.44e-5, 2.64e-6, 6.66e-7, 1.69e-7, 4.30e-8], [3.15e-2, 2.23e-2, 1.58e-2, 1.11e-2, 7.81e-3], l2b, h1b),
                ],
                cell_tol: Some(0.10),
                cell_info_tol: 0.10,
            }
        }
        4 => TableSpec {
            id,
            title: "smooth data (a), t = 0.1, lumped mass",
            plan: plan_for(4, 2, Scheme::Lumped, "a", &[0.1, 0.5, 0.9], &[0.1]),
            rows: vec![
                row(0.1, 0.1, [9.25e-4, 2.44e-4, 6.25e-5, 1.56e-5, 3.85e-6], [3.27e-2, 1.66e-2, 8.40e-3, 4.21e-3, 2.11e-3], Band::Around(4.01, 0.1), Band::Around(1.99, 0.1)),
                row(0.5, 0.1, [1.45e-3, 3.84e-4, 9.78e-5, 2.41e-5, 5.93e-6], [5.17e-2, 2.64e-2, 1.33e-2, 6.67e-3, 3.33e-3], Band::Around(4.02, 0.1), Band::Around(1.99, 0.1)),
                row(0.9, 0.1, [1.88e-3, 4.53e-4, 1.13e-4, 2.82e-5, 7.06e-6], [6.79e-2, 3.43e-2, 1.73e-2, 8.63e-3, 4.31e-3], Band::Around(4.00, 0.1), Band::Around(2.00, 0.1)),
            ],
            cell_tol: Some(0.05),
            cell_info_tol: 0.05,
        },
        5 => TableSpec {
            id,
            title: "temporal error of the L1 scheme, example (c), α = 0.5, t = 0.1",
            plan: plan_for(5, 2, Scheme::Lumped, "c", &[0.5], &[0.1]),
            rows: Vec::new(),
            cell_tol: Some(0.05),
            cell_info_tol: 0.05,
        },
        6 => TableSpec {
            id,
            title: "intermediate data (b), α = 0.5, t = 0.1, lumped mass",
            plan: plan_for(6, 2, Scheme::Lumped, "b", &[0.5], &[0.1]),
            rows: vec![row(
                0.5,
                0.1,
                [3.04e-3, 8.20e-4, 2.12e-4, 5.35e-5, 1.32e-5],
                [5.91e-2, 3.09e-2, 1.56e-2, 7.88e-3, 3.93e-3],
                Band::Around(3.97, 0.1),
                Band::Around(1.98, 0.05),
            )],
            cell_tol: Some(0.05),
            cell_info_tol: 0.05,
        },
        7 => TableSpec {
            id,
            title: "nonsmooth data (c), α = 0.5, lumped mass",
            plan: plan_for(7, 2, Scheme::Lumped, "c", &[0.5], &d2_times),
            rows: vec![
                row(0.5, 0.001, [1.55e-2, 3.99e-3, 1.00e-3, 2.52e-4, 6.26e-5], [6.05e-1, 3.05e-1, 1.48e-1, 7.29e-2, 3.61e-2], Band::Around(4.01, 0.1), Band::Around(2.0, 0.05)),
                row(0.5, 0.01, [8.27e-3, 2.10e-3, 5.28e-4, 1.32e-4, 3.29e-5], [3.32e-1, 1.61e-1, 7.90e-2, 3.90e-2, 1.93e-2], Band::Around(4.01, 0.1), Band::Around(2.0, 0.05)),
                row(0.5, 0.1, [2.12e-3, 5.36e-4, 1.34e-4, 3.36e-5, 8.43e-6], [8.23e-2, 4.01e-2, 1.96e-2, 9.72e-3, 4.84e-3], Band::Around(3.99, 0.1), Band::Around(2.0, 0.05)),
            ],
            cell_tol: Some(0.05),
            cell_info_tol: 0.05,
        },
        8 => {
            let mut plan = plan_for(8, 2, Scheme::Standard, "d", &[0.5], &d2_times);
            plan.normalize = false;
            let h1b = sig3(1.45, 1.46);
            let mut rows = vec![
                row(0.5, 0.001, [5.37e-2, 1.56e-2, 4.40e-3, 1.23e-3, 3.41e-4], [2.68e0, 1.76e0, 1.20e0, 8.21e-1, 5.68e-1], sig3(3.57, 3.77), h1b),
                row(0.5, 0.01, [2.26e-2, 6.20e-3, 1.67e-3, 4.46e-4, 1.19e-4], [9.36e-1, 5.90e-1, 3.92e-1, 2.65e-1, 1.84e-1], sig3(3.57, 3.77), h1b),
                row(0.5, 0.1, [8.33e-3, 2.23e-3, 5.90e-3, 1.55e-3, 4.10e-4], [3.08e-1, 1.91e-1, 1.26e-1, 8.44e-2, 5.83e-2], sig3(3.57, 3.77), h1b),
            ];
            rows[2].excluded_l2 = &[2, 3];
            TableSpec {
                id,
                title: "standard FEM, curve measure on the boundary of [1/4,3/4]^2",
                plan,
                rows,
                cell_tol: None,
                cell_info_tol: 0.10,
            }
        }
        9 => {
            let mut plan = plan_for(9, 2, Scheme::Lumped, "d", &[0.5], &d2_times);
            plan.normalize = false;
            let (l2b, h1b) = (sig3(2.75, 2.79), sig3(1.41, 1.43));
            TableSpec {
                id,
                title: "lumped mass FEM, curve measure on the boundary of [1/4,3/4]^2",
                plan,
                rows: vec![
                    row(0.5, 0.001, [1.98e-1, 7.95e-2, 3.00e-2, 1.09e-2, 3.95e-3], [5.56e0, 4.06e0, 2.83e0, 2.02e0, 1.41e0], l2b, h1b),
                    row(0.5, 0.01, [6.61e-2, 2.56e-2, 9.51e-3, 3.47e-3, 1.25e-3], [1.84e0, 1.30e0, 9.10e-1, 6.40e-1, 4.47e-1], l2b, h1b),
                    row(0.5, 0.1, [2.15e-2, 8.13e-3, 3.01e-3, 1.09e-3, 3.95e-4], [5.87e-1, 4.14e-1, 2.88e-1, 2.03e-1, 1.41e-1], l2b, h1b),
                ],
                cell_tol: None,
                cell_info_tol: 0.10,
            }
        }
        _ => return Err(Error::Domain(format!("table id must be 1..=9, got {id}"))),
    };
    Ok(spec)
}

/// Reference Table 5 values: (τ, L2 row, H1 row) at h = 1/8 … 1/128.
pub const TABLE5_GOLDEN: [(f64, [f64; 5], [f64; 5]); 2] = [
    (1e-2, [2.03e-3, 2.01e-3, 2.00e-3, 2.00e-3, 2.00e-3], [9.45e-3, 9.17e-3, 9.10e-3, 9.08e-3, 9.07e-3]),
    (1e-4, [1.81e-5, 1.79e-5, 1.79e-5, 1.79e-5, 1.79e-5], [8.47e-5, 8.22e-5, 8.15e-5, 8.13e-5, 8.13e-5]),
];

/// Runs a table and compares it with the reference values. `levels`
/// optionally restricts the mesh levels (cells outside are skipped).
pub fn reproduce_table(id: u32, output_dir: &Path) -> Result<TableReport> {
    reproduce_table_levels(id, output_dir, None)
}

pub fn reproduce_table_levels(id: u32, output_dir: &Path, levels: Option<&[u32]>) -> Result<TableReport> {
    let mut spec = table_spec(id)?;
    spec.plan.output_dir = output_dir.to_path_buf();
    if let Some(l) = levels {
        spec.plan.levels = l.to_vec();
    }
    if id == 5 {
        return reproduce_table5(&spec);
    }
    let outcome = run_plan(&spec.plan)?;
    let mut checks = Vec::new();
    let check = |name: String, expected: String, observed: f64, pass: bool, informational: bool| CheckResult {
        name,
        expected,
        observed,
        pass,
        informational,
    };
    let all_levels: Vec<u32> = (3..=7).collect();
    for g in &spec.rows {
        let Some(series) = outcome
            .table
            .series
            .iter()
            .find(|s| s.records.first().is_some_and(|r| r.alpha == g.alpha && r.t == g.t))
        else {
            continue;
        };
        for r in &series.records {
            let k = spec
                .plan
                .levels
                .iter()
                .copied()
                .find(|&k| (spec.plan.cells(k) as f64 * r.h - 1.0).abs() < 1e-9)
                .unwrap_or(0);
            let Some(col) = all_levels.iter().position(|&x| x == k) else { continue };
            for (norm, want, got) in [("L2", g.l2[col], r.l2_error), ("H1", g.h1[col], r.h1_error)] {
                let excluded = norm == "L2" && g.excluded_l2.contains(&col);
                let (tol, info) = match spec.cell_tol {
                    Some(t) if !excluded => (t, false),
                    _ => (spec.cell_info_tol, true),
                };
                let rel = (got - want).abs() / want;
                checks.push(check(
                    format!("α={} t={} k={k} {norm} cell", g.alpha, g.t),
                    format!("{want:.3e} ± {:.0}%{}", tol * 100.0, if excluded { " (excluded: suspected typo)" } else { "" }),
                    got,
                    rel <= tol,
                    info,
                ));
            }
        }
        if let Some(q) = series.summary_ratio_l2() {
            checks.push(check(
                format!("α={} t={} L2 ratio", g.alpha, g.t),
                g.ratio_l2.describe(),
                q,
                g.ratio_l2.contains(q),
                false,
            ));
        }
        if let Some(q) = series.summary_ratio_h1() {
            checks.push(check(
                format!("α={} t={} H1 ratio", g.alpha, g.t),
                g.ratio_h1.describe(),
                q,
                g.ratio_h1.contains(q),
                false,
            ));
        }
    }
    if id == 7 {
        // errors decrease as t grows, at every mesh size
        let by_t: Vec<&crate::error_analysis::ConvergenceSeries> = spec
            .rows
            .iter()
            .filter_map(|g| outcome.table.series.iter().find(|s| s.records.first().is_some_and(|r| r.t == g.t)))
            .collect();
        if by_t.len() == 3 {
            for i in 0..by_t[0].records.len() {
                let e: Vec<f64> = by_t.iter().filter_map(|s| s.records.get(i).map(|r| r.l2_error)).collect();
                let monotone = e.windows(2).all(|w| w[1] < w[0]);
                checks.push(check(
                    format!("h={:.4} L2 decreases with t", by_t[0].records[i].h),
                    "t=1e-3 > 1e-2 > 1e-1".into(),
                    e.last().copied().unwrap_or(f64::NAN),
                    monotone,
                    false,
                ));
            }
        }
    }
    let report = TableReport {
        id,
        title: spec.title.into(),
        checks,
        table: outcome.table,
        files: outcome.files,
        failures: outcome.failures,
    };
    write_report(report, &spec.plan)
}

fn write_report(mut report: TableReport, plan: &ExperimentPlan) -> Result<TableReport> {
    let dir = resolve_output_dir(&plan.output_dir).join(&plan.name);
    fs::create_dir_all(&dir)?;
    let p = dir.join(format!("{}_report.md", plan.name));
    fs::write(&p, report.to_markdown())?;
    report.files.push(p);
    Ok(report)
}

fn reproduce_table5(spec: &TableSpec) -> Result<TableReport> {
    let v = InitialDatum::NonsmoothC;
    let taus: Vec<f64> = TABLE5_GOLDEN.iter().map(|g| g.0).collect();
    let all_levels: Vec<u32> = (3..=7).collect();
    let per_level = par::map_slice(&spec.plan.levels, |&k| -> Result<_> {
        let mesh = build_mesh(2, 1 << k, SpacingRule::Standard)?;
        temporal_refinement_study(&v, &mesh, 0.5, 0.1, &taus)
    });
    let mut checks = Vec::new();
    let mut failures = Vec::new();
    let mut csv = String::from("tau,h,l2,h1\n");
    let mut l2_by_tau: Vec<Vec<f64>> = vec![Vec::new(); taus.len()];
    for (&k, res) in spec.plan.levels.iter().zip(per_level) {
        let recs = match res {
            Ok(r) => r,
            Err(e) => {
                failures.push(format!("level {k}: {e}"));
                continue;
            }
        };
        let col = all_levels.iter().position(|&x| x == k);
        for (i, r) in recs.iter().enumerate() {
            let _ = writeln!(csv, "{},{:.10e},{:.6e},{:.6e}", r.tau, r.h, r.l2, r.h1);
            l2_by_tau[i].push(r.l2);
            let Some(col) = col else { continue };
            let (tau, l2, h1) = TABLE5_GOLDEN[i];
            for (norm, want, got, info) in [("L2", l2[col], r.l2, false), ("H1", h1[col], r.h1, true)] {
                let rel = (got - want).abs() / want;
                checks.push(CheckResult {
                    name: format!("tau={tau:e} k={k} {norm}"),
                    expected: format!("{want:.3e} ± 5%"),
                    observed: got,
                    pass: rel <= 0.05,
                    informational: info,
                });
            }
        }
    }
    // replacement for the unreproduced τ = 1e−6 row: first-order scaling in τ
    if let (Some(a), Some(b)) = (l2_by_tau[0].last(), l2_by_tau[1].last()) {
        let slope = (a / b).log10() / (taus[0] / taus[1]).log10();
        checks.push(CheckResult {
            name: "slope of L2 difference in log tau (finest h)".into(),
            expected: Band::Around(1.0, 0.1).describe(),
            observed: slope,
            pass: Band::Around(1.0, 0.1).contains(slope),
            informational: false,
        });
    }
    let dir = resolve_output_dir(&spec.plan.output_dir).join(&spec.plan.name);
    fs::create_dir_all(&dir)?;
    let p = dir.join("table5.csv");
    fs::write(&p, csv)?;
    let report = TableReport {
        id: 5,
        title: spec.title.into(),
        checks,
        table: ConvergenceTable::default(),
        files: vec![p],
        failures,
    };
    write_report(report, &spec.plan)
}
