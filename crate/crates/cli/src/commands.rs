//! The four subcommands.

use std::cmp::Ordering;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use ihpe_core::bounds::{evaluate_bounds, iteration_budget, BOUND_REL_TOL};
use ihpe_core::hpe::checks::{all_checks, CheckOutcome};
use ihpe_core::hpe::{run, DEFAULT_TOL, TRACE_SCHEMA_VERSION};
use ihpe_core::params::{beta_prime, tau_of};
use ihpe_core::{
    AlphaSchedule, BoundReport, HpeParams, InnerSolver, Instance, IterationRecord, RunOptions, StoppingRule,
    TestProblem, Trace, TraceHeader, Verdict,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{build_params, LoadedConfig};
use crate::{exit, CliError};

/// Relative agreement required between a trace header and a rebuilt config.
const CONSISTENCY_TOL: f64 = 1e-9;

/// σ values of the `params --curve` table.
pub const CURVE_SIGMAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 0.99];

// ---------------------------------------------------------------- params

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamRow {
    pub alpha: f64,
    pub sigma: f64,
    pub beta: f64,
    pub beta_prime: f64,
    pub tau: f64,
    pub eta: f64,
    pub q_alpha: f64,
    pub energy_constant: f64,
}

/// Derived parameters for every `(σ, β)` pair, in argument order.
pub fn params_table(sigmas: &[f64], betas: &[f64], alpha: f64) -> Result<Vec<ParamRow>, CliError> {
    if sigmas.is_empty() || betas.is_empty() {
        return Err(CliError::Usage("params needs at least one --sigma and one --beta (or --curve)".into()));
    }
    let mut rows = Vec::with_capacity(sigmas.len() * betas.len());
    for &sigma in sigmas {
        for &beta in betas {
            let p = HpeParams::from_beta(alpha, sigma, beta)?;
            rows.push(ParamRow {
                alpha,
                sigma,
                beta,
                beta_prime: p.beta_prime,
                tau: p.tau,
                eta: p.eta,
                q_alpha: p.q_alpha,
                energy_constant: p.energy_constant(),
            });
        }
    }
    Ok(rows)
}

pub fn params_csv(rows: &[ParamRow]) -> Result<String, CliError> {
    to_csv(rows)
}

/// `τ(σ, β)` over `β = 0.01, …, 0.99` for each σ in [`CURVE_SIGMAS`].
pub fn tau_curve_csv() -> Result<String, CliError> {
    #[derive(Serialize)]
    struct Point {
        sigma: f64,
        beta: f64,
        beta_prime: f64,
        tau: f64,
    }
    let mut points = Vec::new();
    for sigma in CURVE_SIGMAS {
        for i in 1..100 {
            let beta = i as f64 / 100.0;
            points.push(Point { sigma, beta, beta_prime: beta_prime(sigma, beta)?, tau: tau_of(sigma, beta)? });
        }
    }
    to_csv(&points)
}

// ---------------------------------------------------------------- solve

#[derive(Debug, Clone, Default)]
pub struct SolveArgs {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub label: String,
    pub verdict: Verdict,
    pub iterations: usize,
    pub final_norm_v: f64,
    pub final_eps: f64,
    pub final_norm_v_a: f64,
    pub final_eps_a: f64,
    pub lambda_floor: f64,
    pub d0: Option<f64>,
    pub max_error_ratio: f64,
    /// Iterations the pointwise bounds promise for the configured `(ρ, ε̂)`.
    pub iteration_budget: Option<u64>,
    pub worst_bound_utilization: Option<f64>,
    pub bound_violations: usize,
    pub checks: Vec<CheckOutcome>,
    pub files: Vec<PathBuf>,
}

impl SolveSummary {
    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }

    pub fn exit_code(&self) -> i32 {
        if !self.failed_checks().is_empty() || self.bound_violations > 0 {
            exit::VIOLATION
        } else if matches!(self.verdict, Verdict::CapReached { .. }) {
            exit::CAP_REACHED
        } else {
            exit::OK
        }
    }
}

struct RunResult {
    params: HpeParams,
    problem: TestProblem,
    label: String,
    verdict: Verdict,
    records: Vec<IterationRecord>,
    lambda_floor: f64,
    checks: Vec<CheckOutcome>,
    bounds: Option<BoundReport>,
}

fn label_for(cfg: &LoadedConfig, problem: &TestProblem) -> String {
    let seed = problem.seed.map(|s| format!(" seed={s}")).unwrap_or_default();
    format!("{} n={}{seed} {}", problem.kind, problem.dim(), cfg.config.instance.kind)
}

fn run_once(cfg: &LoadedConfig, params: HpeParams, seed: Option<u64>, tol: f64) -> Result<RunResult, CliError> {
    let c = &cfg.config;
    let problem = cfg.problem(seed)?;
    let mut solver = Instance::build(&problem, &c.instance, params.sigma)?;
    let lambda_floor = solver.lambda_floor();
    let opts = RunOptions { tol, reference: problem.known_solution.clone(), enforce_certificate: true };
    let (state, verdict) = run(&problem.z0, &mut solver, &params, &c.stopping, &opts)?;
    let d0 = problem.known_d0;
    let checks = all_checks(&state.trace, &params, d0, tol);
    let bounds = match d0 {
        Some(d0) if c.output.check_bounds => {
            Some(evaluate_bounds(&state.trace, d0, lambda_floor, &params, BOUND_REL_TOL)?)
        }
        _ => None,
    };
    Ok(RunResult {
        label: label_for(cfg, &problem),
        params,
        problem,
        verdict,
        records: state.trace,
        lambda_floor,
        checks,
        bounds,
    })
}

fn out_dir(cfg: &LoadedConfig, out: Option<&Path>) -> PathBuf {
    match (out, &cfg.config.output.dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(d)) => cfg.base_dir.join(d),
        (None, None) => PathBuf::from("ihpe-out"),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| CliError::io(path, e))
}

fn write_string(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(path, e))
}

/// Runs one configured solve and writes `<stem>.jsonl`, `<stem>.csv`,
/// `<stem>.summary.json` and, when `d₀` is known, `<stem>.bounds.json`.
pub fn solve(cfg: &LoadedConfig, args: &SolveArgs) -> Result<SolveSummary, CliError> {
    let params = cfg.config.params.build()?;
    let tol = args.tol.unwrap_or(DEFAULT_TOL);
    let res = run_once(cfg, params, args.seed, tol)?;

    let dir = out_dir(cfg, args.out.as_deref());
    fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let stem = &cfg.config.output.stem;
    let header = TraceHeader {
        schema_version: TRACE_SCHEMA_VERSION,
        params: res.params,
        lambda_floor: res.lambda_floor,
        tol,
        d0: res.problem.known_d0,
        label: res.label.clone(),
    };
    let trace = Trace::new(header, res.records);
    let mut files = Vec::new();

    let jsonl = dir.join(format!("{stem}.jsonl"));
    let mut w = create(&jsonl)?;
    trace.write_jsonl(&mut w)?;
    w.flush().map_err(|e| CliError::io(&jsonl, e))?;
    files.push(jsonl);

    let csv_path = dir.join(format!("{stem}.csv"));
    trace.write_csv(create(&csv_path)?)?;
    files.push(csv_path);

    if let Some(rep) = &res.bounds {
        let p = dir.join(format!("{stem}.bounds.json"));
        write_string(&p, &rep.to_json())?;
        files.push(p);
    }

    let summary_path = dir.join(format!("{stem}.summary.json"));
    files.push(summary_path.clone());
    let last = trace.records.last().expect("the driver runs at least one step");
    let stop: &StoppingRule = &cfg.config.stopping;
    let summary = SolveSummary {
        label: res.label,
        verdict: res.verdict,
        iterations: res.verdict.iterations(),
        final_norm_v: last.norm_v,
        final_eps: last.eps,
        final_norm_v_a: last.norm_v_a,
        final_eps_a: last.eps_a,
        lambda_floor: res.lambda_floor,
        d0: res.problem.known_d0,
        max_error_ratio: trace.records.iter().map(|r| r.error_ratio).fold(0.0, f64::max),
        iteration_budget: res
            .problem
            .known_d0
            .and_then(|d0| iteration_budget(stop.rho, stop.eps_hat, d0, res.lambda_floor, &res.params).ok()),
        worst_bound_utilization: res.bounds.as_ref().map(BoundReport::worst_utilization),
        bound_violations: res.bounds.as_ref().map_or(0, |b| b.violations.len()),
        checks: res.checks,
        files,
    };
    write_string(&summary_path, &to_json(&summary))?;
    Ok(summary)
}

// ---------------------------------------------------------------- bench

/// One grid point of a sweep; failures are recorded in `status`/`error`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub alpha: f64,
    pub sigma: f64,
    pub beta: Option<f64>,
    pub tau: Option<f64>,
    pub seed: u64,
    pub status: String,
    pub iterations: Option<usize>,
    pub final_norm_v: Option<f64>,
    pub final_eps: Option<f64>,
    pub worst_bound_utilization: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    alpha: f64,
    sigma: f64,
    /// `β` or, with `by_tau`, `τ`.
    step: f64,
    by_tau: bool,
    seed: u64,
}

impl Cell {
    fn order(&self, other: &Self) -> Ordering {
        self.alpha
            .total_cmp(&other.alpha)
            .then(self.sigma.total_cmp(&other.sigma))
            .then(self.step.total_cmp(&other.step))
            .then(self.seed.cmp(&other.seed))
    }
}

fn grid<T: Copy>(name: &str, list: &Option<Vec<T>>, base: Option<T>) -> Result<Vec<T>, CliError> {
    match (list, base) {
        (Some(v), _) if v.is_empty() => Err(CliError::Usage(format!("[sweep] list `{name}` is empty"))),
        (Some(v), _) => Ok(v.clone()),
        (None, Some(b)) => Ok(vec![b]),
        (None, None) => Err(CliError::Usage(format!("[sweep] has no `{name}` list and [params] has no default"))),
    }
}

fn cells(cfg: &LoadedConfig, seed: Option<u64>) -> Result<Vec<Cell>, CliError> {
    let c = &cfg.config;
    let sweep = c.sweep.as_ref().ok_or_else(|| CliError::Usage("bench needs a [sweep] section".into()))?;
    let p = &c.params;
    let by_tau = match (&sweep.beta, &sweep.tau) {
        (Some(_), Some(_)) => return Err(CliError::Usage("[sweep] takes `beta` or `tau`, not both".into())),
        (Some(_), None) => false,
        (None, Some(_)) => true,
        (None, None) => p.beta.is_none(),
    };
    let alphas = grid("alpha", &sweep.alpha, Some(p.alpha))?;
    let sigmas = grid("sigma", &sweep.sigma, Some(p.sigma))?;
    let steps = if by_tau { grid("tau", &sweep.tau, p.tau)? } else { grid("beta", &sweep.beta, p.beta)? };
    let seeds = grid("seed", &sweep.seed, Some(seed.or(c.problem.seed).unwrap_or(0)))?;

    let mut out = Vec::with_capacity(alphas.len() * sigmas.len() * steps.len() * seeds.len());
    for &alpha in &alphas {
        for &sigma in &sigmas {
            for &step in &steps {
                for &seed in &seeds {
                    out.push(Cell { alpha, sigma, step, by_tau, seed });
                }
            }
        }
    }
    out.sort_by(Cell::order);
    out.dedup_by(|a, b| a.order(b) == Ordering::Equal);
    Ok(out)
}

fn bench_cell(cfg: &LoadedConfig, cell: Cell, tol: f64) -> BenchRow {
    let (beta, tau) = if cell.by_tau { (None, Some(cell.step)) } else { (Some(cell.step), None) };
    let mut row = BenchRow {
        alpha: cell.alpha,
        sigma: cell.sigma,
        beta,
        tau,
        seed: cell.seed,
        status: "error".into(),
        iterations: None,
        final_norm_v: None,
        final_eps: None,
        worst_bound_utilization: None,
        error: None,
    };
    let schedule: AlphaSchedule = cfg.config.params.schedule;
    let outcome = build_params(cell.alpha, cell.sigma, beta, tau, schedule)
        .and_then(|params| run_once(cfg, params, Some(cell.seed), tol));
    match outcome {
        Err(e) => {
            if e.exit_code() == exit::VIOLATION {
                row.status = "violation".into();
            }
            row.error = Some(e.to_string());
        }
        Ok(res) => {
            row.tau = Some(res.params.tau);
            let last = res.records.last().expect("the driver runs at least one step");
            row.iterations = Some(res.verdict.iterations());
            row.final_norm_v = Some(last.norm_v);
            row.final_eps = Some(last.eps);
            row.worst_bound_utilization = res.bounds.as_ref().map(BoundReport::worst_utilization);
            let failed: Vec<&str> = res.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
            let bound_failed = res.bounds.as_ref().is_some_and(|b| !b.passed());
            row.status = if !failed.is_empty() || bound_failed {
                row.error = Some(if failed.is_empty() { "rate bound violated".into() } else { failed.join("; ") });
                "violation".into()
            } else {
                match res.verdict {
                    Verdict::Converged { .. } => "converged",
                    Verdict::ErgodicConverged { .. } => "ergodic_converged",
                    Verdict::CapReached { .. } => "cap_reached",
                }
                .into()
            };
        }
    }
    row
}

/// Runs every grid point of `[sweep]` in parallel. Rows come back sorted by
/// `(α, σ, β or τ, seed)` regardless of scheduling.
pub fn bench(cfg: &LoadedConfig, seed: Option<u64>, tol: Option<f64>) -> Result<Vec<BenchRow>, CliError> {
    let cells = cells(cfg, seed)?;
    let tol = tol.unwrap_or(DEFAULT_TOL);
    Ok(cells.par_iter().map(|&cell| bench_cell(cfg, cell, tol)).collect())
}

pub fn bench_csv(rows: &[BenchRow]) -> Result<String, CliError> {
    to_csv(rows)
}

// ---------------------------------------------------------------- certify

#[derive(Debug, Clone, Serialize)]
pub struct CertifyReport {
    pub label: String,
    pub steps: usize,
    pub d0: Option<f64>,
    pub checks: Vec<CheckOutcome>,
    pub bounds: Option<BoundReport>,
    /// Disagreements between the trace header and the config.
    pub mismatches: Vec<String>,
    pub warnings: Vec<String>,
}

impl CertifyReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
            && self.checks.iter().all(|c| c.passed)
            && self.bounds.as_ref().is_none_or(BoundReport::passed)
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            exit::OK
        } else {
            exit::VIOLATION
        }
    }
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= CONSISTENCY_TOL * a.abs().max(b.abs()).max(1.0)
}

/// Re-checks a saved trace offline. With a config, `d₀`, `λ̲` and the
/// parameters are rebuilt from the operator data and must match the header.
pub fn certify(trace_path: &Path, cfg: Option<&LoadedConfig>, tol: Option<f64>) -> Result<CertifyReport, CliError> {
    let file = File::open(trace_path).map_err(|e| CliError::io(trace_path, e))?;
    let trace = Trace::read_jsonl(BufReader::new(file))?;
    let mut report = CertifyReport {
        label: String::new(),
        steps: trace.records.len(),
        d0: None,
        checks: Vec::new(),
        bounds: None,
        mismatches: Vec::new(),
        warnings: Vec::new(),
    };
    let Some(header) = trace.header else {
        report.warnings.push("trace is empty; nothing to certify".into());
        return Ok(report);
    };
    report.label = header.label.clone();
    if trace.records.is_empty() {
        report.warnings.push("trace has a header but no steps; nothing to certify".into());
        return Ok(report);
    }

    let mut d0 = header.d0;
    let mut lambda_floor = header.lambda_floor;
    if let Some(cfg) = cfg {
        let params = cfg.config.params.build()?;
        for (name, want, got) in [
            ("α", params.alpha, header.params.alpha),
            ("σ", params.sigma, header.params.sigma),
            ("τ", params.tau, header.params.tau),
        ] {
            if !close(want, got) {
                report.mismatches.push(format!("{name}: config gives {want}, trace header has {got}"));
            }
        }
        if params.schedule != header.params.schedule {
            report.mismatches.push("α schedule differs between config and trace header".into());
        }
        let seed = header.label.split_whitespace().find_map(|t| t.strip_prefix("seed=")?.parse().ok());
        let problem = cfg.problem(seed)?;
        let solver = Instance::build(&problem, &cfg.config.instance, params.sigma)?;
        let floor = solver.lambda_floor();
        if !close(floor, header.lambda_floor) {
            report.mismatches.push(format!("λ̲: config gives {floor}, trace header has {}", header.lambda_floor));
        }
        lambda_floor = floor;
        match (problem.known_d0, header.d0) {
            (Some(a), Some(b)) if !close(a, b) => {
                report.mismatches.push(format!("d₀: operator data gives {a}, trace header has {b}"));
            }
            _ => {}
        }
        d0 = problem.known_d0.or(d0);
    }
    if d0.is_none() {
        report.warnings.push("no solution distance d₀ known; distance checks and rate bounds skipped".into());
    }
    report.d0 = d0;

    let params = header.params.validate()?;
    let tol = tol.unwrap_or(header.tol);
    report.checks = all_checks(&trace.records, &params, d0, tol);
    if let Some(d0) = d0 {
        report.bounds = Some(evaluate_bounds(&trace.records, d0, lambda_floor, &params, BOUND_REL_TOL)?);
    }
    Ok(report)
}

// ---------------------------------------------------------------- helpers

fn to_csv<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report is serializable")
}
