use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ihpe_cli::commands;
use ihpe_cli::{exit, CliError, LoadedConfig, SolveArgs};

#[derive(Debug, Parser)]
#[command(name = "ihpe", version, about = "Inertial relaxed HPE solvers, sweeps and trace certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print β′, τ, η, q(α) and the energy constant for (σ, β) pairs.
    Params {
        #[arg(long = "sigma")]
        sigmas: Vec<f64>,
        #[arg(long = "beta")]
        betas: Vec<f64>,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        /// Emit the τ(σ, β) curve instead of a table.
        #[arg(long)]
        curve: bool,
        /// Write `params.csv` or `tau_curve.csv` here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run one configured solve and write its trace, summary and bound report.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Slack on the relative error criterion.
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Run the `[sweep]` grid of a config in parallel.
    Bench {
        #[arg(long)]
        config: PathBuf,
        /// Write `bench.csv` here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        tol: Option<f64>,
    },
    /// Re-check a saved JSONL trace.
    Certify {
        #[arg(long)]
        trace: PathBuf,
        /// Config of the run; supplies operator data for d₀ and consistency checks.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        tol: Option<f64>,
    },
}

fn emit(out: Option<&Path>, file: &str, text: &str) -> Result<(), CliError> {
    match out {
        None => {
            print!("{text}");
            Ok(())
        }
        Some(dir) => {
            fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.display().to_string(), source })?;
            let path = dir.join(file);
            fs::write(&path, text).map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            eprintln!("wrote {}", path.display());
            Ok(())
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Params { sigmas, betas, alpha, curve, out } => {
            if curve {
                emit(out.as_deref(), "tau_curve.csv", &commands::tau_curve_csv()?)?;
            } else {
                let rows = commands::params_table(&sigmas, &betas, alpha)?;
                emit(out.as_deref(), "params.csv", &commands::params_csv(&rows)?)?;
            }
            Ok(exit::OK)
        }
        Command::Solve { config, out, seed, tol } => {
            let cfg = LoadedConfig::from_path(&config)?;
            let s = commands::solve(&cfg, &SolveArgs { out, seed, tol })?;
            println!("{}", s.label);
            println!("  verdict        {:?} after {} iterations", s.verdict, s.iterations);
            println!("  final ‖v‖, ε   {:e}, {:e}", s.final_norm_v, s.final_eps);
            println!("  ergodic ‖v‖, ε {:e}, {:e}", s.final_norm_v_a, s.final_eps_a);
            println!("  λ̲              {}", s.lambda_floor);
            if let Some(b) = s.iteration_budget {
                println!("  bound budget   {b} iterations");
            }
            if let Some(u) = s.worst_bound_utilization {
                println!("  bound usage    {u:.4} (violations: {})", s.bound_violations);
            }
            for name in s.failed_checks() {
                println!("  FAILED check   {name}");
            }
            for f in &s.files {
                println!("  wrote          {}", f.display());
            }
            Ok(s.exit_code())
        }
        Command::Bench { config, out, seed, tol } => {
            let cfg = LoadedConfig::from_path(&config)?;
            let rows = commands::bench(&cfg, seed, tol)?;
            emit(out.as_deref(), "bench.csv", &commands::bench_csv(&rows)?)?;
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            eprintln!("{} grid points, {failed} failed", rows.len());
            Ok(exit::OK)
        }
        Command::Certify { trace, config, tol } => {
            let cfg = config.as_deref().map(LoadedConfig::from_path).transpose()?;
            let rep = commands::certify(&trace, cfg.as_ref(), tol)?;
            for w in &rep.warnings {
                eprintln!("warning: {w}");
            }
            for m in &rep.mismatches {
                println!("MISMATCH {m}");
            }
            for c in &rep.checks {
                let tag = match (&c.skipped, c.passed) {
                    (Some(_), _) => "SKIP",
                    (None, true) => "PASS",
                    (None, false) => "FAIL",
                };
                let at = c.first_failure.map(|k| format!(" (first failure at k = {k})")).unwrap_or_default();
                println!("{tag} {}{at}", c.name);
            }
            if let Some(b) = &rep.bounds {
                let tag = if b.passed() { "PASS" } else { "FAIL" };
                println!("{tag} rate bounds (worst utilization {:.4})", b.worst_utilization());
                for v in b.violations.iter().take(5) {
                    println!("  {} at k = {}: {:e} > {:e}", v.bound, v.k, v.observed, v.limit);
                }
            }
            println!("{}", if rep.passed() { "certified" } else { "NOT certified" });
            Ok(rep.exit_code())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
