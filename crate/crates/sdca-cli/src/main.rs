//! Benchmark CLI: runs configured experiments, summarizes output bundles,
//! verifies weight-schedule conditions, and generates synthetic datasets.
//!
//! Exit codes: 0 on success, 1 on configuration errors, 2 on runtime
//! failures.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sdca::bench::{format_summary, run_experiment, summarize, ExperimentConfig};
use sdca::data::{libsvm_to_string, write_libsvm};
use sdca::models::synth_spiked_gaussian;
use sdca::vector::Vector;
use sdca::weights::{verify_conditions, WeightSchedule};

#[derive(Parser)]
#[command(
    name = "sdca-bench",
    about = "Stochastic DC optimization benchmark runner",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config file.
    Run {
        /// Path to the experiment config (see configs/ for templates).
        config: PathBuf,
    },
    /// Recompute and print the summary table of an existing output bundle.
    Summarize {
        /// Bundle directory produced by `run`.
        dir: PathBuf,
    },
    /// Numerically check the admissibility conditions of a weight schedule.
    ///
    /// Schedule specs: `constant`, `power:<exponent>`, `subexp:<a>:<alpha>`.
    VerifySchedule {
        /// Schedule spec string.
        spec: String,
        /// Horizon K for the finite-horizon checks.
        #[arg(long, default_value_t = 100_000)]
        horizon: usize,
        /// Optional CSV output path for the per-k report rows.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic spiked-Gaussian dataset in LIBSVM format.
    GenData {
        /// Output path for the LIBSVM text file.
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        dim: usize,
        #[arg(long, default_value_t = 20_000)]
        count: usize,
        #[arg(long, default_value_t = 5.0)]
        spike_strength: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn parse_schedule(spec: &str) -> Result<WeightSchedule, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        ["constant"] => Ok(WeightSchedule::constant()),
        ["power", e] => {
            let exponent: f64 = e.parse().map_err(|_| format!("bad exponent '{e}'"))?;
            WeightSchedule::power(exponent).map_err(|err| err.to_string())
        }
        ["subexp", a, e] => {
            let base: f64 = a.parse().map_err(|_| format!("bad base '{a}'"))?;
            let exponent: f64 = e.parse().map_err(|_| format!("bad exponent '{e}'"))?;
            WeightSchedule::sub_exponential(base, exponent).map_err(|err| err.to_string())
        }
        _ => Err(format!(
            "unrecognized schedule '{spec}' (expected constant | power:<e> | subexp:<a>:<alpha>)"
        )),
    }
}

fn cmd_run(config_path: &PathBuf) -> ExitCode {
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read config {}: {e}", config_path.display());
            return ExitCode::from(1);
        }
    };
    let config = match ExperimentConfig::from_json(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid config: {e}");
            return ExitCode::from(1);
        }
    };
    match run_experiment(&config) {
        Ok(bundle) => {
            println!(
                "experiment complete; reference value {:.9e}",
                bundle.reference_value
            );
            for warning in &bundle.warnings {
                eprintln!("warning: {warning}");
            }
            print!("{}", format_summary(&bundle.summary));
            println!("artifacts written to {}", bundle.output_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("experiment failed: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(2))
        }
    }
}

fn cmd_summarize(dir: &PathBuf) -> ExitCode {
    match summarize(dir) {
        Ok(summary) => {
            print!("{}", format_summary(&summary));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("summarize failed: {e}");
            ExitCode::from(u8::try_from(e.exit_code()).unwrap_or(2))
        }
    }
}

fn cmd_verify_schedule(spec: &str, horizon: usize, out: Option<&PathBuf>) -> ExitCode {
    let schedule = match parse_schedule(spec) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    let report = match verify_conditions(schedule, horizon, &[0.5, 0.6, 1.0]) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(1);
        }
    };
    println!("schedule: {spec}  horizon: {horizon}");
    println!(
        "A_K = {:.6e}   growth A_K/A_(K/2) = {:.4}   divergence: {}",
        report.a_final,
        report.a_growth,
        verdict(report.divergence_ok)
    );
    println!(
        "gamma estimate = {:.4} (branch gamma > 1/2: {})",
        report.gamma_estimate,
        verdict(report.gamma_branch_ok)
    );
    for (gamma, n) in &report.smallest_n {
        println!("  smallest N for gamma = {gamma:.4}: {n:.4}");
    }
    println!(
        "series partial sum = {:.6}   tail ratio = {:.4}   series: {}",
        report.series_partial_sum,
        report.series_tail_ratio,
        verdict(report.series_ok)
    );
    println!(
        "quotient deviation = {:.5} (K/2) / {:.5} (K)   quotient branch: {}",
        report.quotient_dev_half,
        report.quotient_dev_full,
        verdict(report.quotient_ok)
    );
    println!("beta log-log slope = {:.4}", report.beta_loglog_slope);
    println!(
        "verdict: {} (consistent with the admissibility conditions up to K = {horizon})",
        if report.admissible { "ADMISSIBLE" } else { "NOT ADMISSIBLE" }
    );
    if let Some(path) = out {
        let file = match fs::File::create(path) {
            Ok(f) => f,
            Err(e) => {
                eprintln!("cannot create {}: {e}", path.display());
                return ExitCode::from(2);
            }
        };
        if let Err(e) = report.write_csv(file) {
            eprintln!("cannot write report: {e}");
            return ExitCode::from(2);
        }
        println!("report rows written to {}", path.display());
    }
    ExitCode::SUCCESS
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "not satisfied"
    }
}

fn cmd_gen_data(
    out: &PathBuf,
    dim: usize,
    count: usize,
    spike_strength: f64,
    seed: u64,
) -> ExitCode {
    let mut dir = vec![0.0; dim];
    dir[0] = 1.0;
    let spiked = match synth_spiked_gaussian(dim, &Vector::from_vec(dir), spike_strength, count, seed)
    {
        Ok(s) => s,
        Err(e) => {
            eprintln!("generation failed: {e}");
            return ExitCode::from(1);
        }
    };
    let file = match fs::File::create(out) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("cannot create {}: {e}", out.display());
            return ExitCode::from(2);
        }
    };
    if let Err(e) = write_libsvm(&spiked.dataset, file) {
        eprintln!("cannot write dataset: {e}");
        return ExitCode::from(2);
    }
    let meta = serde_json::json!({
        "dim": dim,
        "count": count,
        "spike_strength": spike_strength,
        "seed": seed,
        "empirical_top_eigenvector": spiked.empirical_top.as_slice(),
        "empirical_top_eigenvalue": spiked.empirical_top_eigenvalue,
        "bytes": libsvm_to_string(&spiked.dataset).len(),
    });
    let meta_path = out.with_extension("meta.json");
    if let Err(e) = fs::write(&meta_path, serde_json::to_string_pretty(&meta).unwrap()) {
        eprintln!("cannot write metadata: {e}");
        return ExitCode::from(2);
    }
    println!(
        "wrote {count} rows to {} (metadata in {})",
        out.display(),
        meta_path.display()
    );
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are configuration errors (exit 1); --help and
            // --version print normally.
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match &cli.command {
        Command::Run { config } => cmd_run(config),
        Command::Summarize { dir } => cmd_summarize(dir),
        Command::VerifySchedule { spec, horizon, out } => {
            cmd_verify_schedule(spec, *horizon, out.as_ref())
        }
        Command::GenData {
            out,
            dim,
            count,
            spike_strength,
            seed,
        } => cmd_gen_data(out, *dim, *count, *spike_strength, *seed),
    }
}
