//! Configuration-driven experiment runner: loads or generates data, runs the
//! configured algorithms over seeded trials, and writes per-trial traces,
//! aggregated gap curves, a summary table, and SVG charts into a
//! self-describing output bundle.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::algorithms::{
    run_dca, run_pss, run_sdca, Algorithm, AlgorithmConfig, AlgorithmError, FiniteSumProgram,
    RunRecord, RunRow, SdcaVariant, StepSizePolicy,
};
use crate::chart::LineChart;
use crate::data::{
    libsvm_to_string, normalize_rows, parse_libsvm, stream_shuffled, DataError, Dataset,
    LibsvmParseError,
};
use crate::models::{
    epca_reference_value, synth_spiked_gaussian, EpcaDecomposition1, EpcaDecomposition2,
    ModelError,
};
use crate::program::{empirical_objective, StochasticDcProgram};
use crate::vector::Vector;
use crate::weights::WeightSchedule;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Parse(#[from] LibsvmParseError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
}

impl BenchError {
    /// CLI exit code: 1 for configuration problems, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Json(_) | BenchError::Parse(_) => 1,
            _ => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentId {
    Exp1,
    Exp2,
    Exp3,
    Custom,
}

/// Which benchmark program an algorithm runs on.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Epca1 { lambda: f64 },
    Epca2 { smoothing: f64 },
}

impl ModelKind {
    fn build(&self, dim: usize) -> Result<Box<dyn StochasticDcProgram + Send + Sync>, BenchError> {
        match *self {
            ModelKind::Epca1 { lambda } => Ok(Box::new(EpcaDecomposition1::new(lambda, dim)?)),
            ModelKind::Epca2 { smoothing } => {
                Ok(Box::new(EpcaDecomposition2::new(smoothing, dim)?))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Synthetic {
        dim: usize,
        train: usize,
        validation: usize,
        spike_strength: f64,
    },
    Libsvm {
        path: PathBuf,
        #[serde(default = "default_validation_fraction")]
        validation_fraction: f64,
        #[serde(default)]
        dimension: Option<usize>,
    },
}

fn default_validation_fraction() -> f64 {
    0.2
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedAlgorithm {
    pub name: String,
    pub algorithm: Algorithm,
    #[serde(default = "WeightSchedule::constant")]
    pub schedule: WeightSchedule,
    pub model: ModelKind,
    /// None runs until the stream is used up.
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default = "default_subsolver_tol")]
    pub subsolver_tol: f64,
    #[serde(default)]
    pub probe_batch: Option<usize>,
}

fn default_subsolver_tol() -> f64 {
    1e-3
}

fn default_trials() -> usize {
    20
}

fn default_eval_every() -> usize {
    50
}

fn default_reference_starts() -> usize {
    10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub dataset: DatasetSource,
    /// Empty for a preset experiment id: the standard roster is filled in.
    #[serde(default)]
    pub algorithms: Vec<NamedAlgorithm>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker-thread cap for concurrent trials; None uses all cores.
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default = "default_eval_every")]
    pub eval_every: usize,
    #[serde(default = "default_reference_starts")]
    pub reference_starts: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        let mut config: ExperimentConfig = serde_json::from_str(text)?;
        if config.algorithms.is_empty() {
            config.algorithms = preset_roster(config.experiment)?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.algorithms.is_empty() {
            return Err(BenchError::Config("algorithm list is empty".into()));
        }
        if self.trials < 1 {
            return Err(BenchError::Config("trials must be >= 1".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for algo in &self.algorithms {
            if !names.insert(algo.name.clone()) {
                return Err(BenchError::Config(format!(
                    "duplicate algorithm name '{}'",
                    algo.name
                )));
            }
            algo.schedule
                .validate()
                .map_err(|e| BenchError::Config(e.to_string()))?;
        }
        Ok(())
    }
}

/// The standard experiment rosters. Recomputing variants (and the inner-DCA
/// route on the second split) are capped at 5000 iterations: their total cost
/// grows quadratically with the horizon.
pub fn preset_roster(id: ExperimentId) -> Result<Vec<NamedAlgorithm>, BenchError> {
    let epca1 = ModelKind::Epca1 { lambda: 1e-6 };
    let epca2 = ModelKind::Epca2 { smoothing: 1.1 };
    let entry = |name: &str, algorithm: Algorithm, schedule: WeightSchedule, model: ModelKind,
                 cap: Option<usize>| NamedAlgorithm {
        name: name.to_string(),
        algorithm,
        schedule,
        model,
        max_iterations: cap,
        subsolver_tol: 1e-3,
        probe_batch: None,
    };
    let constant = WeightSchedule::constant();
    let subexp = WeightSchedule::sub_exponential(5.0, 0.2)
        .map_err(|e| BenchError::Config(e.to_string()))?;
    Ok(match id {
        ExperimentId::Exp1 => vec![
            entry("sdca1", Algorithm::Sdca(SdcaVariant::Sdca1), constant, epca1, None),
            entry("sdca2", Algorithm::Sdca(SdcaVariant::Sdca2), constant, epca1, None),
            entry("sdca3", Algorithm::Sdca(SdcaVariant::Sdca3), constant, epca1, Some(5000)),
            entry("sdca4", Algorithm::Sdca(SdcaVariant::Sdca4), constant, epca1, Some(5000)),
            entry(
                "pss_constant",
                Algorithm::Pss(StepSizePolicy::Constant(0.005)),
                constant,
                epca1,
                None,
            ),
            entry(
                "pss_diminishing",
                Algorithm::Pss(StepSizePolicy::Diminishing(8.0)),
                constant,
                epca1,
                None,
            ),
        ],
        ExperimentId::Exp2 => vec![
            entry("sdca2", Algorithm::Sdca(SdcaVariant::Sdca2), constant, epca2, Some(5000)),
            entry("sdca4", Algorithm::Sdca(SdcaVariant::Sdca4), constant, epca2, Some(5000)),
        ],
        ExperimentId::Exp3 => vec![
            entry("sdca1_type1", Algorithm::Sdca(SdcaVariant::Sdca1), constant, epca1, None),
            entry("sdca1_type2", Algorithm::Sdca(SdcaVariant::Sdca1), subexp, epca1, None),
            entry(
                "sdca2_type1",
                Algorithm::Sdca(SdcaVariant::Sdca2),
                constant,
                epca2,
                Some(5000),
            ),
            entry(
                "sdca2_type2",
                Algorithm::Sdca(SdcaVariant::Sdca2),
                subexp,
                epca2,
                Some(5000),
            ),
        ],
        ExperimentId::Custom => {
            return Err(BenchError::Config(
                "custom experiments must list algorithms explicitly".into(),
            ))
        }
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryRow {
    pub name: String,
    pub final_mean_gap: f64,
    pub final_std_gap: f64,
    pub total_wall_s: f64,
    /// Wall-time ratio against the first history-averaging entry (sdca1 when
    /// present).
    pub time_ratio: f64,
    pub trials_succeeded: usize,
}

/// Aggregated gap curve for one algorithm.
#[derive(Clone, Debug)]
pub struct GapCurve {
    pub name: String,
    /// (k, mean gap, std gap, mean elapsed ms) per eval point.
    pub points: Vec<(usize, f64, f64, f64)>,
}

#[derive(Debug)]
pub struct ExperimentBundle {
    pub output_dir: PathBuf,
    pub reference_value: f64,
    pub summary: Vec<SummaryRow>,
    pub curves: Vec<GapCurve>,
    pub warnings: Vec<String>,
}

fn load_datasets(config: &ExperimentConfig) -> Result<(Dataset, Dataset), BenchError> {
    match &config.dataset {
        DatasetSource::Synthetic {
            dim,
            train,
            validation,
            spike_strength,
        } => {
            let mut dir = vec![0.0; *dim];
            dir[0] = 1.0;
            let dir = Vector::from_vec(dir);
            let train_set =
                synth_spiked_gaussian(*dim, &dir, *spike_strength, *train, config.seed)?;
            let val_set = synth_spiked_gaussian(
                *dim,
                &dir,
                *spike_strength,
                *validation,
                config.seed.wrapping_add(1_000_003),
            )?;
            Ok((train_set.dataset, val_set.dataset))
        }
        DatasetSource::Libsvm {
            path,
            validation_fraction,
            dimension,
        } => {
            let text = fs::read_to_string(path)?;
            let mut ds = parse_libsvm(&text)?;
            if let Some(dim) = dimension {
                ds = ds.with_dimension(*dim)?;
            }
            let ds = normalize_rows(&ds)?;
            Ok(ds.split_validation(*validation_fraction, config.seed))
        }
    }
}

fn run_single(
    algo: &NamedAlgorithm,
    config: &ExperimentConfig,
    train: &Dataset,
    validation: &Dataset,
    trial: usize,
) -> Result<RunRecord, BenchError> {
    let seed = config.seed.wrapping_add(trial as u64);
    let max_iter = algo.max_iterations.unwrap_or(train.len());
    let mut run_config = AlgorithmConfig::new(algo.algorithm, max_iter, seed)
        .with_schedule(algo.schedule)
        .with_subsolver_tol(algo.subsolver_tol)
        .with_eval_every(config.eval_every)
        .with_probe_batch(algo.probe_batch);
    run_config.memory_cap = max_iter;
    let prog = algo.model.build(train.dim())?;
    let stream = stream_shuffled(train, seed).cloned();
    let record = match algo.algorithm {
        Algorithm::Sdca(_) => {
            run_sdca(prog.as_ref(), &run_config, None, stream, validation.rows())?
        }
        Algorithm::Pss(_) => {
            run_pss(prog.as_ref(), &run_config, None, stream, validation.rows())?
        }
        Algorithm::Dca => {
            // Full-batch reference algorithm, synthesized into a RunRecord.
            let finite = FiniteSumProgram::new(prog.as_ref(), train.rows());
            let x0 = crate::vector::random_in_ball(
                &mut {
                    use rand::SeedableRng;
                    rand_chacha::ChaCha8Rng::seed_from_u64(seed)
                },
                train.dim(),
                1.0,
            );
            let start = std::time::Instant::now();
            let traj = run_dca(&finite, &x0, algo.subsolver_tol, max_iter);
            let elapsed = start.elapsed().as_secs_f64() * 1e3;
            let per_iter = elapsed / traj.iterates.len().max(1) as f64;
            let rows = traj
                .iterates
                .iter()
                .enumerate()
                .map(|(k, x)| RunRow {
                    k,
                    time_ms: per_iter * (k + 1) as f64,
                    val_obj: empirical_objective(prog.as_ref(), x, validation.rows()),
                    train_obj: traj.objectives[k],
                    crit_residual: f64::NAN,
                    lyapunov: f64::NAN,
                    step_norm: f64::NAN,
                    inner_iters: 0,
                    inner_residual: f64::NAN,
                })
                .collect();
            RunRecord {
                rows,
                final_iterate: traj.final_point,
                config: run_config.clone(),
                seed,
                iterations: traj.iterations,
                samples_consumed: 0,
                max_lyapunov_violation: 0.0,
                total_time_ms: elapsed,
                rho_positive: prog.rho() > 0.0,
                subsolver_warnings: traj.subsolver_warning as usize,
                iterate_trace: Vec::new(),
            }
        }
    };
    Ok(record)
}

fn trace_path(dir: &Path, name: &str, trial: usize) -> PathBuf {
    dir.join(format!("trace_{name}_t{trial:02}.csv"))
}

/// Runs the configured experiment, writing all artifacts to the output
/// directory. Individual trial failures are recorded as warnings and the
/// aggregation proceeds on the survivors.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentBundle, BenchError> {
    config.validate()?;
    let (train, validation) = load_datasets(config)?;
    fs::create_dir_all(&config.output_dir)?;

    let reference_value = epca_reference_value(
        &validation,
        config.reference_starts,
        1e-3,
        config.seed.wrapping_mul(0x9e37_79b9).wrapping_add(17),
    );

    let jobs: Vec<(usize, usize)> = (0..config.algorithms.len())
        .flat_map(|a| (0..config.trials).map(move |t| (a, t)))
        .collect();

    let run_all = || -> Vec<((usize, usize), Result<RunRecord, BenchError>)> {
        jobs.par_iter()
            .map(|&(a, t)| {
                (
                    (a, t),
                    run_single(&config.algorithms[a], config, &train, &validation, t),
                )
            })
            .collect()
    };
    let results = match config.workers {
        Some(workers) => rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| BenchError::Config(e.to_string()))?
            .install(run_all),
        None => run_all(),
    };

    let mut by_algo: Vec<Vec<Option<RunRecord>>> =
        vec![vec![None; config.trials]; config.algorithms.len()];
    let mut warnings = Vec::new();
    for ((a, t), res) in results {
        match res {
            Ok(record) => by_algo[a][t] = Some(record),
            Err(err) => warnings.push(format!(
                "trial {t} of '{}' failed: {err}",
                config.algorithms[a].name
            )),
        }
    }

    // Per-trial traces.
    for (a, algo) in config.algorithms.iter().enumerate() {
        for (t, record) in by_algo[a].iter().enumerate() {
            if let Some(record) = record {
                let file = fs::File::create(trace_path(&config.output_dir, &algo.name, t))?;
                record.write_csv(file)?;
            }
        }
    }

    // Aggregated gap curves.
    let mut curves = Vec::new();
    for (a, algo) in config.algorithms.iter().enumerate() {
        let records: Vec<&RunRecord> = by_algo[a].iter().flatten().collect();
        if records.is_empty() {
            warnings.push(format!("no surviving trials for '{}'", algo.name));
            continue;
        }
        let eval_count = records.iter().map(|r| r.rows.len()).min().unwrap();
        let mut points = Vec::with_capacity(eval_count);
        for i in 0..eval_count {
            let k = records[0].rows[i].k;
            let gaps: Vec<f64> = records
                .iter()
                .map(|r| r.rows[i].val_obj - reference_value)
                .collect();
            let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
            let var = gaps.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>()
                / gaps.len() as f64;
            let mean_time = records.iter().map(|r| r.rows[i].time_ms).sum::<f64>()
                / records.len() as f64;
            points.push((k, mean, var.sqrt(), mean_time));
        }
        curves.push(GapCurve {
            name: algo.name.clone(),
            points,
        });

        let mut w = csv::Writer::from_writer(fs::File::create(
            config.output_dir.join(format!("gap_{}.csv", algo.name)),
        )?);
        w.write_record(["k", "mean_gap", "std_gap"])?;
        for (k, mean, std, _) in &curves.last().unwrap().points {
            w.write_record(&[k.to_string(), mean.to_string(), std.to_string()])?;
        }
        w.flush()?;
    }

    // Summary table.
    let baseline_idx = config
        .algorithms
        .iter()
        .position(|a| matches!(a.algorithm, Algorithm::Sdca(SdcaVariant::Sdca1)))
        .unwrap_or(0);
    let total_time = |a: usize| -> f64 {
        by_algo[a]
            .iter()
            .flatten()
            .map(|r| r.total_time_ms)
            .sum::<f64>()
            / 1e3
    };
    let baseline_time = total_time(baseline_idx);
    let mut summary = Vec::new();
    for (a, algo) in config.algorithms.iter().enumerate() {
        let records: Vec<&RunRecord> = by_algo[a].iter().flatten().collect();
        if records.is_empty() {
            continue;
        }
        let finals: Vec<f64> = records
            .iter()
            .map(|r| r.rows.last().expect("nonempty trace").val_obj - reference_value)
            .collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        let var =
            finals.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / finals.len() as f64;
        let wall = total_time(a);
        summary.push(SummaryRow {
            name: algo.name.clone(),
            final_mean_gap: mean,
            final_std_gap: var.sqrt(),
            total_wall_s: wall,
            time_ratio: if baseline_time > 0.0 {
                wall / baseline_time
            } else {
                f64::NAN
            },
            trials_succeeded: records.len(),
        });
    }
    write_summary_csv(&config.output_dir.join("summary.csv"), &summary)?;

    // Charts: every CSV point is rendered, no resampling.
    let mut by_iter = LineChart::new("mean gap vs iteration", "iteration", "gap", true);
    let mut by_time = LineChart::new("mean gap vs time", "seconds", "gap", true);
    for curve in &curves {
        by_iter.add_series(
            &curve.name,
            curve
                .points
                .iter()
                .map(|&(k, gap, _, _)| (k as f64, gap))
                .collect(),
        );
        by_time.add_series(
            &curve.name,
            curve
                .points
                .iter()
                .map(|&(_, gap, _, ms)| (ms / 1e3, gap))
                .collect(),
        );
    }
    fs::write(config.output_dir.join("gap_vs_iteration.svg"), by_iter.to_svg())?;
    fs::write(config.output_dir.join("gap_vs_time.svg"), by_time.to_svg())?;

    // Self-describing manifest: config echo, seed, content hash of inputs.
    let content_hash = {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_string(config)?.as_bytes());
        hasher.update(libsvm_to_string(&train).as_bytes());
        hasher.update(libsvm_to_string(&validation).as_bytes());
        format!("{:x}", hasher.finalize())
    };
    let manifest = serde_json::json!({
        "config": config,
        "seed": config.seed,
        "content_hash": content_hash,
        "reference_value": reference_value,
        "train_rows": train.len(),
        "validation_rows": validation.len(),
        "warnings": warnings,
        "summary": summary,
    });
    let mut f = fs::File::create(config.output_dir.join("manifest.json"))?;
    writeln!(f, "{}", serde_json::to_string_pretty(&manifest)?)?;

    Ok(ExperimentBundle {
        output_dir: config.output_dir.clone(),
        reference_value,
        summary,
        curves,
        warnings,
    })
}

fn write_summary_csv(path: &Path, summary: &[SummaryRow]) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(fs::File::create(path)?);
    for row in summary {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Recomputes the summary table of an existing bundle from its manifest and
/// per-trial trace CSVs.
pub fn summarize(dir: &Path) -> Result<Vec<SummaryRow>, BenchError> {
    let manifest_text = fs::read_to_string(dir.join("manifest.json"))?;
    let manifest: serde_json::Value = serde_json::from_str(&manifest_text)?;
    let reference = manifest["reference_value"]
        .as_f64()
        .ok_or_else(|| BenchError::Config("manifest missing reference_value".into()))?;
    let config: ExperimentConfig = serde_json::from_value(manifest["config"].clone())?;

    let baseline_idx = config
        .algorithms
        .iter()
        .position(|a| matches!(a.algorithm, Algorithm::Sdca(SdcaVariant::Sdca1)))
        .unwrap_or(0);
    let mut tables: Vec<(String, Vec<Vec<RunRow>>)> = Vec::new();
    for algo in &config.algorithms {
        let mut trials = Vec::new();
        for t in 0..config.trials {
            let path = trace_path(dir, &algo.name, t);
            if path.exists() {
                let rows = RunRecord::rows_from_csv(fs::File::open(path)?)?;
                trials.push(rows);
            }
        }
        tables.push((algo.name.clone(), trials));
    }
    let wall = |trials: &Vec<Vec<RunRow>>| -> f64 {
        trials
            .iter()
            .filter_map(|rows| rows.last().map(|r| r.time_ms))
            .sum::<f64>()
            / 1e3
    };
    let baseline_time = wall(&tables[baseline_idx].1);
    let mut summary = Vec::new();
    for (name, trials) in &tables {
        if trials.is_empty() {
            continue;
        }
        let finals: Vec<f64> = trials
            .iter()
            .filter_map(|rows| rows.last().map(|r| r.val_obj - reference))
            .collect();
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        let var =
            finals.iter().map(|g| (g - mean) * (g - mean)).sum::<f64>() / finals.len() as f64;
        let total = wall(trials);
        summary.push(SummaryRow {
            name: name.clone(),
            final_mean_gap: mean,
            final_std_gap: var.sqrt(),
            total_wall_s: total,
            time_ratio: if baseline_time > 0.0 {
                total / baseline_time
            } else {
                f64::NAN
            },
            trials_succeeded: trials.len(),
        });
    }
    Ok(summary)
}

/// Renders a summary as an aligned text table.
pub fn format_summary(summary: &[SummaryRow]) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:<20} {:>14} {:>14} {:>12} {:>10} {:>7}\n",
        "algorithm", "mean_gap", "std_gap", "wall_s", "t_ratio", "trials"
    ));
    for row in summary {
        out.push_str(&format!(
            "{:<20} {:>14.6e} {:>14.6e} {:>12.3} {:>10.3} {:>7}\n",
            row.name,
            row.final_mean_gap,
            row.final_std_gap,
            row.total_wall_s,
            row.time_ratio,
            row.trials_succeeded
        ));
    }
    out
}
