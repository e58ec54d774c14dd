//! Criticality residuals, Lyapunov values, empirical weighted-LLN deviation
//! tables, and rate fits.
//!
//! These turn the convergence statements into desk-scale checks: the
//! projected-gradient residual vanishes exactly at critical points of the
//! sampled surrogate, the surrogate value W_k decreases one step at a time
//! for the recomputing variants, and weighted averages of i.i.d. draws track
//! their mean at the β_k-governed rate.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::algorithms::RunRecord;
use crate::program::{ExplicitConvex, StochasticDcProgram};
use crate::vector::{SamplePoint, Vector};
use crate::weights::{WeightAccumulator, WeightSchedule};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("program is nonsmooth; use the subgradient-distance probe")]
    NonsmoothProgram,
    #[error("criticality probe requires a ball-indicator r1")]
    RequiresBall,
    #[error("probe batch is empty")]
    EmptyBatch,
    #[error("explicit G required but the program does not provide one")]
    MissingExplicitG,
    #[error("rate fit needs at least {needed} points, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error(transparent)]
    Weights(#[from] crate::weights::WeightError),
}

/// How a criticality residual was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum CriticalityMethod {
    /// ‖x − P_ball(x − ∇Φ̂(x))‖ with the batch gradient estimate; zero iff x
    /// is critical for the sampled surrogate over the ball.
    ProjectedGradient,
    /// Distance from 0 to ∇H(x) + ∂r2(x) − ∂G(x) − ∂r1(x) on the finite sum
    /// with the kink-side-0 subgradient selection.
    SubgradientDistance,
}

/// Result of probing proximity to criticality at a point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalityProbe {
    pub method: CriticalityMethod,
    pub batch_size: usize,
    pub residual: f64,
}

/// Projected-gradient criticality residual for smooth, ball-constrained
/// programs: estimate ∇Φ̂(x) on the probe batch and return
/// ‖x − P_ball(x − ∇Φ̂(x))‖.
pub fn criticality_residual<P: StochasticDcProgram + ?Sized>(
    prog: &P,
    x: &Vector,
    probe_batch: &[SamplePoint],
) -> Result<f64, DiagnosticsError> {
    if !prog.is_smooth() {
        return Err(DiagnosticsError::NonsmoothProgram);
    }
    let radius = prog
        .r1()
        .ball_radius()
        .ok_or(DiagnosticsError::RequiresBall)?;
    if probe_batch.is_empty() {
        return Err(DiagnosticsError::EmptyBatch);
    }
    let n = prog.dimension();
    let mut grad = Vector::zeros(n);
    let mut buf = Vector::zeros(n);
    let scale = 1.0 / probe_batch.len() as f64;
    for s in probe_batch {
        prog.g_subgrad_into(x, s, &mut buf);
        grad.add_scaled(scale, &buf);
        prog.h_subgrad_into(x, s, &mut buf);
        grad.add_scaled(-scale, &buf);
    }
    grad.add_scaled(-1.0, &prog.r2_subgrad(x));
    let mut probe = x.clone();
    probe.add_scaled(-1.0, &grad);
    Ok(x.distance(&probe.project_ball(radius)))
}

/// Subgradient-distance criticality residual on a finite sum, for nonsmooth
/// programs: with w = ∂G(x) − ∇H(x) − ∇r2(x) under the kink convention,
/// returns min over the r1 normal cone of ‖w + n‖ (closed form for a ball).
pub fn criticality_residual_subgrad<P: StochasticDcProgram + ?Sized>(
    prog: &P,
    x: &Vector,
    probe_batch: &[SamplePoint],
) -> Result<f64, DiagnosticsError> {
    if probe_batch.is_empty() {
        return Err(DiagnosticsError::EmptyBatch);
    }
    let n = prog.dimension();
    let mut w = Vector::zeros(n);
    let mut buf = Vector::zeros(n);
    let scale = 1.0 / probe_batch.len() as f64;
    for s in probe_batch {
        prog.g_subgrad_into(x, s, &mut buf);
        w.add_scaled(scale, &buf);
        prog.h_subgrad_into(x, s, &mut buf);
        w.add_scaled(-scale, &buf);
    }
    w.add_scaled(-1.0, &prog.r2_subgrad(x));
    match prog.r1().ball_radius() {
        Some(radius) if x.norm() >= radius * (1.0 - 1e-12) => {
            // Normal cone at the boundary: nonnegative multiples of x.
            let t = (-w.dot(x) / x.norm_squared()).max(0.0);
            let mut resid = w.clone();
            resid.add_scaled(t, x);
            Ok(resid.norm())
        }
        _ => Ok(w.norm()),
    }
}

/// Probes criticality with the method suited to the program, batching at most
/// `max_batch` samples (the default policy is min(2000, full batch)).
pub fn criticality_probe<P: StochasticDcProgram + ?Sized>(
    prog: &P,
    x: &Vector,
    batch: &[SamplePoint],
    max_batch: Option<usize>,
) -> Result<CriticalityProbe, DiagnosticsError> {
    let limit = max_batch.unwrap_or(2000).min(batch.len());
    let probe = &batch[..limit];
    if prog.is_smooth() && prog.r1().ball_radius().is_some() {
        Ok(CriticalityProbe {
            method: CriticalityMethod::ProjectedGradient,
            batch_size: limit,
            residual: criticality_residual(prog, x, probe)?,
        })
    } else {
        Ok(CriticalityProbe {
            method: CriticalityMethod::SubgradientDistance,
            batch_size: limit,
            residual: criticality_residual_subgrad(prog, x, probe)?,
        })
    }
}

/// Weighted surrogate value
/// W_k(x) = Ĝ(x) + r1(x) − (1/A_k) Σ α_i h(x, sⁱ) − r2(x),
/// with Ĝ the explicit G when `use_sample_average_g` is false and the
/// weighted empirical G_k otherwise. Infeasible x yields the +∞ sentinel.
///
/// Along a run, W_k(x^{k+1}) ≤ W_k(x^k): both bracket the linearized
/// surrogate the subproblem minimizes.
pub fn lyapunov_weighted_value<P: StochasticDcProgram + ?Sized>(
    prog: &P,
    x: &Vector,
    stored_samples: &[SamplePoint],
    weights: &[f64],
    use_sample_average_g: bool,
) -> Result<f64, DiagnosticsError> {
    assert_eq!(
        stored_samples.len(),
        weights.len(),
        "weights and samples must align"
    );
    let r1 = prog.r1().value(x);
    if r1.is_infinite() {
        return Ok(f64::INFINITY);
    }
    let a_sum: f64 = weights.iter().sum();
    let weighted_h: f64 = weights
        .iter()
        .zip(stored_samples)
        .map(|(a, s)| a * prog.h_value(x, s))
        .sum::<f64>()
        / a_sum;
    let g_part = if use_sample_average_g {
        weights
            .iter()
            .zip(stored_samples)
            .map(|(a, s)| a * prog.g_value(x, s))
            .sum::<f64>()
            / a_sum
    } else {
        match prog.explicit_g() {
            Some(ExplicitConvex::Quadratic { mu }) => 0.5 * mu * x.norm_squared(),
            Some(ExplicitConvex::HingeSum { samples }) => {
                samples
                    .iter()
                    .map(|s| prog.g_value(x, s))
                    .sum::<f64>()
                    / samples.len() as f64
            }
            None => return Err(DiagnosticsError::MissingExplicitG),
        }
    };
    Ok(g_part + r1 - weighted_h - prog.r2_value(x))
}

/// The explicit-G surrogate value tracked by the subgradient-recomputing
/// variant with known G.
pub fn lyapunov_value_sdca3<P: StochasticDcProgram + ?Sized>(
    prog: &P,
    x: &Vector,
    stored_samples: &[SamplePoint],
    weights: &[f64],
) -> Result<f64, DiagnosticsError> {
    lyapunov_weighted_value(prog, x, stored_samples, weights, false)
}

/// Scalar distributions with a known mean, for the weighted-LLN checks.
#[derive(Clone, Copy, Debug, Serialize)]
pub enum ScalarDistribution {
    /// Always the given constant.
    Degenerate(f64),
    /// ±1 with probability 1/2 each.
    Rademacher,
    /// Uniform on [a, b].
    Uniform(f64, f64),
}

impl ScalarDistribution {
    pub fn mean(&self) -> f64 {
        match *self {
            ScalarDistribution::Degenerate(c) => c,
            ScalarDistribution::Rademacher => 0.0,
            ScalarDistribution::Uniform(a, b) => 0.5 * (a + b),
        }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match *self {
            ScalarDistribution::Degenerate(c) => c,
            ScalarDistribution::Rademacher => {
                if rng.gen_bool(0.5) {
                    1.0
                } else {
                    -1.0
                }
            }
            ScalarDistribution::Uniform(a, b) => rng.gen_range(a..b),
        }
    }
}

/// One grid row of the deviation table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LlnRow {
    pub k: usize,
    pub beta: f64,
    /// Trial-averaged |(1/A_k)Σα_iX_i − μ|.
    pub mean_abs_deviation: f64,
    /// mean_abs_deviation · β_k / (1 + √ln β_k); boundedness of this ratio is
    /// the uniform-LLN claim.
    pub normalized_ratio: f64,
}

/// Deviation table plus the per-trial final deviations.
#[derive(Clone, Debug, Serialize)]
pub struct LlnReport {
    pub schedule: WeightSchedule,
    pub horizon: usize,
    pub trials: usize,
    pub rows: Vec<LlnRow>,
    pub final_deviations: Vec<f64>,
}

impl LlnReport {
    pub fn max_normalized_ratio(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.normalized_ratio)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn median_normalized_ratio(&self) -> f64 {
        let mut ratios: Vec<f64> = self.rows.iter().map(|r| r.normalized_ratio).collect();
        ratios.sort_by(f64::total_cmp);
        ratios[ratios.len() / 2]
    }

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["k", "beta_k", "mean_abs_deviation", "normalized_ratio"])?;
        for row in &self.rows {
            w.write_record(&[
                row.k.to_string(),
                row.beta.to_string(),
                row.mean_abs_deviation.to_string(),
                row.normalized_ratio.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Simulates weighted averages of i.i.d. draws and tabulates the absolute
/// deviation from the true mean on a log-spaced grid of k ≤ horizon,
/// averaged over trials. Trials run concurrently with per-trial generators
/// derived from the seed.
pub fn empirical_weighted_lln(
    distribution: ScalarDistribution,
    schedule: WeightSchedule,
    horizon: usize,
    trials: usize,
    seed: u64,
) -> Result<LlnReport, DiagnosticsError> {
    schedule.validate()?;
    let grid = crate::weights::log_grid(horizon, 40);
    let mut betas = Vec::with_capacity(grid.len());
    {
        let mut acc = WeightAccumulator::new(schedule)?;
        let mut next = 0;
        for k in 0..=horizon {
            let step = acc.accumulate(k).expect("in-order");
            if next < grid.len() && grid[next] == k {
                betas.push(step.beta);
                next += 1;
            }
        }
    }
    let mu = distribution.mean();
    let per_trial: Vec<(Vec<f64>, f64)> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
            let mut acc =
                WeightAccumulator::new(schedule).expect("validated schedule");
            let mut weighted_sum = 0.0;
            let mut devs = Vec::with_capacity(grid.len());
            let mut next = 0;
            for k in 0..=horizon {
                let step = acc.accumulate(k).expect("in-order");
                weighted_sum += step.alpha * distribution.sample(&mut rng);
                if next < grid.len() && grid[next] == k {
                    devs.push((weighted_sum / step.a_sum - mu).abs());
                    next += 1;
                }
            }
            let last = *devs.last().expect("grid contains the horizon");
            (devs, last)
        })
        .collect();

    let rows = grid
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let mean_abs: f64 =
                per_trial.iter().map(|(d, _)| d[j]).sum::<f64>() / trials as f64;
            let beta = betas[j];
            LlnRow {
                k,
                beta,
                mean_abs_deviation: mean_abs,
                normalized_ratio: mean_abs * beta / (1.0 + beta.ln().max(0.0).sqrt()),
            }
        })
        .collect();
    Ok(LlnReport {
        schedule,
        horizon,
        trials,
        rows,
        final_deviations: per_trial.into_iter().map(|(_, last)| last).collect(),
    })
}

/// Model curves for the residual decay rate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum RateModel {
    /// d_k ≍ 1/√ln k (history-averaging variants with equal weights).
    InvSqrtLogK,
    /// d_k ≍ ln k/√k (recomputing variants with equal weights).
    LogKOverSqrtK,
}

impl RateModel {
    pub fn value(&self, k: f64) -> f64 {
        match self {
            RateModel::InvSqrtLogK => 1.0 / k.ln().sqrt(),
            RateModel::LogKOverSqrtK => k.ln() / k.sqrt(),
        }
    }
}

/// Least-squares fit of a residual trace against a model curve. Evidence
/// only: no pass/fail claim is made by the fit itself.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RateFit {
    pub model: RateModel,
    /// Multiplicative constant c in d_k ≈ c·model(k).
    pub scale: f64,
    /// ‖d − c·m‖ / ‖d‖ over the fitted window.
    pub relative_residual: f64,
    /// False when the trace barely decays over the fitted window; a fit to a
    /// flat trace is meaningless.
    pub decay_detected: bool,
    pub points_used: usize,
}

/// Fits the last half of a (k, d_k) trace to the model curve. The trace
/// should already be the running minimum of the residual diagnostics.
pub fn rate_fit_trace(trace: &[(f64, f64)], model: RateModel) -> Result<RateFit, DiagnosticsError> {
    if trace.len() < 20 {
        return Err(DiagnosticsError::TooFewPoints {
            needed: 20,
            got: trace.len(),
        });
    }
    let window = &trace[trace.len() / 2..];
    let mut mm = 0.0;
    let mut dm = 0.0;
    let mut dd = 0.0;
    for &(k, d) in window {
        let m = model.value(k);
        mm += m * m;
        dm += d * m;
        dd += d * d;
    }
    let scale = dm / mm;
    let mut err = 0.0;
    for &(k, d) in window {
        let r = d - scale * model.value(k);
        err += r * r;
    }
    let relative_residual = (err / dd).sqrt();
    let first = window.first().expect("nonempty").1;
    let last = window.last().expect("nonempty").1;
    Ok(RateFit {
        model,
        scale,
        relative_residual,
        decay_detected: last <= 0.9 * first,
        points_used: window.len(),
    })
}

impl RateFit {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["model", "scale", "relative_residual", "decay_detected", "points_used"])?;
        w.write_record(&[
            format!("{:?}", self.model),
            self.scale.to_string(),
            self.relative_residual.to_string(),
            self.decay_detected.to_string(),
            self.points_used.to_string(),
        ])?;
        w.flush()?;
        Ok(())
    }
}

/// Fits the running minimum of a run's criticality-residual trace.
pub fn rate_fit(run: &RunRecord, model: RateModel) -> Result<RateFit, DiagnosticsError> {
    let trace = running_min_trace(
        &run.rows
            .iter()
            .map(|r| (r.k as f64, r.crit_residual))
            .collect::<Vec<_>>(),
    );
    rate_fit_trace(&trace, model)
}

/// Running minimum over i ≤ k of the residual at x^i — the weakest reading
/// of the d_k ≤ τ_i inequality chain.
pub fn running_min_trace(trace: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(trace.len());
    let mut best = f64::INFINITY;
    for &(k, d) in trace {
        best = best.min(d);
        out.push((k, best));
    }
    out
}
