//! Streaming iteration drivers: the four stochastic DCA variants, full-batch
//! deterministic DCA, and the projected stochastic subgradient baseline.
//!
//! All variants consume one fresh sample per iteration. The history-averaging
//! variants (1, 2) fold each new subgradient into a running weighted average;
//! the recomputing variants (3, 4) re-evaluate the subgradients of every
//! stored sample at the current iterate, at O(k·n) per-iteration cost. The
//! even-numbered variants replace the explicit G by the weighted sample
//! average G_k in the subproblem.

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{criticality_probe, lyapunov_weighted_value};
use crate::program::{empirical_objective, ExplicitConvex, IterateState, SampleGForm,
    StochasticDcProgram};
use crate::subsolver::{solve_subproblem, SubproblemSpec, SubsolveResult, SubsolverError};
use crate::vector::{random_in_ball, SamplePoint, Vector};
use crate::weights::{WeightAccumulator, WeightError, WeightSchedule};

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error("this variant requires an explicit G oracle")]
    MissingExplicitG,
    #[error("memory cap {cap} below max_iterations {need}; truncation would change the algorithm")]
    MemoryCapTooSmall { cap: usize, need: usize },
    #[error("sample stream is empty")]
    EmptyStream,
    #[error("starting point is infeasible for r1")]
    InfeasibleStart,
    #[error("config selects {expected}, but this driver runs {actual}")]
    WrongDriver {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("the subgradient baseline requires a ball-indicator r1")]
    PssRequiresBall,
    #[error(transparent)]
    Weights(#[from] WeightError),
    #[error(transparent)]
    Subsolver(#[from] SubsolverError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SdcaVariant {
    Sdca1,
    Sdca2,
    Sdca3,
    Sdca4,
}

impl SdcaVariant {
    /// History-averaging variants keep past subgradients; recomputing
    /// variants re-evaluate them each iteration.
    pub fn recomputes_subgradients(&self) -> bool {
        matches!(self, SdcaVariant::Sdca3 | SdcaVariant::Sdca4)
    }

    /// Whether the subproblem uses the weighted sample average G_k instead of
    /// the explicit G.
    pub fn uses_sample_average_g(&self) -> bool {
        matches!(self, SdcaVariant::Sdca2 | SdcaVariant::Sdca4)
    }
}

/// Stepsize policy for the projected stochastic subgradient baseline.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepSizePolicy {
    Constant(f64),
    /// γ_k = c / max(k, 1): the k = 0 step uses c.
    Diminishing(f64),
}

impl StepSizePolicy {
    pub fn step(&self, k: usize) -> f64 {
        match *self {
            StepSizePolicy::Constant(gamma) => gamma,
            StepSizePolicy::Diminishing(c) => c / (k.max(1) as f64),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sdca(SdcaVariant),
    Dca,
    Pss(StepSizePolicy),
}

/// Per-run configuration shared by the streaming drivers.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlgorithmConfig {
    pub algorithm: Algorithm,
    pub schedule: WeightSchedule,
    /// Inner stopping tolerance for iterative subsolvers.
    pub subsolver_tol: f64,
    /// Inner iteration cap (per stage for the hinge solver).
    pub subsolver_max_inner: usize,
    /// Diagnostics cadence in iterations.
    pub eval_every: usize,
    pub max_iterations: usize,
    pub seed: u64,
    /// Hard limit on stored samples for the recomputing variants; must cover
    /// max_iterations.
    pub memory_cap: usize,
    /// Criticality probe batch size; None means min(2000, validation size).
    pub probe_batch: Option<usize>,
    /// Keep every iterate in the record (memory O(K·n); off by default).
    #[serde(default)]
    pub record_iterates: bool,
}

impl AlgorithmConfig {
    pub fn new(algorithm: Algorithm, max_iterations: usize, seed: u64) -> Self {
        AlgorithmConfig {
            algorithm,
            schedule: WeightSchedule::constant(),
            subsolver_tol: 1e-3,
            subsolver_max_inner: 500,
            eval_every: 50,
            max_iterations,
            seed,
            memory_cap: max_iterations,
            probe_batch: None,
            record_iterates: false,
        }
    }

    pub fn with_schedule(mut self, schedule: WeightSchedule) -> Self {
        self.schedule = schedule;
        self
    }

    pub fn with_subsolver_tol(mut self, tol: f64) -> Self {
        self.subsolver_tol = tol;
        self
    }

    pub fn with_eval_every(mut self, every: usize) -> Self {
        self.eval_every = every.max(1);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_probe_batch(mut self, batch: Option<usize>) -> Self {
        self.probe_batch = batch;
        self
    }

    pub fn with_recorded_iterates(mut self) -> Self {
        self.record_iterates = true;
        self
    }
}

/// One diagnostics row, recorded every `eval_every` iterations and at the end
/// of the run. `lyapunov` is NaN for variants that do not track it.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct RunRow {
    pub k: usize,
    pub time_ms: f64,
    pub val_obj: f64,
    pub train_obj: f64,
    pub crit_residual: f64,
    pub lyapunov: f64,
    pub step_norm: f64,
    pub inner_iters: usize,
    pub inner_residual: f64,
}

/// Full trace of one run plus its outcome.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
    pub final_iterate: Vector,
    pub config: AlgorithmConfig,
    pub seed: u64,
    pub iterations: usize,
    /// Fresh stream draws consumed (iterations + 1 when the stream lasted).
    pub samples_consumed: usize,
    /// Largest W_k(x^{k+1}) − W_k(x^k) seen (recomputing variants; 0 otherwise).
    pub max_lyapunov_violation: f64,
    pub total_time_ms: f64,
    /// Whether the declared ρ > 0 convergence precondition holds.
    pub rho_positive: bool,
    /// Set when any subproblem solve ran out of its iteration budget.
    pub subsolver_warnings: usize,
    /// x^1, x^2, ... when `record_iterates` was set; empty otherwise.
    pub iterate_trace: Vec<Vector>,
}

impl RunRecord {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn rows_from_csv<R: std::io::Read>(input: R) -> csv::Result<Vec<RunRow>> {
        let mut reader = csv::Reader::from_reader(input);
        reader.deserialize().collect()
    }
}

fn starting_point<P: StochasticDcProgram + ?Sized>(
    prog: &P,
    seed: u64,
) -> Vector {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    match prog.r1().ball_radius() {
        Some(radius) => random_in_ball(&mut rng, prog.dimension(), radius),
        None => prog
            .r1()
            .project(&random_in_ball(&mut rng, prog.dimension(), 1.0)),
    }
}

struct EvalContext<'a> {
    validation: &'a [SamplePoint],
    probe_batch: usize,
}

impl EvalContext<'_> {
    fn row<P: StochasticDcProgram + ?Sized>(
        &self,
        prog: &P,
        k: usize,
        time_ms: f64,
        x: &Vector,
        train: &[SamplePoint],
        lyapunov: f64,
        step_norm: f64,
        solve: Option<&SubsolveResult>,
    ) -> RunRow {
        let val_obj = if self.validation.is_empty() {
            f64::NAN
        } else {
            empirical_objective(prog, x, self.validation)
        };
        let train_obj = if train.is_empty() {
            f64::NAN
        } else {
            empirical_objective(prog, x, train)
        };
        let crit = criticality_probe(prog, x, self.validation, Some(self.probe_batch))
            .map(|p| p.residual)
            .unwrap_or(f64::NAN);
        RunRow {
            k,
            time_ms,
            val_obj,
            train_obj,
            crit_residual: crit,
            lyapunov,
            step_norm,
            inner_iters: solve.map_or(0, |s| s.inner_iterations),
            inner_residual: solve.map_or(f64::NAN, |s| s.residual),
        }
    }
}

/// Runs one of the four stochastic DCA variants over a sample stream.
///
/// The stream is consumed one fresh draw per iteration (plus the initial
/// draw); the run ends at `max_iterations` or when the stream is used up.
/// `x0 = None` draws the start with the config seed: uniformly from the ball
/// for a ball-indicator r1, otherwise a unit-ball draw projected onto dom r1.
pub fn run_sdca<P: StochasticDcProgram + ?Sized>(
    prog: &P,
    config: &AlgorithmConfig,
    x0: Option<&Vector>,
    mut stream: impl Iterator<Item = SamplePoint>,
    validation: &[SamplePoint],
) -> Result<RunRecord, AlgorithmError> {
    let variant = match config.algorithm {
        Algorithm::Sdca(v) => v,
        Algorithm::Dca => {
            return Err(AlgorithmError::WrongDriver {
                expected: "dca",
                actual: "run_sdca",
            })
        }
        Algorithm::Pss(_) => {
            return Err(AlgorithmError::WrongDriver {
                expected: "pss",
                actual: "run_sdca",
            })
        }
    };
    let explicit = prog.explicit_g();
    if !variant.uses_sample_average_g() && explicit.is_none() {
        return Err(AlgorithmError::MissingExplicitG);
    }
    if variant.recomputes_subgradients() && config.memory_cap < config.max_iterations {
        return Err(AlgorithmError::MemoryCapTooSmall {
            cap: config.memory_cap,
            need: config.max_iterations,
        });
    }

    let dim = prog.dimension();
    let x0 = match x0 {
        Some(x) => x.clone(),
        None => starting_point(prog, config.seed),
    };
    assert_eq!(x0.dim(), dim, "dimension mismatch");
    if !prog.r1().is_feasible(&x0) {
        return Err(AlgorithmError::InfeasibleStart);
    }

    let keep_subgrads = !variant.recomputes_subgradients();
    let mut state = IterateState::new(
        x0,
        WeightAccumulator::new(config.schedule)?,
        keep_subgrads,
    );
    let mut sample = stream.next().ok_or(AlgorithmError::EmptyStream)?;
    let mut samples_consumed = 1usize;

    // Uniform weights for the explicit hinge-sum subproblem.
    let explicit_hinge_weights: Vec<f64> = match &explicit {
        Some(ExplicitConvex::HingeSum { samples }) => vec![1.0; samples.len()],
        _ => Vec::new(),
    };

    let eval = EvalContext {
        validation,
        probe_batch: config
            .probe_batch
            .unwrap_or(2000)
            .min(validation.len().max(1)),
    };
    let eval_every = config.eval_every.max(1);
    let track_lyapunov = variant.recomputes_subgradients();
    let mut rows: Vec<RunRow> = Vec::new();
    let mut max_violation: f64 = 0.0;
    let mut subsolver_warnings = 0usize;
    let mut z_buf = Vector::zeros(dim);

    let mut algo_time = Duration::ZERO;
    let mut tick = Instant::now();
    let mut completed = 0usize;
    let mut last_step_norm = f64::NAN;
    let mut last_lyap = f64::NAN;
    let mut last_solve: Option<SubsolveResult> = None;
    let mut iterate_trace: Vec<Vector> = Vec::new();

    for k in 0..config.max_iterations {
        let step_w = state.accumulator.accumulate(k)?;
        state.stored_weights.push(step_w.alpha);
        state.stored_samples.push(sample.clone());

        if variant.recomputes_subgradients() {
            // z^k_i ∈ ∂h(x^k, sⁱ) for every stored sample, averaged with the
            // current weights; w^k is the current-point r2 subgradient.
            state.y_avg.set_zero();
            for (alpha, s) in state.stored_weights.iter().zip(&state.stored_samples) {
                prog.h_subgrad_into(&state.x, s, &mut z_buf);
                state.y_avg.add_scaled(alpha / step_w.a_sum, &z_buf);
            }
            state.w_avg = prog.r2_subgrad(&state.x);
        } else {
            // Incremental averages over historical subgradients.
            prog.h_subgrad_into(&state.x, &sample, &mut z_buf);
            state.y_avg.mix(step_w.ratio, &z_buf);
            if let Some(list) = &mut state.stored_h_subgrads {
                list.push(z_buf.clone());
            }
            let u = prog.r2_subgrad(&state.x);
            state.w_avg.mix(step_w.ratio, &u);
        }
        let linear = state.y_avg.add(&state.w_avg);

        let lyap_before = if track_lyapunov {
            lyapunov_weighted_value(
                prog,
                &state.x,
                &state.stored_samples,
                &state.stored_weights,
                variant.uses_sample_average_g(),
            )
            .expect("explicit G checked at entry")
        } else {
            f64::NAN
        };

        let solve = {
            let spec = if variant.uses_sample_average_g() {
                match prog.sample_g_form() {
                    SampleGForm::Quadratic { mu } => {
                        SubproblemSpec::quadratic(mu, &linear, prog.r1())?
                    }
                    SampleGForm::QuadraticMinusInner { mu, inner_coeff } => {
                        SubproblemSpec::quadratic_minus_scaled_data(
                            mu,
                            inner_coeff,
                            &state.stored_weights,
                            &state.stored_samples,
                            &linear,
                            prog.r1(),
                        )?
                    }
                    SampleGForm::Hinge => SubproblemSpec::hinge_sum(
                        &state.stored_weights,
                        &state.stored_samples,
                        &linear,
                        prog.r1(),
                    )?,
                }
            } else {
                match explicit.as_ref().expect("checked at entry") {
                    ExplicitConvex::Quadratic { mu } => {
                        SubproblemSpec::quadratic(*mu, &linear, prog.r1())?
                    }
                    ExplicitConvex::HingeSum { samples } => SubproblemSpec::hinge_sum(
                        &explicit_hinge_weights,
                        samples,
                        &linear,
                        prog.r1(),
                    )?,
                }
            };
            solve_subproblem(&spec, &state.x, config.subsolver_tol, config.subsolver_max_inner)
        };
        if !solve.converged {
            subsolver_warnings += 1;
        }
        last_step_norm = solve.x.distance(&state.x);

        if track_lyapunov {
            let lyap_after = lyapunov_weighted_value(
                prog,
                &solve.x,
                &state.stored_samples,
                &state.stored_weights,
                variant.uses_sample_average_g(),
            )
            .expect("explicit G checked at entry");
            max_violation = max_violation.max(lyap_after - lyap_before);
            last_lyap = lyap_after;
        }

        state.x = solve.x.clone();
        state.k = k;
        if config.record_iterates {
            iterate_trace.push(state.x.clone());
        }
        last_solve = Some(solve);
        completed = k + 1;

        if completed % eval_every == 0 {
            algo_time += tick.elapsed();
            rows.push(eval.row(
                prog,
                completed,
                algo_time.as_secs_f64() * 1e3,
                &state.x,
                &state.stored_samples,
                last_lyap,
                last_step_norm,
                last_solve.as_ref(),
            ));
            tick = Instant::now();
        }

        match stream.next() {
            Some(s) => {
                sample = s;
                samples_consumed += 1;
            }
            None => break,
        }
    }
    algo_time += tick.elapsed();

    if rows.last().map_or(true, |r| r.k != completed) {
        rows.push(eval.row(
            prog,
            completed,
            algo_time.as_secs_f64() * 1e3,
            &state.x,
            &state.stored_samples,
            last_lyap,
            last_step_norm,
            last_solve.as_ref(),
        ));
    }

    Ok(RunRecord {
        rows,
        final_iterate: state.x,
        config: config.clone(),
        seed: config.seed,
        iterations: completed,
        samples_consumed,
        max_lyapunov_violation: max_violation,
        total_time_ms: algo_time.as_secs_f64() * 1e3,
        rho_positive: prog.rho() > 0.0,
        subsolver_warnings,
        iterate_trace,
    })
}

/// Projected stochastic subgradient baseline:
/// x^{k+1} = P_ball(x^k − γ_k·(∂g − ∂h − ∂r2)(x^k, s^k)).
pub fn run_pss<P: StochasticDcProgram + ?Sized>(
    prog: &P,
    config: &AlgorithmConfig,
    x0: Option<&Vector>,
    mut stream: impl Iterator<Item = SamplePoint>,
    validation: &[SamplePoint],
) -> Result<RunRecord, AlgorithmError> {
    let policy = match config.algorithm {
        Algorithm::Pss(policy) => policy,
        _ => {
            return Err(AlgorithmError::WrongDriver {
                expected: "sdca/dca",
                actual: "run_pss",
            })
        }
    };
    let radius = prog
        .r1()
        .ball_radius()
        .ok_or(AlgorithmError::PssRequiresBall)?;
    let dim = prog.dimension();
    let x0 = match x0 {
        Some(x) => x.clone(),
        None => starting_point(prog, config.seed),
    };
    if !prog.r1().is_feasible(&x0) {
        return Err(AlgorithmError::InfeasibleStart);
    }

    let eval = EvalContext {
        validation,
        probe_batch: config
            .probe_batch
            .unwrap_or(2000)
            .min(validation.len().max(1)),
    };
    let eval_every = config.eval_every.max(1);
    let mut x = x0;
    let mut sample = stream.next().ok_or(AlgorithmError::EmptyStream)?;
    let mut samples_consumed = 1usize;
    let mut rows: Vec<RunRow> = Vec::new();
    let mut iterate_trace: Vec<Vector> = Vec::new();
    let mut buf = Vector::zeros(dim);
    let mut algo_time = Duration::ZERO;
    let mut tick = Instant::now();
    let mut completed = 0usize;
    let mut last_step_norm = f64::NAN;

    for k in 0..config.max_iterations {
        let gamma = policy.step(k);
        let mut direction = prog.g_subgrad(&x, &sample);
        prog.h_subgrad_into(&x, &sample, &mut buf);
        direction.add_scaled(-1.0, &buf);
        direction.add_scaled(-1.0, &prog.r2_subgrad(&x));
        let mut moved = x.clone();
        moved.add_scaled(-gamma, &direction);
        let next = moved.project_ball(radius);
        last_step_norm = next.distance(&x);
        x = next;
        if config.record_iterates {
            iterate_trace.push(x.clone());
        }
        completed = k + 1;

        if completed % eval_every == 0 {
            algo_time += tick.elapsed();
            rows.push(eval.row(
                prog,
                completed,
                algo_time.as_secs_f64() * 1e3,
                &x,
                &[],
                f64::NAN,
                last_step_norm,
                None,
            ));
            tick = Instant::now();
        }

        match stream.next() {
            Some(s) => {
                sample = s;
                samples_consumed += 1;
            }
            None => break,
        }
    }
    algo_time += tick.elapsed();
    if rows.last().map_or(true, |r| r.k != completed) {
        rows.push(eval.row(
            prog,
            completed,
            algo_time.as_secs_f64() * 1e3,
            &x,
            &[],
            f64::NAN,
            last_step_norm,
            None,
        ));
    }

    Ok(RunRecord {
        rows,
        final_iterate: x,
        config: config.clone(),
        seed: config.seed,
        iterations: completed,
        samples_consumed,
        max_lyapunov_violation: 0.0,
        total_time_ms: algo_time.as_secs_f64() * 1e3,
        rho_positive: prog.rho() > 0.0,
        subsolver_warnings: 0,
        iterate_trace,
    })
}

/// A deterministic finite-sum DC program: the sample expectation replaced by
/// the uniform average over a fixed dataset.
pub struct FiniteSumProgram<'a, P: StochasticDcProgram + ?Sized> {
    pub program: &'a P,
    pub samples: &'a [SamplePoint],
    uniform_weights: Vec<f64>,
}

impl<'a, P: StochasticDcProgram + ?Sized> FiniteSumProgram<'a, P> {
    pub fn new(program: &'a P, samples: &'a [SamplePoint]) -> Self {
        assert!(!samples.is_empty(), "finite-sum program needs samples");
        FiniteSumProgram {
            program,
            samples,
            uniform_weights: vec![1.0; samples.len()],
        }
    }

    pub fn objective(&self, x: &Vector) -> f64 {
        empirical_objective(self.program, x, self.samples)
    }
}

/// Trajectory of a full-batch DCA run.
#[derive(Clone, Debug)]
pub struct DcaTrajectory {
    /// f(x^k) for every iterate, starting point included.
    pub objectives: Vec<f64>,
    /// x^0, x^1, ..., aligned with `objectives`.
    pub iterates: Vec<Vector>,
    pub final_point: Vector,
    pub iterations: usize,
    /// True when the ‖x^{k+1} − x^k‖ < tol rule fired before max_iter.
    pub converged: bool,
    pub subsolver_warning: bool,
}

/// Full-batch deterministic DCA: linearize H + r2 at the current point and
/// minimize G + r1 minus that linearization. Stops when the step norm drops
/// below `tol`. Infeasible starts are projected onto dom r1. The objective
/// sequence is non-increasing.
pub fn run_dca<P: StochasticDcProgram + ?Sized>(
    finite: &FiniteSumProgram<'_, P>,
    x0: &Vector,
    tol: f64,
    max_iter: usize,
) -> DcaTrajectory {
    let prog = finite.program;
    let dim = prog.dimension();
    let mut x = prog.r1().project(x0);
    let mut objectives = vec![finite.objective(&x)];
    let mut iterates = vec![x.clone()];
    let mut converged = false;
    let mut warning = false;
    let mut iterations = 0;
    let mut buf = Vector::zeros(dim);
    let scale = 1.0 / finite.samples.len() as f64;

    // Inner accuracy well below the outer stopping rule so the final iterate
    // inherits the subproblem's precision.
    let inner_tol = (tol * 1e-3).min(1e-9);

    for _ in 0..max_iter {
        let mut linear = prog.r2_subgrad(&x);
        for s in finite.samples {
            prog.h_subgrad_into(&x, s, &mut buf);
            linear.add_scaled(scale, &buf);
        }
        let solve = {
            let spec = match prog.explicit_g() {
                Some(ExplicitConvex::Quadratic { mu }) => {
                    SubproblemSpec::quadratic(mu, &linear, prog.r1())
                }
                Some(ExplicitConvex::HingeSum { .. }) | None => {
                    match prog.sample_g_form() {
                        SampleGForm::Quadratic { mu } => {
                            SubproblemSpec::quadratic(mu, &linear, prog.r1())
                        }
                        SampleGForm::QuadraticMinusInner { mu, inner_coeff } => {
                            SubproblemSpec::quadratic_minus_scaled_data(
                                mu,
                                inner_coeff,
                                &finite.uniform_weights,
                                finite.samples,
                                &linear,
                                prog.r1(),
                            )
                        }
                        SampleGForm::Hinge => SubproblemSpec::hinge_sum(
                            &finite.uniform_weights,
                            finite.samples,
                            &linear,
                            prog.r1(),
                        ),
                    }
                }
            }
            .expect("finite-sum subproblem is well formed");
            solve_subproblem(&spec, &x, inner_tol, 500)
        };
        if !solve.converged {
            warning = true;
        }
        let step = solve.x.distance(&x);
        x = solve.x;
        iterations += 1;
        objectives.push(finite.objective(&x));
        iterates.push(x.clone());
        if step < tol {
            converged = true;
            break;
        }
    }

    DcaTrajectory {
        objectives,
        iterates,
        final_point: x,
        iterations,
        converged,
        subsolver_warning: warning,
    }
}
