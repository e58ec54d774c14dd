//! Stochastic difference-of-convex optimization toolkit.
//!
//! Implements four stochastic DCA variants with verified weight schedules,
//! the convex subproblem solvers they need, deterministic DCA and a projected
//! stochastic subgradient baseline, benchmark problems (expected PCA under
//! two DC splits, robust phase retrieval), LIBSVM data handling, and
//! convergence diagnostics, plus a reproducible benchmark harness.

pub mod algorithms;
pub mod bench;
pub mod chart;
pub mod data;
pub mod diagnostics;
pub mod models;
pub mod program;
pub mod subsolver;
pub mod vector;
pub mod weights;

pub use algorithms::{
    run_dca, run_pss, run_sdca, Algorithm, AlgorithmConfig, AlgorithmError, DcaTrajectory,
    FiniteSumProgram, RunRecord, RunRow, SdcaVariant, StepSizePolicy,
};
pub use data::{normalize_rows, parse_libsvm, stream_shuffled, Dataset, SampleStream};
pub use diagnostics::{
    criticality_probe, criticality_residual, empirical_weighted_lln, lyapunov_value_sdca3,
    rate_fit, rate_fit_trace, RateModel, ScalarDistribution,
};
pub use models::{
    epca_reference_value, synth_spiked_gaussian, top_eigenvector, EpcaDecomposition1,
    EpcaDecomposition2, PhaseRetrieval, SpikedDataset,
};
pub use program::{empirical_objective, sample_objective, StochasticDcProgram};
pub use subsolver::{
    solve_ball_quadratic, solve_inner_dca, solve_projected_gradient, solve_subproblem,
    ConvexRegularizer, SubproblemSpec, SubsolveResult,
};
pub use vector::{SamplePoint, SparseVector, Vector};
pub use weights::{verify_conditions, ConditionReport, WeightAccumulator, WeightSchedule};
