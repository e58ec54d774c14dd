//! The stochastic DC program abstraction and objective-evaluation services.
//!
//! A program bundles oracles for the sample DC components g(·,s), h(·,s) and
//! the deterministic regularizer split r = r1 − r2, together with a declared
//! strong-convexity modulus ρ for h(·,s) + r2. Oracles are pure functions of
//! (x, s) and safely shareable for concurrent read-only use; all randomness
//! flows through the seeded generator owned by the run.

use std::sync::Arc;

use crate::subsolver::ConvexRegularizer;
use crate::vector::{SamplePoint, Vector};
use crate::weights::WeightAccumulator;

/// Shape of g(·, s) as a function family, used to assemble the
/// sample-average subproblem core G_k for the algorithms that replace G by
/// its weighted empirical mean.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SampleGForm {
    /// g(x, s) = (μ/2)‖x‖² for every s.
    Quadratic { mu: f64 },
    /// g(x, s) = (μ/2)‖x‖² − κ·½⟨x, s⟩² with κ = inner_coeff.
    QuadraticMinusInner { mu: f64, inner_coeff: f64 },
    /// g(x, s) = 2·max{⟨a, x⟩² − b, 0} with a = features, b = label.
    Hinge,
}

/// Structure handle for an explicitly known G = E[g(·, s)], consumed by the
/// subsolver on the algorithm routes that keep the first DC component exact.
#[derive(Clone, Debug)]
pub enum ExplicitConvex {
    /// G(x) = (μ/2)‖x‖².
    Quadratic { mu: f64 },
    /// G(x) = (1/m) Σ 2·max{⟨aᵢ, x⟩² − bᵢ, 0} over a fixed finite sample set
    /// (the uniform finite-support case).
    HingeSum { samples: Arc<Vec<SamplePoint>> },
}

/// Oracle bundle for a stochastic DC program
/// min E_s[g(x,s) − h(x,s)] + r1(x) − r2(x).
pub trait StochasticDcProgram: Sync {
    fn dimension(&self) -> usize;

    fn g_value(&self, x: &Vector, s: &SamplePoint) -> f64;
    fn g_subgrad(&self, x: &Vector, s: &SamplePoint) -> Vector;
    fn h_value(&self, x: &Vector, s: &SamplePoint) -> f64;
    fn h_subgrad(&self, x: &Vector, s: &SamplePoint) -> Vector;

    /// Allocation-free form of [`Self::g_subgrad`] for hot loops.
    fn g_subgrad_into(&self, x: &Vector, s: &SamplePoint, out: &mut Vector) {
        *out = self.g_subgrad(x, s);
    }

    /// Allocation-free form of [`Self::h_subgrad`] for hot loops.
    fn h_subgrad_into(&self, x: &Vector, s: &SamplePoint, out: &mut Vector) {
        *out = self.h_subgrad(x, s);
    }

    fn r1(&self) -> &ConvexRegularizer;

    fn r2_value(&self, _x: &Vector) -> f64 {
        0.0
    }

    fn r2_subgrad(&self, _x: &Vector) -> Vector {
        Vector::zeros(self.dimension())
    }

    /// Declared lower bound on inf_s ρ(h(·,s)) + ρ(r2). A positive value is
    /// the convergence-theory precondition; ρ = 0 programs still run but the
    /// guarantees do not apply and runs flag it.
    fn rho(&self) -> f64;

    fn g_depends_on_sample(&self) -> bool;

    fn sample_g_form(&self) -> SampleGForm;

    /// Present when G = E\[g\] is known in closed form (required by the
    /// algorithm routes that keep G exact).
    fn explicit_g(&self) -> Option<ExplicitConvex>;

    /// Whether g(·,s), h(·,s) and r2 are differentiable on the feasible
    /// region (selects the criticality-probe method).
    fn is_smooth(&self) -> bool;
}

/// φ(x,s) + r(x) = g(x,s) − h(x,s) + r1(x) − r2(x).
///
/// Returns +∞ when x violates an indicator-type r1.
pub fn sample_objective<P: StochasticDcProgram + ?Sized>(
    prog: &P,
    x: &Vector,
    s: &SamplePoint,
) -> f64 {
    assert_eq!(prog.dimension(), x.dim(), "dimension mismatch");
    assert_eq!(prog.dimension(), s.dim(), "dimension mismatch");
    let r1 = prog.r1().value(x);
    if r1.is_infinite() {
        return f64::INFINITY;
    }
    prog.g_value(x, s) - prog.h_value(x, s) + r1 - prog.r2_value(x)
}

/// Unweighted mean of g − h over the samples, plus the deterministic r terms
/// counted once (they are not part of the expectation).
///
/// Panics on an empty sample list.
pub fn empirical_objective<P: StochasticDcProgram + ?Sized>(
    prog: &P,
    x: &Vector,
    samples: &[SamplePoint],
) -> f64 {
    assert!(!samples.is_empty(), "empirical objective needs samples");
    let r1 = prog.r1().value(x);
    if r1.is_infinite() {
        return f64::INFINITY;
    }
    let mean: f64 = samples
        .iter()
        .map(|s| prog.g_value(x, s) - prog.h_value(x, s))
        .sum::<f64>()
        / samples.len() as f64;
    mean + r1 - prog.r2_value(x)
}

/// Mutable per-run state of an SDCA iteration driver.
///
/// For the history-averaging variants y_avg follows the incremental
/// recurrence over subgradients taken at the historical iterates; for the
/// recomputing variants it is rebuilt each iteration at the current point.
#[derive(Clone, Debug)]
pub struct IterateState {
    /// Completed iteration counter; x is x^k.
    pub k: usize,
    pub x: Vector,
    /// Weighted average of h-subgradients.
    pub y_avg: Vector,
    /// Weighted average of r2-subgradients (history-averaging variants) or
    /// the current-point r2 subgradient (recomputing variants).
    pub w_avg: Vector,
    pub stored_samples: Vec<SamplePoint>,
    /// Per-iterate h-subgradients, kept by the history-averaging variants.
    pub stored_h_subgrads: Option<Vec<Vector>>,
    /// α_i for i ≤ k, aligned with stored_samples.
    pub stored_weights: Vec<f64>,
    pub accumulator: WeightAccumulator,
}

impl IterateState {
    pub fn new(x0: Vector, accumulator: WeightAccumulator, keep_subgrads: bool) -> Self {
        let dim = x0.dim();
        IterateState {
            k: 0,
            x: x0,
            y_avg: Vector::zeros(dim),
            w_avg: Vector::zeros(dim),
            stored_samples: Vec::new(),
            stored_h_subgrads: if keep_subgrads { Some(Vec::new()) } else { None },
            stored_weights: Vec::new(),
            accumulator,
        }
    }
}
