//! Concrete stochastic DC programs: both E-PCA decompositions, robust phase
//! retrieval on a finite measurement set, and synthetic spiked-Gaussian data
//! with a known top eigenvector.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::algorithms::{run_dca, FiniteSumProgram};
use crate::data::{Dataset, DatasetProvenance};
use crate::program::{ExplicitConvex, SampleGForm, StochasticDcProgram};
use crate::subsolver::ConvexRegularizer;
use crate::vector::{random_in_ball, standard_normal, SamplePoint, SparseVector, Vector};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("lambda must be positive, got {0}")]
    NonPositiveLambda(f64),
    #[error("smoothing constant must be >= 1 for normalized samples, got {0}")]
    SmoothingBelowOne(f64),
    #[error("spike strength must exceed 1, got {0}")]
    SpikeStrengthTooSmall(f64),
    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),
}

/// E-PCA, first DC split: g(x,s) = (λ/2)‖x‖² (sample-independent),
/// h(x,s) = (λ/2)‖x‖² + ½⟨x,s⟩², r1 the unit-ball indicator, r2 ≡ 0.
///
/// G is explicit, so every algorithm route applies. Declared ρ = λ.
#[derive(Clone, Debug)]
pub struct EpcaDecomposition1 {
    lambda: f64,
    dim: usize,
    r1: ConvexRegularizer,
}

impl EpcaDecomposition1 {
    pub fn new(lambda: f64, dim: usize) -> Result<Self, ModelError> {
        if !(lambda > 0.0) {
            return Err(ModelError::NonPositiveLambda(lambda));
        }
        Ok(EpcaDecomposition1 {
            lambda,
            dim,
            r1: ConvexRegularizer::ball(1.0).expect("unit radius"),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

impl StochasticDcProgram for EpcaDecomposition1 {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn g_value(&self, x: &Vector, _s: &SamplePoint) -> f64 {
        0.5 * self.lambda * x.norm_squared()
    }

    fn g_subgrad(&self, x: &Vector, _s: &SamplePoint) -> Vector {
        x.scaled(self.lambda)
    }

    fn h_value(&self, x: &Vector, s: &SamplePoint) -> f64 {
        let ip = s.features.dot_dense(x);
        0.5 * self.lambda * x.norm_squared() + 0.5 * ip * ip
    }

    fn h_subgrad(&self, x: &Vector, s: &SamplePoint) -> Vector {
        let mut g = x.scaled(self.lambda);
        s.features.add_scaled_into(s.features.dot_dense(x), &mut g);
        g
    }

    fn g_subgrad_into(&self, x: &Vector, _s: &SamplePoint, out: &mut Vector) {
        out.copy_scaled(self.lambda, x);
    }

    fn h_subgrad_into(&self, x: &Vector, s: &SamplePoint, out: &mut Vector) {
        out.copy_scaled(self.lambda, x);
        s.features.add_scaled_into(s.features.dot_dense(x), out);
    }

    fn r1(&self) -> &ConvexRegularizer {
        &self.r1
    }

    fn rho(&self) -> f64 {
        self.lambda
    }

    fn g_depends_on_sample(&self) -> bool {
        false
    }

    fn sample_g_form(&self) -> SampleGForm {
        SampleGForm::Quadratic { mu: self.lambda }
    }

    fn explicit_g(&self) -> Option<ExplicitConvex> {
        Some(ExplicitConvex::Quadratic { mu: self.lambda })
    }

    fn is_smooth(&self) -> bool {
        true
    }
}

/// E-PCA, second DC split: g(x,s) = (L/2)‖x‖² − ¼⟨x,s⟩²,
/// h(x,s) = (L/2)‖x‖² + ¼⟨x,s⟩². Both components depend on the sample and G
/// has no closed form, so only the sample-average algorithm routes apply.
///
/// The data terms carry coefficient ¼ so that g − h equals the same
/// per-sample objective −½⟨x,s⟩² as the first split; the two decompositions
/// are interchangeable in every evaluation. g(·,s) is convex for ‖s‖ ≤ 1
/// whenever L ≥ 1; construction rejects smaller L. Declared ρ = L (h(·,s) is
/// L-strongly convex, r2 ≡ 0).
#[derive(Clone, Debug)]
pub struct EpcaDecomposition2 {
    smoothing: f64,
    dim: usize,
    r1: ConvexRegularizer,
}

impl EpcaDecomposition2 {
    pub fn new(smoothing: f64, dim: usize) -> Result<Self, ModelError> {
        if !(smoothing >= 1.0) {
            return Err(ModelError::SmoothingBelowOne(smoothing));
        }
        Ok(EpcaDecomposition2 {
            smoothing,
            dim,
            r1: ConvexRegularizer::ball(1.0).expect("unit radius"),
        })
    }

    pub fn smoothing(&self) -> f64 {
        self.smoothing
    }
}

impl StochasticDcProgram for EpcaDecomposition2 {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn g_value(&self, x: &Vector, s: &SamplePoint) -> f64 {
        let ip = s.features.dot_dense(x);
        0.5 * self.smoothing * x.norm_squared() - 0.25 * ip * ip
    }

    fn g_subgrad(&self, x: &Vector, s: &SamplePoint) -> Vector {
        let mut g = x.scaled(self.smoothing);
        s.features
            .add_scaled_into(-0.5 * s.features.dot_dense(x), &mut g);
        g
    }

    fn h_value(&self, x: &Vector, s: &SamplePoint) -> f64 {
        let ip = s.features.dot_dense(x);
        0.5 * self.smoothing * x.norm_squared() + 0.25 * ip * ip
    }

    fn h_subgrad(&self, x: &Vector, s: &SamplePoint) -> Vector {
        let mut g = x.scaled(self.smoothing);
        s.features
            .add_scaled_into(0.5 * s.features.dot_dense(x), &mut g);
        g
    }

    fn g_subgrad_into(&self, x: &Vector, s: &SamplePoint, out: &mut Vector) {
        out.copy_scaled(self.smoothing, x);
        s.features
            .add_scaled_into(-0.5 * s.features.dot_dense(x), out);
    }

    fn h_subgrad_into(&self, x: &Vector, s: &SamplePoint, out: &mut Vector) {
        out.copy_scaled(self.smoothing, x);
        s.features
            .add_scaled_into(0.5 * s.features.dot_dense(x), out);
    }

    fn r1(&self) -> &ConvexRegularizer {
        &self.r1
    }

    fn rho(&self) -> f64 {
        self.smoothing
    }

    fn g_depends_on_sample(&self) -> bool {
        true
    }

    fn sample_g_form(&self) -> SampleGForm {
        SampleGForm::QuadraticMinusInner {
            mu: self.smoothing,
            inner_coeff: 0.5,
        }
    }

    fn explicit_g(&self) -> Option<ExplicitConvex> {
        None
    }

    fn is_smooth(&self) -> bool {
        true
    }
}

/// Robust real phase retrieval on a fixed measurement set
/// {(aᵢ, bᵢ)}: minimize (1/m) Σ |⟨aᵢ,x⟩² − bᵢ| with the split
/// gᵢ = 2·max{⟨aᵢ,x⟩² − bᵢ, 0}, hᵢ = ⟨aᵢ,x⟩² − bᵢ.
///
/// The underlying model is unconstrained; a large ball wraps it so every
/// algorithm in the suite applies, with minimizers interior. Each sample
/// point carries aᵢ as features and bᵢ as label. The declared ρ is 0 for
/// n ≥ 2 (rank-one quadratics), so the convergence-theory precondition does
/// not hold and runs flag it.
#[derive(Clone, Debug)]
pub struct PhaseRetrieval {
    samples: Arc<Vec<SamplePoint>>,
    dim: usize,
    r1: ConvexRegularizer,
}

impl PhaseRetrieval {
    /// Wraps the measurement pairs; the ball radius defaults to
    /// 10·max(1, √(mean b)), an estimate of 10‖x̄‖.
    pub fn from_pairs(pairs: Vec<(Vector, f64)>, radius: Option<f64>) -> Self {
        assert!(!pairs.is_empty(), "phase retrieval needs measurements");
        let dim = pairs[0].0.dim();
        let mean_b = pairs.iter().map(|(_, b)| b.abs()).sum::<f64>() / pairs.len() as f64;
        let radius = radius.unwrap_or_else(|| 10.0 * mean_b.sqrt().max(1.0));
        let samples: Vec<SamplePoint> = pairs
            .into_iter()
            .map(|(a, b)| {
                assert_eq!(a.dim(), dim, "inconsistent measurement dimension");
                SamplePoint::new(SparseVector::from_dense(a.as_slice()), Some(b))
            })
            .collect();
        PhaseRetrieval {
            samples: Arc::new(samples),
            dim,
            r1: ConvexRegularizer::ball(radius).expect("positive radius"),
        }
    }

    /// Noiseless planted instance: aᵢ standard Gaussian, bᵢ = ⟨aᵢ, x̄⟩².
    /// Returns the program and the planted signal.
    pub fn planted(dim: usize, measurements: usize, seed: u64) -> (Self, Vector) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xbar = Vector::from_vec(
            (0..dim)
                .map(|_| standard_normal(&mut rng))
                .collect::<Vec<_>>(),
        );
        let pairs = (0..measurements)
            .map(|_| {
                let a = Vector::from_vec(
                    (0..dim)
                        .map(|_| standard_normal(&mut rng))
                        .collect::<Vec<_>>(),
                );
                let b = a.dot(&xbar).powi(2);
                (a, b)
            })
            .collect();
        (Self::from_pairs(pairs, None), xbar)
    }

    pub fn num_pairs(&self) -> usize {
        self.samples.len()
    }

    pub fn pair(&self, i: usize) -> SamplePoint {
        self.samples[i].clone()
    }

    pub fn samples(&self) -> &[SamplePoint] {
        &self.samples
    }

    /// (1/m) Σ |⟨aᵢ,x⟩² − bᵢ|.
    pub fn objective(&self, x: &Vector) -> f64 {
        self.samples
            .iter()
            .map(|s| {
                let ip = s.features.dot_dense(x);
                (ip * ip - s.label.expect("measurement label")).abs()
            })
            .sum::<f64>()
            / self.samples.len() as f64
    }

    /// Stochastic adapter: i.i.d. uniform draws over the m pairs.
    pub fn uniform_stream(&self, seed: u64, length: usize) -> Vec<SamplePoint> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..length)
            .map(|_| self.samples[rng.gen_range(0..self.samples.len())].clone())
            .collect()
    }
}

impl StochasticDcProgram for PhaseRetrieval {
    fn dimension(&self) -> usize {
        self.dim
    }

    fn g_value(&self, x: &Vector, s: &SamplePoint) -> f64 {
        let ip = s.features.dot_dense(x);
        2.0 * (ip * ip - s.label.expect("measurement label")).max(0.0)
    }

    /// Subgradient with the kink convention: the zero-side element at
    /// ⟨a,x⟩² = b.
    fn g_subgrad(&self, x: &Vector, s: &SamplePoint) -> Vector {
        let ip = s.features.dot_dense(x);
        let q = ip * ip - s.label.expect("measurement label");
        let mut g = Vector::zeros(self.dim);
        if q > 0.0 {
            s.features.add_scaled_into(4.0 * ip, &mut g);
        }
        g
    }

    fn h_value(&self, x: &Vector, s: &SamplePoint) -> f64 {
        let ip = s.features.dot_dense(x);
        ip * ip - s.label.expect("measurement label")
    }

    fn h_subgrad(&self, x: &Vector, s: &SamplePoint) -> Vector {
        let ip = s.features.dot_dense(x);
        let mut g = Vector::zeros(self.dim);
        s.features.add_scaled_into(2.0 * ip, &mut g);
        g
    }

    fn g_subgrad_into(&self, x: &Vector, s: &SamplePoint, out: &mut Vector) {
        out.set_zero();
        let ip = s.features.dot_dense(x);
        if ip * ip - s.label.expect("measurement label") > 0.0 {
            s.features.add_scaled_into(4.0 * ip, out);
        }
    }

    fn h_subgrad_into(&self, x: &Vector, s: &SamplePoint, out: &mut Vector) {
        out.set_zero();
        s.features
            .add_scaled_into(2.0 * s.features.dot_dense(x), out);
    }

    fn r1(&self) -> &ConvexRegularizer {
        &self.r1
    }

    fn rho(&self) -> f64 {
        0.0
    }

    fn g_depends_on_sample(&self) -> bool {
        true
    }

    fn sample_g_form(&self) -> SampleGForm {
        SampleGForm::Hinge
    }

    fn explicit_g(&self) -> Option<ExplicitConvex> {
        Some(ExplicitConvex::HingeSum {
            samples: Arc::clone(&self.samples),
        })
    }

    fn is_smooth(&self) -> bool {
        false
    }
}

/// Synthetic spiked-Gaussian dataset with unit-normalized rows, plus the top
/// eigenvectors of the empirical and population second-moment matrices.
#[derive(Clone, Debug)]
pub struct SpikedDataset {
    pub dataset: Dataset,
    /// Top eigenvector of (1/m) Σ s sᵀ, from the dense eigendecomposition
    /// oracle, sign-aligned with the spike direction.
    pub empirical_top: Vector,
    /// Unit spike direction (the population top eigenvector).
    pub population_top: Vector,
    pub empirical_top_eigenvalue: f64,
}

/// Draws rows x = strength·ξ·u + z with ξ, z standard Gaussian, then
/// normalizes each row to unit norm.
pub fn synth_spiked_gaussian(
    dim: usize,
    spike_direction: &Vector,
    spike_strength: f64,
    count: usize,
    seed: u64,
) -> Result<SpikedDataset, ModelError> {
    if dim < 2 {
        return Err(ModelError::DimensionTooSmall(dim));
    }
    if !(spike_strength > 1.0) {
        return Err(ModelError::SpikeStrengthTooSmall(spike_strength));
    }
    let unit_spike = spike_direction.scaled(1.0 / spike_direction.norm());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<SamplePoint> = (0..count)
        .map(|_| {
            let xi = standard_normal(&mut rng);
            let mut row = unit_spike.scaled(spike_strength * xi);
            for i in 0..dim {
                row[i] += standard_normal(&mut rng);
            }
            let norm = row.norm();
            SamplePoint::new(
                SparseVector::from_dense(row.scaled(1.0 / norm).as_slice()),
                None,
            )
        })
        .collect();
    let (mut empirical_top, empirical_top_eigenvalue) = top_eigenvector(&rows, dim);
    if empirical_top.dot(&unit_spike) < 0.0 {
        empirical_top.scale_mut(-1.0);
    }
    let dataset = Dataset::from_rows(
        rows,
        dim,
        DatasetProvenance {
            source: Some(format!("synthetic-spiked(seed={seed})")),
            normalized: true,
        },
    )
    .expect("generated rows are consistent");
    Ok(SpikedDataset {
        dataset,
        empirical_top,
        population_top: unit_spike,
        empirical_top_eigenvalue,
    })
}

/// Dense eigendecomposition oracle: top eigenpair of the empirical second-
/// moment matrix (1/m) Σ s sᵀ.
pub fn top_eigenvector(samples: &[SamplePoint], dim: usize) -> (Vector, f64) {
    assert!(!samples.is_empty(), "need samples for the eigen oracle");
    let mut c = DMatrix::<f64>::zeros(dim, dim);
    let scale = 1.0 / samples.len() as f64;
    for s in samples {
        let entries: Vec<(usize, f64)> = s.features.iter().collect();
        for &(i, vi) in &entries {
            for &(j, vj) in &entries {
                c[(i, j)] += vi * vj * scale;
            }
        }
    }
    let eig = c.symmetric_eigen();
    let (idx, &lambda) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .unwrap();
    let v = Vector::from_vec(eig.eigenvectors.column(idx).iter().copied().collect());
    (v, lambda)
}

/// Reference optimum for the empirical E-PCA problem on a validation set:
/// the minimum over multi-start full-batch DCA runs (random starts in the
/// unit ball).
pub fn epca_reference_value(
    validation: &Dataset,
    starts: usize,
    tol: f64,
    seed: u64,
) -> f64 {
    assert!(!validation.is_empty(), "validation set must be nonempty");
    let prog = EpcaDecomposition1::new(1e-6, validation.dim()).expect("valid lambda");
    let finite = FiniteSumProgram::new(&prog, validation.rows());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..starts {
        let x0 = random_in_ball(&mut rng, validation.dim(), 1.0);
        let traj = run_dca(&finite, &x0, tol, 500);
        best = best.min(*traj.objectives.last().expect("at least one objective"));
    }
    best
}
