//! Dense iterate vectors, sparse sample vectors, and sample points.
//!
//! Iterates are dense (subgradient averages densify immediately); samples
//! stay sparse for streaming throughput. All stored coordinates are finite;
//! constructors reject NaN and infinities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense vector of finite real coordinates with a fixed dimension.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Vector {
    data: Vec<f64>,
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        Vector {
            data: vec![0.0; dim],
        }
    }

    /// Builds a vector from raw coordinates.
    ///
    /// Panics if any coordinate is NaN or infinite.
    pub fn from_vec(data: Vec<f64>) -> Self {
        assert!(
            data.iter().all(|v| v.is_finite()),
            "vector coordinates must be finite"
        );
        Vector { data }
    }

    pub fn from_slice(data: &[f64]) -> Self {
        Self::from_vec(data.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn dot(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in dot");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn norm_squared(&self) -> f64 {
        self.data.iter().map(|a| a * a).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn scaled(&self, factor: f64) -> Vector {
        Vector {
            data: self.data.iter().map(|a| a * factor).collect(),
        }
    }

    pub fn scale_mut(&mut self, factor: f64) {
        for a in &mut self.data {
            *a *= factor;
        }
    }

    pub fn set_zero(&mut self) {
        for a in &mut self.data {
            *a = 0.0;
        }
    }

    /// self = factor * other
    pub fn copy_scaled(&mut self, factor: f64, other: &Vector) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in copy_scaled");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = factor * b;
        }
    }

    /// self += factor * other
    pub fn add_scaled(&mut self, factor: f64, other: &Vector) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in add_scaled");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += factor * b;
        }
    }

    /// self = (1 - ratio) * self + ratio * other — the incremental averaging step.
    pub fn mix(&mut self, ratio: f64, other: &Vector) {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in mix");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = (1.0 - ratio) * *a + ratio * b;
        }
    }

    pub fn add(&self, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in add");
        Vector {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn sub(&self, other: &Vector) -> Vector {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in sub");
        Vector {
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch in distance");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean projection onto the centered ball of the given radius.
    ///
    /// The result satisfies ‖x‖ ≤ radius exactly: scaling is repeated when
    /// rounding leaves the norm an ulp above.
    pub fn project_ball(&self, radius: f64) -> Vector {
        let n = self.norm();
        if n <= radius {
            return self.clone();
        }
        let mut out = self.scaled(radius / n);
        let mut norm = out.norm();
        while norm > radius {
            let factor = (radius / norm).min(1.0 - 2.0 * f64::EPSILON);
            out.scale_mut(factor);
            norm = out.norm();
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl std::ops::Index<usize> for Vector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for Vector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SparseVectorError {
    #[error("index {index} out of bounds for dimension {dim}")]
    IndexOutOfBounds { index: usize, dim: usize },
    #[error("indices must be strictly increasing (violation at index {index})")]
    NonIncreasingIndex { index: usize },
    #[error("explicit zero value at index {index}")]
    StoredZero { index: usize },
    #[error("non-finite value at index {index}")]
    NonFiniteValue { index: usize },
}

/// Sparse vector: sorted (index, value) pairs with a logical dimension.
///
/// Indices are strictly increasing and in `[0, dim)`; zero values are never
/// stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
    dim: usize,
}

impl SparseVector {
    pub fn from_pairs(
        entries: Vec<(usize, f64)>,
        dim: usize,
    ) -> Result<Self, SparseVectorError> {
        let mut last: Option<usize> = None;
        for &(i, v) in &entries {
            if i >= dim {
                return Err(SparseVectorError::IndexOutOfBounds { index: i, dim });
            }
            if let Some(prev) = last {
                if i <= prev {
                    return Err(SparseVectorError::NonIncreasingIndex { index: i });
                }
            }
            if v == 0.0 {
                return Err(SparseVectorError::StoredZero { index: i });
            }
            if !v.is_finite() {
                return Err(SparseVectorError::NonFiniteValue { index: i });
            }
            last = Some(i);
        }
        Ok(SparseVector { entries, dim })
    }

    /// Builds from a dense slice, dropping zeros.
    pub fn from_dense(values: &[f64]) -> Self {
        let entries = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v != 0.0)
            .map(|(i, &v)| (i, v))
            .collect();
        SparseVector {
            entries,
            dim: values.len(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().copied()
    }

    pub fn norm_squared(&self) -> f64 {
        self.entries.iter().map(|(_, v)| v * v).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn dot_dense(&self, x: &Vector) -> f64 {
        assert_eq!(self.dim, x.dim(), "dimension mismatch in dot_dense");
        self.entries.iter().map(|&(i, v)| v * x[i]).sum()
    }

    /// out += factor * self
    pub fn add_scaled_into(&self, factor: f64, out: &mut Vector) {
        assert_eq!(self.dim, out.dim(), "dimension mismatch in add_scaled_into");
        for &(i, v) in &self.entries {
            out[i] += factor * v;
        }
    }

    pub fn scaled(&self, factor: f64) -> SparseVector {
        assert!(factor != 0.0 && factor.is_finite(), "bad scale factor");
        SparseVector {
            entries: self.entries.iter().map(|&(i, v)| (i, v * factor)).collect(),
            dim: self.dim,
        }
    }

    pub fn to_dense(&self) -> Vector {
        let mut out = Vector::zeros(self.dim);
        for &(i, v) in &self.entries {
            out[i] = v;
        }
        out
    }

    /// Reinterprets the vector in a larger ambient dimension.
    pub fn with_dim(&self, dim: usize) -> Result<SparseVector, SparseVectorError> {
        if let Some(&(last, _)) = self.entries.last() {
            if last >= dim {
                return Err(SparseVectorError::IndexOutOfBounds { index: last, dim });
            }
        }
        Ok(SparseVector {
            entries: self.entries.clone(),
            dim,
        })
    }
}

/// One standard-normal draw (Box-Muller, one value per call).
pub fn standard_normal<R: rand::Rng>(rng: &mut R) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Uniform draw from the centered ball of the given radius.
pub fn random_in_ball<R: rand::Rng>(rng: &mut R, dim: usize, radius: f64) -> Vector {
    let raw = Vector::from_vec((0..dim).map(|_| standard_normal(rng)).collect::<Vec<_>>());
    let u: f64 = rng.gen_range(0.0f64..1.0);
    let target = radius * u.powf(1.0 / dim as f64);
    raw.scaled(target / raw.norm())
}

/// A training sample: sparse features plus an optional label.
///
/// The label is unused by E-PCA and carries the measurement b for phase
/// retrieval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplePoint {
    pub features: SparseVector,
    pub label: Option<f64>,
}

impl SamplePoint {
    pub fn new(features: SparseVector, label: Option<f64>) -> Self {
        SamplePoint { features, label }
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dot_and_norm() {
        let a = Vector::from_slice(&[3.0, 4.0]);
        let b = Vector::from_slice(&[1.0, 0.0]);
        assert_eq!(a.dot(&b), 3.0);
        assert_eq!(a.norm(), 5.0);
    }

    #[test]
    #[should_panic(expected = "dimension mismatch")]
    fn dot_dimension_mismatch_panics() {
        let a = Vector::zeros(2);
        let b = Vector::zeros(3);
        let _ = a.dot(&b);
    }

    #[test]
    #[should_panic(expected = "finite")]
    fn non_finite_rejected() {
        let _ = Vector::from_vec(vec![1.0, f64::NAN]);
    }

    #[test]
    fn projection_inside_and_outside() {
        let inside = Vector::from_slice(&[0.3, 0.4]);
        assert_eq!(inside.project_ball(1.0), inside);
        let outside = Vector::from_slice(&[3.0, 4.0]);
        let p = outside.project_ball(1.0);
        assert!((p.norm() - 1.0).abs() < 1e-15);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn mix_is_convex_combination() {
        let mut a = Vector::from_slice(&[1.0, 0.0]);
        let b = Vector::from_slice(&[0.0, 1.0]);
        a.mix(0.25, &b);
        assert_eq!(a.as_slice(), &[0.75, 0.25]);
    }

    #[test]
    fn sparse_invariants_enforced() {
        assert!(SparseVector::from_pairs(vec![(0, 1.0), (2, 0.5)], 3).is_ok());
        assert_eq!(
            SparseVector::from_pairs(vec![(2, 1.0), (1, 0.5)], 3),
            Err(SparseVectorError::NonIncreasingIndex { index: 1 })
        );
        assert_eq!(
            SparseVector::from_pairs(vec![(3, 1.0)], 3),
            Err(SparseVectorError::IndexOutOfBounds { index: 3, dim: 3 })
        );
        assert_eq!(
            SparseVector::from_pairs(vec![(1, 0.0)], 3),
            Err(SparseVectorError::StoredZero { index: 1 })
        );
    }

    #[test]
    fn sparse_dense_agree() {
        let s = SparseVector::from_pairs(vec![(1, 2.0), (3, -1.5)], 5).unwrap();
        let x = Vector::from_slice(&[1.0, 1.0, 1.0, 2.0, 1.0]);
        assert_eq!(s.dot_dense(&x), 2.0 - 3.0);
        assert_eq!(s.to_dense().dot(&x), s.dot_dense(&x));
        let mut acc = Vector::zeros(5);
        s.add_scaled_into(2.0, &mut acc);
        assert_eq!(acc.as_slice(), &[0.0, 4.0, 0.0, -3.0, 0.0]);
    }

    proptest! {
        #[test]
        fn from_dense_round_trip(values in proptest::collection::vec(-10.0f64..10.0, 0..20)) {
            let s = SparseVector::from_dense(&values);
            let d = s.to_dense();
            prop_assert_eq!(d.as_slice(), &values[..]);
            prop_assert!((s.norm() - d.norm()).abs() < 1e-12);
        }

        #[test]
        fn projection_never_leaves_ball(values in proptest::collection::vec(-100.0f64..100.0, 1..10),
                                        radius in 0.1f64..10.0) {
            let v = Vector::from_vec(values);
            let p = v.project_ball(radius);
            prop_assert!(p.norm() <= radius * (1.0 + 1e-12));
        }
    }
}
