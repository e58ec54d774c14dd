//! LIBSVM-format parsing, row normalization, seeded shuffling, and
//! single-pass sample streaming.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::vector::{SamplePoint, SparseVector};

#[derive(Debug, Error, PartialEq)]
pub enum LibsvmParseError {
    #[error("empty input")]
    EmptyInput,
    #[error("line {line}: missing label")]
    MissingLabel { line: usize },
    #[error("line {line}: non-numeric token '{token}'")]
    NonNumericToken { line: usize, token: String },
    #[error("line {line}: malformed feature '{token}' (expected index:value)")]
    MalformedFeature { line: usize, token: String },
    #[error("line {line}: feature indices are 1-based, got 0")]
    ZeroIndex { line: usize },
    #[error("line {line}: non-increasing feature index {index}")]
    NonIncreasingIndex { line: usize, index: usize },
}

#[derive(Debug, Error, PartialEq)]
pub enum DataError {
    #[error("row {row} has zero norm and cannot be normalized")]
    ZeroRow { row: usize },
    #[error("feature index {index} exceeds dimension {dim}")]
    DimensionTooSmall { index: usize, dim: usize },
    #[error("dataset is empty")]
    Empty,
}

/// Where a dataset came from and whether its rows are unit-normalized.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DatasetProvenance {
    pub source: Option<String>,
    pub normalized: bool,
}

/// An in-memory collection of sparse samples with a common dimension.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    rows: Vec<SamplePoint>,
    dim: usize,
    provenance: DatasetProvenance,
}

impl Dataset {
    pub fn from_rows(
        rows: Vec<SamplePoint>,
        dim: usize,
        provenance: DatasetProvenance,
    ) -> Result<Self, DataError> {
        for row in &rows {
            if let Some((idx, _)) = row.features.iter().last() {
                if idx >= dim {
                    return Err(DataError::DimensionTooSmall { index: idx, dim });
                }
            }
        }
        let rows = rows
            .into_iter()
            .map(|r| {
                let features = r.features.with_dim(dim).expect("checked above");
                SamplePoint::new(features, r.label)
            })
            .collect();
        Ok(Dataset {
            rows,
            dim,
            provenance,
        })
    }

    pub fn rows(&self) -> &[SamplePoint] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn provenance(&self) -> &DatasetProvenance {
        &self.provenance
    }

    /// Raises the logical dimension (datasets with trailing all-zero
    /// features). Lowering below the max seen index is an error.
    pub fn with_dimension(self, dim: usize) -> Result<Self, DataError> {
        Dataset::from_rows(self.rows, dim, self.provenance)
    }

    /// Seeded split into (train, validation) with the given held-out
    /// fraction.
    pub fn split_validation(&self, fraction: f64, seed: u64) -> (Dataset, Dataset) {
        assert!((0.0..1.0).contains(&fraction), "fraction in [0, 1)");
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
        let held = ((self.rows.len() as f64) * fraction).round() as usize;
        let (val_idx, train_idx) = order.split_at(held);
        let pick = |idx: &[usize], tag: &str| Dataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            dim: self.dim,
            provenance: DatasetProvenance {
                source: self
                    .provenance
                    .source
                    .as_ref()
                    .map(|s| format!("{s}#{tag}")),
                normalized: self.provenance.normalized,
            },
        };
        (pick(train_idx, "train"), pick(val_idx, "validation"))
    }
}

/// Parses LIBSVM text: lines of `label idx:val idx:val ...` with 1-based,
/// strictly increasing indices. Indices are converted to 0-based and the
/// dimension is the maximum index seen. Explicit zero values are dropped
/// (sparse vectors never store zeros). Blank lines are skipped.
pub fn parse_libsvm(input: &str) -> Result<Dataset, LibsvmParseError> {
    let mut rows: Vec<(f64, Vec<(usize, f64)>)> = Vec::new();
    let mut max_index = 0usize;
    for (line_no, line) in input.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let label_tok = tokens.next().ok_or(LibsvmParseError::MissingLabel {
            line: line_no,
        })?;
        let label: f64 = label_tok
            .parse()
            .map_err(|_| LibsvmParseError::NonNumericToken {
                line: line_no,
                token: label_tok.to_string(),
            })?;
        let mut entries: Vec<(usize, f64)> = Vec::new();
        let mut last_index: Option<usize> = None;
        for tok in tokens {
            let (idx_str, val_str) =
                tok.split_once(':')
                    .ok_or_else(|| LibsvmParseError::MalformedFeature {
                        line: line_no,
                        token: tok.to_string(),
                    })?;
            let one_based: usize =
                idx_str
                    .parse()
                    .map_err(|_| LibsvmParseError::NonNumericToken {
                        line: line_no,
                        token: idx_str.to_string(),
                    })?;
            if one_based == 0 {
                return Err(LibsvmParseError::ZeroIndex { line: line_no });
            }
            let value: f64 = val_str
                .parse()
                .map_err(|_| LibsvmParseError::NonNumericToken {
                    line: line_no,
                    token: val_str.to_string(),
                })?;
            let index = one_based - 1;
            if let Some(prev) = last_index {
                if index <= prev {
                    return Err(LibsvmParseError::NonIncreasingIndex {
                        line: line_no,
                        index: one_based,
                    });
                }
            }
            last_index = Some(index);
            max_index = max_index.max(one_based);
            if value != 0.0 {
                entries.push((index, value));
            }
        }
        rows.push((label, entries));
    }
    if rows.is_empty() {
        return Err(LibsvmParseError::EmptyInput);
    }
    let dim = max_index;
    let rows = rows
        .into_iter()
        .map(|(label, entries)| {
            let features =
                SparseVector::from_pairs(entries, dim.max(1)).expect("parser keeps invariants");
            SamplePoint::new(features, Some(label))
        })
        .collect();
    Ok(Dataset {
        rows,
        dim: dim.max(1),
        provenance: DatasetProvenance {
            source: None,
            normalized: false,
        },
    })
}

/// Writes the dataset in LIBSVM text form (1-based indices). Floats use the
/// shortest representation that round-trips, so export → parse → export is a
/// fixed point.
pub fn write_libsvm<W: std::io::Write>(dataset: &Dataset, mut out: W) -> std::io::Result<()> {
    for row in dataset.rows() {
        let label = row.label.unwrap_or(0.0);
        write!(out, "{label}")?;
        for (i, v) in row.features.iter() {
            write!(out, " {}:{}", i + 1, v)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn libsvm_to_string(dataset: &Dataset) -> String {
    let mut buf = Vec::new();
    write_libsvm(dataset, &mut buf).expect("writing to memory");
    String::from_utf8(buf).expect("ascii output")
}

/// Scales every row to unit Euclidean norm. A zero row is an error naming the
/// row.
pub fn normalize_rows(dataset: &Dataset) -> Result<Dataset, DataError> {
    let mut rows = Vec::with_capacity(dataset.len());
    for (i, row) in dataset.rows().iter().enumerate() {
        let norm = row.features.norm();
        if norm == 0.0 {
            return Err(DataError::ZeroRow { row: i });
        }
        let features = if (norm - 1.0).abs() < 1e-16 {
            row.features.clone()
        } else {
            row.features.scaled(1.0 / norm)
        };
        rows.push(SamplePoint::new(features, row.label));
    }
    Ok(Dataset {
        rows,
        dim: dataset.dim,
        provenance: DatasetProvenance {
            source: dataset.provenance.source.clone(),
            normalized: true,
        },
    })
}

/// Single-pass stream over a seeded Fisher-Yates shuffle of the dataset.
/// Each row is yielded at most once; exhaustion is end-of-stream, not an
/// error. Never copies the rows.
pub struct SampleStream<'a> {
    dataset: &'a Dataset,
    order: Vec<u32>,
    cursor: usize,
}

impl<'a> SampleStream<'a> {
    pub fn remaining(&self) -> usize {
        self.order.len() - self.cursor
    }

    pub fn order(&self) -> &[u32] {
        &self.order
    }
}

impl<'a> Iterator for SampleStream<'a> {
    type Item = &'a SamplePoint;

    fn next(&mut self) -> Option<&'a SamplePoint> {
        let idx = *self.order.get(self.cursor)?;
        self.cursor += 1;
        Some(&self.dataset.rows()[idx as usize])
    }
}

/// Shuffles the dataset order with the seeded generator and returns the
/// single-pass stream.
pub fn stream_shuffled(dataset: &Dataset, seed: u64) -> SampleStream<'_> {
    assert!(!dataset.is_empty(), "cannot stream an empty dataset");
    let mut order: Vec<u32> = (0..dataset.len() as u32).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    SampleStream {
        dataset,
        order,
        cursor: 0,
    }
}
