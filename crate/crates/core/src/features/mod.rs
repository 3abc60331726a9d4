//! From raw multi-channel recordings to labeled feature matrices.

mod dwt;
mod extract;
mod standardize;
mod window;

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng;

pub use dwt::{dwt_marginals, Db7, DWT_LEVELS};
pub use extract::{extract_features, extract_features_with_reference, FeatureKind};
pub use standardize::Standardizer;
pub use window::{segment_windows, WindowSet, WindowSpec};

/// Movement label of the rest posture.
pub const REST: u32 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SubjectKind {
    Intact,
    Amputee,
}

impl SubjectKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SubjectKind::Intact => "intact",
            SubjectKind::Amputee => "amputee",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "intact" => Some(SubjectKind::Intact),
            "amputee" => Some(SubjectKind::Amputee),
            _ => None,
        }
    }
}

/// Raw signal of one subject with per-sample movement and repetition labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmgRecording {
    pub subject_id: String,
    pub subject_kind: SubjectKind,
    /// Hz.
    pub sampling_rate: f64,
    /// Declared number of movements `G`; stimulus values lie in `0..=G`.
    pub movements: u32,
    /// Declared number of repetitions `R`; repetition values lie in `0..=R`.
    pub repetitions: u32,
    /// time × channels.
    pub samples: Matrix,
    pub stimulus: Vec<u32>,
    pub repetition: Vec<u32>,
}

impl EmgRecording {
    /// Checks the label and shape invariants; returns the recording on success.
    pub fn validated(self) -> Result<Self> {
        let n = self.samples.rows();
        if self.stimulus.len() != n || self.repetition.len() != n {
            return Err(Error::InvalidRecording(alloc::format!(
                "{} samples but {} stimulus and {} repetition labels",
                n,
                self.stimulus.len(),
                self.repetition.len()
            )));
        }
        if !(self.sampling_rate > 0.0) || !self.sampling_rate.is_finite() {
            return Err(Error::InvalidRecording(alloc::format!(
                "sampling rate must be positive, got {}",
                self.sampling_rate
            )));
        }
        if let Some(row) = self.stimulus.iter().position(|&s| s > self.movements) {
            return Err(Error::InvalidRecording(alloc::format!(
                "row {row}: stimulus {} outside 0..={}",
                self.stimulus[row],
                self.movements
            )));
        }
        if let Some(row) = self.repetition.iter().position(|&r| r > self.repetitions) {
            return Err(Error::InvalidRecording(alloc::format!(
                "row {row}: repetition {} outside 0..={}",
                self.repetition[row],
                self.repetitions
            )));
        }
        if !self.samples.is_finite() {
            return Err(Error::NonFinite("recording samples"));
        }
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.samples.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.rows() == 0
    }

    pub fn channels(&self) -> usize {
        self.samples.cols()
    }
}

/// Windowed feature rows with their movement label and repetition index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub features: Matrix,
    pub labels: Vec<u32>,
    pub repetitions: Vec<u32>,
}

impl FeatureMatrix {
    pub fn new(features: Matrix, labels: Vec<u32>, repetitions: Vec<u32>) -> Result<Self> {
        let n = features.rows();
        if labels.len() != n || repetitions.len() != n {
            return Err(Error::DimensionMismatch {
                context: "feature matrix annotations",
                expected: n,
                found: if labels.len() != n {
                    labels.len()
                } else {
                    repetitions.len()
                },
            });
        }
        if !features.is_finite() {
            return Err(Error::NonFinite("feature matrix"));
        }
        Ok(FeatureMatrix {
            features,
            labels,
            repetitions,
        })
    }

    pub fn empty(dim: usize) -> Self {
        FeatureMatrix {
            features: Matrix::empty(dim),
            labels: Vec::new(),
            repetitions: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn select(&self, idx: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            repetitions: idx.iter().map(|&i| self.repetitions[i]).collect(),
        }
    }

    /// Keeps the rows for which `keep(label, repetition)` holds, in order.
    pub fn filter(&self, mut keep: impl FnMut(u32, u32) -> bool) -> FeatureMatrix {
        let idx: Vec<usize> = (0..self.len())
            .filter(|&i| keep(self.labels[i], self.repetitions[i]))
            .collect();
        self.select(&idx)
    }

    /// Sorted distinct labels.
    pub fn classes(&self) -> Vec<u32> {
        sorted_unique(&self.labels)
    }

    /// Sorted distinct repetition indices.
    pub fn repetition_set(&self) -> Vec<u32> {
        sorted_unique(&self.repetitions)
    }

    pub fn concat(parts: &[&FeatureMatrix]) -> Result<FeatureMatrix> {
        let dim = parts.first().map_or(0, |p| p.dim());
        let mut out = FeatureMatrix::empty(dim);
        for p in parts {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    context: "feature concatenation",
                    expected: dim,
                    found: p.dim(),
                });
            }
            for i in 0..p.len() {
                out.features.push_row(p.features.row(i))?;
            }
            out.labels.extend_from_slice(&p.labels);
            out.repetitions.extend_from_slice(&p.repetitions);
        }
        Ok(out)
    }
}

pub(crate) fn sorted_unique(values: &[u32]) -> Vec<u32> {
    let mut v = values.to_vec();
    v.sort_unstable();
    v.dedup();
    v
}

/// Subsamples rest rows (label 0) down to the rounded mean per-movement row
/// count. Movement rows are untouched and the row order is preserved.
pub fn balance_rest(fm: &FeatureMatrix, seed: u64) -> FeatureMatrix {
    let rest: Vec<usize> = (0..fm.len()).filter(|&i| fm.labels[i] == REST).collect();
    let movements: Vec<u32> = fm.classes().into_iter().filter(|&c| c != REST).collect();
    if rest.is_empty() || movements.is_empty() {
        return fm.clone();
    }
    let moving_rows = fm.len() - rest.len();
    let target = libm::round(moving_rows as f64 / movements.len() as f64) as usize;
    if rest.len() <= target {
        return fm.clone();
    }
    let mut rng = rng::rng_from(seed);
    let mut keep_rest: Vec<usize> = index::sample(&mut rng, rest.len(), target)
        .into_iter()
        .map(|k| rest[k])
        .collect();
    keep_rest.sort_unstable();
    let mut keep: Vec<usize> = (0..fm.len()).filter(|&i| fm.labels[i] != REST).collect();
    keep.extend(keep_rest);
    keep.sort_unstable();
    fm.select(&keep)
}

/// Keeps rows whose index is congruent to `offset` modulo `factor`.
pub fn subsample_regular(fm: &FeatureMatrix, factor: usize, offset: usize) -> Result<FeatureMatrix> {
    if factor == 0 || offset >= factor {
        return Err(Error::InvalidParameter(alloc::format!(
            "subsampling needs factor >= 1 and offset < factor (factor {factor}, offset {offset})"
        )));
    }
    let idx: Vec<usize> = (offset..fm.len()).step_by(factor).collect();
    Ok(fm.select(&idx))
}
