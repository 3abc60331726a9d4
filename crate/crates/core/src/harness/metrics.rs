use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::sorted_unique;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Macro-averaged recall over the classes present in the truth.
    Balanced,
    /// Fraction of correct predictions.
    Standard,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Balanced => "balanced_accuracy",
            Metric::Standard => "accuracy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "balanced_accuracy" => Some(Metric::Balanced),
            "accuracy" => Some(Metric::Standard),
            _ => None,
        }
    }

    pub fn evaluate(self, truth: &[u32], predicted: &[u32]) -> Result<f64> {
        match self {
            Metric::Balanced => balanced_accuracy(truth, predicted),
            Metric::Standard => standard_accuracy(truth, predicted),
        }
    }
}

fn check(truth: &[u32], predicted: &[u32]) -> Result<()> {
    if truth.is_empty() {
        return Err(Error::EmptyInput("accuracy"));
    }
    if truth.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            context: "accuracy",
            expected: truth.len(),
            found: predicted.len(),
        });
    }
    Ok(())
}

pub fn standard_accuracy(truth: &[u32], predicted: &[u32]) -> Result<f64> {
    check(truth, predicted)?;
    let correct = truth.iter().zip(predicted).filter(|(t, p)| t == p).count();
    Ok(correct as f64 / truth.len() as f64)
}

pub fn balanced_accuracy(truth: &[u32], predicted: &[u32]) -> Result<f64> {
    check(truth, predicted)?;
    let classes = sorted_unique(truth);
    let mut hits: Vec<usize> = alloc::vec![0; classes.len()];
    let mut totals: Vec<usize> = alloc::vec![0; classes.len()];
    for (t, p) in truth.iter().zip(predicted) {
        let c = classes.binary_search(t).expect("class from truth");
        totals[c] += 1;
        if t == p {
            hits[c] += 1;
        }
    }
    let sum: f64 = hits.iter().zip(&totals).map(|(&h, &n)| h as f64 / n as f64).sum();
    Ok(sum / classes.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_counts() {
        assert_eq!(balanced_accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(standard_accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(balanced_accuracy(&[1, 1, 2, 2], &[1; 4]).unwrap(), 0.5);
        assert_eq!(standard_accuracy(&[1, 1, 2, 2], &[1; 4]).unwrap(), 0.5);
        assert_eq!(balanced_accuracy(&[1, 1, 1, 2], &[1; 4]).unwrap(), 0.5);
        assert_eq!(standard_accuracy(&[1, 1, 1, 2], &[1; 4]).unwrap(), 0.75);
    }

    #[test]
    fn errors() {
        assert!(balanced_accuracy(&[], &[]).is_err());
        assert!(standard_accuracy(&[1], &[1, 2]).is_err());
    }
}
