//! Multi kernel adaptive learning: a structured multiclass hinge objective
//! over a target RBF kernel plus one linear kernel per source model,
//! regularized with the squared (2,p) group norm
//!
//! ```text
//! min_w  lambda/2 * ||w||_{2,p}^2 + 1/N * sum_i max(0, 1 - min_{y != y_i} <w, phi(x_i, y_i) - phi(x_i, y)>)
//! ```
//!
//! Training is stochastic: each epoch visits the samples in a seeded random
//! order, accumulates the violated-constraint subgradients in a dual vector
//! `theta`, and maps it back to the primal with the gradient of the conjugate
//! regularizer, `w = grad (1/2)||.||_{2,q}^2 (theta / (lambda t))` where
//! `1/p + 1/q = 1`. All blocks share the same expansion coefficients in
//! `theta`; the mapping rescales each block by
//! `(||theta_k|| / ||theta||_{2,q})^(q-2)`, which drives small blocks towards
//! zero when `p` is close to one.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::sorted_unique;
use crate::kernels::{gram, gram_cross, KernelSpec};
use crate::linalg::Matrix;
use crate::lssvm::{argmax, labels_from_scores};
use crate::rng;
use crate::transfer::SourceHypothesis;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MkalConfig {
    pub p: f64,
    pub epochs: usize,
    pub lambda: f64,
    pub seed: u64,
}

impl MkalConfig {
    pub const DEFAULT_P: f64 = 1.04;
    pub const DEFAULT_EPOCHS: usize = 300;

    pub fn new(lambda: f64, seed: u64) -> Self {
        MkalConfig {
            p: Self::DEFAULT_P,
            epochs: Self::DEFAULT_EPOCHS,
            lambda,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p > 1.0 && self.p <= 2.0) {
            return Err(Error::InvalidParameter(alloc::format!("p must lie in (1, 2], got {}", self.p)));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("at least one epoch is required".into()));
        }
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(alloc::format!(
                "lambda must be positive, got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Dual exponent `q = p / (p - 1)`.
    pub fn dual_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }
}

/// What a kernel bank was built from, so cross banks can be formed for new data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BankDescriptor {
    pub gamma: f64,
    pub target_inputs: Matrix,
    /// Per source, its N × G raw score matrix on the training inputs.
    pub source_inputs: Vec<Matrix>,
}

#[derive(Debug, Clone)]
pub struct KernelBank {
    /// Index 0: RBF on target features; index k ≥ 1: linear on source-k scores.
    pub grams: Vec<Matrix>,
    pub descriptor: BankDescriptor,
}

impl KernelBank {
    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn samples(&self) -> usize {
        self.grams[0].rows()
    }
}

pub fn build_kernel_bank(x: &Matrix, sources: &[SourceHypothesis], gamma: f64) -> Result<KernelBank> {
    let scores = sources
        .iter()
        .map(|s| s.score_matrix(x))
        .collect::<Result<Vec<_>>>()?;
    build_kernel_bank_from_scores(x, scores, gamma)
}

pub fn build_kernel_bank_from_scores(x: &Matrix, source_scores: Vec<Matrix>, gamma: f64) -> Result<KernelBank> {
    let rbf = KernelSpec::rbf(gamma)?;
    let mut grams = Vec::with_capacity(source_scores.len() + 1);
    grams.push(gram(&rbf, x)?);
    for s in &source_scores {
        if s.rows() != x.rows() {
            return Err(Error::DimensionMismatch {
                context: "source score rows",
                expected: x.rows(),
                found: s.rows(),
            });
        }
        grams.push(gram(&KernelSpec::Linear, s)?);
    }
    Ok(KernelBank {
        grams,
        descriptor: BankDescriptor {
            gamma,
            target_inputs: x.clone(),
            source_inputs: source_scores,
        },
    })
}

impl BankDescriptor {
    /// Query × train cross Grams, in bank order.
    pub fn cross_bank(&self, z: &Matrix, sources: &[SourceHypothesis]) -> Result<Vec<Matrix>> {
        if sources.len() != self.source_inputs.len() {
            return Err(Error::DimensionMismatch {
                context: "MKAL source count",
                expected: self.source_inputs.len(),
                found: sources.len(),
            });
        }
        let mut out = Vec::with_capacity(sources.len() + 1);
        out.push(gram_cross(&KernelSpec::rbf(self.gamma)?, z, &self.target_inputs)?);
        for (s, train_scores) in sources.iter().zip(&self.source_inputs) {
            out.push(gram_cross(&KernelSpec::Linear, &s.score_matrix(z)?, train_scores)?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MkalModel {
    /// Per kernel, N × G expansion coefficients of that block of `w`.
    pub coefficients: Vec<Matrix>,
    pub classes: Vec<u32>,
    pub config: MkalConfig,
    pub descriptor: BankDescriptor,
}

/// Per-block rescaling of the dual vector from its block norms.
fn block_scales(norms: &[f64], q: f64) -> Vec<f64> {
    let max = norms.iter().copied().fold(0.0, f64::max);
    if !(max > 0.0) {
        return vec![0.0; norms.len()];
    }
    let ratios: Vec<f64> = norms.iter().map(|n| n / max).collect();
    let sum_q: f64 = ratios.iter().map(|r| libm::pow(*r, q)).sum();
    let common = libm::pow(sum_q, (2.0 - q) / q);
    ratios.iter().map(|r| common * libm::pow(*r, q - 2.0)).collect()
}

struct Iterate {
    objective: f64,
    coef: Matrix,
    scales: Vec<f64>,
    denom: f64,
}

/// Objective of `w_k = scales[k] theta_k / denom` from the cached evaluations
/// of `theta_k` at the training points and its block norms.
fn iterate_objective(
    evals: &[Matrix],
    theta_norms: &[f64],
    scales: &[f64],
    denom: f64,
    class_idx: &[usize],
    cfg: &MkalConfig,
) -> f64 {
    let n = class_idx.len();
    let g_count = evals[0].cols();
    let mut hinge = 0.0;
    let mut row = vec![0.0; g_count];
    for (i, &yi) in class_idx.iter().enumerate() {
        for (g, r) in row.iter_mut().enumerate() {
            *r = evals.iter().zip(scales).map(|(e, s)| s * e[(i, g)]).sum::<f64>() / denom;
        }
        let rival = (0..g_count).filter(|&g| g != yi).map(|g| row[g]).fold(f64::NEG_INFINITY, f64::max);
        hinge += (1.0 - (row[yi] - rival)).max(0.0);
    }
    let group = libm::pow(
        theta_norms.iter().zip(scales).map(|(t, s)| libm::pow(s * t / denom, cfg.p)).sum::<f64>(),
        1.0 / cfg.p,
    );
    cfg.lambda / 2.0 * group * group + hinge / n as f64
}

pub fn train_mkal(bank: &KernelBank, labels: &[u32], cfg: &MkalConfig) -> Result<MkalModel> {
    cfg.validate()?;
    let n = bank.samples();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            context: "MKAL labels",
            expected: n,
            found: labels.len(),
        });
    }
    if n < 2 {
        return Err(Error::TooFewSamples {
            context: "MKAL training",
            needed: 2,
            found: n,
        });
    }
    for k in &bank.grams {
        if k.rows() != n || k.cols() != n {
            return Err(Error::DimensionMismatch {
                context: "kernel bank",
                expected: n,
                found: k.rows(),
            });
        }
    }
    let classes = sorted_unique(labels);
    if classes.len() < 2 {
        return Err(Error::TooFewClasses { found: classes.len() });
    }
    let g_count = classes.len();
    let class_idx: Vec<usize> = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label in class list"))
        .collect();
    let blocks = bank.len();
    let q = cfg.dual_exponent();

    // Shared expansion coefficients of theta, and theta evaluated at every
    // training point per block.
    let mut coef = Matrix::zeros(n, g_count);
    let mut evals: Vec<Matrix> = (0..blocks).map(|_| Matrix::zeros(n, g_count)).collect();
    let mut sq_norms: Vec<f64> = vec![0.0; blocks];

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng::rng_from(cfg.seed);
    let mut t: usize = 0;
    let mut scores = vec![0.0; g_count];
    let mut scales = vec![0.0; blocks];
    let mut scales_dirty = false;

    // Subgradient steps are not descent steps, so the epoch-end iterate with
    // the lowest objective is kept, starting from w = 0 (objective 1).
    let mut best = Iterate {
        objective: 1.0,
        coef: coef.clone(),
        scales: vec![0.0; blocks],
        denom: 1.0,
    };

    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            if scales_dirty {
                let norms: Vec<f64> = sq_norms.iter().map(|s| libm::sqrt(s.max(0.0))).collect();
                scales = block_scales(&norms, q);
                scales_dirty = false;
            }
            // scores of w_{t} = map(theta_{t-1}) / (lambda (t-1))
            let denom = cfg.lambda * (t as f64 - 1.0).max(1.0);
            for (g, s) in scores.iter_mut().enumerate() {
                *s = (0..blocks).map(|k| scales[k] * evals[k][(i, g)]).sum::<f64>() / denom;
            }
            let yi = class_idx[i];
            let mut rival = if yi == 0 { 1 } else { 0 };
            for g in 0..g_count {
                if g != yi && scores[g] > scores[rival] {
                    rival = g;
                }
            }
            if scores[yi] - scores[rival] >= 1.0 {
                continue;
            }
            for (k, gram) in bank.grams.iter().enumerate() {
                let kii = gram[(i, i)];
                sq_norms[k] += 2.0 * evals[k][(i, yi)] + kii;
                sq_norms[k] += -2.0 * evals[k][(i, rival)] + kii;
                let row = gram.row(i);
                let ev = &mut evals[k];
                for (j, &kij) in row.iter().enumerate() {
                    ev[(j, yi)] += kij;
                    ev[(j, rival)] -= kij;
                }
            }
            coef[(i, yi)] += 1.0;
            coef[(i, rival)] -= 1.0;
            scales_dirty = true;
        }
        let norms: Vec<f64> = sq_norms.iter().map(|s| libm::sqrt(s.max(0.0))).collect();
        let epoch_scales = block_scales(&norms, q);
        let denom = cfg.lambda * t as f64;
        let objective = iterate_objective(&evals, &norms, &epoch_scales, denom, &class_idx, cfg);
        if objective < best.objective {
            best = Iterate {
                objective,
                coef: coef.clone(),
                scales: epoch_scales,
                denom,
            };
        }
    }

    let coefficients = best
        .scales
        .iter()
        .map(|s| {
            let mut m = best.coef.clone();
            for r in 0..n {
                for v in m.row_mut(r) {
                    *v *= s / best.denom;
                }
            }
            m
        })
        .collect();
    Ok(MkalModel {
        coefficients,
        classes,
        config: *cfg,
        descriptor: bank.descriptor.clone(),
    })
}

impl MkalModel {
    pub fn blocks(&self) -> usize {
        self.coefficients.len()
    }

    /// Class scores from query × train cross Grams in bank order.
    pub fn predict_scores(&self, cross: &[Matrix]) -> Result<Matrix> {
        if cross.len() != self.blocks() {
            return Err(Error::DimensionMismatch {
                context: "MKAL cross bank",
                expected: self.blocks(),
                found: cross.len(),
            });
        }
        let rows = cross[0].rows();
        let mut out = Matrix::zeros(rows, self.classes.len());
        for (k, coef) in cross.iter().zip(&self.coefficients) {
            if k.rows() != rows || k.cols() != coef.rows() {
                return Err(Error::DimensionMismatch {
                    context: "MKAL cross gram",
                    expected: coef.rows(),
                    found: k.cols(),
                });
            }
            let part = k.matmul(coef)?;
            for (o, p) in out.data_mut().iter_mut().zip(part.data()) {
                *o += p;
            }
        }
        Ok(out)
    }

    pub fn predict_labels(&self, cross: &[Matrix]) -> Result<Vec<u32>> {
        Ok(labels_from_scores(&self.predict_scores(cross)?, &self.classes))
    }

    /// Convenience: builds the cross bank for `z` and predicts.
    pub fn predict(&self, z: &Matrix, sources: &[SourceHypothesis]) -> Result<Vec<u32>> {
        self.predict_labels(&self.descriptor.cross_bank(z, sources)?)
    }
}

pub fn predict_mkal(model: &MkalModel, cross: &[Matrix]) -> Result<Vec<u32>> {
    model.predict_labels(cross)
}

/// `||w_k||_2` per block through the Gram quadratic forms.
pub fn group_norms(model: &MkalModel, bank: &KernelBank) -> Result<Vec<f64>> {
    if bank.len() != model.blocks() {
        return Err(Error::DimensionMismatch {
            context: "MKAL kernel bank",
            expected: model.blocks(),
            found: bank.len(),
        });
    }
    model
        .coefficients
        .iter()
        .zip(&bank.grams)
        .map(|(coef, k)| {
            let kc = k.matmul(coef)?;
            let sq: f64 = kc.data().iter().zip(coef.data()).map(|(a, b)| a * b).sum();
            Ok(libm::sqrt(sq.max(0.0)))
        })
        .collect()
}

/// The regularized objective of `model` on its training bank.
pub fn objective(model: &MkalModel, bank: &KernelBank, labels: &[u32]) -> Result<f64> {
    let norms = group_norms(model, bank)?;
    let p = model.config.p;
    let group = libm::pow(norms.iter().map(|n| libm::pow(*n, p)).sum::<f64>(), 1.0 / p);
    let scores = model.predict_scores(&bank.grams)?;
    Ok(model.config.lambda / 2.0 * group * group + mean_structured_hinge(&scores, labels, &model.classes))
}

/// Mean of `max(0, 1 - (s_y - max_{g != y} s_g))`.
pub fn mean_structured_hinge(scores: &Matrix, labels: &[u32], classes: &[u32]) -> f64 {
    let mut total = 0.0;
    for (row, l) in scores.row_iter().zip(labels) {
        let y = classes.iter().position(|c| c == l).expect("label in class list");
        let rival = row
            .iter()
            .enumerate()
            .filter(|(g, _)| *g != y)
            .map(|(_, &s)| s)
            .fold(f64::NEG_INFINITY, f64::max);
        total += (1.0 - (row[y] - rival)).max(0.0);
    }
    total / labels.len() as f64
}

/// Normalized Shannon entropy of the block-norm distribution, in [0, 1].
pub fn block_entropy(norms: &[f64]) -> f64 {
    let total: f64 = norms.iter().sum();
    if !(total > 0.0) || norms.len() < 2 {
        return 0.0;
    }
    let h: f64 = norms
        .iter()
        .map(|n| n / total)
        .filter(|p| *p > 0.0)
        .map(|p| -p * libm::log(p))
        .sum();
    h / libm::log(norms.len() as f64)
}

/// Index of the largest block norm.
pub fn dominant_block(norms: &[f64]) -> usize {
    argmax(norms)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scales_reduce_to_identity_at_p_two() {
        let s = block_scales(&[0.5, 2.0, 0.0], 2.0);
        assert!(s.iter().all(|v| (v - 1.0).abs() < 1e-15));
    }

    #[test]
    fn scales_suppress_small_blocks() {
        let s = block_scales(&[1.0, 2.0], 26.0);
        assert!(s[0] < 1e-6 * s[1]);
        assert_eq!(block_scales(&[0.0, 0.0], 26.0), vec![0.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        let mut cfg = MkalConfig::new(0.1, 0);
        assert!(cfg.validate().is_ok());
        cfg.p = 1.0;
        assert!(cfg.validate().is_err());
        cfg.p = 2.5;
        assert!(cfg.validate().is_err());
        let mut cfg = MkalConfig::new(0.0, 0);
        assert!(cfg.validate().is_err());
        cfg.lambda = 1.0;
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn entropy_bounds() {
        assert_eq!(block_entropy(&[0.0, 3.0]), 0.0);
        assert!((block_entropy(&[1.0, 1.0, 1.0]) - 1.0).abs() < 1e-15);
    }
}
