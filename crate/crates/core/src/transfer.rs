//! Hypothesis transfer from pre-trained source models: MultiKT with
//! per-class source weights, and the prior-features baseline.
//!
//! MultiKT regularizes the target hyperplane towards `sum_k beta_k w_k`.
//! Written in residual form this is an LS-SVM trained on
//! `y - sum_k beta_k s_k(x)`, with the source combination added back at
//! prediction time. Because the LS-SVM solution is linear in its targets, the
//! leave-one-out predictions are affine in `beta`, which makes the hinge on
//! leave-one-out margins a convex function of `beta`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{gram, KernelSpec};
use crate::linalg::Matrix;
use crate::lssvm::{fit_ova_targets, labels_from_scores, one_vs_all_targets, HyperParams, LssvmSystem, OvaModel};

/// Iterations of the projected subgradient method.
pub const BETA_ITERATIONS: usize = 300;

/// A pre-trained source model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceHypothesis {
    pub subject_id: String,
    pub model: OvaModel,
}

impl SourceHypothesis {
    pub fn new(subject_id: impl Into<String>, model: OvaModel) -> Self {
        SourceHypothesis {
            subject_id: subject_id.into(),
            model,
        }
    }

    pub fn classes(&self) -> &[u32] {
        &self.model.classes
    }

    /// Raw N × G scores.
    pub fn score_matrix(&self, x: &Matrix) -> Result<Matrix> {
        self.model.predict_scores(x)
    }
}

/// Horizontal concatenation of the raw source scores, source-major then
/// class-major: column `k * G + g` is source `k`'s class-`g` score.
pub fn source_scores(sources: &[SourceHypothesis], x: &Matrix) -> Result<Matrix> {
    if sources.is_empty() {
        return Err(Error::NoSources);
    }
    let blocks = sources
        .iter()
        .map(|s| s.score_matrix(x))
        .collect::<Result<Vec<_>>>()?;
    Matrix::hstack(&blocks)
}

/// Class list shared by all sources.
pub fn task_classes(sources: &[SourceHypothesis]) -> Result<Vec<u32>> {
    let first = sources.first().ok_or(Error::NoSources)?;
    let classes = first.classes().to_vec();
    for s in &sources[1..] {
        if s.classes() != classes.as_slice() {
            return Err(Error::InvalidParameter(alloc::format!(
                "source {} has classes {:?}, expected {:?}",
                s.subject_id,
                s.classes(),
                classes
            )));
        }
    }
    Ok(classes)
}

fn check_labels(labels: &[u32], classes: &[u32]) -> Result<()> {
    if let Some(l) = labels.iter().find(|l| !classes.contains(l)) {
        return Err(Error::InvalidParameter(alloc::format!(
            "label {l} is not among the source classes {classes:?}"
        )));
    }
    let mut present: Vec<u32> = labels.to_vec();
    present.sort_unstable();
    present.dedup();
    if present.len() < 2 {
        return Err(Error::TooFewClasses { found: present.len() });
    }
    Ok(())
}

/// Per-source, per-class transfer weights: nonnegative, each class column
/// inside the unit ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferWeights {
    /// K × G.
    pub beta: Matrix,
}

impl TransferWeights {
    pub fn zeros(sources: usize, classes: usize) -> Self {
        TransferWeights {
            beta: Matrix::zeros(sources, classes),
        }
    }

    pub fn new(beta: Matrix) -> Result<Self> {
        let w = TransferWeights { beta };
        if !w.is_feasible() {
            return Err(Error::InvalidParameter(
                "transfer weights must be nonnegative with per-class norm at most 1".into(),
            ));
        }
        Ok(w)
    }

    pub fn sources(&self) -> usize {
        self.beta.rows()
    }

    pub fn classes(&self) -> usize {
        self.beta.cols()
    }

    pub fn column(&self, g: usize) -> Vec<f64> {
        self.beta.column(g)
    }

    /// `sum_g beta_{k,g}`.
    pub fn total_weight(&self, k: usize) -> f64 {
        self.beta.row(k).iter().sum()
    }

    pub fn is_feasible(&self) -> bool {
        (0..self.classes()).all(|g| {
            let col = self.column(g);
            col.iter().all(|&b| b >= 0.0) && col.iter().map(|b| b * b).sum::<f64>() <= 1.0
        })
    }
}

/// Clamps negatives to zero, then rescales onto the unit ball if outside.
pub fn project_feasible(beta: &mut [f64]) {
    for b in beta.iter_mut() {
        if !(*b > 0.0) {
            *b = 0.0;
        }
    }
    let norm = libm::sqrt(beta.iter().map(|b| b * b).sum::<f64>());
    if norm > 1.0 {
        for b in beta.iter_mut() {
            *b /= norm;
        }
        // rounding can leave the norm a hair above one
        while beta.iter().map(|b| b * b).sum::<f64>() > 1.0 {
            for b in beta.iter_mut() {
                *b *= 1.0 - f64::EPSILON;
            }
        }
    }
}

/// The leave-one-out hinge objective of one class, as a function of that
/// class's weight column. The leave-one-out score of sample `i` is
/// `y_i - offset_i + sum_k beta_k slope_{k,i}`.
#[derive(Debug, Clone)]
pub struct ClassBetaProblem {
    targets: Vec<f64>,
    offset: Vec<f64>,
    slopes: Vec<Vec<f64>>,
}

impl ClassBetaProblem {
    pub fn new(system: &LssvmSystem, diagonal: &[f64], targets: &[f64], source_columns: &[Vec<f64>]) -> Self {
        let (alpha_y, _) = system.solve(targets);
        let offset = alpha_y.iter().zip(diagonal).map(|(a, d)| a / d).collect();
        let slopes = source_columns
            .iter()
            .map(|s| {
                let (alpha_s, _) = system.solve(s);
                alpha_s.iter().zip(diagonal).map(|(a, d)| a / d).collect()
            })
            .collect();
        ClassBetaProblem {
            targets: targets.to_vec(),
            offset,
            slopes,
        }
    }

    pub fn n_sources(&self) -> usize {
        self.slopes.len()
    }

    pub fn loo_scores(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.targets.len())
            .map(|i| {
                let shift: f64 = self.slopes.iter().zip(beta).map(|(s, b)| b * s[i]).sum();
                self.targets[i] - self.offset[i] + shift
            })
            .collect()
    }

    /// Mean hinge of the leave-one-out margins.
    pub fn objective(&self, beta: &[f64]) -> f64 {
        let scores = self.loo_scores(beta);
        let n = self.targets.len() as f64;
        scores
            .iter()
            .zip(&self.targets)
            .map(|(s, y)| (1.0 - y * s).max(0.0))
            .sum::<f64>()
            / n
    }

    fn subgradient(&self, beta: &[f64]) -> Vec<f64> {
        let scores = self.loo_scores(beta);
        let n = self.targets.len() as f64;
        let mut grad = vec![0.0; self.slopes.len()];
        for (i, (s, y)) in scores.iter().zip(&self.targets).enumerate() {
            if y * s < 1.0 {
                for (g, slope) in grad.iter_mut().zip(&self.slopes) {
                    *g -= y * slope[i] / n;
                }
            }
        }
        grad
    }

    /// Projected subgradient descent from `beta = 0` with step `1/sqrt(t)`;
    /// returns the best feasible iterate, which is never worse than zero.
    pub fn minimize(&self, iterations: usize) -> Vec<f64> {
        let k = self.slopes.len();
        let mut beta = vec![0.0; k];
        let mut best = beta.clone();
        let mut best_obj = self.objective(&beta);
        for t in 1..=iterations {
            let grad = self.subgradient(&beta);
            if grad.iter().all(|&g| g == 0.0) {
                break;
            }
            let step = 1.0 / libm::sqrt(t as f64);
            for (b, g) in beta.iter_mut().zip(&grad) {
                *b -= step * g;
            }
            project_feasible(&mut beta);
            let obj = self.objective(&beta);
            if obj < best_obj {
                best_obj = obj;
                best.copy_from_slice(&beta);
            }
        }
        best
    }
}

/// Builds the per-class problems for a training set.
pub fn beta_problems(
    x: &Matrix,
    labels: &[u32],
    sources: &[SourceHypothesis],
    hp: &HyperParams,
) -> Result<Vec<ClassBetaProblem>> {
    let classes = task_classes(sources)?;
    let scores = source_scores(sources, x)?;
    beta_problems_scored(x, labels, &classes, &scores, hp)
}

/// As [`beta_problems`], with the [`source_scores`] of `x` precomputed.
pub fn beta_problems_scored(
    x: &Matrix,
    labels: &[u32],
    classes: &[u32],
    scores: &Matrix,
    hp: &HyperParams,
) -> Result<Vec<ClassBetaProblem>> {
    check_labels(labels, classes)?;
    let n_sources = check_scores(x, scores, classes)?;
    if x.rows() < 2 {
        return Err(Error::TooFewSamples {
            context: "transfer weight optimization",
            needed: 2,
            found: x.rows(),
        });
    }
    let system = LssvmSystem::new(&gram(&hp.kernel, x)?, hp.c)?;
    let diagonal = system.loo_diagonal();
    let targets = one_vs_all_targets(labels, classes);
    let g_count = classes.len();
    Ok(targets
        .iter()
        .enumerate()
        .map(|(g, y)| {
            let columns: Vec<Vec<f64>> = (0..n_sources).map(|k| scores.column(k * g_count + g)).collect();
            ClassBetaProblem::new(&system, &diagonal, y, &columns)
        })
        .collect())
}

fn check_scores(x: &Matrix, scores: &Matrix, classes: &[u32]) -> Result<usize> {
    if scores.rows() != x.rows() {
        return Err(Error::DimensionMismatch {
            context: "source score rows",
            expected: x.rows(),
            found: scores.rows(),
        });
    }
    if classes.is_empty() || scores.cols() == 0 || !scores.cols().is_multiple_of(classes.len()) {
        return Err(Error::DimensionMismatch {
            context: "source score columns",
            expected: classes.len(),
            found: scores.cols(),
        });
    }
    Ok(scores.cols() / classes.len())
}

pub fn optimize_beta(
    x: &Matrix,
    labels: &[u32],
    sources: &[SourceHypothesis],
    hp: &HyperParams,
) -> Result<TransferWeights> {
    let problems = beta_problems(x, labels, sources, hp)?;
    weights_from_problems(&problems, sources.len())
}

/// As [`optimize_beta`], with the [`source_scores`] of `x` precomputed.
pub fn optimize_beta_scored(
    x: &Matrix,
    labels: &[u32],
    classes: &[u32],
    scores: &Matrix,
    hp: &HyperParams,
) -> Result<TransferWeights> {
    let problems = beta_problems_scored(x, labels, classes, scores, hp)?;
    weights_from_problems(&problems, scores.cols() / classes.len())
}

fn weights_from_problems(problems: &[ClassBetaProblem], n_sources: usize) -> Result<TransferWeights> {
    let mut beta = Matrix::zeros(n_sources, problems.len());
    for (g, p) in problems.iter().enumerate() {
        for (k, b) in p.minimize(BETA_ITERATIONS).into_iter().enumerate() {
            beta[(k, g)] = b;
        }
    }
    TransferWeights::new(beta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiKtModel {
    /// Per-class LS-SVMs fit to the residual targets.
    pub residual: OvaModel,
    pub weights: TransferWeights,
    /// Source subject ids, in weight-row order.
    pub source_ids: Vec<String>,
}

fn check_source_ids(ids: &[String], sources: &[SourceHypothesis]) -> Result<()> {
    if ids.len() != sources.len() || ids.iter().zip(sources).any(|(id, s)| *id != s.subject_id) {
        return Err(Error::InvalidParameter(alloc::format!(
            "model expects sources {ids:?}"
        )));
    }
    Ok(())
}

pub fn train_multikt(
    x: &Matrix,
    labels: &[u32],
    sources: &[SourceHypothesis],
    hp: &HyperParams,
    weights: &TransferWeights,
) -> Result<MultiKtModel> {
    let classes = task_classes(sources)?;
    let scores = source_scores(sources, x)?;
    let ids = sources.iter().map(|s| s.subject_id.clone()).collect();
    train_multikt_scored(x, labels, &classes, &scores, ids, hp, weights)
}

/// As [`train_multikt`], with the [`source_scores`] of `x` precomputed.
pub fn train_multikt_scored(
    x: &Matrix,
    labels: &[u32],
    classes: &[u32],
    scores: &Matrix,
    source_ids: Vec<String>,
    hp: &HyperParams,
    weights: &TransferWeights,
) -> Result<MultiKtModel> {
    hp.validate()?;
    check_labels(labels, classes)?;
    if x.rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            context: "MultiKT labels",
            expected: x.rows(),
            found: labels.len(),
        });
    }
    let n_sources = check_scores(x, scores, classes)?;
    if weights.sources() != n_sources || weights.classes() != classes.len() || source_ids.len() != n_sources {
        return Err(Error::DimensionMismatch {
            context: "transfer weights",
            expected: n_sources * classes.len(),
            found: weights.sources() * weights.classes(),
        });
    }
    if !x.is_finite() {
        return Err(Error::NonFinite("MultiKT training inputs"));
    }
    let g_count = classes.len();
    let mut targets = one_vs_all_targets(labels, classes);
    for (g, y) in targets.iter_mut().enumerate() {
        for (i, yi) in y.iter_mut().enumerate() {
            for k in 0..n_sources {
                *yi -= weights.beta[(k, g)] * scores[(i, k * g_count + g)];
            }
        }
    }
    let system = LssvmSystem::new(&gram(&hp.kernel, x)?, hp.c)?;
    Ok(MultiKtModel {
        residual: fit_ova_targets(&system, x, classes, &targets, hp),
        weights: weights.clone(),
        source_ids,
    })
}

impl MultiKtModel {
    pub fn predict_scores(&self, sources: &[SourceHypothesis], z: &Matrix) -> Result<Matrix> {
        check_source_ids(&self.source_ids, sources)?;
        if z.rows() == 0 {
            return Ok(Matrix::empty(self.residual.n_classes()));
        }
        self.predict_scores_scored(z, &source_scores(sources, z)?)
    }

    /// Scores from `z` and its precomputed [`source_scores`].
    pub fn predict_scores_scored(&self, z: &Matrix, s: &Matrix) -> Result<Matrix> {
        let mut scores = self.residual.predict_scores(z)?;
        let g_count = self.residual.n_classes();
        let n_sources = self.source_ids.len();
        if s.rows() != z.rows() || s.cols() != n_sources * g_count {
            return Err(Error::DimensionMismatch {
                context: "source score columns",
                expected: n_sources * g_count,
                found: s.cols(),
            });
        }
        for i in 0..scores.rows() {
            for g in 0..g_count {
                let mut add = 0.0;
                for k in 0..n_sources {
                    add += self.weights.beta[(k, g)] * s[(i, k * g_count + g)];
                }
                scores[(i, g)] += add;
            }
        }
        Ok(scores)
    }

    pub fn predict_labels(&self, sources: &[SourceHypothesis], z: &Matrix) -> Result<Vec<u32>> {
        Ok(labels_from_scores(&self.predict_scores(sources, z)?, &self.residual.classes))
    }
}

/// Linear-kernel LS-SVM on stacked raw source scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorModel {
    pub ova: OvaModel,
    pub source_ids: Vec<String>,
}

pub fn train_prior(x: &Matrix, labels: &[u32], sources: &[SourceHypothesis], c: f64) -> Result<PriorModel> {
    let classes = task_classes(sources)?;
    let features = source_scores(sources, x)?;
    let ids = sources.iter().map(|s| s.subject_id.clone()).collect();
    train_prior_scored(&features, labels, &classes, ids, c)
}

/// As [`train_prior`], from the precomputed [`source_scores`].
pub fn train_prior_scored(
    scores: &Matrix,
    labels: &[u32],
    classes: &[u32],
    source_ids: Vec<String>,
    c: f64,
) -> Result<PriorModel> {
    check_labels(labels, classes)?;
    let hp = HyperParams::new(c, KernelSpec::Linear)?;
    let ova = crate::lssvm::train_ova_with_classes(scores, labels, classes, &hp)?;
    Ok(PriorModel { ova, source_ids })
}

impl PriorModel {
    pub fn predict_scores(&self, sources: &[SourceHypothesis], z: &Matrix) -> Result<Matrix> {
        check_source_ids(&self.source_ids, sources)?;
        if z.rows() == 0 {
            return Ok(Matrix::empty(self.ova.n_classes()));
        }
        self.ova.predict_scores(&source_scores(sources, z)?)
    }

    pub fn predict_scores_scored(&self, scores: &Matrix) -> Result<Matrix> {
        self.ova.predict_scores(scores)
    }

    pub fn predict_labels(&self, sources: &[SourceHypothesis], z: &Matrix) -> Result<Vec<u32>> {
        Ok(labels_from_scores(&self.predict_scores(sources, z)?, &self.ova.classes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_lands_in_feasible_set() {
        let mut b = [3.0, -1.0, 4.0];
        project_feasible(&mut b);
        assert_eq!(b[1], 0.0);
        assert!(b.iter().map(|v| v * v).sum::<f64>() <= 1.0);
        let mut inside = [0.2, 0.3];
        project_feasible(&mut inside);
        assert_eq!(inside, [0.2, 0.3]);
    }

    #[test]
    fn weights_validation() {
        assert!(TransferWeights::new(Matrix::from_rows(&[[0.8], [0.7]]).unwrap()).is_err());
        assert!(TransferWeights::new(Matrix::from_rows(&[[-0.1], [0.1]]).unwrap()).is_err());
        let ok = TransferWeights::new(Matrix::from_rows(&[[0.6, 0.0], [0.8, 1.0]]).unwrap()).unwrap();
        assert!((ok.total_weight(1) - 1.8).abs() < 1e-15);
    }

    #[test]
    fn no_sources_is_an_error() {
        let x = Matrix::from_rows(&[[0.0], [1.0]]).unwrap();
        assert_eq!(source_scores(&[], &x).unwrap_err(), Error::NoSources);
        assert_eq!(train_prior(&x, &[1, 2], &[], 1.0).unwrap_err(), Error::NoSources);
    }
}
