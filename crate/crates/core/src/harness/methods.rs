use alloc::string::String;
use alloc::vec::Vec;

use super::grid::GridPoint;
use super::Method;
use crate::error::{Error, Result};
use crate::kernels::{gram_cross, KernelSpec};
use crate::linalg::Matrix;
use crate::lssvm::{labels_from_scores, train_ova, HyperParams};
use crate::mkal::{build_kernel_bank_from_scores, train_mkal, MkalConfig};
use crate::transfer::{optimize_beta_scored, task_classes, train_multikt_scored, train_prior_scored, SourceHypothesis};

/// Inputs of one learning problem with the source predictions cached.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskData {
    pub x: Matrix,
    pub labels: Vec<u32>,
    /// Per source, N × G raw scores on `x`.
    pub source_blocks: Vec<Matrix>,
}

impl TaskData {
    pub fn new(x: Matrix, labels: Vec<u32>, sources: &[SourceHypothesis]) -> Result<Self> {
        if x.rows() != labels.len() {
            return Err(Error::DimensionMismatch {
                context: "task labels",
                expected: x.rows(),
                found: labels.len(),
            });
        }
        let source_blocks = sources.iter().map(|s| s.score_matrix(&x)).collect::<Result<_>>()?;
        Ok(TaskData {
            x,
            labels,
            source_blocks,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn select(&self, idx: &[usize]) -> TaskData {
        TaskData {
            x: self.x.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            source_blocks: self.source_blocks.iter().map(|b| b.select_rows(idx)).collect(),
        }
    }

    fn stacked(&self) -> Result<Matrix> {
        Matrix::hstack(&self.source_blocks)
    }
}

/// What every method shares within one target task.
#[derive(Debug, Clone)]
pub struct MethodContext {
    pub source_ids: Vec<String>,
    /// Class list of the sources; empty when there are none.
    pub classes: Vec<u32>,
    pub mkal_p: f64,
    pub mkal_epochs: usize,
    pub seed: u64,
}

impl MethodContext {
    pub fn new(sources: &[SourceHypothesis], mkal_p: f64, mkal_epochs: usize, seed: u64) -> Result<Self> {
        let classes = if sources.is_empty() {
            Vec::new()
        } else {
            task_classes(sources)?
        };
        Ok(MethodContext {
            source_ids: sources.iter().map(|s| s.subject_id.clone()).collect(),
            classes,
            mkal_p,
            mkal_epochs,
            seed,
        })
    }

    fn require_sources(&self) -> Result<()> {
        if self.source_ids.is_empty() {
            Err(Error::NoSources)
        } else {
            Ok(())
        }
    }
}

/// Trains `method` at `point` on `train` and predicts labels for `test`.
/// MKAL maps C to its regularizer as `lambda = 1 / (C N)`.
pub fn fit_predict(
    method: Method,
    point: &GridPoint,
    ctx: &MethodContext,
    train: &TaskData,
    test: &TaskData,
) -> Result<Vec<u32>> {
    match method {
        Method::NoTransfer => {
            let model = train_ova(&train.x, &train.labels, &HyperParams::rbf(point.c, point.gamma)?)?;
            model.predict_labels(&test.x)
        }
        Method::Prior => {
            ctx.require_sources()?;
            let model = train_prior_scored(
                &train.stacked()?,
                &train.labels,
                &ctx.classes,
                ctx.source_ids.clone(),
                point.c,
            )?;
            let scores = model.predict_scores_scored(&test.stacked()?)?;
            Ok(labels_from_scores(&scores, &model.ova.classes))
        }
        Method::MultiKt => {
            ctx.require_sources()?;
            let hp = HyperParams::rbf(point.c, point.gamma)?;
            let scores = train.stacked()?;
            let weights = optimize_beta_scored(&train.x, &train.labels, &ctx.classes, &scores, &hp)?;
            let model = train_multikt_scored(
                &train.x,
                &train.labels,
                &ctx.classes,
                &scores,
                ctx.source_ids.clone(),
                &hp,
                &weights,
            )?;
            let predicted = model.predict_scores_scored(&test.x, &test.stacked()?)?;
            Ok(labels_from_scores(&predicted, &ctx.classes))
        }
        Method::Mkal => {
            ctx.require_sources()?;
            let bank = build_kernel_bank_from_scores(&train.x, train.source_blocks.clone(), point.gamma)?;
            let cfg = MkalConfig {
                p: ctx.mkal_p,
                epochs: ctx.mkal_epochs,
                lambda: 1.0 / (point.c * train.len() as f64),
                seed: ctx.seed,
            };
            let model = train_mkal(&bank, &train.labels, &cfg)?;
            let mut cross = Vec::with_capacity(bank.len());
            cross.push(gram_cross(&KernelSpec::rbf(point.gamma)?, &test.x, &train.x)?);
            for (t, s) in test.source_blocks.iter().zip(&train.source_blocks) {
                cross.push(gram_cross(&KernelSpec::Linear, t, s)?);
            }
            model.predict_labels(&cross)
        }
    }
}
