use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::metrics::Metric;
use super::split::{kfold_by_repetition, kfold_shuffled};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub c: Vec<f64>,
    pub gamma: Vec<f64>,
}

impl GridSpec {
    pub fn new(c: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        let grid = GridSpec { c, gamma };
        grid.validate()?;
        Ok(grid)
    }

    pub fn validate(&self) -> Result<()> {
        if self.c.is_empty() || self.gamma.is_empty() {
            return Err(Error::EmptyInput("hyperparameter grid"));
        }
        if self.c.iter().chain(&self.gamma).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter("grid values must be positive".into()));
        }
        Ok(())
    }

    /// `C, gamma in {0.01, 0.1, 1, 10, 100, 1000}`.
    pub fn original() -> Self {
        let v = alloc::vec![0.01, 0.1, 1.0, 10.0, 100.0, 1000.0];
        GridSpec { c: v.clone(), gamma: v }
    }

    /// `C in {2^-6, 2^-4, ..., 2^14}`, `gamma in {2^-20, 2^-18, ..., 2^0}`.
    pub fn extended() -> Self {
        GridSpec {
            c: (-3..=7).map(|k| libm::exp2(f64::from(2 * k))).collect(),
            gamma: (-10..=0).map(|k| libm::exp2(f64::from(2 * k))).collect(),
        }
    }

    /// Same C values with only the smallest gamma, for learners without an
    /// RBF width.
    pub fn c_only(&self) -> Self {
        let g = self.gamma.iter().copied().fold(f64::INFINITY, f64::min);
        GridSpec {
            c: self.c.clone(),
            gamma: alloc::vec![g],
        }
    }

    /// Points ordered by ascending C, then ascending gamma. Evaluating in this
    /// order and keeping strict improvements implements the tie rule.
    pub fn points(&self) -> Vec<GridPoint> {
        let mut c = self.c.clone();
        let mut g = self.gamma.clone();
        c.sort_by(f64::total_cmp);
        c.dedup();
        g.sort_by(f64::total_cmp);
        g.dedup();
        c.iter()
            .flat_map(|&c| g.iter().map(move |&gamma| GridPoint { c, gamma }))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.points().len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty() || self.gamma.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CvScheme {
    /// k folds over shuffled rows.
    Shuffled { folds: usize },
    /// One fold per repetition; `fallback` shuffled folds when only one
    /// repetition is present.
    ByRepetition { fallback: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CvPlan {
    pub scheme: CvScheme,
    pub metric: Metric,
    /// Regular subsampling factor applied to the tuning data (1 = none).
    pub subsample: usize,
}

impl CvPlan {
    /// Validation folds as row indices into `data`, after subsampling.
    pub fn folds(&self, data: &FeatureMatrix, seed: u64) -> Result<Vec<Vec<usize>>> {
        if self.subsample == 0 {
            return Err(Error::InvalidParameter("tuning subsample factor must be >= 1".into()));
        }
        let kept: Vec<usize> = (0..data.len()).step_by(self.subsample).collect();
        let tuning = data.select(&kept);
        let folds = match self.scheme {
            CvScheme::Shuffled { folds } => kfold_shuffled(tuning.len(), folds, seed)?,
            CvScheme::ByRepetition { fallback } => kfold_by_repetition(&tuning, fallback, seed)?,
        };
        Ok(folds
            .into_iter()
            .map(|f| f.into_iter().map(|i| kept[i]).collect())
            .collect())
    }
}

/// Trains on the first index set with the given point and predicts labels
/// for the second. Indices refer to the rows of the tuned data.
pub trait FitPredict: Fn(&GridPoint, &[usize], &[usize]) -> Result<Vec<u32>> {}
impl<F: Fn(&GridPoint, &[usize], &[usize]) -> Result<Vec<u32>>> FitPredict for F {}

/// Mean validation score of one point. Each fold validates on its rows and
/// trains on the rows of every other fold.
pub fn cv_score(
    labels: &[u32],
    folds: &[Vec<usize>],
    point: &GridPoint,
    metric: Metric,
    fit_predict: &impl FitPredict,
) -> Result<f64> {
    let mut total = 0.0;
    for (f, valid) in folds.iter().enumerate() {
        let mut train: Vec<usize> = folds
            .iter()
            .enumerate()
            .filter(|(o, _)| *o != f)
            .flat_map(|(_, fold)| fold.iter().copied())
            .collect();
        train.sort_unstable();
        let predicted = fit_predict(point, &train, valid)?;
        let truth: Vec<u32> = valid.iter().map(|&i| labels[i]).collect();
        total += metric.evaluate(&truth, &predicted)?;
    }
    Ok(total / folds.len() as f64)
}

/// Cross-validated score of every grid point, in [`GridSpec::points`] order.
pub fn grid_scores(
    data: &FeatureMatrix,
    grid: &GridSpec,
    cv: &CvPlan,
    fit_predict: &impl FitPredict,
    seed: u64,
) -> Result<Vec<(GridPoint, Result<f64>)>> {
    grid.validate()?;
    let folds = cv.folds(data, seed)?;
    Ok(grid
        .points()
        .into_iter()
        .map(|p| (p, cv_score(&data.labels, &folds, &p, cv.metric, fit_predict)))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridChoice {
    pub point: GridPoint,
    pub score: f64,
}

/// Best grid point; ties go to the smaller C, then the smaller gamma.
pub fn grid_search(
    data: &FeatureMatrix,
    grid: &GridSpec,
    cv: &CvPlan,
    fit_predict: &impl FitPredict,
    seed: u64,
) -> Result<GridChoice> {
    best_of(grid_scores(data, grid, cv, fit_predict, seed)?)
}

pub(crate) fn best_of(scored: Vec<(GridPoint, Result<f64>)>) -> Result<GridChoice> {
    let mut best: Option<GridChoice> = None;
    let mut failures = Vec::new();
    for (point, score) in scored {
        match score {
            Ok(score) => {
                if best.is_none_or(|b| score > b.score) {
                    best = Some(GridChoice { point, score });
                }
            }
            Err(e) => failures.push((point.c, point.gamma, e.to_string())),
        }
    }
    best.ok_or(Error::GridExhausted(failures))
}
