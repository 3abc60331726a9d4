//! Evaluation protocols: splits, cross-validation, grid search, metrics and
//! the experiment driver for the original, optimized and realistic settings.

mod experiment;
mod grid;
mod methods;
mod metrics;
mod split;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureKind, WindowSpec};

pub use experiment::{
    prepare_subject, run_experiment, run_experiment_with, select_source_hp_original, CrossSubjectTable, Subject,
};
pub use grid::{cv_score, grid_scores, grid_search, CvPlan, CvScheme, FitPredict, GridChoice, GridPoint, GridSpec};
pub use methods::{fit_predict, MethodContext, TaskData};
pub use metrics::{balanced_accuracy, standard_accuracy, Metric};
pub use split::{
    check_no_leakage, enumerate_rep_subsets, kfold_by_repetition, kfold_shuffled, split_by_repetition, SplitPlan,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Setting {
    Original,
    Optimized,
    Realistic,
}

impl Setting {
    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Original => "original",
            Setting::Optimized => "optimized",
            Setting::Realistic => "realistic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "original" => Some(Setting::Original),
            "optimized" => Some(Setting::Optimized),
            "realistic" => Some(Setting::Realistic),
            _ => None,
        }
    }

    pub fn metric(self) -> Metric {
        match self {
            Setting::Realistic => Metric::Standard,
            _ => Metric::Balanced,
        }
    }
}

/// Which group supplies the targets and which the sources.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pairing {
    #[serde(rename = "ii")]
    IntactIntact,
    #[serde(rename = "aa")]
    AmputeeAmputee,
    #[serde(rename = "ai")]
    AmputeeIntact,
}

impl Pairing {
    pub fn as_str(self) -> &'static str {
        match self {
            Pairing::IntactIntact => "ii",
            Pairing::AmputeeAmputee => "aa",
            Pairing::AmputeeIntact => "ai",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ii" | "intact-intact" => Some(Pairing::IntactIntact),
            "aa" | "amputee-amputee" => Some(Pairing::AmputeeAmputee),
            "ai" | "amputee-intact" => Some(Pairing::AmputeeIntact),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    NoTransfer,
    Prior,
    MultiKt,
    Mkal,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::NoTransfer, Method::Prior, Method::MultiKt, Method::Mkal];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::NoTransfer => "notransfer",
            Method::Prior => "prior",
            Method::MultiKt => "multikt",
            Method::Mkal => "mkal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Method::ALL.into_iter().find(|m| m.as_str() == s)
    }

    /// Whether the learner has an RBF width to tune.
    pub fn uses_gamma(self) -> bool {
        self != Method::Prior
    }

    pub fn uses_sources(self) -> bool {
        self != Method::NoTransfer
    }
}

/// Training-set size: a sample count or a set of repetitions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Size {
    Samples(usize),
    Repetitions(Vec<u32>),
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Size::Samples(n) => write!(f, "n={n}"),
            Size::Repetitions(reps) => {
                f.write_str("reps=")?;
                for (i, r) in reps.iter().enumerate() {
                    if i > 0 {
                        f.write_str("+")?;
                    }
                    write!(f, "{r}")?;
                }
                Ok(())
            }
        }
    }
}

impl Size {
    pub fn parse(s: &str) -> Option<Self> {
        if let Some(n) = s.strip_prefix("n=") {
            return n.parse().ok().map(Size::Samples);
        }
        let reps = s.strip_prefix("reps=")?;
        let parsed: Option<Vec<u32>> = reps.split('+').map(|r| r.parse().ok()).collect();
        parsed.filter(|v| !v.is_empty()).map(Size::Repetitions)
    }

    /// Number of training units: samples or repetitions.
    pub fn magnitude(&self) -> usize {
        match self {
            Size::Samples(n) => *n,
            Size::Repetitions(r) => r.len(),
        }
    }
}

/// One result row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub setting: Setting,
    pub pairing: Pairing,
    pub target: String,
    pub method: Method,
    pub size: Size,
    pub metric: Metric,
    pub value: f64,
    pub seed: u64,
    pub c: f64,
    /// Absent for learners without an RBF width.
    pub gamma: Option<f64>,
}

/// The training-size axis of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SizeAxis {
    /// Nested random subsets of the target training pool.
    Samples(Vec<usize>),
    /// Subsets of the training repetitions.
    Repetitions(Vec<Vec<u32>>),
}

impl SizeAxis {
    pub fn sizes(&self) -> Vec<Size> {
        match self {
            SizeAxis::Samples(v) => v.iter().map(|&n| Size::Samples(n)).collect(),
            SizeAxis::Repetitions(v) => v.iter().map(|r| Size::Repetitions(r.clone())).collect(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            SizeAxis::Samples(v) => v.len(),
            SizeAxis::Repetitions(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// 120, 240, ..., 2160.
pub fn original_sizes() -> Vec<usize> {
    (1..=18).map(|k| 120 * k).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub setting: Setting,
    pub pairing: Pairing,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub split: SplitPlan,
    pub window: WindowSpec,
    pub features: FeatureKind,
    /// Keep rest windows (balanced against the movements) as a class.
    pub include_rest: bool,
    pub sizes: SizeAxis,
    pub grid: GridSpec,
    /// Regular subsampling of every training pool.
    pub train_subsample: usize,
    /// Additional subsampling of data used only for tuning.
    pub tuning_subsample: usize,
    /// Folds of shuffled CV, and the single-repetition fallback.
    pub cv_folds: usize,
    /// Overrides the cross-subject choice in the original setting.
    pub fixed_hp: Option<GridPoint>,
    pub mkal_p: f64,
    pub mkal_epochs: usize,
    pub allow_mkal_realistic: bool,
}

impl ExperimentPlan {
    /// The setting's default protocol.
    pub fn new(setting: Setting, pairing: Pairing, methods: Vec<Method>, seed: u64) -> Self {
        let split = SplitPlan::default();
        let realistic = setting == Setting::Realistic;
        let sizes = if realistic {
            SizeAxis::Repetitions(enumerate_rep_subsets(&split.train_reps).unwrap_or_default())
        } else {
            SizeAxis::Samples(original_sizes())
        };
        ExperimentPlan {
            setting,
            pairing,
            methods,
            seed,
            split,
            window: WindowSpec::default(),
            features: if realistic { FeatureKind::Mdwt } else { FeatureKind::AvgMvw },
            include_rest: !realistic,
            sizes,
            grid: if realistic { GridSpec::extended() } else { GridSpec::original() },
            train_subsample: 10,
            tuning_subsample: if realistic { 4 } else { 1 },
            cv_folds: 5,
            fixed_hp: None,
            mkal_p: 1.04,
            mkal_epochs: 300,
            allow_mkal_realistic: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.split.validate()?;
        self.grid.validate()?;
        if self.methods.is_empty() {
            return Err(Error::EmptyInput("method list"));
        }
        let mut seen = self.methods.clone();
        seen.sort_unstable();
        seen.dedup();
        if seen.len() != self.methods.len() {
            return Err(Error::InvalidParameter("duplicate method in plan".into()));
        }
        if self.sizes.is_empty() {
            return Err(Error::EmptyInput("size axis"));
        }
        match (&self.sizes, self.setting) {
            (SizeAxis::Repetitions(subsets), Setting::Realistic) => {
                for s in subsets {
                    if s.is_empty() || s.iter().any(|r| !self.split.train_reps.contains(r)) {
                        return Err(Error::InvalidParameter(format!(
                            "repetition subset {s:?} is not within the training repetitions {:?}",
                            self.split.train_reps
                        )));
                    }
                }
            }
            (SizeAxis::Samples(sizes), Setting::Original | Setting::Optimized) => {
                if sizes.contains(&0) {
                    return Err(Error::InvalidParameter("training sizes must be positive".into()));
                }
            }
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "size axis does not match the {} setting",
                    self.setting.as_str()
                )))
            }
        }
        if self.train_subsample == 0 || self.tuning_subsample == 0 {
            return Err(Error::InvalidParameter("subsampling factors must be >= 1".into()));
        }
        if self.cv_folds < 2 {
            return Err(Error::InvalidParameter("cross-validation needs at least 2 folds".into()));
        }
        if let Some(p) = self.fixed_hp {
            if self.setting != Setting::Original {
                return Err(Error::InvalidParameter("fixed hyperparameters apply to the original setting only".into()));
            }
            GridSpec::new(alloc::vec![p.c], alloc::vec![p.gamma])?;
        }
        if self.methods.contains(&Method::Mkal) && self.setting == Setting::Realistic && !self.allow_mkal_realistic {
            return Err(Error::InvalidParameter(
                "mkal is not part of the realistic setting; enable it explicitly to include it".into(),
            ));
        }
        if !(self.mkal_p > 1.0 && self.mkal_p <= 2.0) || self.mkal_epochs == 0 {
            return Err(Error::InvalidParameter("mkal needs p in (1, 2] and at least one epoch".into()));
        }
        Ok(())
    }
}

/// Runs independent jobs. Implementations must return results in input
/// order so output never depends on scheduling.
pub trait Executor: Sync {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send;
}

/// Runs jobs one after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: Vec<T>, f: F) -> Vec<R>
    where
        T: Send,
        R: Send,
        F: Fn(T) -> R + Sync + Send,
    {
        items.into_iter().map(f).collect()
    }
}
