//! Trained models as self-contained JSON documents: the standardizer, the
//! learner and any source hypotheses it depends on.

use std::path::Path;

use htl_core::features::{FeatureMatrix, Standardizer};
use htl_core::harness::Method;
use htl_core::lssvm::OvaModel;
use htl_core::mkal::MkalModel;
use htl_core::transfer::{MultiKtModel, PriorModel, SourceHypothesis};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::json;

pub const MODEL_FORMAT: &str = "htl-model";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", content = "model", rename_all = "lowercase")]
pub enum ModelPayload {
    NoTransfer(OvaModel),
    Prior(PriorModel),
    MultiKt(MultiKtModel),
    Mkal(MkalModel),
}

impl ModelPayload {
    pub fn method(&self) -> Method {
        match self {
            ModelPayload::NoTransfer(_) => Method::NoTransfer,
            ModelPayload::Prior(_) => Method::Prior,
            ModelPayload::MultiKt(_) => Method::MultiKt,
            ModelPayload::Mkal(_) => Method::Mkal,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub subject_id: String,
    pub c: f64,
    pub gamma: Option<f64>,
    pub train_reps: Vec<u32>,
    /// Fitted on the training rows; applied to every input before prediction.
    pub standardizer: Standardizer,
    pub payload: ModelPayload,
    pub sources: Vec<SourceHypothesis>,
}

impl ModelFile {
    pub fn new(
        subject_id: String,
        c: f64,
        gamma: Option<f64>,
        train_reps: Vec<u32>,
        standardizer: Standardizer,
        payload: ModelPayload,
        sources: Vec<SourceHypothesis>,
    ) -> Self {
        ModelFile {
            format: MODEL_FORMAT.into(),
            version: VERSION,
            subject_id,
            c,
            gamma,
            train_reps,
            standardizer,
            payload,
            sources,
        }
    }

    pub fn method(&self) -> Method {
        self.payload.method()
    }

    /// Labels for raw (unstandardized) feature rows.
    pub fn predict(&self, fm: &FeatureMatrix) -> Result<Vec<u32>> {
        let z = self.standardizer.apply_matrix(&fm.features)?;
        Ok(match &self.payload {
            ModelPayload::NoTransfer(m) => m.predict_labels(&z)?,
            ModelPayload::Prior(m) => m.predict_labels(&self.sources, &z)?,
            ModelPayload::MultiKt(m) => m.predict_labels(&self.sources, &z)?,
            ModelPayload::Mkal(m) => m.predict(&z, &self.sources)?,
        })
    }

    /// A No-Transfer model seen as a source hypothesis for other subjects.
    pub fn as_source(&self) -> Option<SourceHypothesis> {
        match &self.payload {
            ModelPayload::NoTransfer(m) => Some(SourceHypothesis::new(self.subject_id.clone(), m.clone())),
            _ => None,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        json::write(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        json::read(path, MODEL_FORMAT, VERSION)
    }
}
