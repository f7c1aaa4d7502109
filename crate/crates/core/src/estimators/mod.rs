//! Prediction models for the expected cumulative number of recurrent events.

mod aalen;
mod cox;
pub(crate) mod linalg;
mod model_spec;
mod models;
mod nonparametric;

use serde::{Deserialize, Serialize};

use crate::types::RowStatus;

pub use aalen::{fit_aalen, AalenFit};
pub use cox::{cox_log_partial_likelihood, fit_cox, CoxFit, CoxOptions};
pub use model_spec::{build_multistate_cox, fit_multistate_cox, reference_model, ModelSpec, RateKind, RateSpec, SurvivalSpec};
pub use models::{
    FailureProbability, FittedSurvival, FnModel, FnSurvival, ModelKind, MultistateCox,
    PredictionModel, RatePart, RcPlugIn, SurvivalModel, SurvivalPart, TerminalPlugIn,
};
pub use nonparametric::{
    fit_kaplan_meier, fit_nelson_aalen_at_risk, fit_nelson_aalen_ipcw, nelson_aalen_rows,
};

/// Which row status counts as a failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventTarget {
    Recurrent,
    Terminal,
}

impl EventTarget {
    pub fn is_hit(self, status: RowStatus) -> bool {
        match self {
            EventTarget::Recurrent => status.has_event(),
            EventTarget::Terminal => status.has_terminal(),
        }
    }
}
