//! Plug-in predictors `μ̂(t | x)` built from rate and survival parts.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::StepFunction;
use crate::types::RowDesign;

use super::{AalenFit, CoxFit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    NelsonAalenRef,
    CoxRc,
    AalenRc,
    CoxTerminalPair,
    AalenTerminalPair,
    NonparamTerminalRef,
    MultistateCox,
    External,
}

/// A fitted predictor of the expected cumulative number of events.
///
/// Implementations must return nonnegative curves that are nondecreasing
/// in time for every covariate vector.
pub trait PredictionModel: fmt::Debug + Send + Sync {
    fn kind(&self) -> ModelKind;
    fn label(&self) -> &str;
    /// Expected covariate vector length; `None` when covariates are ignored.
    fn n_covariates(&self) -> Option<usize>;
    /// `μ̂(t | x)` at each time of an ascending grid.
    fn predict_curve(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>>;

    fn predict(&self, t: f64, x: &[f64]) -> Result<f64> {
        Ok(self.predict_curve(x, &[t])?[0])
    }
}

fn check_inputs(expected: Option<usize>, x: &[f64], times: &[f64]) -> Result<()> {
    if let Some(p) = expected {
        if x.len() != p {
            return Err(Error::CovariateMismatch {
                expected: p,
                got: x.len(),
            });
        }
    }
    if times.windows(2).any(|w| !(w[0] <= w[1])) || times.iter().any(|t| t.is_nan()) {
        return Err(Error::InvalidInput("prediction times must be sorted".into()));
    }
    Ok(())
}

/// Evaluates the cumulative sum of `(time, increment)` pairs on a sorted grid.
fn cumulate_on(incs: &[(f64, f64)], times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(times.len());
    let mut level = 0.0;
    let mut k = 0;
    for &t in times {
        while k < incs.len() && incs[k].0 <= t {
            level += incs[k].1;
            k += 1;
        }
        out.push(level);
    }
    out
}

/// Cumulative rate `Λ̂(t | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RatePart {
    /// Covariate-free estimate.
    Marginal(StepFunction),
    Cox { fit: CoxFit, design: RowDesign },
    /// Additive model; the path `B̂_0 + Σ x_j B̂_j` is clipped at its running
    /// maximum.
    Aalen { fit: AalenFit, design: RowDesign },
}

impl RatePart {
    /// Jump times and (nonnegative) jump sizes of `Λ̂(· | x)`.
    pub fn increments(&self, x: &[f64]) -> Vec<(f64, f64)> {
        match self {
            RatePart::Marginal(s) => s.jump_times().iter().copied().zip(s.increments()).collect(),
            RatePart::Cox { fit, design } => {
                let r = fit.linear_predictor(&design.base_covariates(x)).exp();
                let base = fit.baseline_for(design.stratum_of(x).as_deref());
                base.jump_times()
                    .iter()
                    .zip(base.increments())
                    .map(|(&t, d)| (t, r * d))
                    .collect()
            }
            RatePart::Aalen { fit, design } => fit.monotone_increments(&design.base_covariates(x)),
        }
    }

    pub fn cumulative(&self, x: &[f64], times: &[f64]) -> Vec<f64> {
        match self {
            RatePart::Marginal(s) => s.eval_sorted(times),
            RatePart::Cox { fit, design } => {
                let r = fit.linear_predictor(&design.base_covariates(x)).exp();
                let base = fit.baseline_for(design.stratum_of(x).as_deref());
                base.eval_sorted(times).into_iter().map(|v| r * v).collect()
            }
            RatePart::Aalen { .. } => cumulate_on(&self.increments(x), times),
        }
    }
}

/// Survival of the terminal event, `Ŝ(t | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SurvivalPart {
    KaplanMeier(StepFunction),
    /// `exp(-exp(x'β) Λ̂_0(t))`.
    Cox { fit: CoxFit, design: RowDesign },
    /// `exp(-A(t | x))` with the additive cumulative hazard monotonized.
    Aalen { fit: AalenFit, design: RowDesign },
}

impl SurvivalPart {
    pub fn survival(&self, x: &[f64], times: &[f64]) -> Vec<f64> {
        match self {
            SurvivalPart::KaplanMeier(s) => s.eval_sorted(times),
            SurvivalPart::Cox { fit, design } => {
                let r = fit.linear_predictor(&design.base_covariates(x)).exp();
                let base = fit.baseline_for(design.stratum_of(x).as_deref());
                base.eval_sorted(times).into_iter().map(|v| (-r * v).exp()).collect()
            }
            SurvivalPart::Aalen { fit, design } => {
                let incs = fit.monotone_increments(&design.base_covariates(x));
                cumulate_on(&incs, times).into_iter().map(|v| (-v).exp()).collect()
            }
        }
    }
}

/// `μ̂(t | x) = Λ̂(t | x)`, for data without a terminal event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcPlugIn {
    pub label: String,
    pub kind: ModelKind,
    pub n_covariates: Option<usize>,
    pub rate: RatePart,
}

impl PredictionModel for RcPlugIn {
    fn kind(&self) -> ModelKind {
        self.kind
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn n_covariates(&self) -> Option<usize> {
        self.n_covariates
    }

    fn predict_curve(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        check_inputs(self.n_covariates, x, times)?;
        Ok(self.rate.cumulative(x, times))
    }
}

/// `μ̂(t | x) = Σ_{t_k <= t} Ŝ(t_k | x) dΛ̂(t_k | x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalPlugIn {
    pub label: String,
    pub kind: ModelKind,
    pub n_covariates: Option<usize>,
    pub rate: RatePart,
    pub survival: SurvivalPart,
}

impl PredictionModel for TerminalPlugIn {
    fn kind(&self) -> ModelKind {
        self.kind
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn n_covariates(&self) -> Option<usize> {
        self.n_covariates
    }

    fn predict_curve(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        check_inputs(self.n_covariates, x, times)?;
        let mut incs = self.rate.increments(x);
        let jump_times: Vec<f64> = incs.iter().map(|p| p.0).collect();
        let surv = self.survival.survival(x, &jump_times);
        for (inc, s) in incs.iter_mut().zip(surv) {
            inc.1 *= s;
        }
        Ok(cumulate_on(&incs, times))
    }
}

/// Cox rate model with a capped prior-event-count covariate (last column of
/// the design). Prediction advances the state deterministically: at each
/// baseline jump the count covariate is `min(floor(μ̂ so far), cap)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistateCox {
    pub label: String,
    pub n_covariates: Option<usize>,
    pub fit: CoxFit,
    pub design: RowDesign,
    pub survival: Option<SurvivalPart>,
}

impl PredictionModel for MultistateCox {
    fn kind(&self) -> ModelKind {
        ModelKind::MultistateCox
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn n_covariates(&self) -> Option<usize> {
        self.n_covariates
    }

    fn predict_curve(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        check_inputs(self.n_covariates, x, times)?;
        let cap = self.design.prior_count.and_then(|p| p.cap).map_or(f64::INFINITY, f64::from);
        let base_cov = self.design.base_covariates(x);
        let p = self.fit.beta.len();
        let gamma = self.fit.beta[p - 1];
        let lin: f64 = self.fit.beta[..p - 1].iter().zip(&base_cov).map(|(b, z)| b * z).sum();
        let base = self.fit.baseline_for(self.design.stratum_of(x).as_deref());
        let surv = match &self.survival {
            Some(s) => s.survival(x, base.jump_times()),
            None => vec![1.0; base.len()],
        };
        let mut mu = 0.0f64;
        let mut incs = Vec::with_capacity(base.len());
        for ((&t, d), s) in base.jump_times().iter().zip(base.increments()).zip(surv) {
            let state = mu.floor().min(cap);
            let inc = s * (lin + gamma * state).exp() * d;
            mu += inc;
            incs.push((t, inc));
        }
        Ok(cumulate_on(&incs, times))
    }
}

/// Wraps an arbitrary function of `(t, x)`, e.g. a known true mean or a
/// model fitted elsewhere.
#[derive(Clone)]
pub struct FnModel {
    pub label: String,
    pub n_covariates: Option<usize>,
    f: Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>,
}

impl FnModel {
    pub fn new(
        label: impl Into<String>,
        n_covariates: Option<usize>,
        f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            n_covariates,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnModel")
            .field("label", &self.label)
            .field("n_covariates", &self.n_covariates)
            .finish_non_exhaustive()
    }
}

impl PredictionModel for FnModel {
    fn kind(&self) -> ModelKind {
        ModelKind::External
    }

    fn label(&self) -> &str {
        &self.label
    }

    fn n_covariates(&self) -> Option<usize> {
        self.n_covariates
    }

    fn predict_curve(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        check_inputs(self.n_covariates, x, times)?;
        Ok(times.iter().map(|&t| (self.f)(t, x)).collect())
    }
}

/// A fitted predictor of the terminal-event survival `Ŝ(t | x)`.
pub trait SurvivalModel: fmt::Debug + Send + Sync {
    fn label(&self) -> &str;
    fn n_covariates(&self) -> Option<usize>;
    /// `Ŝ(t | x)` on an ascending grid.
    fn survival_curve(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSurvival {
    pub label: String,
    pub n_covariates: Option<usize>,
    pub part: SurvivalPart,
}

impl SurvivalModel for FittedSurvival {
    fn label(&self) -> &str {
        &self.label
    }

    fn n_covariates(&self) -> Option<usize> {
        self.n_covariates
    }

    fn survival_curve(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        check_inputs(self.n_covariates, x, times)?;
        Ok(self.part.survival(x, times))
    }
}

/// Survival given as a closure, e.g. the true law of a simulation.
#[derive(Clone)]
pub struct FnSurvival {
    pub label: String,
    pub n_covariates: Option<usize>,
    f: Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>,
}

impl FnSurvival {
    pub fn new(
        label: impl Into<String>,
        n_covariates: Option<usize>,
        f: impl Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            n_covariates,
            f: Arc::new(f),
        }
    }
}

impl fmt::Debug for FnSurvival {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FnSurvival")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

impl SurvivalModel for FnSurvival {
    fn label(&self) -> &str {
        &self.label
    }

    fn n_covariates(&self) -> Option<usize> {
        self.n_covariates
    }

    fn survival_curve(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        check_inputs(self.n_covariates, x, times)?;
        Ok(times.iter().map(|&t| (self.f)(t, x)).collect())
    }
}

/// `μ̂(t | x) = 1 - Ŝ(t | x)`: a survival model read as the expected number
/// of (single) events.
#[derive(Debug, Clone)]
pub struct FailureProbability<S> {
    pub survival: S,
}

impl<S: SurvivalModel> PredictionModel for FailureProbability<S> {
    fn kind(&self) -> ModelKind {
        ModelKind::External
    }

    fn label(&self) -> &str {
        self.survival.label()
    }

    fn n_covariates(&self) -> Option<usize> {
        self.survival.n_covariates()
    }

    fn predict_curve(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        Ok(self
            .survival
            .survival_curve(x, times)?
            .into_iter()
            .map(|s| 1.0 - s)
            .collect())
    }
}
