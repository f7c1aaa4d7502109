//! Estimators of the censoring distribution `G(t) = P[C <= t]` and the
//! inverse-probability-of-censoring weights built from them.

use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::StepFunction;
use crate::types::{Dataset, EndReason, Scenario};

/// Anything that can supply `G(t | x)` and its left limit.
///
/// The built-in models are marginal and ignore `x`; a conditional model
/// (kernel, single-index, ...) plugs in by implementing this trait.
pub trait CensoringDistribution: Debug + Send + Sync {
    fn cdf(&self, t: f64, x: &[f64]) -> f64;
    fn cdf_left(&self, t: f64, x: &[f64]) -> f64;
    /// Largest time at which the weights are guaranteed finite.
    fn support_end(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringMethod {
    Ecdf,
    ReverseKm,
    Known,
}

/// A marginal step-function estimate of `G`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CensoringModel {
    pub ghat: StepFunction,
    pub method: CensoringMethod,
    pub support_end: f64,
    /// Set when no censoring time was observed and `G` is identically zero.
    pub degenerate: bool,
}

impl CensoringModel {
    /// Wraps a user-supplied marginal CDF.
    pub fn known(ghat: StepFunction, support_end: f64) -> Result<Self> {
        if !ghat.is_nondecreasing() || !ghat.is_probability() {
            return Err(Error::InvalidInput(
                "censoring CDF must be nondecreasing with values in [0, 1]".into(),
            ));
        }
        Ok(Self {
            ghat,
            method: CensoringMethod::Known,
            support_end,
            degenerate: false,
        })
    }

    /// No censoring at all: every weight is one.
    pub fn none(support_end: f64) -> Self {
        Self {
            ghat: StepFunction::constant(0.0),
            method: CensoringMethod::Known,
            support_end,
            degenerate: false,
        }
    }

    pub fn ipcw_weight(&self, t: f64) -> Result<f64> {
        ipcw_weight(self, t, &[])
    }
}

impl CensoringDistribution for CensoringModel {
    fn cdf(&self, t: f64, _x: &[f64]) -> f64 {
        self.ghat.eval(t)
    }

    fn cdf_left(&self, t: f64, _x: &[f64]) -> f64 {
        self.ghat.left_limit_unchecked(t.max(0.0))
    }

    fn support_end(&self) -> f64 {
        self.support_end
    }
}

/// The true law `C ~ Uniform[0, upper]` used by the simulation designs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformCensoring {
    pub upper: f64,
}

impl CensoringDistribution for UniformCensoring {
    fn cdf(&self, t: f64, _x: &[f64]) -> f64 {
        (t / self.upper).clamp(0.0, 1.0)
    }

    fn cdf_left(&self, t: f64, x: &[f64]) -> f64 {
        self.cdf(t, x)
    }

    fn support_end(&self) -> f64 {
        self.upper
    }
}

/// `1 / (1 - G(t- | x))`.
pub fn ipcw_weight(g: &(impl CensoringDistribution + ?Sized), t: f64, x: &[f64]) -> Result<f64> {
    let surv = 1.0 - g.cdf_left(t, x);
    if surv <= 0.0 {
        return Err(Error::WeightUndefined { time: t });
    }
    Ok(1.0 / surv)
}

/// Empirical CDF of the follow-up ends, valid when every subject's
/// follow-up end is its censoring time.
pub fn fit_censoring_ecdf(d: &Dataset) -> Result<CensoringModel> {
    if d.scenario != Scenario::RcOnly {
        return Err(Error::Scenario(
            "ECDF censoring estimator needs fully observed censoring times".into(),
        ));
    }
    if d.is_empty() {
        return Err(Error::InvalidInput("empty dataset".into()));
    }
    let mut times: Vec<f64> = d.subjects.iter().map(|s| s.follow_up_end).collect();
    times.sort_by(f64::total_cmp);
    let n = times.len() as f64;
    let mut jumps = Vec::new();
    let mut values = Vec::new();
    let mut i = 0;
    while i < times.len() {
        let t = times[i];
        while i < times.len() && times[i] == t {
            i += 1;
        }
        let remaining = (times.len() - i) as f64;
        jumps.push(t);
        values.push(1.0 - remaining / n);
    }
    Ok(CensoringModel {
        ghat: StepFunction::new(jumps, values, 0.0)?,
        method: CensoringMethod::Ecdf,
        support_end: *times.last().unwrap(),
        degenerate: false,
    })
}

/// Product-limit estimate of the censoring survival `1 - G`, treating a
/// censored follow-up end as the event and a terminal event as the
/// censoring of `C`. At a tied time, subjects ending with the terminal
/// event stay in the risk set for the censoring events at that time.
pub fn fit_censoring_reverse_km(d: &Dataset) -> Result<CensoringModel> {
    if d.scenario != Scenario::WithTerminal {
        return Err(Error::Scenario(
            "reverse Kaplan-Meier is for datasets with a terminal event".into(),
        ));
    }
    let (jumps, surv, support_end) = product_limit(
        d.subjects
            .iter()
            .map(|s| (s.follow_up_end, s.end_reason == EndReason::Censored)),
    )?;
    let degenerate = jumps.is_empty();
    Ok(CensoringModel {
        ghat: StepFunction::new(jumps, surv.into_iter().map(|s| 1.0 - s).collect(), 0.0)?,
        method: CensoringMethod::ReverseKm,
        support_end,
        degenerate,
    })
}

/// Picks the estimator matching the dataset's scenario.
pub fn fit_censoring(d: &Dataset) -> Result<CensoringModel> {
    match d.scenario {
        Scenario::RcOnly => fit_censoring_ecdf(d),
        Scenario::WithTerminal => fit_censoring_reverse_km(d),
    }
}

/// Kaplan-Meier over `(time, is_event)` pairs. Returns the event times,
/// the survival just after each, and the largest observed time.
///
/// Between censorings the product telescopes, so the survival is carried
/// as `anchor * remaining / at_risk_at_anchor`; without any censoring
/// this reduces exactly to `remaining / n`.
pub(crate) fn product_limit(
    obs: impl Iterator<Item = (f64, bool)>,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let mut obs: Vec<(f64, bool)> = obs.collect();
    if obs.is_empty() {
        return Err(Error::InvalidInput("empty sample".into()));
    }
    obs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut jumps = Vec::new();
    let mut surv = Vec::new();
    let mut at_risk = obs.len();
    let mut anchor = 1.0;
    let mut anchor_count = obs.len() as f64;
    let mut i = 0;
    while i < obs.len() {
        let t = obs[i].0;
        let (mut events, mut censored) = (0usize, 0usize);
        while i < obs.len() && obs[i].0 == t {
            if obs[i].1 {
                events += 1;
            } else {
                censored += 1;
            }
            i += 1;
        }
        let after_events = at_risk - events;
        if events > 0 {
            jumps.push(t);
            surv.push(anchor * (after_events as f64 / anchor_count));
        }
        if censored > 0 {
            anchor *= after_events as f64 / anchor_count;
            anchor_count = (after_events - censored) as f64;
        }
        at_risk = after_events - censored;
        if at_risk == 0 {
            break;
        }
    }
    Ok((jumps, surv, obs.last().unwrap().0))
}
