//! Textual model descriptions and fitting from a training dataset.
//!
//! Grammar: `kind[:c1+c2][@strata][/survival][/ignore]` where `kind` is one
//! of `nelson_aalen`, `cox`, `aalen`, `cox_msm`, `cox_msm_strata`, the
//! survival part is `km`, `cox[:cols]` or `aalen[:cols]`, and `ignore`
//! treats the terminal event as censoring.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::censoring::CensoringDistribution;
use crate::error::{Error, Result};
use crate::types::{expand_with_design, CountingRow, Dataset, PriorCount, RowDesign, RowStatus, Scenario};

use super::models::{FittedSurvival, ModelKind, MultistateCox, PredictionModel, RatePart, RcPlugIn, SurvivalPart, TerminalPlugIn};
use super::{
    fit_aalen, fit_cox, fit_kaplan_meier, fit_nelson_aalen_at_risk, fit_nelson_aalen_ipcw, CoxOptions,
    EventTarget,
};

const PRIOR_COUNT_CAP: u32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    NelsonAalen,
    Cox,
    Aalen,
    CoxMsm,
    CoxMsmStrata,
}

impl RateKind {
    fn token(self) -> &'static str {
        match self {
            RateKind::NelsonAalen => "nelson_aalen",
            RateKind::Cox => "cox",
            RateKind::Aalen => "aalen",
            RateKind::CoxMsm => "cox_msm",
            RateKind::CoxMsmStrata => "cox_msm_strata",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RateSpec {
    pub kind: RateKind,
    /// Covariate names; `None` uses every covariate except the stratum.
    pub covariates: Option<Vec<String>>,
    pub strata: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurvivalSpec {
    KaplanMeier,
    Cox(Option<Vec<String>>),
    Aalen(Option<Vec<String>>),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub label: String,
    pub rate: RateSpec,
    pub survival: Option<SurvivalSpec>,
    pub ignore_terminal: bool,
}

fn cols_token(cols: &Option<Vec<String>>) -> String {
    cols.as_ref().map(|c| format!(":{}", c.join("+"))).unwrap_or_default()
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.rate.kind.token(), cols_token(&self.rate.covariates))?;
        if let Some(s) = &self.rate.strata {
            write!(f, "@{s}")?;
        }
        match &self.survival {
            None => {}
            Some(SurvivalSpec::KaplanMeier) => write!(f, "/km")?,
            Some(SurvivalSpec::Cox(c)) => write!(f, "/cox{}", cols_token(c))?,
            Some(SurvivalSpec::Aalen(c)) => write!(f, "/aalen{}", cols_token(c))?,
        }
        if self.ignore_terminal {
            write!(f, "/ignore")?;
        }
        Ok(())
    }
}

fn parse_cols(s: &str) -> Result<Vec<String>> {
    let cols: Vec<String> = s.split('+').map(|c| c.trim().to_string()).collect();
    if cols.iter().any(String::is_empty) {
        return Err(Error::Parse(format!("empty covariate name in '{s}'")));
    }
    Ok(cols)
}

fn split_cols(s: &str) -> Result<(&str, Option<Vec<String>>)> {
    match s.split_once(':') {
        Some((k, c)) => Ok((k, Some(parse_cols(c)?))),
        None => Ok((s, None)),
    }
}

impl FromStr for ModelSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut parts = text.trim().split('/');
        let head = parts.next().unwrap_or_default();
        let (head, strata) = match head.split_once('@') {
            Some((h, s)) if !s.is_empty() => (h, Some(s.to_string())),
            Some(_) => return Err(Error::Parse(format!("empty stratum in '{text}'"))),
            None => (head, None),
        };
        let (kind, covariates) = split_cols(head)?;
        let kind = match kind {
            "nelson_aalen" | "reference" => RateKind::NelsonAalen,
            "cox" => RateKind::Cox,
            "aalen" => RateKind::Aalen,
            "cox_msm" => RateKind::CoxMsm,
            "cox_msm_strata" => RateKind::CoxMsmStrata,
            other => return Err(Error::UnknownModel(other.to_string())),
        };
        if kind == RateKind::CoxMsmStrata && strata.is_none() {
            return Err(Error::Parse("cox_msm_strata needs '@<covariate>'".into()));
        }
        if kind == RateKind::NelsonAalen && (covariates.is_some() || strata.is_some()) {
            return Err(Error::Parse("nelson_aalen takes no covariates".into()));
        }
        let mut survival = None;
        let mut ignore_terminal = false;
        for p in parts {
            if p == "ignore" {
                ignore_terminal = true;
                continue;
            }
            if survival.replace(p.parse::<SurvivalSpec>()?).is_some() {
                return Err(Error::Parse(format!("more than one survival part in '{text}'")));
            }
        }
        if ignore_terminal && survival.is_some() {
            return Err(Error::Parse("'ignore' cannot be combined with a survival part".into()));
        }
        Ok(ModelSpec {
            label: text.trim().to_string(),
            rate: RateSpec {
                kind,
                covariates,
                strata,
            },
            survival,
            ignore_terminal,
        })
    }
}

fn column_indices(d: &Dataset, names: &Option<Vec<String>>, exclude: Option<usize>) -> Result<Vec<usize>> {
    match names {
        Some(names) => names.iter().map(|n| d.covariate_index(n)).collect(),
        None => Ok((0..d.n_covariates()).filter(|&j| Some(j) != exclude).collect()),
    }
}

/// One row per subject over the whole follow-up, for terminal-event fits.
fn survival_rows(d: &Dataset, design: &RowDesign) -> Vec<CountingRow> {
    d.subjects
        .iter()
        .map(|s| CountingRow {
            id: s.id.clone(),
            start: 0.0,
            stop: s.follow_up_end,
            status: if s.is_terminal() {
                RowStatus::Terminal
            } else {
                RowStatus::None
            },
            covariates: design.base_covariates(&s.covariates),
            stratum: None,
        })
        .collect()
}

fn fit_survival(d: &Dataset, spec: &SurvivalSpec) -> Result<SurvivalPart> {
    Ok(match spec {
        SurvivalSpec::KaplanMeier => SurvivalPart::KaplanMeier(fit_kaplan_meier(d)?),
        SurvivalSpec::Cox(names) => {
            let design = RowDesign::columns(column_indices(d, names, None)?);
            let rows = survival_rows(d, &design);
            let fit = fit_cox(&rows, EventTarget::Terminal, &CoxOptions::default())?;
            SurvivalPart::Cox { fit, design }
        }
        SurvivalSpec::Aalen(names) => {
            let design = RowDesign::columns(column_indices(d, names, None)?);
            let rows = survival_rows(d, &design);
            let fit = fit_aalen(&rows, EventTarget::Terminal)?;
            SurvivalPart::Aalen { fit, design }
        }
    })
}

/// Cox model with the prior-count covariate (capped at 2) appended last.
pub fn fit_multistate_cox(
    d: &Dataset,
    covariates: Vec<usize>,
    strata: Option<usize>,
    survival: Option<SurvivalPart>,
    options: &CoxOptions,
) -> Result<MultistateCox> {
    let design = RowDesign {
        covariates: Some(covariates),
        prior_count: Some(PriorCount {
            cap: Some(PRIOR_COUNT_CAP),
        }),
        stratum: strata,
    };
    let rows = expand_with_design(d, &design)?;
    let fit = fit_cox(&rows, EventTarget::Recurrent, options)?;
    let label = match strata {
        Some(j) => format!("cox_msm_strata@{}", d.covariate_names[j]),
        None => "cox_msm".to_string(),
    };
    Ok(MultistateCox {
        label,
        n_covariates: Some(d.n_covariates()),
        fit,
        design,
        survival,
    })
}

/// Multi-state Cox model on all covariates (minus the stratum), combined
/// with the Kaplan-Meier survival of the terminal event.
pub fn build_multistate_cox(d: &Dataset, strata_on: Option<&str>) -> Result<MultistateCox> {
    if d.scenario != Scenario::WithTerminal {
        return Err(Error::Scenario("multi-state model needs a terminal-event dataset".into()));
    }
    let strata = strata_on.map(|n| d.covariate_index(n)).transpose()?;
    let cols = column_indices(d, &None, strata)?;
    let survival = SurvivalPart::KaplanMeier(fit_kaplan_meier(d)?);
    fit_multistate_cox(d, cols, strata, Some(survival), &CoxOptions::default())
}

/// Covariate-free reference: IPCW Nelson-Aalen without a terminal event,
/// Kaplan-Meier weighted Nelson-Aalen with one.
pub fn reference_model(
    d_train: &Dataset,
    g: &(impl CensoringDistribution + ?Sized),
) -> Result<Box<dyn PredictionModel>> {
    ModelSpec::reference().fit(d_train, g)
}

impl SurvivalSpec {
    /// Fits the survival model alone, e.g. for Brier-type scores.
    pub fn fit(&self, train: &Dataset) -> Result<FittedSurvival> {
        if train.scenario != Scenario::WithTerminal {
            return Err(Error::Scenario("survival models need a terminal-event dataset".into()));
        }
        train.ensure_valid()?;
        let part = fit_survival(train, self)?;
        let n_covariates = match self {
            SurvivalSpec::KaplanMeier => None,
            _ => Some(train.n_covariates()),
        };
        let label = match self {
            SurvivalSpec::KaplanMeier => "km".to_string(),
            SurvivalSpec::Cox(c) => format!("cox{}", cols_token(c)),
            SurvivalSpec::Aalen(c) => format!("aalen{}", cols_token(c)),
        };
        Ok(FittedSurvival {
            label,
            n_covariates,
            part,
        })
    }
}

impl FromStr for SurvivalSpec {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let (k, cols) = split_cols(text.trim())?;
        match k {
            "km" if cols.is_none() => Ok(SurvivalSpec::KaplanMeier),
            "cox" => Ok(SurvivalSpec::Cox(cols)),
            "aalen" => Ok(SurvivalSpec::Aalen(cols)),
            other => Err(Error::UnknownModel(format!("survival model '{other}'"))),
        }
    }
}

impl ModelSpec {
    pub fn reference() -> Self {
        "nelson_aalen".parse().expect("valid literal")
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Fits the model on `train`; `g` is only used by the IPCW Nelson-Aalen
    /// rate of data without a terminal event.
    pub fn fit(
        &self,
        train: &Dataset,
        g: &(impl CensoringDistribution + ?Sized),
    ) -> Result<Box<dyn PredictionModel>> {
        train.ensure_valid()?;
        let terminal = train.scenario == Scenario::WithTerminal && !self.ignore_terminal;
        if !terminal && self.survival.is_some() {
            return Err(Error::Scenario(format!(
                "model '{}' has a survival part but the data carry no terminal event",
                self.label
            )));
        }
        let relabelled;
        let data = if self.ignore_terminal && train.scenario == Scenario::WithTerminal {
            relabelled = train.terminal_as_censoring();
            &relabelled
        } else {
            train
        };
        let strata = self.rate.strata.as_deref().map(|n| data.covariate_index(n)).transpose()?;
        let cols = column_indices(data, &self.rate.covariates, strata)?;
        let p = Some(data.n_covariates());

        let survival = match (terminal, &self.survival) {
            (false, _) => None,
            (true, Some(s)) => Some(fit_survival(data, s)?),
            (true, None) => Some(fit_survival(data, &SurvivalSpec::KaplanMeier)?),
        };

        let design = RowDesign {
            covariates: Some(cols.clone()),
            prior_count: None,
            stratum: strata,
        };
        let (rate, kind) = match self.rate.kind {
            RateKind::NelsonAalen => {
                let na = if train.scenario == Scenario::RcOnly {
                    fit_nelson_aalen_ipcw(data, g)?
                } else {
                    fit_nelson_aalen_at_risk(data)?
                };
                let kind = if terminal {
                    ModelKind::NonparamTerminalRef
                } else {
                    ModelKind::NelsonAalenRef
                };
                (RatePart::Marginal(na), kind)
            }
            RateKind::Cox => {
                let rows = expand_with_design(data, &design)?;
                let fit = fit_cox(&rows, EventTarget::Recurrent, &CoxOptions::default())?;
                let kind = if terminal {
                    ModelKind::CoxTerminalPair
                } else {
                    ModelKind::CoxRc
                };
                (RatePart::Cox { fit, design }, kind)
            }
            RateKind::Aalen => {
                if strata.is_some() {
                    return Err(Error::Parse("aalen does not support strata".into()));
                }
                let rows = expand_with_design(data, &design)?;
                let fit = fit_aalen(&rows, EventTarget::Recurrent)?;
                let kind = if terminal {
                    ModelKind::AalenTerminalPair
                } else {
                    ModelKind::AalenRc
                };
                (RatePart::Aalen { fit, design }, kind)
            }
            RateKind::CoxMsm | RateKind::CoxMsmStrata => {
                let mut m = fit_multistate_cox(data, cols, strata, survival, &CoxOptions::default())?;
                m.label = self.label.clone();
                return Ok(Box::new(m));
            }
        };
        let covariate_free = matches!(survival, None | Some(SurvivalPart::KaplanMeier(_)))
            && self.rate.kind == RateKind::NelsonAalen;
        let n_covariates = if covariate_free { None } else { p };
        let label = self.label.clone();
        Ok(match survival {
            None => Box::new(RcPlugIn {
                label,
                kind,
                n_covariates,
                rate,
            }),
            Some(survival) => Box::new(TerminalPlugIn {
                label,
                kind,
                n_covariates,
                rate,
                survival,
            }),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trip() {
        for text in [
            "nelson_aalen",
            "cox",
            "cox:x1",
            "cox:x1+x2/cox:x1",
            "aalen:x1/km",
            "cox_msm_strata:age+diabetes@af/cox:age",
            "cox/ignore",
            "cox@af",
        ] {
            let spec: ModelSpec = text.parse().unwrap();
            assert_eq!(spec.to_string(), text);
        }
    }

    #[test]
    fn parse_errors() {
        assert!(matches!("forest".parse::<ModelSpec>(), Err(Error::UnknownModel(_))));
        assert!("cox_msm_strata".parse::<ModelSpec>().is_err());
        assert!("cox/km/cox".parse::<ModelSpec>().is_err());
        assert!("cox/km/ignore".parse::<ModelSpec>().is_err());
        assert!("cox:".parse::<ModelSpec>().is_err());
        assert!("nelson_aalen:x1".parse::<ModelSpec>().is_err());
    }
}
