//! Replicated simulation studies: the criterion decomposition, score tables
//! over training replicates, and per-replicate score curves.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::censoring::fit_censoring;
use crate::error::{Error, Result};
use crate::estimators::{ModelSpec, SurvivalSpec};
use crate::oracle::{imprecision, inseparability_a, CovariateMoments, ScenarioParams};
use crate::scoring::{mse_criterion, mse_from_counts, score_from_curves, survival_score, weighted_counts};
use crate::simulation::{derive_seed, simulate_rc_scenario, simulate_terminal_scenario, RcScenarioParams, TerminalScenarioParams};
use crate::types::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    Desk,
    Full,
}

impl Scale {
    pub fn table_replications(self) -> usize {
        match self {
            Scale::Desk => 200,
            Scale::Full => 500,
        }
    }

    pub fn figure_replications(self) -> usize {
        match self {
            Scale::Desk => 50,
            Scale::Full => 100,
        }
    }
}

/// Everything that determines a run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub model_specs: Vec<String>,
    pub grid: Vec<f64>,
    pub replications: usize,
    pub output_dir: Option<String>,
    #[serde(default)]
    pub options: BTreeMap<String, String>,
}

impl RunManifest {
    /// SHA-256 of the canonical JSON encoding (the output directory excluded).
    pub fn hash(&self) -> String {
        let mut m = self.clone();
        m.output_dir = None;
        let bytes = serde_json::to_vec(&m).expect("manifest serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

/// Seed of the common test sample.
pub fn test_seed(master: u64) -> u64 {
    derive_seed(master, u64::MAX)
}

/// Seed of training replicate `r`.
pub fn train_seed(master: u64, r: usize) -> u64 {
    derive_seed(master, r as u64)
}

/// Criterion of the covariate-free reference split into its parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    pub times: Vec<f64>,
    pub mse: Vec<f64>,
    pub imprecision: Vec<f64>,
    pub inseparability: Vec<f64>,
}

impl Decomposition {
    /// `|MSE - imprecision - A| / MSE` at grid index `i`.
    pub fn closure_gap(&self, i: usize) -> f64 {
        (self.mse[i] - self.imprecision[i] - self.inseparability[i]).abs() / self.mse[i]
    }
}

/// Nelson-Aalen reference trained on one sample and scored on another,
/// with the inseparability term from the closed form.
pub fn decomposition(
    params: &RcScenarioParams,
    n_train: usize,
    n_test: usize,
    times: &[f64],
    seed: u64,
    mc_samples: usize,
) -> Result<Decomposition> {
    let train = simulate_rc_scenario(n_train, params, train_seed(seed, 0))?;
    let test = simulate_rc_scenario(n_test, params, test_seed(seed))?;
    let g = fit_censoring(&train.union(&test)?)?;
    let model = ModelSpec::reference().fit(&train, &g)?;
    let curve = mse_criterion(&test, &g, model.as_ref(), times)?;
    let sp = ScenarioParams::Rc(params.clone());
    let xs: Vec<Vec<f64>> = test.subjects.iter().map(|s| s.covariates.clone()).collect();
    let moments = CovariateMoments::monte_carlo(&params.covariates, &params.theta, mc_samples, derive_seed(seed, 1 << 40))?;
    let mut imp = Vec::with_capacity(curve.times.len());
    let mut a = Vec::with_capacity(curve.times.len());
    for &t in &curve.times {
        imp.push(imprecision(&xs, model.as_ref(), &sp, t)?);
        a.push(inseparability_a(t, params, &moments)?.value());
    }
    Ok(Decomposition {
        times: curve.times,
        mse: curve.mse,
        imprecision: imp,
        inseparability: a,
    })
}

/// Per-replicate score curves of several models against one reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateScores {
    pub labels: Vec<String>,
    pub times: Vec<f64>,
    /// `curves[model][replicate]`; `None` when the fit failed.
    pub curves: Vec<Vec<Option<Vec<f64>>>>,
    pub failures: Vec<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub label: String,
    pub n_train: usize,
    pub times: Vec<f64>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
    pub replications_used: usize,
    pub failures: usize,
}

impl ReplicateScores {
    pub fn summarize(&self, n_train: usize) -> Vec<SummaryRow> {
        self.labels
            .iter()
            .zip(&self.curves)
            .zip(&self.failures)
            .map(|((label, reps), fails)| {
                let ok: Vec<&Vec<f64>> = reps.iter().flatten().collect();
                let n = ok.len() as f64;
                let mean: Vec<f64> = (0..self.times.len())
                    .map(|i| ok.iter().map(|c| c[i]).sum::<f64>() / n)
                    .collect();
                let sd = (0..self.times.len())
                    .map(|i| {
                        let ss: f64 = ok.iter().map(|c| (c[i] - mean[i]).powi(2)).sum();
                        (ss / (n - 1.0).max(1.0)).sqrt()
                    })
                    .collect();
                SummaryRow {
                    label: label.clone(),
                    n_train,
                    times: self.times.clone(),
                    mean,
                    sd,
                    replications_used: ok.len(),
                    failures: fails.len(),
                }
            })
            .collect()
    }
}

fn is_fit_failure(e: &Error) -> bool {
    matches!(e, Error::NonConvergence { .. } | Error::Singular(_) | Error::NoEvents)
}

/// Scores `models` against `reference` for `replications` independent
/// training samples and one common test sample. The censoring law is
/// re-estimated for each replicate on the pooled training and test sample.
pub fn replicate_scores(
    simulate_train: &(dyn Fn(u64) -> Result<Dataset> + Sync),
    test: &Dataset,
    models: &[ModelSpec],
    reference: &ModelSpec,
    times: &[f64],
    replications: usize,
    seed: u64,
) -> Result<ReplicateScores> {
    type Rep = (Vec<f64>, Vec<std::result::Result<Vec<f64>, String>>);
    let reps: Vec<Rep> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<Rep> {
            let train = simulate_train(train_seed(seed, r))?;
            let g = fit_censoring(&train.union(test)?)?;
            let wc = weighted_counts(test, &g, times)?;
            let ref_curve = mse_from_counts(test, &wc, reference.fit(&train, &g)?.as_ref())?;
            let scores = models
                .iter()
                .map(|spec| match spec.fit(&train, &g) {
                    Ok(m) => {
                        let c = score_from_curves(&mse_from_counts(test, &wc, m.as_ref())?, &ref_curve)?;
                        Ok(Ok(c.score.expect("score curve")))
                    }
                    Err(e) if is_fit_failure(&e) => Ok(Err(format!("replicate {r}: {e}"))),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((wc.times, scores))
        })
        .collect::<Result<_>>()?;
    collect_replicates(models.iter().map(|m| m.label.clone()).collect(), reps)
}

fn collect_replicates(
    labels: Vec<String>,
    reps: Vec<(Vec<f64>, Vec<std::result::Result<Vec<f64>, String>>)>,
) -> Result<ReplicateScores> {
    // replicates may clip the grid at different censoring support ends
    let times = reps.iter().min_by_key(|r| r.0.len()).map(|r| r.0.clone()).unwrap_or_default();
    if reps.iter().any(|r| r.0[..times.len()] != times[..]) {
        return Err(Error::GridMismatch);
    }
    let mut curves = vec![Vec::with_capacity(reps.len()); labels.len()];
    let mut failures = vec![Vec::new(); labels.len()];
    for (_, scores) in reps {
        for (j, s) in scores.into_iter().enumerate() {
            match s {
                Ok(mut c) => {
                    c.truncate(times.len());
                    curves[j].push(Some(c))
                }
                Err(msg) => {
                    curves[j].push(None);
                    failures[j].push(msg);
                }
            }
        }
    }
    Ok(ReplicateScores {
        labels,
        times,
        curves,
        failures,
    })
}

/// Survival-score analogue of [`replicate_scores`] with Kaplan-Meier as the
/// reference.
pub fn replicate_survival_scores(
    simulate_train: &(dyn Fn(u64) -> Result<Dataset> + Sync),
    test: &Dataset,
    models: &[(String, SurvivalSpec)],
    times: &[f64],
    replications: usize,
    seed: u64,
) -> Result<ReplicateScores> {
    type Rep = (Vec<f64>, Vec<std::result::Result<Vec<f64>, String>>);
    let reps: Vec<Rep> = (0..replications)
        .into_par_iter()
        .map(|r| -> Result<Rep> {
            let train = simulate_train(train_seed(seed, r))?;
            let g = fit_censoring(&train.union(test)?)?;
            let km = SurvivalSpec::KaplanMeier.fit(&train)?;
            let mut grid = Vec::new();
            let scores = models
                .iter()
                .map(|(_, spec)| match spec.fit(&train) {
                    Ok(m) => {
                        let c = survival_score(test, &g, &m, &km, times)?;
                        grid = c.times.clone();
                        Ok(Ok(c.score.expect("score curve")))
                    }
                    Err(e) if is_fit_failure(&e) => Ok(Err(format!("replicate {r}: {e}"))),
                    Err(e) => Err(e),
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((grid, scores))
        })
        .collect::<Result<_>>()?;
    collect_replicates(models.iter().map(|m| m.0.clone()).collect(), reps)
}

fn specs(texts: &[(&str, &str)]) -> Vec<ModelSpec> {
    texts
        .iter()
        .map(|(spec, label)| spec.parse::<ModelSpec>().expect("valid literal").with_label(*label))
        .collect()
}

/// The four models compared without a terminal event.
pub fn rc_models() -> Vec<ModelSpec> {
    specs(&[
        ("cox:x1", "Cox one cov."),
        ("cox:x1+x2", "Cox two cov."),
        ("aalen:x1", "Aalen one cov."),
        ("aalen:x1+x2", "Aalen two cov."),
    ])
}

/// The three rate/survival pairs compared with a terminal event.
pub fn terminal_models() -> Vec<ModelSpec> {
    specs(&[
        ("cox:x1/cox:x1", "One cov.-one cov."),
        ("cox:x1+x2/cox:x1", "Two cov.-one cov."),
        ("cox:x1+x2/cox:x1+x2", "Two cov.-two cov."),
    ])
}

/// Models that treat the terminal event as censoring.
pub fn terminal_ignoring_models() -> Vec<ModelSpec> {
    specs(&[
        ("nelson_aalen/ignore", "Nelson-Aalen, terminal as censoring"),
        ("cox:x1+x2/ignore", "Cox two cov., terminal as censoring"),
    ])
}

pub fn survival_models() -> Vec<(String, SurvivalSpec)> {
    vec![
        ("One cov.".into(), SurvivalSpec::Cox(Some(vec!["x1".into()]))),
        ("Two cov.".into(), SurvivalSpec::Cox(Some(vec!["x1".into(), "x2".into()]))),
    ]
}

/// Score table without a terminal event: one block per training size.
pub fn rc_score_table(
    params: &RcScenarioParams,
    n_trains: &[usize],
    n_test: usize,
    times: &[f64],
    replications: usize,
    seed: u64,
) -> Result<Vec<SummaryRow>> {
    let test = simulate_rc_scenario(n_test, params, test_seed(seed))?;
    let mut rows = Vec::new();
    for &n in n_trains {
        let sim = |s: u64| simulate_rc_scenario(n, params, s);
        let reps = replicate_scores(&sim, &test, &rc_models(), &ModelSpec::reference(), times, replications, derive_seed(seed, n as u64))?;
        rows.extend(reps.summarize(n));
    }
    Ok(rows)
}

/// Score tables with a terminal event: recurrent-event scores and
/// survival scores, one block per training size.
pub fn terminal_score_tables(
    params: &TerminalScenarioParams,
    n_trains: &[usize],
    n_test: usize,
    times: &[f64],
    replications: usize,
    seed: u64,
) -> Result<(Vec<SummaryRow>, Vec<SummaryRow>)> {
    let test = simulate_terminal_scenario(n_test, params, test_seed(seed))?;
    let mut rec = Vec::new();
    let mut surv = Vec::new();
    for &n in n_trains {
        let sim = |s: u64| simulate_terminal_scenario(n, params, s);
        let block_seed = derive_seed(seed, n as u64);
        let reps = replicate_scores(&sim, &test, &terminal_models(), &ModelSpec::reference(), times, replications, block_seed)?;
        rec.extend(reps.summarize(n));
        let sreps = replicate_survival_scores(&sim, &test, &survival_models(), times, replications, block_seed)?;
        surv.extend(sreps.summarize(n));
    }
    Ok((rec, surv))
}

/// Score curves of the four models without a terminal event, one curve per
/// training replicate.
pub fn rc_score_curves(
    params: &RcScenarioParams,
    n_train: usize,
    n_test: usize,
    times: &[f64],
    replications: usize,
    seed: u64,
) -> Result<ReplicateScores> {
    let test = simulate_rc_scenario(n_test, params, test_seed(seed))?;
    let sim = |s: u64| simulate_rc_scenario(n_train, params, s);
    replicate_scores(&sim, &test, &rc_models(), &ModelSpec::reference(), times, replications, seed)
}

/// Recurrent-event and survival score curves with a terminal event.
pub fn terminal_score_curves(
    params: &TerminalScenarioParams,
    n_train: usize,
    n_test: usize,
    times: &[f64],
    replications: usize,
    seed: u64,
) -> Result<(ReplicateScores, ReplicateScores)> {
    let test = simulate_terminal_scenario(n_test, params, test_seed(seed))?;
    let sim = |s: u64| simulate_terminal_scenario(n_train, params, s);
    let rec = replicate_scores(&sim, &test, &terminal_models(), &ModelSpec::reference(), times, replications, seed)?;
    let surv = replicate_survival_scores(&sim, &test, &survival_models(), times, replications, seed)?;
    Ok((rec, surv))
}

/// Score curves of models that treat the terminal event as censoring,
/// against the reference that accounts for it.
pub fn terminal_ignoring_curves(
    params: &TerminalScenarioParams,
    n_train: usize,
    n_test: usize,
    times: &[f64],
    replications: usize,
    seed: u64,
) -> Result<ReplicateScores> {
    let test = simulate_terminal_scenario(n_test, params, test_seed(seed))?;
    let sim = |s: u64| simulate_terminal_scenario(n_train, params, s);
    replicate_scores(&sim, &test, &terminal_ignoring_models(), &ModelSpec::reference(), times, replications, seed)
}
