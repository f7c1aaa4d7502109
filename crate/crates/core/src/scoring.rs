//! The IPCW mean-squared-error criterion, prediction scores against a
//! reference model, the IPCW Brier score, and k-fold cross-validation.

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::censoring::{fit_censoring, ipcw_weight, CensoringDistribution};
use crate::error::{Error, Result};
use crate::estimators::{ModelKind, ModelSpec, PredictionModel, SurvivalModel};
use crate::types::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreCurve {
    pub model_label: String,
    pub kind: ModelKind,
    pub times: Vec<f64>,
    pub mse: Vec<f64>,
    /// Present on score curves: criterion of the reference model.
    pub reference_label: Option<String>,
    pub reference_mse: Option<Vec<f64>>,
    /// `reference_mse - mse`; positive when the model beats the reference.
    pub score: Option<Vec<f64>>,
    pub n_test: usize,
    /// Requested grid points dropped because a weight was undefined or the
    /// point lay beyond the censoring support.
    pub clipped_times: Vec<f64>,
}

impl ScoreCurve {
    fn index_of(&self, t: f64) -> Option<usize> {
        self.times.iter().position(|&s| s == t)
    }

    pub fn mse_at(&self, t: f64) -> Option<f64> {
        self.index_of(t).map(|i| self.mse[i])
    }

    pub fn score_at(&self, t: f64) -> Option<f64> {
        let s = self.score.as_ref()?;
        self.index_of(t).map(|i| s[i])
    }
}

/// Per-subject IPCW-weighted cumulative event counts on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCounts {
    pub times: Vec<f64>,
    pub counts: Vec<Vec<f64>>,
    pub clipped_times: Vec<f64>,
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::InvalidInput("empty evaluation grid".into()));
    }
    if times.iter().any(|t| !(*t >= 0.0)) || times.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidInput(
            "evaluation grid must be strictly increasing and nonnegative".into(),
        ));
    }
    Ok(())
}

/// Keeps the grid points at most `limit` and strictly before `first_bad`.
fn clip_grid(times: &[f64], limit: f64, first_bad: f64) -> (Vec<f64>, Vec<f64>) {
    times.iter().partition(|&&t| t <= limit && t < first_bad)
}

/// `Σ_{events e <= t} 1 / (1 - Ĝ(e-))` for each subject and grid time.
/// The grid is clipped at the censoring support end and before the first
/// event whose weight is undefined.
pub fn weighted_counts(
    test: &Dataset,
    g: &(impl CensoringDistribution + ?Sized),
    times: &[f64],
) -> Result<WeightedCounts> {
    check_grid(times)?;
    test.ensure_valid()?;
    let limit = g.support_end().min(test.tau);
    let horizon = times[times.len() - 1];
    let weights: Vec<Vec<Option<f64>>> = test
        .subjects
        .par_iter()
        .map(|s| {
            s.event_times
                .iter()
                .take_while(|&&e| e <= horizon)
                .map(|&e| ipcw_weight(g, e, &s.covariates).ok())
                .collect()
        })
        .collect();
    let mut first_bad = f64::INFINITY;
    for (s, w) in test.subjects.iter().zip(&weights) {
        if let Some(k) = w.iter().position(Option::is_none) {
            first_bad = first_bad.min(s.event_times[k]);
        }
    }
    let (kept, clipped_times) = clip_grid(times, limit, first_bad);
    if kept.is_empty() {
        return Err(match first_bad.is_finite() {
            true => Error::WeightUndefined { time: first_bad },
            false => Error::InvalidInput(format!("evaluation grid lies beyond the censoring support end {limit}")),
        });
    }
    let counts = test
        .subjects
        .iter()
        .zip(&weights)
        .map(|(s, w)| {
            let mut out = Vec::with_capacity(kept.len());
            let mut level = 0.0;
            let mut k = 0;
            for &t in &kept {
                while k < w.len() && s.event_times[k] <= t {
                    level += w[k].expect("weights defined before the clipped horizon");
                    k += 1;
                }
                out.push(level);
            }
            out
        })
        .collect();
    Ok(WeightedCounts {
        times: kept,
        counts,
        clipped_times,
    })
}

/// Criterion curve of a model from precomputed weighted counts.
pub fn mse_from_counts(test: &Dataset, wc: &WeightedCounts, m: &dyn PredictionModel) -> Result<ScoreCurve> {
    let preds: Vec<Vec<f64>> = test
        .subjects
        .par_iter()
        .map(|s| m.predict_curve(&s.covariates, &wc.times))
        .collect::<Result<_>>()?;
    let n = test.len() as f64;
    let mut mse = vec![0.0; wc.times.len()];
    for (c, p) in wc.counts.iter().zip(&preds) {
        for ((acc, ci), pi) in mse.iter_mut().zip(c).zip(p) {
            *acc += (ci - pi).powi(2);
        }
    }
    mse.iter_mut().for_each(|v| *v /= n);
    Ok(ScoreCurve {
        model_label: m.label().to_string(),
        kind: m.kind(),
        times: wc.times.clone(),
        mse,
        reference_label: None,
        reference_mse: None,
        score: None,
        n_test: test.len(),
        clipped_times: wc.clipped_times.clone(),
    })
}

/// `(1/n) Σ_i (Σ_{e <= t} 1/(1 - Ĝ(e-)) - μ̂(t | X_i))²` on the grid.
pub fn mse_criterion(
    test: &Dataset,
    g: &(impl CensoringDistribution + ?Sized),
    m: &dyn PredictionModel,
    times: &[f64],
) -> Result<ScoreCurve> {
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test sample".into()));
    }
    let wc = weighted_counts(test, g, times)?;
    mse_from_counts(test, &wc, m)
}

/// Pointwise `MSE(reference) - MSE(model)` from two criterion curves.
pub fn score_from_curves(model: &ScoreCurve, reference: &ScoreCurve) -> Result<ScoreCurve> {
    if model.times != reference.times {
        return Err(Error::GridMismatch);
    }
    let score = reference.mse.iter().zip(&model.mse).map(|(r, m)| r - m).collect();
    Ok(ScoreCurve {
        reference_label: Some(reference.model_label.clone()),
        reference_mse: Some(reference.mse.clone()),
        score: Some(score),
        ..model.clone()
    })
}

pub fn prediction_score(
    test: &Dataset,
    g: &(impl CensoringDistribution + ?Sized),
    m: &dyn PredictionModel,
    reference: &dyn PredictionModel,
    times: &[f64],
) -> Result<ScoreCurve> {
    let wc = weighted_counts(test, g, times)?;
    let model_curve = mse_from_counts(test, &wc, m)?;
    let ref_curve = mse_from_counts(test, &wc, reference)?;
    score_from_curves(&model_curve, &ref_curve)
}

/// Empirical IPCW Brier score of a survival model for the terminal event:
/// `(1/n) Σ_i w_i(t) (I(T_i > t) - Ŝ(t | X_i))²` with
/// `w_i(t) = I(T_i <= t, terminal) / (1 - Ĝ(T_i-)) + I(T_i > t) / (1 - Ĝ(t))`.
pub fn brier_score(
    test: &Dataset,
    g: &(impl CensoringDistribution + ?Sized),
    s: &dyn SurvivalModel,
    times: &[f64],
) -> Result<ScoreCurve> {
    check_grid(times)?;
    test.ensure_valid()?;
    if test.is_empty() {
        return Err(Error::InvalidInput("empty test sample".into()));
    }
    let limit = g.support_end().min(test.tau);
    let mut first_bad = f64::INFINITY;
    for &t in times {
        if 1.0 - g.cdf(t, &[]) <= 0.0 {
            first_bad = first_bad.min(t);
            break;
        }
    }
    let horizon = times[times.len() - 1];
    for subj in &test.subjects {
        let t = subj.follow_up_end;
        if subj.is_terminal() && t <= horizon && ipcw_weight(g, t, &subj.covariates).is_err() {
            first_bad = first_bad.min(t);
        }
    }
    let (kept, clipped_times) = clip_grid(times, limit, first_bad);
    if kept.is_empty() {
        return Err(Error::WeightUndefined { time: first_bad });
    }
    let terms: Vec<Vec<f64>> = test
        .subjects
        .par_iter()
        .map(|subj| {
            let surv = s.survival_curve(&subj.covariates, &kept)?;
            let t_i = subj.follow_up_end;
            let w_event = if subj.is_terminal() {
                ipcw_weight(g, t_i, &subj.covariates).unwrap_or(0.0)
            } else {
                0.0
            };
            kept.iter()
                .zip(surv)
                .map(|(&t, s_hat)| {
                    if t_i > t {
                        Ok((1.0 - s_hat).powi(2) / (1.0 - g.cdf(t, &subj.covariates)))
                    } else {
                        Ok(w_event * s_hat * s_hat)
                    }
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let n = test.len() as f64;
    let mut brier = vec![0.0; kept.len()];
    for row in &terms {
        for (acc, v) in brier.iter_mut().zip(row) {
            *acc += v;
        }
    }
    brier.iter_mut().for_each(|v| *v /= n);
    Ok(ScoreCurve {
        model_label: s.label().to_string(),
        kind: ModelKind::External,
        times: kept,
        mse: brier,
        reference_label: None,
        reference_mse: None,
        score: None,
        n_test: test.len(),
        clipped_times,
    })
}

/// Pointwise `Brier(reference) - Brier(model)` for survival predictions.
pub fn survival_score(
    test: &Dataset,
    g: &(impl CensoringDistribution + ?Sized),
    s: &dyn SurvivalModel,
    reference: &dyn SurvivalModel,
    times: &[f64],
) -> Result<ScoreCurve> {
    let model_curve = brier_score(test, g, s, times)?;
    let ref_curve = brier_score(test, g, reference, times)?;
    score_from_curves(&model_curve, &ref_curve)
}

/// `n` equally spaced points on `(0, upper]`.
pub fn auto_grid(upper: f64, n: usize) -> Vec<f64> {
    // rounded so that e.g. 2.9 / 29 steps print as 0.1, 0.2, ...
    (1..=n)
        .map(|k| (((upper * k as f64 / n as f64) * 1e12).round() / 1e12).min(upper))
        .collect()
}

/// Parses `auto:N` (N points up to `upper`) or a comma-separated list.
pub fn parse_grid(text: &str, upper: f64) -> Result<Vec<f64>> {
    let text = text.trim();
    let grid = if let Some(n) = text.strip_prefix("auto:") {
        let n: usize = n
            .parse()
            .map_err(|_| Error::Parse(format!("bad grid size in '{text}'")))?;
        if n == 0 {
            return Err(Error::Parse("grid needs at least one point".into()));
        }
        auto_grid(upper, n)
    } else {
        text.split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad grid value '{v}'")))
            })
            .collect::<Result<Vec<_>>>()?
    };
    check_grid(&grid)?;
    Ok(grid)
}

/// Type-7 (linear interpolation) sample quantile.
pub fn quantile(values: &[f64], p: f64) -> f64 {
    let mut v: Vec<f64> = values.to_vec();
    v.sort_by(f64::total_cmp);
    if v.is_empty() {
        return f64::NAN;
    }
    let h = (v.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVSummary {
    pub model_label: String,
    pub times: Vec<f64>,
    pub mean_score: Vec<f64>,
    /// Empirical 10% and 90% quantiles of the per-fold scores.
    pub interval_low: Vec<f64>,
    pub interval_high: Vec<f64>,
    pub k: usize,
    pub per_fold: Vec<Vec<f64>>,
    /// Folds without any recurrent event, left out of the summary.
    pub skipped_folds: Vec<usize>,
}

/// Fold label of each subject after a seeded shuffle.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n];
    for (pos, &i) in order.iter().enumerate() {
        fold[i] = pos % k;
    }
    fold
}

pub fn kfold_evaluate(
    d: &Dataset,
    k: usize,
    model: &ModelSpec,
    reference: &ModelSpec,
    times: &[f64],
    seed: u64,
) -> Result<CVSummary> {
    let mut out = kfold_evaluate_many(d, k, std::slice::from_ref(model), reference, times, seed)?;
    Ok(out.remove(0))
}

/// Cross-validated scores of several models sharing folds and reference
/// fits. The censoring distribution is estimated once on the whole data.
pub fn kfold_evaluate_many(
    d: &Dataset,
    k: usize,
    models: &[ModelSpec],
    reference: &ModelSpec,
    times: &[f64],
    seed: u64,
) -> Result<Vec<CVSummary>> {
    if k < 2 || d.len() < k {
        return Err(Error::InvalidInput(format!("k-fold needs 2 <= k <= n (k = {k}, n = {})", d.len())));
    }
    check_grid(times)?;
    d.ensure_valid()?;
    let g = fit_censoring(d)?;
    let fold = fold_assignment(d.len(), k, seed);
    type FoldResult = Option<(Vec<f64>, Vec<Vec<f64>>)>;
    let results: Vec<FoldResult> = (0..k)
        .into_par_iter()
        .map(|f| -> Result<FoldResult> {
            let test_idx: Vec<usize> = (0..d.len()).filter(|&i| fold[i] == f).collect();
            let train_idx: Vec<usize> = (0..d.len()).filter(|&i| fold[i] != f).collect();
            let test = d.subset(&test_idx);
            if test.total_events() == 0 {
                return Ok(None);
            }
            let train = d.subset(&train_idx);
            let wc = weighted_counts(&test, &g, times)?;
            let ref_model = reference.fit(&train, &g)?;
            let ref_curve = mse_from_counts(&test, &wc, ref_model.as_ref())?;
            let scores = models
                .iter()
                .map(|spec| {
                    let m = spec.fit(&train, &g)?;
                    let curve = score_from_curves(&mse_from_counts(&test, &wc, m.as_ref())?, &ref_curve)?;
                    Ok(curve.score.expect("score curve"))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Some((wc.times, scores)))
        })
        .collect::<Result<_>>()?;

    let skipped_folds: Vec<usize> = (0..k).filter(|&f| results[f].is_none()).collect();
    let used: Vec<&(Vec<f64>, Vec<Vec<f64>>)> = results.iter().flatten().collect();
    if used.is_empty() {
        return Err(Error::NoEvents);
    }
    // folds may clip the grid differently; summarize on the common prefix
    let common = used.iter().map(|(t, _)| t.len()).min().unwrap_or(0);
    let grid: Vec<f64> = used[0].0[..common].to_vec();
    Ok(models
        .iter()
        .enumerate()
        .map(|(j, spec)| {
            let per_fold: Vec<Vec<f64>> = used.iter().map(|(_, s)| s[j][..common].to_vec()).collect();
            let column = |i: usize| per_fold.iter().map(|r| r[i]).collect::<Vec<f64>>();
            let nf = per_fold.len() as f64;
            CVSummary {
                model_label: spec.label.clone(),
                times: grid.clone(),
                mean_score: (0..common).map(|i| column(i).iter().sum::<f64>() / nf).collect(),
                interval_low: (0..common).map(|i| quantile(&column(i), 0.1)).collect(),
                interval_high: (0..common).map(|i| quantile(&column(i), 0.9)).collect(),
                k,
                per_fold,
                skipped_folds: skipped_folds.clone(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::censoring::CensoringModel;
    use crate::estimators::{FnModel, FnSurvival};
    use crate::types::{EndReason, Scenario, Subject};

    fn rc(subjects: Vec<Subject>) -> Dataset {
        Dataset::new(subjects, Scenario::RcOnly, vec!["x".into()], 10.0)
    }

    #[test]
    fn no_events_constant_model() {
        let d = rc(vec![
            Subject::new("a", vec![], 5.0, EndReason::Censored, vec![0.0]),
            Subject::new("b", vec![], 6.0, EndReason::Censored, vec![1.0]),
        ]);
        let m = FnModel::new("c", None, |_, _| 1.5);
        let curve = mse_criterion(&d, &CensoringModel::none(10.0), &m, &[1.0, 2.0, 4.0]).unwrap();
        assert_eq!(curve.mse, vec![2.25; 3]);
    }

    #[test]
    fn single_event_zero_model() {
        let d = rc(vec![Subject::new("a", vec![0.5], 5.0, EndReason::Censored, vec![0.0])]);
        let m = FnModel::new("zero", None, |_, _| 0.0);
        let curve = mse_criterion(&d, &CensoringModel::none(10.0), &m, &[0.25, 0.5, 1.0]).unwrap();
        assert_eq!(curve.mse, vec![0.0, 1.0, 1.0]);
    }

    #[test]
    fn self_score_is_zero_and_antisymmetric() {
        let d = rc(vec![
            Subject::new("a", vec![0.5, 1.5], 5.0, EndReason::Censored, vec![0.0]),
            Subject::new("b", vec![2.0], 3.0, EndReason::Censored, vec![1.0]),
        ]);
        let g = CensoringModel::none(10.0);
        let m1 = FnModel::new("m1", Some(1), |t, x| t * (1.0 + x[0]));
        let m2 = FnModel::new("m2", Some(1), |t, _| 0.7 * t);
        let grid = [0.5, 1.0, 2.0, 3.0];
        let s = prediction_score(&d, &g, &m1, &m1, &grid).unwrap();
        assert!(s.score.unwrap().iter().all(|&v| v == 0.0));
        let a = prediction_score(&d, &g, &m1, &m2, &grid).unwrap().score.unwrap();
        let b = prediction_score(&d, &g, &m2, &m1, &grid).unwrap().score.unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(*x, -*y);
        }
    }

    #[test]
    fn grid_clipped_at_support_end() {
        let d = rc(vec![Subject::new("a", vec![0.5], 2.0, EndReason::Censored, vec![0.0])]);
        let g = CensoringModel::none(2.0);
        let m = FnModel::new("zero", None, |_, _| 0.0);
        let curve = mse_criterion(&d, &g, &m, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(curve.times, vec![1.0, 2.0]);
        assert_eq!(curve.clipped_times, vec![3.0]);
    }

    #[test]
    fn brier_trivial_cases() {
        let d = Dataset::new(
            vec![
                Subject::new("a", vec![], 5.0, EndReason::Censored, vec![0.0]),
                Subject::new("b", vec![], 1.0, EndReason::Terminal, vec![0.0]),
                Subject::new("c", vec![], 3.0, EndReason::Terminal, vec![0.0]),
            ],
            Scenario::WithTerminal,
            vec!["x".into()],
            10.0,
        );
        let g = CensoringModel::none(10.0);
        let one = FnSurvival::new("one", None, |_, _| 1.0);
        assert_eq!(brier_score(&d, &g, &one, &[0.5]).unwrap().mse, vec![0.0]);
        let half = FnSurvival::new("half", None, |_, _| 0.5);
        assert_eq!(brier_score(&d, &g, &half, &[0.5, 2.0, 4.0]).unwrap().mse, vec![0.25; 3]);
    }

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("1, 2,2.9", 3.0).unwrap(), vec![1.0, 2.0, 2.9]);
        let g = parse_grid("auto:100", 3.0).unwrap();
        assert_eq!(g.len(), 100);
        assert_eq!(*g.last().unwrap(), 3.0);
        assert!(parse_grid("2,1", 3.0).is_err());
        assert!(parse_grid("auto:x", 3.0).is_err());
    }

    #[test]
    fn type7_quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.1), 1.4);
        assert_eq!(quantile(&v, 0.9), 4.6);
        assert_eq!(quantile(&[3.0], 0.1), 3.0);
    }

    #[test]
    fn folds_are_balanced_and_seeded() {
        let a = fold_assignment(23, 5, 7);
        assert_eq!(a, fold_assignment(23, 5, 7));
        for f in 0..5 {
            let size = a.iter().filter(|&&x| x == f).count();
            assert!(size == 4 || size == 5);
        }
    }
}
