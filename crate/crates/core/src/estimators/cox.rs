//! Andersen-Gill proportional rate model fitted by Newton-Raphson on the
//! log partial likelihood (Breslow ties), with Breslow cumulative baselines.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::StepFunction;
use crate::types::CountingRow;

use super::linalg::solve_spd;
use super::EventTarget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxOptions {
    /// Stop when the largest absolute score component is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Coefficients held at a given value instead of being estimated.
    pub fixed: Vec<(usize, f64)>,
}

impl Default for CoxOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 50,
            fixed: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxFit {
    pub beta: Vec<f64>,
    /// Breslow baseline; pooled over strata when the fit is stratified.
    pub baseline: StepFunction,
    pub strata_baselines: Option<BTreeMap<String, StepFunction>>,
    pub converged: bool,
    pub iterations: usize,
    pub loglik: f64,
    /// Log partial likelihood at the starting point (free coefficients at zero).
    pub loglik_null: f64,
    pub max_gradient: f64,
}

impl CoxFit {
    pub fn linear_predictor(&self, z: &[f64]) -> f64 {
        self.beta.iter().zip(z).map(|(b, x)| b * x).sum()
    }

    /// Baseline for a stratum; unseen strata fall back to the pooled one.
    pub fn baseline_for(&self, stratum: Option<&str>) -> &StepFunction {
        match (&self.strata_baselines, stratum) {
            (Some(map), Some(key)) => map.get(key).unwrap_or(&self.baseline),
            _ => &self.baseline,
        }
    }
}

struct RiskSets {
    key: Option<String>,
    by_stop_desc: Vec<usize>,
    by_start_desc: Vec<usize>,
    /// Distinct event times, descending, with the rows failing at each.
    events_desc: Vec<(f64, Vec<usize>)>,
}

struct Prepared<'a> {
    rows: &'a [CountingRow],
    p: usize,
    /// Row-major centred covariates.
    z: Vec<f64>,
    means: Vec<f64>,
    strata: Vec<RiskSets>,
    pooled: Option<RiskSets>,
}

fn risk_sets(rows: &[CountingRow], members: Vec<usize>, target: EventTarget, key: Option<String>) -> RiskSets {
    let mut by_stop_desc = members.clone();
    by_stop_desc.sort_by(|&a, &b| rows[b].stop.total_cmp(&rows[a].stop));
    let mut by_start_desc = members.clone();
    by_start_desc.sort_by(|&a, &b| rows[b].start.total_cmp(&rows[a].start));
    let mut failing: Vec<usize> = members
        .into_iter()
        .filter(|&i| target.is_hit(rows[i].status))
        .collect();
    failing.sort_by(|&a, &b| rows[b].stop.total_cmp(&rows[a].stop));
    let mut events_desc: Vec<(f64, Vec<usize>)> = Vec::new();
    for i in failing {
        match events_desc.last_mut() {
            Some((t, list)) if *t == rows[i].stop => list.push(i),
            _ => events_desc.push((rows[i].stop, vec![i])),
        }
    }
    RiskSets {
        key,
        by_stop_desc,
        by_start_desc,
        events_desc,
    }
}

impl<'a> Prepared<'a> {
    fn new(rows: &'a [CountingRow], target: EventTarget) -> Result<Self> {
        let p = rows.first().map_or(0, |r| r.covariates.len());
        if rows.iter().any(|r| r.covariates.len() != p) {
            return Err(Error::InvalidInput("rows have differing covariate widths".into()));
        }
        if rows.iter().any(|r| !(r.start < r.stop)) {
            return Err(Error::InvalidInput("counting row with start >= stop".into()));
        }
        let n = rows.len().max(1) as f64;
        let mut means = vec![0.0; p];
        for r in rows {
            for (m, x) in means.iter_mut().zip(&r.covariates) {
                *m += x / n;
            }
        }
        let mut z = Vec::with_capacity(rows.len() * p);
        for r in rows {
            z.extend(r.covariates.iter().zip(&means).map(|(x, m)| x - m));
        }
        let mut groups: BTreeMap<Option<String>, Vec<usize>> = BTreeMap::new();
        for (i, r) in rows.iter().enumerate() {
            groups.entry(r.stratum.clone()).or_default().push(i);
        }
        let stratified = groups.keys().any(Option::is_some);
        let strata: Vec<RiskSets> = groups
            .into_iter()
            .map(|(k, m)| risk_sets(rows, m, target, k))
            .collect();
        if strata.iter().all(|s| s.events_desc.is_empty()) {
            return Err(Error::NoEvents);
        }
        let pooled = stratified.then(|| risk_sets(rows, (0..rows.len()).collect(), target, None));
        Ok(Self {
            rows,
            p,
            z,
            means,
            strata,
            pooled,
        })
    }

    fn zrow(&self, i: usize) -> &[f64] {
        &self.z[i * self.p..(i + 1) * self.p]
    }

    fn centred_eta(&self, beta: &[f64]) -> Vec<f64> {
        (0..self.rows.len())
            .map(|i| self.zrow(i).iter().zip(beta).map(|(z, b)| z * b).sum())
            .collect()
    }

    /// Log partial likelihood with its gradient and Hessian.
    fn evaluate(&self, beta: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let p = self.p;
        let eta = self.centred_eta(beta);
        let w: Vec<f64> = eta.iter().map(|e| e.exp()).collect();
        let mut ll = 0.0;
        let mut grad = vec![0.0; p];
        let mut hess = vec![0.0; p * p];
        let mut s1 = vec![0.0; p];
        let mut s2 = vec![0.0; p * p];
        for rs in &self.strata {
            let mut s0 = 0.0;
            s1.iter_mut().for_each(|v| *v = 0.0);
            s2.iter_mut().for_each(|v| *v = 0.0);
            let (mut add, mut rem) = (0, 0);
            for (t, failing) in &rs.events_desc {
                while add < rs.by_stop_desc.len() && self.rows[rs.by_stop_desc[add]].stop >= *t {
                    let i = rs.by_stop_desc[add];
                    accumulate(self.zrow(i), w[i], &mut s0, &mut s1, &mut s2);
                    add += 1;
                }
                while rem < rs.by_start_desc.len() && self.rows[rs.by_start_desc[rem]].start >= *t {
                    let i = rs.by_start_desc[rem];
                    accumulate(self.zrow(i), -w[i], &mut s0, &mut s1, &mut s2);
                    rem += 1;
                }
                let d = failing.len() as f64;
                ll += failing.iter().map(|&i| eta[i]).sum::<f64>() - d * s0.ln();
                for a in 0..p {
                    let mean_a = s1[a] / s0;
                    grad[a] += failing.iter().map(|&i| self.zrow(i)[a]).sum::<f64>() - d * mean_a;
                    for b in 0..p {
                        hess[a * p + b] -= d * (s2[a * p + b] / s0 - mean_a * s1[b] / s0);
                    }
                }
            }
        }
        (ll, grad, hess)
    }

    /// Breslow increments `d_k / Σ_{risk} exp(x'β)` for one set of risk sets.
    fn breslow(&self, rs: &RiskSets, beta: &[f64]) -> StepFunction {
        let eta = self.centred_eta(beta);
        let shift: f64 = self.means.iter().zip(beta).map(|(m, b)| m * b).sum();
        let scale = shift.exp();
        let mut incs = Vec::with_capacity(rs.events_desc.len());
        let mut s0 = 0.0;
        let (mut add, mut rem) = (0, 0);
        for (t, failing) in &rs.events_desc {
            while add < rs.by_stop_desc.len() && self.rows[rs.by_stop_desc[add]].stop >= *t {
                s0 += eta[rs.by_stop_desc[add]].exp();
                add += 1;
            }
            while rem < rs.by_start_desc.len() && self.rows[rs.by_start_desc[rem]].start >= *t {
                s0 -= eta[rs.by_start_desc[rem]].exp();
                rem += 1;
            }
            incs.push((*t, failing.len() as f64 / (scale * s0)));
        }
        incs.reverse();
        let mut jumps = Vec::with_capacity(incs.len());
        let mut values = Vec::with_capacity(incs.len());
        let mut level = 0.0;
        for (t, d) in incs {
            level += d;
            jumps.push(t);
            values.push(level);
        }
        StepFunction::new(jumps, values, 0.0).expect("distinct event times")
    }
}

fn accumulate(z: &[f64], w: f64, s0: &mut f64, s1: &mut [f64], s2: &mut [f64]) {
    let p = z.len();
    *s0 += w;
    for a in 0..p {
        let wa = w * z[a];
        s1[a] += wa;
        for b in 0..p {
            s2[a * p + b] += wa * z[b];
        }
    }
}

/// Log partial likelihood at an arbitrary coefficient vector.
pub fn cox_log_partial_likelihood(
    rows: &[CountingRow],
    target: EventTarget,
    beta: &[f64],
) -> Result<f64> {
    let prep = Prepared::new(rows, target)?;
    if beta.len() != prep.p {
        return Err(Error::CovariateMismatch {
            expected: prep.p,
            got: beta.len(),
        });
    }
    Ok(prep.evaluate(beta).0)
}

pub fn fit_cox(rows: &[CountingRow], target: EventTarget, options: &CoxOptions) -> Result<CoxFit> {
    let prep = Prepared::new(rows, target)?;
    let p = prep.p;
    let mut beta = vec![0.0; p];
    let mut is_free = vec![true; p];
    for &(j, v) in &options.fixed {
        if j >= p {
            return Err(Error::InvalidInput(format!("fixed coefficient index {j} out of range")));
        }
        beta[j] = v;
        is_free[j] = false;
    }
    let free: Vec<usize> = (0..p).filter(|&j| is_free[j]).collect();
    let k = free.len();

    let (mut ll, mut grad, mut hess) = prep.evaluate(&beta);
    let loglik_null = ll;
    let max_abs = |g: &[f64]| free.iter().fold(0.0f64, |m, &j| m.max(g[j].abs()));
    let information = |h: &[f64]| DMatrix::from_fn(k, k, |a, b| -h[free[a] * p + free[b]]);

    let mut iterations = 0;
    let mut converged = max_abs(&grad) <= options.tolerance;
    while !converged && iterations < options.max_iterations {
        iterations += 1;
        let info = information(&hess);
        let score = DVector::from_fn(k, |a, _| grad[free[a]]);
        let step = solve_spd(&info, &score).ok_or_else(|| {
            Error::Singular(format!("information matrix rank deficient at iteration {iterations}"))
        })?;
        let mut factor = 1.0;
        let accepted = loop {
            let mut trial = beta.clone();
            for (a, &j) in free.iter().enumerate() {
                trial[j] += factor * step[a];
            }
            let (tll, tg, th) = prep.evaluate(&trial);
            if tll.is_finite() && tll >= ll - 1e-13 * ll.abs().max(1.0) {
                break Some((trial, tll, tg, th));
            }
            factor *= 0.5;
            if factor < 1e-10 {
                break None;
            }
        };
        match accepted {
            Some((b, l, g, h)) => {
                beta = b;
                ll = l;
                grad = g;
                hess = h;
            }
            None => break,
        }
        converged = max_abs(&grad) <= options.tolerance;
    }
    let max_gradient = max_abs(&grad);

    if k > 0 {
        check_monotone_likelihood(&beta, &free, &information(&hess), max_gradient, iterations)?;
    }
    if !converged && max_gradient > 1e-4 {
        return Err(Error::NonConvergence {
            iterations,
            max_gradient,
            detail: "iteration limit reached or line search stalled".into(),
        });
    }

    let (baseline, strata_baselines) = match &prep.pooled {
        None => (prep.breslow(&prep.strata[0], &beta), None),
        Some(pooled) => {
            let map = prep
                .strata
                .iter()
                .map(|rs| {
                    let key = rs.key.clone().unwrap_or_default();
                    (key, prep.breslow(rs, &beta))
                })
                .collect();
            (prep.breslow(pooled, &beta), Some(map))
        }
    };
    Ok(CoxFit {
        beta,
        baseline,
        strata_baselines,
        converged,
        iterations,
        loglik: ll,
        loglik_null,
        max_gradient,
    })
}

/// A coefficient whose standard error exceeds its (large) magnitude sits on
/// a likelihood that keeps increasing towards infinity.
fn check_monotone_likelihood(
    beta: &[f64],
    free: &[usize],
    info: &DMatrix<f64>,
    max_gradient: f64,
    iterations: usize,
) -> Result<()> {
    let inverse = info.clone().try_inverse();
    for (a, &j) in free.iter().enumerate() {
        let b = beta[j].abs();
        let se = inverse
            .as_ref()
            .map(|m| m[(a, a)])
            .filter(|v| *v > 0.0 && v.is_finite())
            .map(f64::sqrt);
        let diverging = b > 30.0 || (b > 5.0 && se.map_or(true, |s| s > b));
        if diverging {
            return Err(Error::NonConvergence {
                iterations,
                max_gradient,
                detail: format!("monotone likelihood: coefficient {j} diverging (beta = {:.2})", beta[j]),
            });
        }
    }
    Ok(())
}
