//! Ground truth for the simulation designs: the true mean function, the
//! closed-form inseparability term, the single-event offset between the
//! criterion and the Brier score, and Monte-Carlo versions of the
//! theoretical criterion computed with the true censoring law.

use rand::Rng;
use rand_distr::{Distribution, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{ModelKind, PredictionModel, SurvivalModel};
use crate::simulation::{
    sample_nhpp_cox_weibull, subject_rng, CovariateLaw, RcScenarioParams, SingleEventParams,
    TerminalScenarioParams,
};

/// Adaptive Simpson quadrature to a relative tolerance.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    if !(b > a) {
        return 0.0;
    }
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // coarse pass on 16 panels to set the absolute target
    let coarse: f64 = (0..16)
        .map(|k| {
            let lo = a + (b - a) * k as f64 / 16.0;
            let hi = a + (b - a) * (k + 1) as f64 / 16.0;
            let mid = 0.5 * (lo + hi);
            (hi - lo) / 6.0 * (f(lo) + 4.0 * f(mid) + f(hi))
        })
        .sum();
    let tol = (rel_tol * coarse.abs().max(whole.abs())).max(1e-300);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, 60)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Mean and standard error of a Monte-Carlo average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl McEstimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len();
        let mean = values.iter().sum::<f64>() / n as f64;
        let var = if n > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
        } else {
            0.0
        };
        Self {
            mean,
            se: (var / n as f64).sqrt(),
            n,
        }
    }
}

/// Parameters of either simulation design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioParams {
    Rc(RcScenarioParams),
    Terminal(TerminalScenarioParams),
}

impl ScenarioParams {
    fn recurrent(&self) -> &RcScenarioParams {
        match self {
            ScenarioParams::Rc(p) => p,
            ScenarioParams::Terminal(p) => &p.recurrent,
        }
    }

    pub fn censor_upper(&self) -> f64 {
        self.recurrent().censor_upper
    }
}

/// `μ*(t | x)`: `(t/β)^α exp(θ'x)` without a terminal event, and
/// `∫_0^t S(u|x) λ*(u|x) du` with one.
pub fn true_mu_star(t: f64, x: &[f64], params: &ScenarioParams) -> f64 {
    match params {
        ScenarioParams::Rc(p) => p.cumulative_rate(t.max(0.0), x),
        ScenarioParams::Terminal(p) => terminal_mu_between(0.0, t, x, p),
    }
}

fn terminal_mu_between(a: f64, b: f64, x: &[f64], p: &TerminalScenarioParams) -> f64 {
    integrate(&|u| p.survival(u, x) * p.recurrent.rate(u, x), a, b, 1e-10)
}

/// `E[exp(θ'X)]` and `E[exp(2θ'X)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateMoments {
    pub e1: f64,
    pub e2: f64,
}

impl CovariateMoments {
    pub fn exact(law: &CovariateLaw, theta: &[f64]) -> Self {
        Self {
            e1: law.exp_moment(theta, 1.0),
            e2: law.exp_moment(theta, 2.0),
        }
    }

    pub fn monte_carlo(law: &CovariateLaw, theta: &[f64], samples: usize, seed: u64) -> Result<Self> {
        if samples < 1000 {
            return Err(Error::InvalidInput("at least 1000 Monte-Carlo samples required".into()));
        }
        let mut rng = subject_rng(seed, u64::MAX);
        let (mut s1, mut s2) = (0.0, 0.0);
        for _ in 0..samples {
            let x = law.sample(&mut rng);
            let lp: f64 = theta.iter().zip(&x).map(|(a, b)| a * b).sum();
            s1 += lp.exp();
            s2 += (2.0 * lp).exp();
        }
        Ok(Self {
            e1: s1 / samples as f64,
            e2: s2 / samples as f64,
        })
    }
}

/// The three parts of the inseparability term, `A = A1 + A2 - A3`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inseparability {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl Inseparability {
    pub fn value(&self) -> f64 {
        self.a1 + self.a2 - self.a3
    }
}

/// Closed-form inseparability term for Weibull shape 2 and uniform
/// censoring on `[0, γ]`, valid for `0 <= t < γ`.
pub fn inseparability_a(t: f64, params: &RcScenarioParams, moments: &CovariateMoments) -> Result<Inseparability> {
    let g = params.censor_upper;
    if !(t >= 0.0 && t < g) {
        return Err(Error::Domain(format!("inseparability term needs 0 <= t < {g}, got {t}")));
    }
    if params.shape != 2.0 {
        return Err(Error::Domain("the closed form assumes Weibull shape 2".into()));
    }
    let b = params.scale;
    let lg = g.ln();
    let a1 = 8.0 * g / b.powi(4)
        * (g * t * t / 2.0 * lg - g / 2.0 * (t * t - g * g) * (g - t).ln() + g * g * t / 2.0 + g * t * t / 4.0
            - g.powi(3) / 2.0 * lg
            - t.powi(3) / 3.0)
        * moments.e2;
    let a2 = 2.0 * g / (b * b) * (g * (g / (g - t)).ln() - t) * moments.e1;
    let a3 = (t / b).powf(2.0 * params.shape) * moments.e2;
    let out = Inseparability { a1, a2, a3 };
    debug_assert!(out.value() >= -1e-9 * a1.abs().max(1.0));
    Ok(out)
}

/// The true mean function as a prediction model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleModel {
    pub params: ScenarioParams,
}

impl PredictionModel for OracleModel {
    fn kind(&self) -> ModelKind {
        ModelKind::External
    }

    fn label(&self) -> &str {
        "oracle"
    }

    fn n_covariates(&self) -> Option<usize> {
        Some(2)
    }

    fn predict_curve(&self, x: &[f64], times: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 2 {
            return Err(Error::CovariateMismatch { expected: 2, got: x.len() });
        }
        Ok(match &self.params {
            ScenarioParams::Rc(p) => times.iter().map(|&t| p.cumulative_rate(t.max(0.0), x)).collect(),
            ScenarioParams::Terminal(p) => {
                let mut level = 0.0;
                let mut prev = 0.0;
                times
                    .iter()
                    .map(|&t| {
                        level += terminal_mu_between(prev, t.max(prev), x, p);
                        prev = t.max(prev);
                        level
                    })
                    .collect()
            }
        })
    }
}

/// `(1/n) Σ_i (μ*(t | X_i) - μ̂(t | X_i))²`.
pub fn imprecision(
    covariates: &[Vec<f64>],
    m: &dyn PredictionModel,
    params: &ScenarioParams,
    t: f64,
) -> Result<f64> {
    let sq: Vec<f64> = covariates
        .par_iter()
        .map(|x| Ok((true_mu_star(t, x, params) - m.predict(t, x)?).powi(2)))
        .collect::<Result<_>>()?;
    Ok(sq.iter().sum::<f64>() / covariates.len() as f64)
}

/// One fresh subject: covariates, censoring time and observed events.
fn fresh_subject(params: &ScenarioParams, seed: u64, i: usize) -> (Vec<f64>, f64, Vec<f64>) {
    let mut rng = subject_rng(seed, i as u64);
    let rec = params.recurrent();
    let x = rec.covariates.sample(&mut rng);
    let c = Uniform::new_inclusive(0.0, rec.censor_upper)
        .expect("positive bound")
        .sample(&mut rng);
    let end = match params {
        ScenarioParams::Rc(_) => c,
        ScenarioParams::Terminal(p) => {
            let u: f64 = 1.0 - rng.random::<f64>();
            let lp: f64 = p.terminal_theta.iter().zip(&x).map(|(a, b)| a * b).sum();
            let t_star = p.terminal_scale * (-u.ln() * (-lp).exp()).powf(1.0 / p.terminal_shape);
            t_star.min(c)
        }
    };
    let events = sample_nhpp_cox_weibull(&x, rec, end, &mut rng);
    (x, c, events)
}

/// `Σ_{e <= t} 1 / (1 - G(e-))` under the true uniform censoring law.
fn true_weighted_count(events: &[f64], t: f64, gamma: f64) -> f64 {
    events
        .iter()
        .take_while(|&&e| e <= t)
        .map(|&e| 1.0 / (1.0 - e / gamma))
        .sum()
}

/// Theoretical criterion `E[(∫_0^t dN/(1 - G(u-)) - μ̂(t | X))²]` estimated
/// on `n_mc` fresh subjects with the true `G`.
pub fn theoretical_mse_mc(
    t: f64,
    m: &dyn PredictionModel,
    params: &ScenarioParams,
    n_mc: usize,
    seed: u64,
) -> Result<McEstimate> {
    let gamma = params.censor_upper();
    if !(t >= 0.0 && t < gamma) {
        return Err(Error::Domain(format!("t must lie in [0, {gamma})")));
    }
    let values: Vec<f64> = (0..n_mc)
        .into_par_iter()
        .map(|i| {
            let (x, _, events) = fresh_subject(params, seed, i);
            Ok((true_weighted_count(&events, t, gamma) - m.predict(t, &x)?).powi(2))
        })
        .collect::<Result<_>>()?;
    Ok(McEstimate::from_samples(&values))
}

/// Direct Monte-Carlo of the inseparability term,
/// `E[(∫_0^t dN/(1 - G(u-)))²] - E[μ*(t | X)²]`.
pub fn inseparability_a_mc(t: f64, params: &RcScenarioParams, n_mc: usize, seed: u64) -> Result<McEstimate> {
    let gamma = params.censor_upper;
    if !(t >= 0.0 && t < gamma) {
        return Err(Error::Domain(format!("t must lie in [0, {gamma})")));
    }
    let sp = ScenarioParams::Rc(params.clone());
    let values: Vec<f64> = (0..n_mc)
        .into_par_iter()
        .map(|i| {
            let (x, _, events) = fresh_subject(&sp, seed, i);
            true_weighted_count(&events, t, gamma).powi(2) - params.cumulative_rate(t, &x).powi(2)
        })
        .collect();
    Ok(McEstimate::from_samples(&values))
}

fn uniform_cdf(u: f64, upper: f64) -> f64 {
    if upper.is_infinite() {
        0.0
    } else {
        (u / upper).clamp(0.0, 1.0)
    }
}

/// `B(t) = E[∫_0^t G(u-)/(1 - G(u-)) S(u|X) λ(u|X) du]` for the single-event
/// design, by quadrature in `u` and Monte-Carlo over `X`.
pub fn brier_offset_b(t: f64, params: &SingleEventParams, n_mc: usize, seed: u64) -> Result<McEstimate> {
    let gamma = params.censor_upper;
    if !(t >= 0.0 && t < gamma) {
        return Err(Error::Domain(format!("t must lie in [0, {gamma})")));
    }
    let values: Vec<f64> = (0..n_mc)
        .into_par_iter()
        .map(|i| {
            let mut rng = subject_rng(seed, i as u64);
            let x = params.covariates.sample(&mut rng);
            let f = |u: f64| {
                let g = uniform_cdf(u, gamma);
                g / (1.0 - g) * params.survival(u, &x) * params.hazard(u, &x)
            };
            integrate(&f, 0.0, t, 1e-8)
        })
        .collect();
    let est = McEstimate::from_samples(&values);
    debug_assert!(est.mean >= 0.0);
    Ok(est)
}

/// Theoretical single-event criterion with `μ̂ = 1 - π̂`, the theoretical
/// Brier score of `π̂`, and their per-subject difference.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleEventCriteria {
    pub mse_prime: McEstimate,
    pub brier: McEstimate,
    pub difference: McEstimate,
}

pub fn single_event_criteria_mc(
    t: f64,
    pi: &dyn SurvivalModel,
    params: &SingleEventParams,
    n_mc: usize,
    seed: u64,
) -> Result<SingleEventCriteria> {
    let gamma = params.censor_upper;
    if !(t >= 0.0 && t < gamma) {
        return Err(Error::Domain(format!("t must lie in [0, {gamma})")));
    }
    let rows: Vec<(f64, f64)> = (0..n_mc)
        .into_par_iter()
        .map(|i| {
            let mut rng = subject_rng(seed, i as u64);
            let x = params.covariates.sample(&mut rng);
            let c = if gamma.is_infinite() {
                f64::INFINITY
            } else {
                Uniform::new_inclusive(0.0, gamma).expect("positive bound").sample(&mut rng)
            };
            let u: f64 = 1.0 - rng.random::<f64>();
            let lp: f64 = params.theta.iter().zip(&x).map(|(a, b)| a * b).sum();
            let t_true = params.scale * (-u.ln() * (-lp).exp()).powf(1.0 / params.shape);
            let observed = t_true <= c;
            let t_obs = t_true.min(c);
            let s_hat = pi.survival_curve(&x, &[t])?[0];
            let w_event = 1.0 / (1.0 - uniform_cdf(t_true, gamma));
            let count = if observed && t_obs <= t { w_event } else { 0.0 };
            let mse_prime = (count - (1.0 - s_hat)).powi(2);
            let brier = if t_obs > t {
                (1.0 - s_hat).powi(2) / (1.0 - uniform_cdf(t, gamma))
            } else if observed {
                w_event * s_hat * s_hat
            } else {
                0.0
            };
            Ok((mse_prime, brier))
        })
        .collect::<Result<_>>()?;
    let a: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let b: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let d: Vec<f64> = rows.iter().map(|r| r.0 - r.1).collect();
    Ok(SingleEventCriteria {
        mse_prime: McEstimate::from_samples(&a),
        brier: McEstimate::from_samples(&b),
        difference: McEstimate::from_samples(&d),
    })
}
