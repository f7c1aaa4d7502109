//! Seeded generators for the two simulation designs and a single-event
//! design.
//!
//! Every subject draws from its own ChaCha8 stream (`seed`, stream = subject
//! index), so a dataset does not depend on generation order and can be
//! produced in parallel.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Bernoulli, Distribution, Exp1, Normal, Uniform};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dataset, EndReason, Scenario, Subject};

/// Law of the covariate vector `X = (X1, X2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovariateLaw {
    pub bernoulli_p: f64,
    pub normal_mean: f64,
    pub normal_sd: f64,
}

impl Default for CovariateLaw {
    fn default() -> Self {
        Self {
            bernoulli_p: 0.5,
            normal_mean: 2.0,
            normal_sd: 0.5,
        }
    }
}

impl CovariateLaw {
    pub fn names() -> Vec<String> {
        vec!["x1".into(), "x2".into()]
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let b = Bernoulli::new(self.bernoulli_p).expect("probability in [0, 1]");
        let x1 = if b.sample(rng) { 1.0 } else { 0.0 };
        let x2 = Normal::new(self.normal_mean, self.normal_sd)
            .expect("finite sd")
            .sample(rng);
        vec![x1, x2]
    }

    /// Exact `E[exp(k θ'X)]` (Bernoulli times lognormal moments).
    pub fn exp_moment(&self, theta: &[f64], k: f64) -> f64 {
        let a = k * theta[0];
        let b = k * theta[1];
        let bern = 1.0 - self.bernoulli_p + self.bernoulli_p * a.exp();
        let norm = (b * self.normal_mean + 0.5 * b * b * self.normal_sd * self.normal_sd).exp();
        bern * norm
    }

    fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.bernoulli_p) || !(self.normal_sd >= 0.0) {
            return Err(Error::InvalidInput("invalid covariate law".into()));
        }
        Ok(())
    }
}

/// Recurrent events from a Weibull-Cox NHPP, `Λ(t|x) = (t/β)^α exp(θ'x)`,
/// censored by `C ~ Uniform[0, censor_upper]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RcScenarioParams {
    pub shape: f64,
    pub scale: f64,
    pub theta: Vec<f64>,
    pub censor_upper: f64,
    pub covariates: CovariateLaw,
}

impl Default for RcScenarioParams {
    fn default() -> Self {
        Self {
            shape: 2.0,
            scale: 0.39,
            theta: vec![2f64.ln(), 0.5f64.ln()],
            censor_upper: 3.0,
            covariates: CovariateLaw::default(),
        }
    }
}

impl RcScenarioParams {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.theta.iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// `Λ(t | x)`.
    pub fn cumulative_rate(&self, t: f64, x: &[f64]) -> f64 {
        (t / self.scale).powf(self.shape) * self.linear_predictor(x).exp()
    }

    /// `λ(t | x)`.
    pub fn rate(&self, t: f64, x: &[f64]) -> f64 {
        self.shape / self.scale * (t / self.scale).powf(self.shape - 1.0) * self.linear_predictor(x).exp()
    }

    fn check(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.scale > 0.0 && self.censor_upper > 0.0) {
            return Err(Error::InvalidInput("shape, scale and censor_upper must be positive".into()));
        }
        if self.theta.len() != 2 {
            return Err(Error::InvalidInput("theta must have one entry per covariate".into()));
        }
        self.covariates.check()
    }
}

/// Adds a Weibull-Cox terminal event `S(t|x) = exp(-(t/scale)^shape exp(θ'x))`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalScenarioParams {
    pub recurrent: RcScenarioParams,
    pub terminal_shape: f64,
    pub terminal_scale: f64,
    pub terminal_theta: Vec<f64>,
}

impl Default for TerminalScenarioParams {
    fn default() -> Self {
        Self {
            recurrent: RcScenarioParams {
                censor_upper: 8.0,
                ..RcScenarioParams::default()
            },
            terminal_shape: 5.0,
            terminal_scale: 1.8,
            terminal_theta: vec![2f64.ln(), 0.5f64.ln()],
        }
    }
}

impl TerminalScenarioParams {
    pub fn terminal_cumulative_hazard(&self, t: f64, x: &[f64]) -> f64 {
        let lp: f64 = self.terminal_theta.iter().zip(x).map(|(a, b)| a * b).sum();
        (t / self.terminal_scale).powf(self.terminal_shape) * lp.exp()
    }

    pub fn survival(&self, t: f64, x: &[f64]) -> f64 {
        (-self.terminal_cumulative_hazard(t, x)).exp()
    }

    fn check(&self) -> Result<()> {
        self.recurrent.check()?;
        if !(self.terminal_shape > 0.0 && self.terminal_scale > 0.0) || self.terminal_theta.len() != 2 {
            return Err(Error::InvalidInput("invalid terminal-event parameters".into()));
        }
        Ok(())
    }
}

/// One Weibull-Cox event time per subject, censored by a uniform `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingleEventParams {
    pub shape: f64,
    pub scale: f64,
    pub theta: Vec<f64>,
    pub censor_upper: f64,
    pub covariates: CovariateLaw,
}

impl Default for SingleEventParams {
    fn default() -> Self {
        Self {
            shape: 2.0,
            scale: 1.5,
            theta: vec![2f64.ln(), 0.5f64.ln()],
            censor_upper: 4.0,
            covariates: CovariateLaw::default(),
        }
    }
}

impl SingleEventParams {
    pub fn cumulative_hazard(&self, t: f64, x: &[f64]) -> f64 {
        let lp: f64 = self.theta.iter().zip(x).map(|(a, b)| a * b).sum();
        (t / self.scale).powf(self.shape) * lp.exp()
    }

    pub fn hazard(&self, t: f64, x: &[f64]) -> f64 {
        let lp: f64 = self.theta.iter().zip(x).map(|(a, b)| a * b).sum();
        self.shape / self.scale * (t / self.scale).powf(self.shape - 1.0) * lp.exp()
    }

    pub fn survival(&self, t: f64, x: &[f64]) -> f64 {
        (-self.cumulative_hazard(t, x)).exp()
    }
}

/// SplitMix64 mix of a master seed and an index, for replicate seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master
        .wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The generator used for subject `index` of a dataset seeded with `seed`.
pub fn subject_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn sample_covariates(n: usize, law: &CovariateLaw, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n).map(|_| law.sample(rng)).collect()
}

/// Event times on `[0, horizon]` by time-transforming a unit-rate Poisson
/// stream through `Λ^{-1}(u|x) = β (u exp(-θ'x))^{1/α}`.
pub fn sample_nhpp_cox_weibull(
    x: &[f64],
    params: &RcScenarioParams,
    horizon: f64,
    rng: &mut impl Rng,
) -> Vec<f64> {
    let scale = (-params.linear_predictor(x)).exp();
    let mut times = Vec::new();
    let mut u = 0.0;
    loop {
        let gap: f64 = Exp1.sample(rng);
        u += gap;
        let t = params.scale * (u * scale).powf(1.0 / params.shape);
        if !(t <= horizon) {
            break;
        }
        // inversion can repeat a time only through rounding; keep times strictly increasing
        if times.last().is_none_or(|&last| t > last) && t > 0.0 {
            times.push(t);
        }
    }
    times
}

fn rc_subject(i: usize, params: &RcScenarioParams, seed: u64) -> Subject {
    let mut rng = subject_rng(seed, i as u64);
    let x = params.covariates.sample(&mut rng);
    let c = Uniform::new_inclusive(0.0, params.censor_upper)
        .expect("positive bound")
        .sample(&mut rng);
    let events = sample_nhpp_cox_weibull(&x, params, c, &mut rng);
    Subject::new(format!("{}", i + 1), events, c, EndReason::Censored, x)
}

fn terminal_subject(i: usize, params: &TerminalScenarioParams, seed: u64) -> Subject {
    let mut rng = subject_rng(seed, i as u64);
    let rec = &params.recurrent;
    let x = rec.covariates.sample(&mut rng);
    let c = Uniform::new_inclusive(0.0, rec.censor_upper)
        .expect("positive bound")
        .sample(&mut rng);
    let u: f64 = 1.0 - rng.random::<f64>();
    let lp: f64 = params.terminal_theta.iter().zip(&x).map(|(a, b)| a * b).sum();
    let t_star = params.terminal_scale * (-u.ln() * (-lp).exp()).powf(1.0 / params.terminal_shape);
    let (end, reason) = if t_star <= c {
        (t_star, EndReason::Terminal)
    } else {
        (c, EndReason::Censored)
    };
    let mut events = sample_nhpp_cox_weibull(&x, rec, end, &mut rng);
    if reason == EndReason::Terminal {
        events.retain(|&e| e < end);
    }
    Subject::new(format!("{}", i + 1), events, end, reason, x)
}

fn single_event_subject(i: usize, params: &SingleEventParams, seed: u64) -> Subject {
    let mut rng = subject_rng(seed, i as u64);
    let x = params.covariates.sample(&mut rng);
    let c = Uniform::new_inclusive(0.0, params.censor_upper)
        .expect("positive bound")
        .sample(&mut rng);
    let u: f64 = 1.0 - rng.random::<f64>();
    let lp: f64 = params.theta.iter().zip(&x).map(|(a, b)| a * b).sum();
    let t = params.scale * (-u.ln() * (-lp).exp()).powf(1.0 / params.shape);
    if t <= c && t > 0.0 {
        Subject::new(format!("{}", i + 1), vec![t], t, EndReason::Terminal, x)
    } else {
        Subject::new(format!("{}", i + 1), Vec::new(), c, EndReason::Censored, x)
    }
}

pub fn simulate_rc_scenario(n: usize, params: &RcScenarioParams, seed: u64) -> Result<Dataset> {
    params.check()?;
    let subjects = (0..n).into_par_iter().map(|i| rc_subject(i, params, seed)).collect();
    Ok(Dataset::new(subjects, Scenario::RcOnly, CovariateLaw::names(), params.censor_upper))
}

pub fn simulate_terminal_scenario(n: usize, params: &TerminalScenarioParams, seed: u64) -> Result<Dataset> {
    params.check()?;
    let subjects = (0..n)
        .into_par_iter()
        .map(|i| terminal_subject(i, params, seed))
        .collect();
    Ok(Dataset::new(
        subjects,
        Scenario::WithTerminal,
        CovariateLaw::names(),
        params.recurrent.censor_upper,
    ))
}

/// Single-event data encoded as a terminal-event dataset whose only
/// recurrent event, when observed, coincides with the terminal time.
pub fn simulate_single_event(n: usize, params: &SingleEventParams, seed: u64) -> Result<Dataset> {
    if !(params.shape > 0.0 && params.scale > 0.0 && params.censor_upper > 0.0) || params.theta.len() != 2 {
        return Err(Error::InvalidInput("invalid single-event parameters".into()));
    }
    params.covariates.check()?;
    let subjects = (0..n)
        .into_par_iter()
        .map(|i| single_event_subject(i, params, seed))
        .collect();
    Ok(Dataset::new(
        subjects,
        Scenario::WithTerminal,
        CovariateLaw::names(),
        params.censor_upper,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::validate_dataset;

    #[test]
    fn covariates_are_reproducible_and_centred() {
        let law = CovariateLaw::default();
        let a = sample_covariates(20_000, &law, &mut ChaCha8Rng::seed_from_u64(3));
        let b = sample_covariates(20_000, &law, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
        let n = a.len() as f64;
        let m1 = a.iter().map(|x| x[0]).sum::<f64>() / n;
        let m2 = a.iter().map(|x| x[1]).sum::<f64>() / n;
        assert!(a.iter().all(|x| x[0] == 0.0 || x[0] == 1.0));
        assert!((m1 - 0.5).abs() <= 3.0 / (2.0 * n.sqrt()));
        assert!((m2 - 2.0).abs() <= 3.0 * 0.5 / n.sqrt());
    }

    #[test]
    fn exact_moments_match_sampling() {
        let law = CovariateLaw::default();
        let theta = [2f64.ln(), 0.5f64.ln()];
        let xs = sample_covariates(200_000, &law, &mut ChaCha8Rng::seed_from_u64(11));
        let mc = xs
            .iter()
            .map(|x| (theta[0] * x[0] + theta[1] * x[1]).exp())
            .sum::<f64>()
            / xs.len() as f64;
        assert!((mc / law.exp_moment(&theta, 1.0) - 1.0).abs() < 0.01);
    }

    #[test]
    fn vanishing_rate_gives_no_events() {
        let params = RcScenarioParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            assert!(sample_nhpp_cox_weibull(&[0.0, 1e4], &params, 3.0, &mut rng).is_empty());
        }
    }

    #[test]
    fn mean_count_matches_cumulative_rate() {
        let params = RcScenarioParams::default();
        let x = [1.0, 2.0];
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let reps = 20_000;
        let counts: Vec<f64> = (0..reps)
            .map(|_| sample_nhpp_cox_weibull(&x, &params, 1.5, &mut rng).len() as f64)
            .collect();
        let mean = counts.iter().sum::<f64>() / reps as f64;
        let var = counts.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - params.cumulative_rate(1.5, &x)).abs() <= 3.0 * se);
    }

    #[test]
    fn time_transformed_gaps_are_unit_exponential() {
        let params = RcScenarioParams::default();
        let x = [0.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut gaps = Vec::new();
        while gaps.len() < 10_000 {
            // a long horizon so that the first 20 gaps are never truncated
            let ev = sample_nhpp_cox_weibull(&x, &params, 10.0, &mut rng);
            let mut prev = 0.0;
            for t in ev.into_iter().take(20) {
                let l = params.cumulative_rate(t, &x);
                gaps.push(l - prev);
                prev = l;
            }
        }
        gaps.truncate(10_000);
        gaps.sort_by(f64::total_cmp);
        let n = gaps.len() as f64;
        let d = gaps
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let f = 1.0 - (-g).exp();
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        // Kolmogorov-Smirnov critical value at level 0.01
        assert!(d < 1.628 / n.sqrt(), "D = {d}");
    }

    #[test]
    fn datasets_are_valid_and_deterministic() {
        let a = simulate_rc_scenario(300, &RcScenarioParams::default(), 1).unwrap();
        let b = simulate_rc_scenario(300, &RcScenarioParams::default(), 1).unwrap();
        assert_eq!(a, b);
        assert!(validate_dataset(&a).is_empty());
        let t = simulate_terminal_scenario(300, &TerminalScenarioParams::default(), 2).unwrap();
        assert!(validate_dataset(&t).is_empty());
        let s = simulate_single_event(300, &SingleEventParams::default(), 3).unwrap();
        assert!(validate_dataset(&s).is_empty());
        assert!(s.subjects.iter().all(|x| x.event_times.len() <= 1));
    }

    #[test]
    fn derived_seeds_differ() {
        let seeds: std::collections::HashSet<u64> = (0..1000).map(|i| derive_seed(42, i)).collect();
        assert_eq!(seeds.len(), 1000);
    }
}
