//! Right-continuous piecewise-constant functions.
//!
//! Every nonparametric estimate in the crate (censoring CDFs, cumulative
//! hazards, survival curves, reference predictors) is carried as a
//! [`StepFunction`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A right-continuous step function on `[0, ∞)`.
///
/// The function equals `value_at_zero` on `[0, t_1)` and `values[k]` on
/// `[t_k, t_{k+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    jump_times: Vec<f64>,
    values: Vec<f64>,
    value_at_zero: f64,
}

impl StepFunction {
    pub fn new(jump_times: Vec<f64>, values: Vec<f64>, value_at_zero: f64) -> Result<Self> {
        if jump_times.len() != values.len() {
            return Err(Error::InvalidInput(format!(
                "step function has {} jump times but {} values",
                jump_times.len(),
                values.len()
            )));
        }
        if jump_times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidInput(
                "step function jump times must be strictly increasing".into(),
            ));
        }
        if jump_times.first().is_some_and(|&t| t < 0.0) {
            return Err(Error::InvalidInput("step function jump at negative time".into()));
        }
        Ok(Self {
            jump_times,
            values,
            value_at_zero,
        })
    }

    /// Constant function.
    pub fn constant(value: f64) -> Self {
        Self {
            jump_times: Vec::new(),
            values: Vec::new(),
            value_at_zero: value,
        }
    }

    /// Builds a step function from `(time, increment)` pairs that may be
    /// unsorted and may repeat a time; tied increments are summed.
    pub fn from_increments(start: f64, mut increments: Vec<(f64, f64)>) -> Self {
        increments.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut jump_times: Vec<f64> = Vec::with_capacity(increments.len());
        let mut values: Vec<f64> = Vec::with_capacity(increments.len());
        let mut level = start;
        for (t, d) in increments {
            level += d;
            if jump_times.last() == Some(&t) {
                *values.last_mut().unwrap() = level;
            } else {
                jump_times.push(t);
                values.push(level);
            }
        }
        Self {
            jump_times,
            values,
            value_at_zero: start,
        }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at_zero(&self) -> f64 {
        self.value_at_zero
    }

    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    /// Number of jump times `<= t`.
    fn count_le(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s <= t)
    }

    /// Number of jump times `< t`.
    fn count_lt(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&s| s < t)
    }

    /// Right-continuous value `f(t)`.
    pub fn eval(&self, t: f64) -> f64 {
        match self.count_le(t) {
            0 => self.value_at_zero,
            k => self.values[k - 1],
        }
    }

    /// Left limit `f(t-)`; at `t = 0` this is `value_at_zero`.
    pub fn left_limit(&self, t: f64) -> Result<f64> {
        if t < 0.0 || t.is_nan() {
            return Err(Error::InvalidInput(format!("left limit requested at t = {t}")));
        }
        Ok(match self.count_lt(t) {
            0 => self.value_at_zero,
            k => self.values[k - 1],
        })
    }

    /// Left limit without the domain check, for internal hot loops where
    /// `t >= 0` is already guaranteed.
    pub(crate) fn left_limit_unchecked(&self, t: f64) -> f64 {
        match self.count_lt(t) {
            0 => self.value_at_zero,
            k => self.values[k - 1],
        }
    }

    /// Size of the jump at each jump time, `f(t_k) - f(t_k-)`.
    pub fn increments(&self) -> Vec<f64> {
        let mut prev = self.value_at_zero;
        self.values
            .iter()
            .map(|&v| {
                let d = v - prev;
                prev = v;
                d
            })
            .collect()
    }

    pub fn is_nondecreasing(&self) -> bool {
        let mut prev = self.value_at_zero;
        self.values.iter().all(|&v| {
            let ok = v >= prev;
            prev = v;
            ok
        })
    }

    pub fn is_nonincreasing(&self) -> bool {
        let mut prev = self.value_at_zero;
        self.values.iter().all(|&v| {
            let ok = v <= prev;
            prev = v;
            ok
        })
    }

    /// True when every value (including the value at zero) lies in `[0, 1]`.
    pub fn is_probability(&self) -> bool {
        std::iter::once(&self.value_at_zero)
            .chain(self.values.iter())
            .all(|&v| (0.0..=1.0).contains(&v))
    }

    /// Evaluates on a sorted grid in one merged pass.
    pub fn eval_sorted(&self, times: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(times.len());
        let mut k = 0;
        let mut current = self.value_at_zero;
        for &t in times {
            while k < self.jump_times.len() && self.jump_times[k] <= t {
                current = self.values[k];
                k += 1;
            }
            out.push(current);
        }
        out
    }

    /// Pointwise map of the values, keeping the jump grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            jump_times: self.jump_times.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
            value_at_zero: f(self.value_at_zero),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn jump_at_two() -> StepFunction {
        StepFunction::new(vec![2.0], vec![0.5], 0.0).unwrap()
    }

    #[test]
    fn left_limit_at_jump() {
        let f = jump_at_two();
        assert_eq!(f.left_limit(2.0).unwrap(), 0.0);
        assert_eq!(f.left_limit(2.1).unwrap(), 0.5);
        assert_eq!(f.eval(2.0), 0.5);
        assert_eq!(f.left_limit(0.0).unwrap(), 0.0);
    }

    #[test]
    fn left_limit_of_ecdf() {
        let f = StepFunction::new(vec![1.0, 2.0, 3.0], vec![1.0 / 3.0, 2.0 / 3.0, 1.0], 0.0)
            .unwrap();
        assert_eq!(f.left_limit(2.0).unwrap(), 1.0 / 3.0);
    }

    #[test]
    fn negative_time_rejected() {
        assert!(jump_at_two().left_limit(-1.0).is_err());
    }

    #[test]
    fn tied_increments_are_summed() {
        let f = StepFunction::from_increments(0.0, vec![(2.0, 1.0), (1.0, 0.5), (2.0, 0.25)]);
        assert_eq!(f.jump_times(), &[1.0, 2.0]);
        assert_eq!(f.values(), &[0.5, 1.75]);
        assert_eq!(f.increments(), vec![0.5, 1.25]);
    }

    #[test]
    fn unsorted_jumps_rejected() {
        assert!(StepFunction::new(vec![2.0, 1.0], vec![0.0, 1.0], 0.0).is_err());
        assert!(StepFunction::new(vec![1.0, 1.0], vec![0.0, 1.0], 0.0).is_err());
    }

    proptest! {
        #[test]
        fn left_limit_equals_value_off_jumps(
            incs in prop::collection::vec((0.01f64..10.0, -1.0f64..1.0), 0..20),
            t in 0.0f64..12.0,
        ) {
            let f = StepFunction::from_increments(0.3, incs);
            prop_assume!(!f.jump_times().contains(&t));
            prop_assert_eq!(f.left_limit(t).unwrap(), f.eval(t));
        }

        #[test]
        fn sorted_eval_matches_pointwise(
            incs in prop::collection::vec((0.01f64..10.0, 0.0f64..1.0), 0..20),
            mut grid in prop::collection::vec(0.0f64..12.0, 0..30),
        ) {
            let f = StepFunction::from_increments(0.0, incs);
            grid.sort_by(f64::total_cmp);
            let merged = f.eval_sorted(&grid);
            for (t, v) in grid.iter().zip(merged) {
                prop_assert_eq!(v, f.eval(*t));
            }
        }
    }
}
