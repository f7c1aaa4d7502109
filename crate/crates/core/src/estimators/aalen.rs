//! Aalen additive rate model: least-squares increments of the cumulative
//! regression functions at each event time.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::step::StepFunction;
use crate::types::CountingRow;

use super::linalg::solve_spd;
use super::EventTarget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AalenFit {
    /// `B̂_0` (intercept) followed by one function per covariate.
    pub cum_coeffs: Vec<StepFunction>,
    pub jump_times: Vec<f64>,
    /// Event times whose at-risk design was rank deficient.
    pub skipped: Vec<f64>,
}

impl AalenFit {
    pub fn n_covariates(&self) -> usize {
        self.cum_coeffs.len() - 1
    }

    /// Raw `B̂_0(t) + Σ x_j B̂_j(t)` on the jump grid (not monotonized).
    pub fn raw_path(&self, x: &[f64]) -> Vec<f64> {
        (0..self.jump_times.len())
            .map(|k| {
                let mut v = self.cum_coeffs[0].values()[k];
                for (j, xj) in x.iter().enumerate() {
                    v += xj * self.cum_coeffs[j + 1].values()[k];
                }
                v
            })
            .collect()
    }

    /// Increments of the running maximum of the raw path, floored at zero.
    pub fn monotone_increments(&self, x: &[f64]) -> Vec<(f64, f64)> {
        let mut level = 0.0f64;
        self.jump_times
            .iter()
            .zip(self.raw_path(x))
            .map(|(&t, v)| {
                let next = level.max(v);
                let inc = next - level;
                level = next;
                (t, inc)
            })
            .collect()
    }
}

pub fn fit_aalen(rows: &[CountingRow], target: EventTarget) -> Result<AalenFit> {
    let p = rows.first().map_or(0, |r| r.covariates.len());
    if rows.iter().any(|r| r.covariates.len() != p) {
        return Err(Error::InvalidInput("rows have differing covariate widths".into()));
    }
    let q = p + 1;
    let design = |r: &CountingRow| {
        let mut z = Vec::with_capacity(q);
        z.push(1.0);
        z.extend_from_slice(&r.covariates);
        z
    };
    let mut by_start: Vec<usize> = (0..rows.len()).collect();
    by_start.sort_by(|&a, &b| rows[a].start.total_cmp(&rows[b].start));
    let mut by_stop = by_start.clone();
    by_stop.sort_by(|&a, &b| rows[a].stop.total_cmp(&rows[b].stop));
    let mut events: Vec<usize> = (0..rows.len()).filter(|&i| target.is_hit(rows[i].status)).collect();
    if events.is_empty() {
        return Err(Error::NoEvents);
    }
    events.sort_by(|&a, &b| rows[a].stop.total_cmp(&rows[b].stop));

    // at risk at s: start < s <= stop
    let mut ztz = DMatrix::<f64>::zeros(q, q);
    let (mut entered, mut left) = (0, 0);
    let mut jump_times = Vec::new();
    let mut increments: Vec<DVector<f64>> = Vec::new();
    let mut skipped = Vec::new();
    let mut k = 0;
    while k < events.len() {
        let s = rows[events[k]].stop;
        let mut ztdn = DVector::<f64>::zeros(q);
        while k < events.len() && rows[events[k]].stop == s {
            ztdn += DVector::from_vec(design(&rows[events[k]]));
            k += 1;
        }
        while entered < by_start.len() && rows[by_start[entered]].start < s {
            let z = DVector::from_vec(design(&rows[by_start[entered]]));
            ztz += &z * z.transpose();
            entered += 1;
        }
        while left < by_stop.len() && rows[by_stop[left]].stop < s {
            let z = DVector::from_vec(design(&rows[by_stop[left]]));
            ztz -= &z * z.transpose();
            left += 1;
        }
        let solved = if q == 1 {
            (ztz[(0, 0)] > 0.0).then(|| ztdn.clone() / ztz[(0, 0)])
        } else {
            solve_spd(&ztz, &ztdn)
        };
        match solved {
            Some(db) => {
                jump_times.push(s);
                increments.push(db);
            }
            None => skipped.push(s),
        }
    }

    let cum_coeffs = (0..q)
        .map(|j| {
            let mut level = 0.0;
            let values = increments
                .iter()
                .map(|db| {
                    level += db[j];
                    level
                })
                .collect();
            StepFunction::new(jump_times.clone(), values, 0.0).expect("increasing event times")
        })
        .collect();
    Ok(AalenFit {
        cum_coeffs,
        jump_times,
        skipped,
    })
}
