//! Covariate-free estimators: IPCW and at-risk Nelson-Aalen, Kaplan-Meier.

use crate::censoring::{ipcw_weight, product_limit, CensoringDistribution};
use crate::error::{Error, Result};
use crate::step::StepFunction;
use crate::types::{CountingRow, Dataset, Scenario};

use super::EventTarget;

/// `Λ̂(t) = (1/n) Σ_i ∫_0^t dN_i(u) / (1 - Ĝ(u-))`.
pub fn fit_nelson_aalen_ipcw(
    d: &Dataset,
    g: &(impl CensoringDistribution + ?Sized),
) -> Result<StepFunction> {
    d.ensure_valid()?;
    let n = d.len() as f64;
    let mut incs = Vec::with_capacity(d.total_events());
    for s in &d.subjects {
        for &e in &s.event_times {
            incs.push((e, ipcw_weight(g, e, &s.covariates)? / n));
        }
    }
    Ok(StepFunction::from_increments(0.0, incs))
}

/// Classical Nelson-Aalen `Σ dN(s) / Y(s)` with `Y(s) = #{follow-up end >= s}`.
pub fn fit_nelson_aalen_at_risk(d: &Dataset) -> Result<StepFunction> {
    d.ensure_valid()?;
    let mut ends: Vec<f64> = d.subjects.iter().map(|s| s.follow_up_end).collect();
    ends.sort_by(f64::total_cmp);
    let mut events: Vec<f64> = d
        .subjects
        .iter()
        .flat_map(|s| s.event_times.iter().copied())
        .collect();
    events.sort_by(f64::total_cmp);
    Ok(counts_over_risk(&events, |s| {
        (ends.len() - ends.partition_point(|&e| e < s)) as f64
    }))
}

/// Nelson-Aalen over counting-process rows: at risk at `s` when
/// `start < s <= stop`. Strata are ignored.
pub fn nelson_aalen_rows(rows: &[CountingRow], target: EventTarget) -> StepFunction {
    let mut starts: Vec<f64> = rows.iter().map(|r| r.start).collect();
    let mut stops: Vec<f64> = rows.iter().map(|r| r.stop).collect();
    starts.sort_by(f64::total_cmp);
    stops.sort_by(f64::total_cmp);
    let mut events: Vec<f64> = rows
        .iter()
        .filter(|r| target.is_hit(r.status))
        .map(|r| r.stop)
        .collect();
    events.sort_by(f64::total_cmp);
    counts_over_risk(&events, |s| {
        (starts.partition_point(|&a| a < s) - stops.partition_point(|&b| b < s)) as f64
    })
}

fn counts_over_risk(sorted_events: &[f64], at_risk: impl Fn(f64) -> f64) -> StepFunction {
    let mut jumps = Vec::new();
    let mut values = Vec::new();
    let mut level = 0.0;
    let mut i = 0;
    while i < sorted_events.len() {
        let s = sorted_events[i];
        let mut d = 0usize;
        while i < sorted_events.len() && sorted_events[i] == s {
            d += 1;
            i += 1;
        }
        level += d as f64 / at_risk(s);
        jumps.push(s);
        values.push(level);
    }
    StepFunction::new(jumps, values, 0.0).expect("sorted distinct jump times")
}

/// Product-limit survival of the terminal event.
pub fn fit_kaplan_meier(d: &Dataset) -> Result<StepFunction> {
    if d.scenario != Scenario::WithTerminal {
        return Err(Error::Scenario(
            "Kaplan-Meier of the terminal event needs a terminal-event dataset".into(),
        ));
    }
    d.ensure_valid()?;
    let (jumps, surv, _) = product_limit(
        d.subjects
            .iter()
            .map(|s| (s.follow_up_end, s.is_terminal())),
    )?;
    StepFunction::new(jumps, surv, 1.0)
}
