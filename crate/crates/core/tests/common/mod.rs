#![allow(dead_code)]

use proptest::prelude::*;
use recurrent_score::types::{Dataset, EndReason, Scenario, Subject};

/// Small datasets on an integer time lattice, so that ties between events,
/// censorings and deaths are common.
pub fn arb_dataset(scenario: Scenario) -> impl Strategy<Value = Dataset> {
    let subject = (
        prop::collection::btree_set(1u32..10, 0..5),
        0u32..4,
        any::<bool>(),
        prop::collection::vec(-2i32..3, 2),
    );
    prop::collection::vec(subject, 4..14).prop_map(move |raw| {
        let subjects = raw
            .into_iter()
            .enumerate()
            .map(|(i, (events, extra, dies, x))| {
                let events: Vec<f64> = events.into_iter().map(f64::from).collect();
                let end = events.last().copied().unwrap_or(1.0) + f64::from(extra);
                let reason = if scenario == Scenario::WithTerminal && dies {
                    EndReason::Terminal
                } else {
                    EndReason::Censored
                };
                Subject::new(format!("s{i}"), events, end, reason, x.into_iter().map(|v| f64::from(v) / 2.0).collect())
            })
            .collect();
        Dataset::new(subjects, scenario, vec!["x1".into(), "x2".into()], 14.0)
    })
}

pub fn arb_any_dataset() -> impl Strategy<Value = Dataset> {
    prop_oneof![arb_dataset(Scenario::RcOnly), arb_dataset(Scenario::WithTerminal)]
}
