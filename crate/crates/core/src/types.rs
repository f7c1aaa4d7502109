//! Dataset model and the counting-process (start, stop] layout.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndReason {
    Censored,
    Terminal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Right-censoring only; every follow-up end is an observed censoring time.
    RcOnly,
    /// Follow-up ends at the first of censoring and a terminal event.
    WithTerminal,
}

/// One individual's observed history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub id: String,
    /// Strictly increasing, strictly positive, all `<= follow_up_end`.
    pub event_times: Vec<f64>,
    pub follow_up_end: f64,
    pub end_reason: EndReason,
    pub covariates: Vec<f64>,
}

impl Subject {
    pub fn new(
        id: impl Into<String>,
        event_times: Vec<f64>,
        follow_up_end: f64,
        end_reason: EndReason,
        covariates: Vec<f64>,
    ) -> Self {
        Self {
            id: id.into(),
            event_times,
            follow_up_end,
            end_reason,
            covariates,
        }
    }

    /// Observed count `N(t)`; an event exactly at `t` is counted.
    pub fn count_at(&self, t: f64) -> usize {
        self.event_times.partition_point(|&e| e <= t)
    }

    pub fn is_terminal(&self) -> bool {
        self.end_reason == EndReason::Terminal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub subjects: Vec<Subject>,
    pub scenario: Scenario,
    pub covariate_names: Vec<String>,
    /// Study endpoint.
    pub tau: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rule {
    EmptyDataset,
    DuplicateId,
    NonPositiveFollowUp,
    NonPositiveEventTime,
    EventTimesNotIncreasing,
    EventAfterFollowUp,
    TerminalInRcOnly,
    CovariateLength,
    NonFiniteValue,
    TauBeforeFollowUp,
}

impl Rule {
    pub fn describe(self) -> &'static str {
        match self {
            Rule::EmptyDataset => "empty dataset",
            Rule::DuplicateId => "duplicate id",
            Rule::NonPositiveFollowUp => "non-positive follow-up",
            Rule::NonPositiveEventTime => "non-positive event time",
            Rule::EventTimesNotIncreasing => "event times not increasing",
            Rule::EventAfterFollowUp => "event after follow-up",
            Rule::TerminalInRcOnly => "terminal in RC-only",
            Rule::CovariateLength => "covariate length mismatch",
            Rule::NonFiniteValue => "non-finite value",
            Rule::TauBeforeFollowUp => "tau before follow-up end",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub subject: Option<String>,
    pub rule: Rule,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.subject {
            Some(id) => write!(f, "subject {id}: {}", self.rule.describe()),
            None => write!(f, "dataset: {}", self.rule.describe()),
        }
    }
}

/// Checks every dataset invariant and returns the breaches found.
pub fn validate_dataset(d: &Dataset) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |subject: Option<&str>, rule| {
        out.push(Violation {
            subject: subject.map(str::to_owned),
            rule,
        })
    };
    if d.subjects.is_empty() {
        push(None, Rule::EmptyDataset);
    }
    if !(d.tau.is_finite() && d.tau > 0.0) {
        push(None, Rule::NonFiniteValue);
    }
    let p = d.covariate_names.len();
    let mut seen = HashSet::new();
    for s in &d.subjects {
        let id = Some(s.id.as_str());
        if !seen.insert(s.id.as_str()) {
            push(id, Rule::DuplicateId);
        }
        if !s.follow_up_end.is_finite() {
            push(id, Rule::NonFiniteValue);
        } else if s.follow_up_end <= 0.0 {
            push(id, Rule::NonPositiveFollowUp);
        }
        if s.event_times.iter().any(|t| !t.is_finite())
            || s.covariates.iter().any(|x| !x.is_finite())
        {
            push(id, Rule::NonFiniteValue);
        }
        if s.event_times.first().is_some_and(|&t| t <= 0.0) {
            push(id, Rule::NonPositiveEventTime);
        }
        if s.event_times.windows(2).any(|w| !(w[0] < w[1])) {
            push(id, Rule::EventTimesNotIncreasing);
        }
        if s.event_times.iter().any(|&t| t > s.follow_up_end) {
            push(id, Rule::EventAfterFollowUp);
        }
        if d.scenario == Scenario::RcOnly && s.is_terminal() {
            push(id, Rule::TerminalInRcOnly);
        }
        if s.covariates.len() != p {
            push(id, Rule::CovariateLength);
        }
        if s.follow_up_end > d.tau {
            push(id, Rule::TauBeforeFollowUp);
        }
    }
    out
}

impl Dataset {
    pub fn new(
        subjects: Vec<Subject>,
        scenario: Scenario,
        covariate_names: Vec<String>,
        tau: f64,
    ) -> Self {
        Self {
            subjects,
            scenario,
            covariate_names,
            tau,
        }
    }

    /// Constructs and validates in one step.
    pub fn validated(
        subjects: Vec<Subject>,
        scenario: Scenario,
        covariate_names: Vec<String>,
        tau: f64,
    ) -> Result<Self> {
        let d = Self::new(subjects, scenario, covariate_names, tau);
        d.ensure_valid()?;
        Ok(d)
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = validate_dataset(self);
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn total_events(&self) -> usize {
        self.subjects.iter().map(|s| s.event_times.len()).sum()
    }

    pub fn covariate_index(&self, name: &str) -> Result<usize> {
        self.covariate_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::InvalidInput(format!("unknown covariate `{name}`")))
    }

    /// Keeps the subjects at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            subjects: indices.iter().map(|&i| self.subjects[i].clone()).collect(),
            scenario: self.scenario,
            covariate_names: self.covariate_names.clone(),
            tau: self.tau,
        }
    }

    /// Concatenation of two samples drawn on the same covariate layout.
    /// Ids of the second sample are prefixed when they collide.
    pub fn union(&self, other: &Dataset) -> Result<Self> {
        if self.covariate_names != other.covariate_names || self.scenario != other.scenario {
            return Err(Error::InvalidInput(
                "cannot pool datasets with different layouts".into(),
            ));
        }
        let ids: HashSet<&str> = self.subjects.iter().map(|s| s.id.as_str()).collect();
        let mut subjects = self.subjects.clone();
        subjects.extend(other.subjects.iter().map(|s| {
            let mut s = s.clone();
            if ids.contains(s.id.as_str()) {
                s.id = format!("b:{}", s.id);
            }
            s
        }));
        Ok(Self {
            subjects,
            scenario: self.scenario,
            covariate_names: self.covariate_names.clone(),
            tau: self.tau.max(other.tau),
        })
    }

    /// The same dataset with all end reasons relabelled as censoring, for
    /// models that treat the terminal event as a censoring variable.
    pub fn terminal_as_censoring(&self) -> Self {
        let mut d = self.clone();
        for s in &mut d.subjects {
            s.end_reason = EndReason::Censored;
        }
        d.scenario = Scenario::RcOnly;
        d
    }

    /// Single-event encoding: each terminal follow-up end becomes one event
    /// `N(t) = I(T <= t, terminal)`. Recurrent events already present are
    /// dropped; the censoring structure is untouched.
    pub fn terminal_as_single_event(&self) -> Self {
        let mut d = self.clone();
        for s in &mut d.subjects {
            s.event_times = if s.is_terminal() {
                vec![s.follow_up_end]
            } else {
                Vec::new()
            };
        }
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    None,
    Event,
    Terminal,
    /// A recurrent event observed at the same instant as the terminal event.
    EventAndTerminal,
}

impl RowStatus {
    pub fn has_event(self) -> bool {
        matches!(self, RowStatus::Event | RowStatus::EventAndTerminal)
    }

    pub fn has_terminal(self) -> bool {
        matches!(self, RowStatus::Terminal | RowStatus::EventAndTerminal)
    }
}

/// One `(start, stop]` at-risk interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountingRow {
    pub id: String,
    pub start: f64,
    pub stop: f64,
    pub status: RowStatus,
    pub covariates: Vec<f64>,
    pub stratum: Option<String>,
}

/// How subject covariates are mapped to row covariates.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RowDesign {
    /// Covariate columns kept, in order; `None` keeps all.
    pub covariates: Option<Vec<usize>>,
    /// Append the number of events strictly before the row start,
    /// optionally capped.
    pub prior_count: Option<PriorCount>,
    /// Covariate whose value defines the stratum (and is not itself a
    /// regression column).
    pub stratum: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorCount {
    pub cap: Option<u32>,
}

impl PriorCount {
    pub fn apply(self, count: usize) -> f64 {
        match self.cap {
            Some(c) => count.min(c as usize) as f64,
            None => count as f64,
        }
    }
}

impl RowDesign {
    pub fn all() -> Self {
        Self::default()
    }

    pub fn columns(cols: Vec<usize>) -> Self {
        Self {
            covariates: Some(cols),
            ..Self::default()
        }
    }

    /// Row covariates of a subject before the prior-count column.
    pub fn base_covariates(&self, x: &[f64]) -> Vec<f64> {
        match &self.covariates {
            Some(cols) => cols.iter().map(|&j| x[j]).collect(),
            None => x.to_vec(),
        }
    }

    pub fn stratum_of(&self, x: &[f64]) -> Option<String> {
        self.stratum.map(|j| stratum_token(x[j]))
    }

    pub fn width(&self, n_covariates: usize) -> usize {
        self.covariates.as_ref().map_or(n_covariates, Vec::len)
            + usize::from(self.prior_count.is_some())
    }
}

pub fn stratum_token(v: f64) -> String {
    format!("{v}")
}

/// Splits every subject at its event times.
pub fn expand_counting_rows(d: &Dataset, with_prior_count: bool) -> Result<Vec<CountingRow>> {
    let design = RowDesign {
        prior_count: with_prior_count.then_some(PriorCount { cap: None }),
        ..RowDesign::default()
    };
    expand_with_design(d, &design)
}

pub fn expand_with_design(d: &Dataset, design: &RowDesign) -> Result<Vec<CountingRow>> {
    d.ensure_valid()?;
    let mut rows = Vec::with_capacity(d.total_events() + d.len());
    for s in &d.subjects {
        expand_subject(s, design, &mut rows);
    }
    Ok(rows)
}

fn expand_subject(s: &Subject, design: &RowDesign, rows: &mut Vec<CountingRow>) {
    let base = design.base_covariates(&s.covariates);
    let stratum = design.stratum_of(&s.covariates);
    let make_row = |start: f64, stop: f64, status: RowStatus, prior: usize| {
        let mut covariates = base.clone();
        if let Some(pc) = design.prior_count {
            covariates.push(pc.apply(prior));
        }
        CountingRow {
            id: s.id.clone(),
            start,
            stop,
            status,
            covariates,
            stratum: stratum.clone(),
        }
    };
    let mut start = 0.0;
    let n_events = s.event_times.len();
    for (k, &e) in s.event_times.iter().enumerate() {
        let last = k + 1 == n_events;
        let status = if last && e == s.follow_up_end && s.is_terminal() {
            RowStatus::EventAndTerminal
        } else {
            RowStatus::Event
        };
        rows.push(make_row(start, e, status, k));
        start = e;
    }
    if start < s.follow_up_end {
        let status = if s.is_terminal() {
            RowStatus::Terminal
        } else {
            RowStatus::None
        };
        rows.push(make_row(start, s.follow_up_end, status, n_events));
    }
}

/// Rebuilds a subject's history from contiguous `(start, stop, status)`
/// intervals sorted by start.
pub fn history_from_intervals(
    intervals: &[(f64, f64, RowStatus)],
) -> std::result::Result<(Vec<f64>, f64, EndReason), String> {
    let mut events = Vec::new();
    let mut expected_start = 0.0;
    let mut end_reason = EndReason::Censored;
    for (k, &(start, stop, status)) in intervals.iter().enumerate() {
        if start != expected_start {
            return Err(format!(
                "interval starting at {start} is not contiguous with previous stop {expected_start}"
            ));
        }
        if !(start < stop) {
            return Err(format!("interval ({start}, {stop}] is empty"));
        }
        if status.has_terminal() && k + 1 != intervals.len() {
            return Err("terminal status before the final interval".into());
        }
        if status.has_event() {
            events.push(stop);
        }
        if status.has_terminal() {
            end_reason = EndReason::Terminal;
        }
        expected_start = stop;
    }
    if intervals.is_empty() {
        return Err("subject has no intervals".into());
    }
    Ok((events, expected_start, end_reason))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn subj(id: &str, events: &[f64], end: f64, reason: EndReason, x: &[f64]) -> Subject {
        Subject::new(id, events.to_vec(), end, reason, x.to_vec())
    }

    fn one_cov(subjects: Vec<Subject>, scenario: Scenario) -> Dataset {
        Dataset::new(subjects, scenario, vec!["x".into()], 10.0)
    }

    #[test]
    fn event_after_follow_up_flagged() {
        let d = one_cov(
            vec![subj("a", &[5.0], 3.0, EndReason::Censored, &[0.0])],
            Scenario::RcOnly,
        );
        let v = validate_dataset(&d);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::EventAfterFollowUp);
        assert_eq!(v[0].to_string(), "subject a: event after follow-up");
    }

    #[test]
    fn well_formed_dataset_is_clean() {
        let d = one_cov(
            vec![
                subj("a", &[1.0, 2.0], 3.0, EndReason::Censored, &[0.0]),
                subj("b", &[], 4.0, EndReason::Censored, &[1.0]),
            ],
            Scenario::RcOnly,
        );
        assert!(validate_dataset(&d).is_empty());
    }

    #[test]
    fn terminal_in_rc_only_flagged() {
        let d = one_cov(
            vec![subj("a", &[1.0], 3.0, EndReason::Terminal, &[0.0])],
            Scenario::RcOnly,
        );
        let v = validate_dataset(&d);
        assert_eq!(v[0].rule, Rule::TerminalInRcOnly);
        assert_eq!(v[0].to_string(), "subject a: terminal in RC-only");
    }

    #[test]
    fn other_rules() {
        let d = Dataset::new(
            vec![
                subj("a", &[2.0, 1.0], 3.0, EndReason::Censored, &[0.0]),
                subj("a", &[0.0], 3.0, EndReason::Censored, &[0.0, 1.0]),
                subj("c", &[], 20.0, EndReason::Censored, &[f64::NAN]),
            ],
            Scenario::RcOnly,
            vec!["x".into()],
            10.0,
        );
        let rules: Vec<Rule> = validate_dataset(&d).into_iter().map(|v| v.rule).collect();
        for r in [
            Rule::EventTimesNotIncreasing,
            Rule::DuplicateId,
            Rule::NonPositiveEventTime,
            Rule::CovariateLength,
            Rule::NonFiniteValue,
            Rule::TauBeforeFollowUp,
        ] {
            assert!(rules.contains(&r), "missing {r:?}");
        }
        assert_eq!(
            validate_dataset(&Dataset::new(vec![], Scenario::RcOnly, vec![], 1.0))[0].rule,
            Rule::EmptyDataset
        );
    }

    #[test]
    fn expansion_with_prior_count() {
        let d = one_cov(
            vec![subj("a", &[1.0, 3.0], 5.0, EndReason::Censored, &[0.7])],
            Scenario::RcOnly,
        );
        let rows = expand_counting_rows(&d, true).unwrap();
        let got: Vec<_> = rows
            .iter()
            .map(|r| (r.start, r.stop, r.status, r.covariates.clone()))
            .collect();
        assert_eq!(
            got,
            vec![
                (0.0, 1.0, RowStatus::Event, vec![0.7, 0.0]),
                (1.0, 3.0, RowStatus::Event, vec![0.7, 1.0]),
                (3.0, 5.0, RowStatus::None, vec![0.7, 2.0]),
            ]
        );
    }

    #[test]
    fn no_events_gives_single_row() {
        let d = one_cov(
            vec![subj("a", &[], 2.0, EndReason::Censored, &[0.1])],
            Scenario::RcOnly,
        );
        let rows = expand_counting_rows(&d, true).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!((rows[0].start, rows[0].stop), (0.0, 2.0));
        assert_eq!(rows[0].status, RowStatus::None);
        assert_eq!(rows[0].covariates, vec![0.1, 0.0]);
    }

    #[test]
    fn row_count_matches_brute_force() {
        let subjects = vec![
            subj("a", &[0.5, 1.5, 2.5], 3.0, EndReason::Censored, &[1.0]),
            subj("b", &[], 1.0, EndReason::Terminal, &[0.0]),
            subj("c", &[2.0], 4.0, EndReason::Terminal, &[2.0]),
        ];
        let brute: usize = subjects.iter().map(|s| s.event_times.len() + 1).sum();
        let d = one_cov(subjects, Scenario::WithTerminal);
        let rows = expand_counting_rows(&d, false).unwrap();
        assert_eq!(rows.len(), brute);
        assert_eq!(rows.last().unwrap().status, RowStatus::Terminal);
    }

    #[test]
    fn tie_at_follow_up_end() {
        let d = one_cov(
            vec![
                subj("a", &[1.0, 2.0], 2.0, EndReason::Censored, &[0.0]),
                subj("b", &[1.0], 1.0, EndReason::Terminal, &[0.0]),
            ],
            Scenario::WithTerminal,
        );
        let rows = expand_counting_rows(&d, false).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1].status, RowStatus::Event);
        assert_eq!(rows[2].status, RowStatus::EventAndTerminal);
    }

    #[test]
    fn invalid_dataset_rejected() {
        let d = one_cov(
            vec![subj("a", &[5.0], 3.0, EndReason::Censored, &[0.0])],
            Scenario::RcOnly,
        );
        assert!(matches!(
            expand_counting_rows(&d, false),
            Err(Error::Validation(_))
        ));
    }

    #[test]
    fn capped_prior_count() {
        let d = one_cov(
            vec![subj("a", &[1.0, 2.0, 3.0, 4.0], 5.0, EndReason::Censored, &[0.0])],
            Scenario::RcOnly,
        );
        let design = RowDesign {
            covariates: Some(vec![]),
            prior_count: Some(PriorCount { cap: Some(2) }),
            stratum: None,
        };
        let rows = expand_with_design(&d, &design).unwrap();
        let prior: Vec<f64> = rows.iter().map(|r| r.covariates[0]).collect();
        assert_eq!(prior, vec![0.0, 1.0, 2.0, 2.0, 2.0]);
    }

    fn arb_subject() -> impl Strategy<Value = (Vec<f64>, f64, bool, f64)> {
        (
            prop::collection::btree_set(1u32..1000, 0..8),
            0u32..200,
            any::<bool>(),
            -2.0f64..2.0,
        )
            .prop_map(|(ev, extra, terminal, x)| {
                let events: Vec<f64> = ev.into_iter().map(|e| e as f64 / 100.0).collect();
                let end = events.last().copied().unwrap_or(0.0) + extra as f64 / 100.0;
                let end = if end <= 0.0 { 0.5 } else { end };
                (events, end, terminal, x)
            })
    }

    proptest! {
        #[test]
        fn expansion_is_lossless(subjects in prop::collection::vec(arb_subject(), 1..10)) {
            let subjects: Vec<Subject> = subjects
                .into_iter()
                .enumerate()
                .map(|(i, (ev, end, term, x))| {
                    let reason = if term { EndReason::Terminal } else { EndReason::Censored };
                    Subject::new(format!("s{i}"), ev, end, reason, vec![x])
                })
                .collect();
            let d = Dataset::new(subjects, Scenario::WithTerminal, vec!["x".into()], 20.0);
            let rows = expand_counting_rows(&d, true).unwrap();
            for s in &d.subjects {
                let mine: Vec<&CountingRow> = rows.iter().filter(|r| r.id == s.id).collect();
                let iv: Vec<_> = mine.iter().map(|r| (r.start, r.stop, r.status)).collect();
                let (events, end, reason) = history_from_intervals(&iv).unwrap();
                prop_assert_eq!(&events, &s.event_times);
                prop_assert_eq!(end, s.follow_up_end);
                prop_assert_eq!(reason, s.end_reason);
                let mut prev = -1.0;
                for (k, r) in mine.iter().enumerate() {
                    let prior = r.covariates[1];
                    prop_assert!(prior >= prev);
                    if k > 0 {
                        let bump = if mine[k - 1].status.has_event() { 1.0 } else { 0.0 };
                        prop_assert_eq!(prior, mine[k - 1].covariates[1] + bump);
                    }
                    prev = prior;
                }
            }
        }
    }
}
