//! CSV encodings of datasets and score curves.
//!
//! Subject layout: `id,time,kind,cov_<name>...` with `kind` one of `event`,
//! `censor`, `terminal` and exactly one `censor` or `terminal` row per id.
//! Counting-process layout: `id,start,stop,status,cov_<name>...` with
//! contiguous `(start, stop]` rows per id. Lines starting with `#` carry
//! metadata such as the scenario and the manifest hash.

use std::collections::HashMap;
use std::fmt;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::ScoreCurve;
use crate::types::{history_from_intervals, validate_dataset, Dataset, EndReason, RowStatus, Scenario, Subject};

/// A rejected input line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowIssue {
    pub line: u64,
    pub id: Option<String>,
    pub message: String,
}

impl fmt::Display for RowIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.id {
            Some(id) => write!(f, "line {} (id {id}): {}", self.line, self.message),
            None => write!(f, "line {}: {}", self.line, self.message),
        }
    }
}

/// Column names of the input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnMap {
    pub id: String,
    pub time: String,
    pub kind: String,
    pub start: String,
    pub stop: String,
    pub status: String,
    pub covariate_prefix: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        Self {
            id: "id".into(),
            time: "time".into(),
            kind: "kind".into(),
            start: "start".into(),
            stop: "stop".into(),
            status: "status".into(),
            covariate_prefix: "cov_".into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Overrides the scenario found in the metadata line; otherwise a file
    /// with terminal rows is read as a terminal-event dataset.
    pub scenario: Option<Scenario>,
    /// Study endpoint; defaults to the metadata value or the largest follow-up.
    pub tau: Option<f64>,
    pub columns: ColumnMap,
}

fn scenario_token(s: Scenario) -> &'static str {
    match s {
        Scenario::RcOnly => "rc_only",
        Scenario::WithTerminal => "with_terminal",
    }
}

/// Writes the subject layout. `manifest_hash`, when given, goes in the
/// leading metadata line.
pub fn write_dataset_csv(d: &Dataset, w: impl Write, manifest_hash: Option<&str>) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    write!(w, "# scenario={} tau={}", scenario_token(d.scenario), d.tau)?;
    if let Some(h) = manifest_hash {
        write!(w, " manifest_sha256={h}")?;
    }
    writeln!(w)?;
    {
        let mut csv = csv::Writer::from_writer(&mut w);
        let mut header = vec!["id".to_string(), "time".into(), "kind".into()];
        header.extend(d.covariate_names.iter().map(|n| format!("cov_{n}")));
        csv.write_record(&header)?;
        for s in &d.subjects {
            let covs: Vec<String> = s.covariates.iter().map(|x| x.to_string()).collect();
            let mut row = |time: f64, kind: &str| -> Result<()> {
                let mut rec = vec![s.id.clone(), time.to_string(), kind.to_string()];
                rec.extend(covs.iter().cloned());
                csv.write_record(&rec)?;
                Ok(())
            };
            for &e in &s.event_times {
                row(e, "event")?;
            }
            let end = match s.end_reason {
                EndReason::Censored => "censor",
                EndReason::Terminal => "terminal",
            };
            row(s.follow_up_end, end)?;
        }
        csv.flush()?;
    }
    w.flush()?;
    Ok(())
}

struct Metadata {
    scenario: Option<Scenario>,
    tau: Option<f64>,
}

/// Splits leading `#` lines from the CSV body.
fn split_metadata(text: &str) -> (Metadata, &str, u64) {
    let mut meta = Metadata {
        scenario: None,
        tau: None,
    };
    let mut rest = text;
    let mut skipped = 0;
    while rest.starts_with('#') {
        let (line, tail) = rest.split_once('\n').unwrap_or((rest, ""));
        for token in line.trim_start_matches('#').split_whitespace() {
            match token.split_once('=') {
                Some(("scenario", "rc_only")) => meta.scenario = Some(Scenario::RcOnly),
                Some(("scenario", "with_terminal")) => meta.scenario = Some(Scenario::WithTerminal),
                Some(("tau", v)) => meta.tau = v.parse().ok(),
                _ => {}
            }
        }
        rest = tail;
        skipped += 1;
    }
    (meta, rest, skipped)
}

struct Draft {
    id: String,
    first_line: u64,
    covariates: Vec<f64>,
    events: Vec<(f64, u64)>,
    end: Option<(f64, EndReason, u64)>,
    intervals: Vec<(f64, f64, RowStatus, u64)>,
}

impl Draft {
    fn new(id: String, line: u64, covariates: Vec<f64>) -> Self {
        Self {
            id,
            first_line: line,
            covariates,
            events: Vec::new(),
            end: None,
            intervals: Vec::new(),
        }
    }
}

fn parse_status(s: &str) -> Option<RowStatus> {
    Some(match s.trim() {
        "0" | "none" | "censor" => RowStatus::None,
        "1" | "event" => RowStatus::Event,
        "2" | "terminal" => RowStatus::Terminal,
        "3" | "event_and_terminal" => RowStatus::EventAndTerminal,
        _ => return None,
    })
}

/// Reads either layout (detected from the header) into a validated dataset.
/// Every problem found is reported with its line number.
pub fn read_dataset_csv(mut r: impl Read, options: &IngestOptions) -> Result<Dataset> {
    let mut text = String::new();
    r.read_to_string(&mut text)?;
    let (meta, body, offset) = split_metadata(&text);
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(body.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let cols = &options.columns;
    let find = |name: &str| header.iter().position(|h| h == name);
    let id_col = find(&cols.id).ok_or_else(|| Error::Parse(format!("missing column '{}'", cols.id)))?;
    let counting = find(&cols.start).is_some() && find(&cols.stop).is_some();
    let cov_cols: Vec<(usize, String)> = header
        .iter()
        .enumerate()
        .filter_map(|(j, h)| h.strip_prefix(cols.covariate_prefix.as_str()).map(|n| (j, n.to_string())))
        .collect();
    let need = |name: &str| find(name).ok_or_else(|| Error::Parse(format!("missing column '{name}'")));
    let (time_col, kind_col, start_col, stop_col, status_col) = if counting {
        (0, 0, need(&cols.start)?, need(&cols.stop)?, need(&cols.status)?)
    } else {
        (need(&cols.time)?, need(&cols.kind)?, 0, 0, 0)
    };

    let mut issues = Vec::new();
    let mut drafts: Vec<Draft> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line()) + offset;
        let id = rec.get(id_col).unwrap_or("").to_string();
        let mut issue = |message: String| {
            issues.push(RowIssue {
                line,
                id: Some(id.clone()),
                message,
            })
        };
        let num = |j: usize| rec.get(j).unwrap_or("").parse::<f64>();
        let covs: std::result::Result<Vec<f64>, _> = cov_cols.iter().map(|(j, _)| num(*j)).collect();
        let Ok(covs) = covs else {
            issue("unparseable covariate value".into());
            continue;
        };
        if id.is_empty() {
            issue("empty id".into());
            continue;
        }
        let k = *index.entry(id.clone()).or_insert_with(|| {
            drafts.push(Draft::new(id.clone(), line, covs.clone()));
            drafts.len() - 1
        });
        let draft = &mut drafts[k];
        if draft.covariates != covs {
            issue("covariates differ from the subject's first row".into());
            continue;
        }
        if counting {
            let (Ok(start), Ok(stop)) = (num(start_col), num(stop_col)) else {
                issue("unparseable start or stop".into());
                continue;
            };
            let Some(status) = rec.get(status_col).and_then(parse_status) else {
                issue(format!("unknown status '{}'", rec.get(status_col).unwrap_or("")));
                continue;
            };
            draft.intervals.push((start, stop, status, line));
            continue;
        }
        let Ok(time) = num(time_col) else {
            issue("unparseable time".into());
            continue;
        };
        match rec.get(kind_col).unwrap_or("") {
            "event" => {
                if time <= 0.0 || !time.is_finite() {
                    issue(format!("event time {time} is not positive"));
                } else if draft.events.last().is_some_and(|&(e, _)| e >= time) {
                    issue(format!("event time {time} not after the previous event"));
                } else {
                    draft.events.push((time, line));
                }
            }
            kind @ ("censor" | "terminal") => {
                if draft.end.is_some() {
                    issue("second censor/terminal row".into());
                } else {
                    let reason = if kind == "terminal" {
                        EndReason::Terminal
                    } else {
                        EndReason::Censored
                    };
                    draft.end = Some((time, reason, line));
                }
            }
            other => issue(format!("unknown kind '{other}'")),
        }
    }

    let mut subjects = Vec::with_capacity(drafts.len());
    for draft in drafts {
        let issue = |line: u64, message: String| RowIssue {
            line,
            id: Some(draft.id.clone()),
            message,
        };
        if counting {
            let mut iv = draft.intervals.clone();
            iv.sort_by(|a, b| a.0.total_cmp(&b.0));
            let plain: Vec<(f64, f64, RowStatus)> = iv.iter().map(|&(a, b, s, _)| (a, b, s)).collect();
            match history_from_intervals(&plain) {
                Ok((events, end, reason)) => subjects.push(Subject::new(draft.id.clone(), events, end, reason, draft.covariates.clone())),
                Err(msg) => issues.push(issue(draft.first_line, msg)),
            }
            continue;
        }
        let Some((end, reason, end_line)) = draft.end else {
            issues.push(issue(draft.first_line, "no censor or terminal row".into()));
            continue;
        };
        if !(end > 0.0) {
            issues.push(issue(end_line, format!("follow-up end {end} is not positive")));
        }
        for &(e, line) in &draft.events {
            if e > end {
                issues.push(issue(line, format!("event at {e} after follow-up end {end}")));
            }
        }
        let events = draft.events.iter().map(|p| p.0).collect();
        subjects.push(Subject::new(draft.id.clone(), events, end, reason, draft.covariates.clone()));
    }

    let any_terminal = subjects.iter().any(Subject::is_terminal);
    let scenario = options.scenario.or(meta.scenario).unwrap_or(if any_terminal {
        Scenario::WithTerminal
    } else {
        Scenario::RcOnly
    });
    let tau = options
        .tau
        .or(meta.tau)
        .unwrap_or_else(|| subjects.iter().map(|s| s.follow_up_end).fold(0.0, f64::max));
    let d = Dataset::new(subjects, scenario, cov_cols.into_iter().map(|c| c.1).collect(), tau);
    if issues.is_empty() {
        let violations = validate_dataset(&d);
        if !violations.is_empty() {
            return Err(Error::Validation(violations));
        }
        Ok(d)
    } else {
        issues.sort_by_key(|i| i.line);
        Err(Error::Rejected(issues))
    }
}

/// Writes the counting-process layout.
pub fn write_counting_csv(d: &Dataset, w: impl Write) -> Result<()> {
    let rows = crate::types::expand_counting_rows(d, false)?;
    let mut csv = csv::Writer::from_writer(w);
    let mut header = vec!["id".to_string(), "start".into(), "stop".into(), "status".into()];
    header.extend(d.covariate_names.iter().map(|n| format!("cov_{n}")));
    csv.write_record(&header)?;
    for r in rows {
        let status = match r.status {
            RowStatus::None => "0",
            RowStatus::Event => "1",
            RowStatus::Terminal => "2",
            RowStatus::EventAndTerminal => "3",
        };
        let mut rec = vec![r.id, r.start.to_string(), r.stop.to_string(), status.to_string()];
        rec.extend(r.covariates.iter().map(|x| x.to_string()));
        csv.write_record(&rec)?;
    }
    csv.flush()?;
    Ok(())
}

/// `time,mse[,reference_mse,score]` with a metadata line.
pub fn write_curve_csv(curve: &ScoreCurve, w: impl Write, manifest_hash: Option<&str>) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    write!(w, "# model={}", curve.model_label.replace(char::is_whitespace, "_"))?;
    if let Some(h) = manifest_hash {
        write!(w, " manifest_sha256={h}")?;
    }
    writeln!(w)?;
    {
        let mut csv = csv::Writer::from_writer(&mut w);
        match (&curve.reference_mse, &curve.score) {
            (Some(r), Some(s)) => {
                csv.write_record(["time", "mse", "reference_mse", "score"])?;
                for i in 0..curve.times.len() {
                    csv.write_record(&[
                        curve.times[i].to_string(),
                        curve.mse[i].to_string(),
                        r[i].to_string(),
                        s[i].to_string(),
                    ])?;
                }
            }
            _ => {
                csv.write_record(["time", "mse"])?;
                for i in 0..curve.times.len() {
                    csv.write_record(&[curve.times[i].to_string(), curve.mse[i].to_string()])?;
                }
            }
        }
        csv.flush()?;
    }
    w.flush()?;
    Ok(())
}

/// Writes a table of named numeric columns with a metadata line.
pub fn write_table_csv(
    header: &[&str],
    rows: &[Vec<String>],
    w: impl Write,
    manifest_hash: Option<&str>,
) -> Result<()> {
    let mut w = std::io::BufWriter::new(w);
    if let Some(h) = manifest_hash {
        writeln!(w, "# manifest_sha256={h}")?;
    }
    {
        let mut csv = csv::Writer::from_writer(&mut w);
        csv.write_record(header)?;
        for r in rows {
            csv.write_record(r)?;
        }
        csv.flush()?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Dataset {
        Dataset::new(
            vec![
                Subject::new("a", vec![0.5, 1.25], 2.0, EndReason::Censored, vec![1.0, 0.1]),
                Subject::new("b", vec![], 1.5, EndReason::Terminal, vec![0.0, 2.0 / 3.0]),
                Subject::new("c", vec![0.75], 0.75, EndReason::Terminal, vec![1.0, -1.0]),
            ],
            Scenario::WithTerminal,
            vec!["x1".into(), "x2".into()],
            3.0,
        )
    }

    #[test]
    fn subject_layout_round_trips() {
        let d = sample();
        let mut buf = Vec::new();
        write_dataset_csv(&d, &mut buf, Some("abc")).unwrap();
        let back = read_dataset_csv(buf.as_slice(), &IngestOptions::default()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn counting_layout_matches_subject_layout() {
        let d = sample();
        let mut buf = Vec::new();
        write_counting_csv(&d, &mut buf).unwrap();
        let opts = IngestOptions {
            tau: Some(3.0),
            ..IngestOptions::default()
        };
        assert_eq!(read_dataset_csv(buf.as_slice(), &opts).unwrap(), d);
    }

    #[test]
    fn event_after_follow_up_is_rejected_with_line() {
        let text = "id,time,kind,cov_x\na,1.0,event,0\na,3.0,event,0\na,2.0,censor,0\n";
        match read_dataset_csv(text.as_bytes(), &IngestOptions::default()) {
            Err(Error::Rejected(issues)) => {
                assert_eq!(issues.len(), 1);
                assert_eq!(issues[0].line, 3);
                assert!(issues[0].message.contains("after follow-up"));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_rows_reported() {
        let text = "# scenario=rc_only\nid,time,kind,cov_x\na,x,event,0\nb,1.0,death,0\nc,1.0,censor,0\nc,2.0,censor,0\n";
        match read_dataset_csv(text.as_bytes(), &IngestOptions::default()) {
            Err(Error::Rejected(issues)) => {
                let lines: Vec<u64> = issues.iter().map(|i| i.line).collect();
                assert!(lines.contains(&3) && lines.contains(&4) && lines.contains(&6), "{issues:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_column() {
        let text = "id,when,kind\na,1,censor\n";
        assert!(matches!(read_dataset_csv(text.as_bytes(), &IngestOptions::default()), Err(Error::Parse(_))));
    }
}
