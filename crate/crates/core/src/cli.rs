//! Command implementations behind the `recscore` binary. Every file written
//! embeds the SHA-256 of the run manifest; identical manifests give
//! identical bytes.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::censoring::{fit_censoring, CensoringDistribution};
use crate::error::{Error, Result};
use crate::estimators::ModelSpec;
use crate::experiments::{
    decomposition, rc_score_curves, rc_score_table, terminal_ignoring_curves, terminal_score_curves,
    terminal_score_tables, ReplicateScores, RunManifest, Scale, SummaryRow,
};
use crate::io::{read_dataset_csv, write_counting_csv, write_curve_csv, write_dataset_csv, write_table_csv, IngestOptions};
use crate::scoring::{auto_grid, kfold_evaluate_many, mse_from_counts, parse_grid, quantile, score_from_curves, weighted_counts, ScoreCurve};
use crate::simulation::{
    simulate_rc_scenario, simulate_single_event, simulate_terminal_scenario, RcScenarioParams, SingleEventParams,
    TerminalScenarioParams,
};
use crate::types::{validate_dataset, Dataset, Violation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimScenario {
    Rc,
    Terminal,
    SingleEvent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    Subject,
    Counting,
}

/// Sample on which the censoring distribution is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CensoringFit {
    Pooled,
    TestOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Figure1,
    Figure2,
    Figure3,
    Figure4,
    Table1,
    Table2,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Figure1 => "figure1",
            Target::Figure2 => "figure2",
            Target::Figure3 => "figure3",
            Target::Figure4 => "figure4",
            Target::Table1 => "table1",
            Target::Table2 => "table2",
        }
    }
}

fn create(path: &Path) -> Result<File> {
    if let Some(dir) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(File::create(path)?)
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<PathBuf> {
    let path = dir.join("manifest.json");
    let body = json!({"manifest": manifest, "manifest_sha256": manifest.hash()});
    serde_json::to_writer_pretty(create(&path)?, &body)?;
    Ok(path)
}

/// File-name fragment from a model label.
pub fn slug(label: &str) -> String {
    let mut out = String::new();
    for c in label.chars() {
        if c.is_ascii_alphanumeric() {
            out.push(c.to_ascii_lowercase());
        } else if !out.ends_with('_') {
            out.push('_');
        }
    }
    out.trim_matches('_').to_string()
}

pub fn simulate(scenario: SimScenario, n: usize, seed: u64) -> Result<(Dataset, serde_json::Value)> {
    Ok(match scenario {
        SimScenario::Rc => {
            let p = RcScenarioParams::default();
            (simulate_rc_scenario(n, &p, seed)?, serde_json::to_value(&p)?)
        }
        SimScenario::Terminal => {
            let p = TerminalScenarioParams::default();
            (simulate_terminal_scenario(n, &p, seed)?, serde_json::to_value(&p)?)
        }
        SimScenario::SingleEvent => {
            let p = SingleEventParams::default();
            (simulate_single_event(n, &p, seed)?, serde_json::to_value(&p)?)
        }
    })
}

/// Simulates a dataset and writes it to `out`. Returns the manifest hash.
pub fn cmd_simulate(scenario: SimScenario, n: usize, seed: u64, format: DatasetFormat, out: &Path) -> Result<String> {
    let (d, params) = simulate(scenario, n, seed)?;
    let manifest = RunManifest {
        command: "simulate".into(),
        seed,
        params: json!({"scenario": scenario, "n": n, "model": params, "format": format}),
        model_specs: vec![],
        grid: vec![],
        replications: 1,
        output_dir: Some(out.display().to_string()),
        options: BTreeMap::new(),
    };
    let hash = manifest.hash();
    match format {
        DatasetFormat::Subject => write_dataset_csv(&d, create(out)?, Some(&hash))?,
        DatasetFormat::Counting => write_counting_csv(&d, create(out)?)?,
    }
    Ok(hash)
}

pub fn load_dataset(path: &Path, options: &IngestOptions) -> Result<Dataset> {
    read_dataset_csv(File::open(path)?, options)
}

/// Reads either layout and writes the canonical subject layout.
pub fn cmd_ingest(input: &Path, options: &IngestOptions, out: &Path) -> Result<Dataset> {
    let bytes = fs::read(input)?;
    let d = read_dataset_csv(bytes.as_slice(), options)?;
    let manifest = RunManifest {
        command: "ingest".into(),
        seed: 0,
        params: json!({"input_sha256": hex::encode(Sha256::digest(&bytes)), "options": options}),
        model_specs: vec![],
        grid: vec![],
        replications: 1,
        output_dir: Some(out.display().to_string()),
        options: BTreeMap::new(),
    };
    write_dataset_csv(&d, create(out)?, Some(&manifest.hash()))?;
    Ok(d)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_subjects: usize,
    pub n_events: usize,
    pub violations: Vec<Violation>,
}

pub fn cmd_validate(input: &Path, options: &IngestOptions) -> Result<ValidationReport> {
    let d = match load_dataset(input, options) {
        Ok(d) => d,
        Err(Error::Validation(violations)) => {
            return Ok(ValidationReport {
                n_subjects: 0,
                n_events: 0,
                violations,
            })
        }
        Err(e) => return Err(e),
    };
    Ok(ValidationReport {
        n_subjects: d.len(),
        n_events: d.total_events(),
        violations: validate_dataset(&d),
    })
}

/// Where the data of a `score` run come from.
#[derive(Debug, Clone, PartialEq)]
pub enum ScoreData {
    Split { train: PathBuf, test: PathBuf },
    KFold { data: PathBuf, k: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreArgs {
    pub data: ScoreData,
    pub models: Vec<String>,
    pub reference: String,
    pub grid: String,
    pub seed: u64,
    pub censoring: CensoringFit,
    pub ingest: IngestOptions,
    pub out: PathBuf,
}

fn file_sha(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

fn parse_specs(texts: &[String]) -> Result<Vec<ModelSpec>> {
    texts.iter().map(|t| t.parse()).collect()
}

/// Scores each model against the reference, writing one CSV per model and
/// `summary.json`. Returns the summary path.
pub fn cmd_score(args: &ScoreArgs) -> Result<PathBuf> {
    let models = parse_specs(&args.models)?;
    if models.is_empty() {
        return Err(Error::InvalidInput("no models given".into()));
    }
    let reference: ModelSpec = args.reference.parse()?;
    let mut options = BTreeMap::new();
    options.insert("censoring".to_string(), format!("{:?}", args.censoring).to_lowercase());
    options.insert("grid".to_string(), args.grid.clone());
    options.insert("reference".to_string(), reference.to_string());
    let mut manifest = RunManifest {
        command: "score".into(),
        seed: args.seed,
        params: serde_json::Value::Null,
        model_specs: models.iter().map(|m| m.to_string()).collect(),
        grid: vec![],
        replications: 1,
        output_dir: Some(args.out.display().to_string()),
        options,
    };
    fs::create_dir_all(&args.out)?;
    match &args.data {
        ScoreData::Split { train, test } => {
            let train_d = load_dataset(train, &args.ingest)?;
            let test_d = load_dataset(test, &args.ingest)?;
            let g = match args.censoring {
                CensoringFit::Pooled => fit_censoring(&train_d.union(&test_d)?)?,
                CensoringFit::TestOnly => fit_censoring(&test_d)?,
            };
            let grid = parse_grid(&args.grid, test_d.tau.min(g.support_end()))?;
            manifest.params = json!({"train_sha256": file_sha(train)?, "test_sha256": file_sha(test)?});
            manifest.grid = grid.clone();
            let hash = manifest.hash();
            let wc = weighted_counts(&test_d, &g, &grid)?;
            let ref_curve = mse_from_counts(&test_d, &wc, reference.fit(&train_d, &g)?.as_ref())?;
            let mut entries = Vec::new();
            for spec in &models {
                let m = spec.fit(&train_d, &g)?;
                let curve = score_from_curves(&mse_from_counts(&test_d, &wc, m.as_ref())?, &ref_curve)?;
                let file = format!("score_{}.csv", slug(&spec.label));
                write_curve_csv(&curve, create(&args.out.join(&file))?, Some(&hash))?;
                entries.push(curve_entry(spec, &curve, &file));
            }
            write_summary(&args.out, &manifest, json!({"reference": reference.to_string(), "models": entries}))
        }
        ScoreData::KFold { data, k } => {
            let d = load_dataset(data, &args.ingest)?;
            if args.censoring == CensoringFit::TestOnly {
                return Err(Error::InvalidInput("cross-validation estimates censoring on the whole data".into()));
            }
            let g = fit_censoring(&d)?;
            let grid = parse_grid(&args.grid, d.tau.min(g.support_end()))?;
            manifest.params = json!({"data_sha256": file_sha(data)?, "k": k});
            manifest.grid = grid.clone();
            let hash = manifest.hash();
            let summaries = kfold_evaluate_many(&d, *k, &models, &reference, &grid, args.seed)?;
            for (spec, s) in models.iter().zip(&summaries) {
                let rows: Vec<Vec<String>> = (0..s.times.len())
                    .map(|i| {
                        vec![
                            s.times[i].to_string(),
                            s.mean_score[i].to_string(),
                            s.interval_low[i].to_string(),
                            s.interval_high[i].to_string(),
                        ]
                    })
                    .collect();
                let file = format!("cv_{}.csv", slug(&spec.label));
                write_table_csv(
                    &["time", "mean_score", "interval_low", "interval_high"],
                    &rows,
                    create(&args.out.join(file))?,
                    Some(&hash),
                )?;
            }
            write_summary(&args.out, &manifest, json!({"reference": reference.to_string(), "cross_validation": summaries}))
        }
    }
}

fn curve_entry(spec: &ModelSpec, c: &ScoreCurve, file: &str) -> serde_json::Value {
    json!({
        "label": spec.label,
        "spec": spec.to_string(),
        "kind": c.kind,
        "file": file,
        "times": c.times,
        "mse": c.mse,
        "reference_mse": c.reference_mse,
        "score": c.score,
        "n_test": c.n_test,
        "clipped_times": c.clipped_times,
    })
}

fn write_summary(dir: &Path, manifest: &RunManifest, results: serde_json::Value) -> Result<PathBuf> {
    let path = dir.join("summary.json");
    let body = json!({"manifest": manifest, "manifest_sha256": manifest.hash(), "results": results});
    serde_json::to_writer_pretty(create(&path)?, &body)?;
    Ok(path)
}

const TABLE_TIMES: [f64; 3] = [1.0, 2.0, 2.9];

fn figure_grid() -> Vec<f64> {
    auto_grid(2.9, 29)
}

fn summary_table(rows: &[SummaryRow]) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    for r in rows {
        for i in 0..r.times.len() {
            out.push(vec![
                r.label.clone(),
                r.n_train.to_string(),
                r.times[i].to_string(),
                r.mean[i].to_string(),
                r.sd[i].to_string(),
                r.replications_used.to_string(),
                r.failures.to_string(),
            ]);
        }
    }
    out
}

const SUMMARY_HEADER: [&str; 7] = ["model", "n_train", "time", "mean", "sd", "replications_used", "failures"];

/// Writes per-replicate curves and their pointwise mean and 10%/90% band.
fn write_replicates(dir: &Path, stem: &str, reps: &ReplicateScores, hash: &str) -> Result<Vec<PathBuf>> {
    let mut long = Vec::new();
    let mut band = Vec::new();
    for (label, curves) in reps.labels.iter().zip(&reps.curves) {
        for (r, c) in curves.iter().enumerate() {
            if let Some(c) = c {
                for (t, s) in reps.times.iter().zip(c) {
                    long.push(vec![label.clone(), r.to_string(), t.to_string(), s.to_string()]);
                }
            }
        }
        let ok: Vec<&Vec<f64>> = curves.iter().flatten().collect();
        for (i, t) in reps.times.iter().enumerate() {
            let v: Vec<f64> = ok.iter().map(|c| c[i]).collect();
            let mean = v.iter().sum::<f64>() / v.len() as f64;
            band.push(vec![
                label.clone(),
                t.to_string(),
                mean.to_string(),
                quantile(&v, 0.1).to_string(),
                quantile(&v, 0.9).to_string(),
            ]);
        }
    }
    let p1 = dir.join(format!("{stem}_replicates.csv"));
    write_table_csv(&["model", "replicate", "time", "score"], &long, create(&p1)?, Some(hash))?;
    let p2 = dir.join(format!("{stem}_summary.csv"));
    write_table_csv(&["model", "time", "mean", "q10", "q90"], &band, create(&p2)?, Some(hash))?;
    Ok(vec![p1, p2])
}

/// Regenerates the data behind a figure or table. Returns the files written.
pub fn cmd_reproduce(target: Target, seed: u64, scale: Scale, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let rc = RcScenarioParams::default();
    let term = TerminalScenarioParams::default();
    let (params, grid, replications) = match target {
        Target::Figure1 => (serde_json::to_value(&rc)?, figure_grid(), 1),
        Target::Figure2 => (serde_json::to_value(&rc)?, figure_grid(), scale.figure_replications()),
        Target::Figure3 | Target::Figure4 => (serde_json::to_value(&term)?, figure_grid(), scale.figure_replications()),
        Target::Table1 => (serde_json::to_value(&rc)?, TABLE_TIMES.to_vec(), scale.table_replications()),
        Target::Table2 => (serde_json::to_value(&term)?, TABLE_TIMES.to_vec(), scale.table_replications()),
    };
    let manifest = RunManifest {
        command: format!("reproduce {}", target.name()),
        seed,
        params,
        model_specs: vec![],
        grid: grid.clone(),
        replications,
        output_dir: Some(out.display().to_string()),
        options: BTreeMap::from([("scale".to_string(), format!("{scale:?}").to_lowercase())]),
    };
    let hash = manifest.hash();
    let mut files = vec![write_manifest(out, &manifest)?];
    let name = target.name();
    match target {
        Target::Figure1 => {
            let d = decomposition(&rc, 200, 1000, &grid, seed, 1_000_000)?;
            let rows: Vec<Vec<String>> = (0..d.times.len())
                .map(|i| {
                    vec![
                        d.times[i].to_string(),
                        d.mse[i].to_string(),
                        d.imprecision[i].to_string(),
                        d.inseparability[i].to_string(),
                    ]
                })
                .collect();
            let p = out.join("figure1.csv");
            write_table_csv(&["time", "mse", "imprecision", "inseparability"], &rows, create(&p)?, Some(&hash))?;
            files.push(p);
        }
        Target::Figure2 => {
            let reps = rc_score_curves(&rc, 50, 1000, &grid, replications, seed)?;
            files.extend(write_replicates(out, name, &reps, &hash)?);
        }
        Target::Figure3 => {
            let (rec, surv) = terminal_score_curves(&term, 800, 1000, &grid, replications, seed)?;
            files.extend(write_replicates(out, "figure3_recurrent", &rec, &hash)?);
            files.extend(write_replicates(out, "figure3_survival", &surv, &hash)?);
        }
        Target::Figure4 => {
            let reps = terminal_ignoring_curves(&term, 800, 1000, &grid, replications, seed)?;
            files.extend(write_replicates(out, name, &reps, &hash)?);
        }
        Target::Table1 => {
            let rows = rc_score_table(&rc, &[20, 50], 1000, &grid, replications, seed)?;
            let p = out.join("table1.csv");
            write_table_csv(&SUMMARY_HEADER, &summary_table(&rows), create(&p)?, Some(&hash))?;
            files.push(p);
        }
        Target::Table2 => {
            let (rec, surv) = terminal_score_tables(&term, &[100, 200, 400, 800], 1000, &grid, replications, seed)?;
            let p = out.join("table2.csv");
            write_table_csv(&SUMMARY_HEADER, &summary_table(&rec), create(&p)?, Some(&hash))?;
            files.push(p);
            let p = out.join("table2_survival.csv");
            write_table_csv(&SUMMARY_HEADER, &summary_table(&surv), create(&p)?, Some(&hash))?;
            files.push(p);
        }
    }
    Ok(files)
}
