//! `recscore`: simulate, ingest, score and reproduce from the command line.
//!
//! Exit codes: 0 success, 1 I/O or other failure, 2 invalid input or usage,
//! 3 numerical failure. `RECSCORE_WORKERS` sets the worker thread count.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use recurrent_score::cli::{
    cmd_ingest, cmd_reproduce, cmd_score, cmd_simulate, cmd_validate, CensoringFit, DatasetFormat, ScoreArgs,
    ScoreData, SimScenario, Target,
};
use recurrent_score::experiments::Scale;
use recurrent_score::io::{ColumnMap, IngestOptions};
use recurrent_score::types::Scenario;
use recurrent_score::Error;

#[derive(Parser)]
#[command(name = "recscore", version, about = "IPCW prediction scores for recurrent events")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset from one of the built-in designs.
    Simulate {
        #[arg(long, value_enum)]
        scenario: ScenarioArg,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = FormatArg::Subject)]
        format: FormatArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Read a subject- or counting-layout CSV and write the canonical layout.
    Ingest {
        input: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score models against a reference on a test sample or by k-fold CV.
    Score {
        #[arg(long, requires = "test", conflicts_with_all = ["data", "kfold"])]
        train: Option<PathBuf>,
        #[arg(long, requires = "train")]
        test: Option<PathBuf>,
        #[arg(long, requires = "kfold")]
        data: Option<PathBuf>,
        #[arg(long, requires = "data")]
        kfold: Option<usize>,
        /// Model specs, e.g. `cox:x1+x2/km` or `aalen:x1`.
        #[arg(long, value_delimiter = ',', required = true)]
        models: Vec<String>,
        #[arg(long, default_value = "nelson_aalen")]
        reference: String,
        /// `auto:N` or a comma-separated list of times.
        #[arg(long, default_value = "auto:100")]
        grid: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = CensoringArg::Pooled)]
        censoring: CensoringArg,
        #[command(flatten)]
        schema: SchemaArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Regenerate the data behind a figure or table.
    Reproduce {
        #[arg(value_enum)]
        target: TargetArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ScaleArg::Desk)]
        scale: ScaleArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a dataset file and list every problem found.
    Validate {
        input: PathBuf,
        #[command(flatten)]
        schema: SchemaArgs,
    },
}

#[derive(Args)]
struct SchemaArgs {
    /// Force the scenario instead of inferring it.
    #[arg(long = "data-scenario", value_enum)]
    scenario: Option<DataScenarioArg>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value = "id")]
    id_col: String,
    #[arg(long, default_value = "time")]
    time_col: String,
    #[arg(long, default_value = "kind")]
    kind_col: String,
    #[arg(long, default_value = "start")]
    start_col: String,
    #[arg(long, default_value = "stop")]
    stop_col: String,
    #[arg(long, default_value = "status")]
    status_col: String,
    #[arg(long, default_value = "cov_")]
    cov_prefix: String,
}

impl SchemaArgs {
    fn options(&self) -> IngestOptions {
        IngestOptions {
            scenario: self.scenario.map(|s| match s {
                DataScenarioArg::RcOnly => Scenario::RcOnly,
                DataScenarioArg::WithTerminal => Scenario::WithTerminal,
            }),
            tau: self.tau,
            columns: ColumnMap {
                id: self.id_col.clone(),
                time: self.time_col.clone(),
                kind: self.kind_col.clone(),
                start: self.start_col.clone(),
                stop: self.stop_col.clone(),
                status: self.status_col.clone(),
                covariate_prefix: self.cov_prefix.clone(),
            },
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Rc,
    Terminal,
    SingleEvent,
}

#[derive(Clone, Copy, ValueEnum)]
enum DataScenarioArg {
    RcOnly,
    WithTerminal,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Subject,
    Counting,
}

#[derive(Clone, Copy, ValueEnum)]
enum CensoringArg {
    Pooled,
    TestOnly,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScaleArg {
    Desk,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum TargetArg {
    Figure1,
    Figure2,
    Figure3,
    Figure4,
    Table1,
    Table2,
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Simulate {
            scenario,
            n,
            seed,
            format,
            out,
        } => {
            let scenario = match scenario {
                ScenarioArg::Rc => SimScenario::Rc,
                ScenarioArg::Terminal => SimScenario::Terminal,
                ScenarioArg::SingleEvent => SimScenario::SingleEvent,
            };
            let format = match format {
                FormatArg::Subject => DatasetFormat::Subject,
                FormatArg::Counting => DatasetFormat::Counting,
            };
            let hash = cmd_simulate(scenario, n, seed, format, &out)?;
            println!("wrote {} (manifest {hash})", out.display());
        }
        Command::Ingest { input, schema, out } => {
            let d = cmd_ingest(&input, &schema.options(), &out)?;
            println!("wrote {} ({} subjects, {} events)", out.display(), d.len(), d.total_events());
        }
        Command::Score {
            train,
            test,
            data,
            kfold,
            models,
            reference,
            grid,
            seed,
            censoring,
            schema,
            out,
        } => {
            let data = match (train, test, data, kfold) {
                (Some(train), Some(test), None, None) => ScoreData::Split { train, test },
                (None, None, Some(data), Some(k)) => ScoreData::KFold { data, k },
                _ => return Err(Error::InvalidInput("give --train and --test, or --data and --kfold".into())),
            };
            let args = ScoreArgs {
                data,
                models,
                reference,
                grid,
                seed,
                censoring: match censoring {
                    CensoringArg::Pooled => CensoringFit::Pooled,
                    CensoringArg::TestOnly => CensoringFit::TestOnly,
                },
                ingest: schema.options(),
                out,
            };
            let summary = cmd_score(&args)?;
            println!("wrote {}", summary.display());
        }
        Command::Reproduce {
            target,
            seed,
            scale,
            out,
        } => {
            let target = match target {
                TargetArg::Figure1 => Target::Figure1,
                TargetArg::Figure2 => Target::Figure2,
                TargetArg::Figure3 => Target::Figure3,
                TargetArg::Figure4 => Target::Figure4,
                TargetArg::Table1 => Target::Table1,
                TargetArg::Table2 => Target::Table2,
            };
            let scale = match scale {
                ScaleArg::Desk => Scale::Desk,
                ScaleArg::Full => Scale::Full,
            };
            for f in cmd_reproduce(target, seed, scale, &out)? {
                println!("wrote {}", f.display());
            }
        }
        Command::Validate { input, schema } => {
            let report = cmd_validate(&input, &schema.options())?;
            if report.violations.is_empty() {
                println!("ok: {} subjects, {} events", report.n_subjects, report.n_events);
            } else {
                for v in &report.violations {
                    println!("{v}");
                }
                return Err(Error::Validation(report.violations));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = std::env::var("RECSCORE_WORKERS").ok().and_then(|v| v.parse::<usize>().ok()) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("recscore: cannot set worker count: {e}");
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            match &e {
                Error::Rejected(issues) => {
                    eprintln!("recscore: input rejected");
                    for i in issues {
                        eprintln!("  {i}");
                    }
                }
                _ => eprintln!("recscore: {e}"),
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
