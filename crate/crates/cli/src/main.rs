//! `callscan` — command-line surface of the malpractice-detection pipeline.
//!
//! Exit codes: 0 success, 2 config/validation error, 3 data error,
//! 4 training divergence.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use callscan_core::features::{
    compute_features, load_feature_csv, load_timeline_csv, load_wav, segment_silence_named,
    write_feature_csv, write_timeline_csv, Dataset, SilenceConfig,
};
use callscan_core::metrics::fmt_opt;
use callscan_core::pipeline::{
    compare, kpi_report, run_pipeline, split_dataset, write_compare_csv, FeatureLearning,
    KpiPeriod, PipelineConfig, PipelineError, TransformChoice,
};
use callscan_core::search::GridSpec;
use callscan_core::synth::{synth_dataset, SynthSpec};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_DIVERGED: u8 = 4;

#[derive(Parser)]
#[command(name = "callscan", about = "Call-center malpractice detection pipeline", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Pipeline config JSON; CLI flags override its keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Transform arm: none, zscore or power
    #[arg(long)]
    transform: Option<String>,
    /// Master seed; all randomness flows from this
    #[arg(long)]
    seed: Option<u64>,
    /// k-means seed (shared across grid points)
    #[arg(long)]
    kmeans_seed: Option<u64>,
    /// CD-1 epochs per grid point
    #[arg(long)]
    epochs: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Segment a 16-bit PCM mono WAV into silence/speech
    Segment {
        /// Input WAV file
        wav: PathBuf,
        /// Output timeline CSV (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
        /// Call id recorded in the timeline
        #[arg(long)]
        call_id: Option<String>,
        /// Absolute RMS floor relative to full scale
        #[arg(long)]
        floor: Option<f64>,
        /// Relative factor on the median frame RMS
        #[arg(long)]
        rel_factor: Option<f64>,
        /// Minimum segment duration in seconds
        #[arg(long)]
        min_segment: Option<f64>,
    },
    /// Compute the four percentage features from a timeline CSV
    Features {
        /// Input segment timeline CSV
        timeline: PathBuf,
        /// Output feature CSV (stdout if omitted)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic benchmark dataset
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20_000)]
        n: usize,
        #[arg(long, default_value_t = 0.03)]
        malpractice_fraction: f64,
        #[arg(long, default_value_t = 0.022)]
        labeled_fraction: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
    /// Split a dataset into unlabeled training and labeled validation CSVs
    Split {
        input: PathBuf,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        val_out: PathBuf,
    },
    /// Fit one configured arm and write its models and report
    Fit {
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Directory for the fitted model JSON files and report
        #[arg(long)]
        out_dir: PathBuf,
        /// RBM feature learning with fixed hyperparameters h,rate,batch
        #[arg(long)]
        rbm: Option<String>,
    },
    /// Run one configured arm and print/write its evaluation report
    Evaluate {
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// RBM feature learning with fixed hyperparameters h,rate,batch
        #[arg(long)]
        rbm: Option<String>,
    },
    /// Grid-search RBM hyperparameters on one arm
    Search {
        input: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        /// Report JSON path
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also emit a flat per-point CSV here
        #[arg(long)]
        csv_out: Option<PathBuf>,
        /// Use the full published grid instead of the reduced one
        #[arg(long)]
        full_grid: bool,
    },
    /// Run all five arms and emit a comparison table
    Compare {
        /// Input feature CSV; generated synthetically if omitted
        input: Option<PathBuf>,
        #[command(flatten)]
        config: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Comparison CSV path
        #[arg(long)]
        csv_out: Option<PathBuf>,
        #[arg(long)]
        full_grid: bool,
    },
    /// Mean silence fraction per calendar period
    Kpi {
        input: PathBuf,
        /// year or month
        #[arg(long, default_value = "year")]
        period: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Data(String),
    Diverged(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Data(_) => EXIT_DATA,
            CliError::Diverged(_) => EXIT_DIVERGED,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Data(m) | CliError::Diverged(m) => m,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        if e.is_divergence() {
            CliError::Diverged(e.to_string())
        } else if e.is_config() {
            CliError::Config(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

fn data_err(e: impl std::fmt::Display) -> CliError {
    CliError::Data(e.to_string())
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn load_dataset(path: &Path) -> Result<Dataset, CliError> {
    let file = File::open(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    load_feature_csv(BufReader::new(file)).map_err(data_err)
}

fn open_out(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn write_or_stdout(out: &Option<PathBuf>, body: &str) -> Result<(), CliError> {
    match out {
        Some(path) => {
            let mut w = open_out(path)?;
            w.write_all(body.as_bytes()).map_err(data_err)
        }
        None => {
            print!("{body}");
            Ok(())
        }
    }
}

fn build_config(args: &ConfigArgs) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => {
            let file = File::open(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            serde_json::from_reader(BufReader::new(file)).map_err(config_err)?
        }
        None => PipelineConfig::default(),
    };
    if let Some(t) = &args.transform {
        cfg.transform = match t.as_str() {
            "none" => TransformChoice::None,
            "zscore" => TransformChoice::Zscore,
            "power" => TransformChoice::Power,
            other => {
                return Err(CliError::Config(format!(
                    "config error at `transform`: unknown value `{other}`"
                )))
            }
        };
    }
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(s) = args.kmeans_seed {
        cfg.kmeans_seed = s;
    }
    if let Some(e) = args.epochs {
        cfg.rbm_epochs = e;
    }
    Ok(cfg)
}

fn parse_rbm_fixed(spec: &str) -> Result<FeatureLearning, CliError> {
    let parts: Vec<&str> = spec.split(',').collect();
    if parts.len() != 3 {
        return Err(CliError::Config(
            "config error at `rbm`: expected hidden,rate,batch".into(),
        ));
    }
    Ok(FeatureLearning::RbmFixed {
        hidden_units: parts[0].parse().map_err(config_err)?,
        learning_rate: parts[1].parse().map_err(config_err)?,
        batch_size: parts[2].parse().map_err(config_err)?,
    })
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Segment {
            wav,
            out,
            call_id,
            floor,
            rel_factor,
            min_segment,
        } => {
            let (samples, rate) = load_wav(&wav).map_err(data_err)?;
            let mut cfg = SilenceConfig::default();
            if let Some(f) = floor {
                cfg.absolute_floor = f;
            }
            if let Some(r) = rel_factor {
                cfg.rel_factor = r;
            }
            if let Some(m) = min_segment {
                cfg.min_segment_s = m;
            }
            let id = call_id.unwrap_or_else(|| {
                wav.file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "call".into())
            });
            let timeline = segment_silence_named(&samples, rate, &cfg, &id).map_err(data_err)?;
            let mut buf = Vec::new();
            write_timeline_csv(std::slice::from_ref(&timeline), &mut buf).map_err(data_err)?;
            write_or_stdout(&out, &String::from_utf8_lossy(&buf))
        }
        Command::Features { timeline, out } => {
            let file = File::open(&timeline)
                .map_err(|e| CliError::Data(format!("{}: {e}", timeline.display())))?;
            let timelines = load_timeline_csv(BufReader::new(file)).map_err(data_err)?;
            let rows = timelines
                .iter()
                .map(compute_features)
                .collect::<Result<Vec<_>, _>>()
                .map_err(data_err)?;
            let ds = Dataset::new(rows).map_err(data_err)?;
            let mut buf = Vec::new();
            write_feature_csv(&ds, &mut buf).map_err(data_err)?;
            write_or_stdout(&out, &String::from_utf8_lossy(&buf))
        }
        Command::Synth {
            out,
            n,
            malpractice_fraction,
            labeled_fraction,
            seed,
        } => {
            let spec = SynthSpec {
                n_total: n,
                malpractice_fraction,
                labeled_fraction,
                seed,
                ..SynthSpec::default()
            };
            let ds = synth_dataset(&spec).map_err(config_err)?;
            let mut w = open_out(&out)?;
            write_feature_csv(&ds, &mut w).map_err(data_err)
        }
        Command::Split {
            input,
            train_out,
            val_out,
        } => {
            let ds = load_dataset(&input)?;
            let (train, val) = split_dataset(&ds)?;
            let train_ds = Dataset::new(train.into_iter().cloned().collect()).map_err(data_err)?;
            let val_ds = Dataset::new(val.into_iter().cloned().collect()).map_err(data_err)?;
            write_feature_csv(&train_ds, open_out(&train_out)?).map_err(data_err)?;
            write_feature_csv(&val_ds, open_out(&val_out)?).map_err(data_err)?;
            eprintln!(
                "train: {} rows, validation: {} rows",
                train_ds.rows.len(),
                val_ds.rows.len()
            );
            Ok(())
        }
        Command::Fit {
            input,
            config,
            out_dir,
            rbm,
        } => {
            let mut cfg = build_config(&config)?;
            if let Some(spec) = &rbm {
                cfg.feature_learning = parse_rbm_fixed(spec)?;
            }
            let ds = load_dataset(&input)?;
            let report = run_pipeline(&cfg, &ds)?;
            std::fs::create_dir_all(&out_dir).map_err(data_err)?;
            if let Some(tm) = &report.transform_model {
                serde_json::to_writer_pretty(open_out(&out_dir.join("transform.json"))?, tm)
                    .map_err(data_err)?;
            }
            if let Some(search) = &report.search {
                serde_json::to_writer_pretty(open_out(&out_dir.join("search.json"))?, search)
                    .map_err(data_err)?;
            }
            serde_json::to_writer_pretty(open_out(&out_dir.join("report.json"))?, &report)
                .map_err(data_err)?;
            eprintln!("models written to {}", out_dir.display());
            Ok(())
        }
        Command::Evaluate {
            input,
            config,
            out,
            rbm,
        } => {
            let mut cfg = build_config(&config)?;
            if let Some(spec) = &rbm {
                cfg.feature_learning = parse_rbm_fixed(spec)?;
            }
            let ds = load_dataset(&input)?;
            let report = run_pipeline(&cfg, &ds)?;
            let body = serde_json::to_string_pretty(&report).map_err(data_err)?;
            write_or_stdout(&out, &format!("{body}\n"))
        }
        Command::Search {
            input,
            config,
            out,
            csv_out,
            full_grid,
        } => {
            let mut cfg = build_config(&config)?;
            let grid = if full_grid {
                GridSpec::full()
            } else {
                GridSpec::reduced()
            };
            cfg.feature_learning = FeatureLearning::RbmGrid(grid);
            let ds = load_dataset(&input)?;
            let report = run_pipeline(&cfg, &ds)?;
            let search = report.search.as_ref().expect("grid arm produces a search");
            if let Some(path) = &csv_out {
                search.write_csv(open_out(path)?).map_err(data_err)?;
            }
            let best = search.best();
            eprintln!(
                "best point: hidden={} rate={} batch={} (selection metric = {})",
                best.point.hidden_units,
                best.point.learning_rate,
                best.point.batch_size,
                fmt_opt(best.metrics.as_ref().and_then(|m| m.select(search.selection_metric)))
            );
            let body = serde_json::to_string_pretty(&report).map_err(data_err)?;
            write_or_stdout(&out, &format!("{body}\n"))
        }
        Command::Compare {
            input,
            config,
            out,
            csv_out,
            full_grid,
        } => {
            let cfg = build_config(&config)?;
            let ds = match &input {
                Some(path) => load_dataset(path)?,
                None => synth_dataset(&SynthSpec {
                    seed: cfg.master_seed,
                    ..SynthSpec::default()
                })
                .map_err(config_err)?,
            };
            let grid = if full_grid {
                GridSpec::full()
            } else {
                GridSpec::reduced()
            };
            let report = compare(&cfg, &grid, &ds)?;
            let mut csv_buf = Vec::new();
            write_compare_csv(&report, &mut csv_buf).map_err(data_err)?;
            let csv_body = String::from_utf8_lossy(&csv_buf).into_owned();
            if let Some(path) = &csv_out {
                let mut w = open_out(path)?;
                w.write_all(csv_body.as_bytes()).map_err(data_err)?;
            }
            eprint!("{csv_body}");
            if let Some(path) = &out {
                let body = serde_json::to_string_pretty(&report).map_err(data_err)?;
                write_or_stdout(&Some(path.clone()), &format!("{body}\n"))?;
            }
            Ok(())
        }
        Command::Kpi { input, period, out } => {
            let period = match period.as_str() {
                "year" => KpiPeriod::Year,
                "month" => KpiPeriod::Month,
                other => {
                    return Err(CliError::Config(format!(
                        "config error at `period`: unknown value `{other}`"
                    )))
                }
            };
            let ds = load_dataset(&input)?;
            let rows = kpi_report(&ds, period)?;
            let mut body = String::from("period,mean_pct_silence,call_count\n");
            for row in rows {
                body.push_str(&format!(
                    "{},{:.6},{}\n",
                    row.period, row.mean_pct_silence, row.call_count
                ));
            }
            write_or_stdout(&out, &body)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
