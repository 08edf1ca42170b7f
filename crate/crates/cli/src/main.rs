//! `tablesim` — run, sweep, and score simulated table-retrieval sessions.
//!
//! Exit codes: 0 success, 1 input error (bad files, bad config, bad flags),
//! 2 runtime error (a simulation or evaluation failed).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tablesim_core::error::ErrorKind;
use tablesim_core::eval::{sdcg_curve, time_gain_curve, write_curve_csv, CurveStat, SdcgParams};
use tablesim_core::experiment::{export_curves, run_experiment, run_single, ExperimentConfig};
use tablesim_core::retrieval::{build_index, Index};
use tablesim_core::simulator::SessionLog;
use tablesim_core::synth::{generate, write_files, SynthSpec};
use tablesim_core::{corpus, Error, Result};

#[derive(Parser)]
#[command(
    name = "tablesim",
    version,
    about = "Simulated interactive web-table retrieval workbench"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or inspect retrieval indices.
    Index {
        #[command(subcommand)]
        action: IndexAction,
    },
    /// Run single sessions or full grid sweeps.
    Simulate {
        #[command(subcommand)]
        action: SimulateAction,
    },
    /// Score session logs.
    Eval {
        #[command(subcommand)]
        action: EvalAction,
    },
    /// Export derived artifacts from an experiment directory.
    Export {
        #[command(subcommand)]
        action: ExportAction,
    },
    /// Generate a synthetic corpus with qrels, topics, and variants.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set bm25.k1=2.0` or `--set seed=7`.
    /// Values parse as JSON; unparseable values are taken as strings.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
}

#[derive(Subcommand)]
enum IndexAction {
    /// Build the index over the configured corpus and persist it.
    Build {
        #[command(flatten)]
        config: ConfigArgs,
        /// Output index file (JSON with an embedded format version).
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SimulateAction {
    /// Run one (topic, grid cell) session and write its log.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Topic id to simulate.
        #[arg(long)]
        topic: String,
        /// Grid cell index (row-major over the configured axes).
        #[arg(long, default_value_t = 0)]
        cell: usize,
        /// Log output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the full (topic x cell) sweep from the config.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Worker threads (defaults to the number of cores). Output bytes
        /// do not depend on this.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

#[derive(Subcommand)]
enum EvalAction {
    /// Query-wise sDCG curve of one session log.
    Sdcg {
        /// Session log (JSONL).
        #[arg(long)]
        log: PathBuf,
        #[arg(long, default_value_t = 2.0)]
        doc_log_base: f64,
        #[arg(long, default_value_t = 4.0)]
        query_log_base: f64,
        /// Optional CSV output (`x,mean,n,stddev`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time-wise cumulative-gain curve of one session log.
    Timegain {
        /// Session log (JSONL).
        #[arg(long)]
        log: PathBuf,
        /// Optional CSV output (`x,mean,n,stddev`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ExportAction {
    /// Recompute every cell's mean-curve CSVs from the logs on disk.
    Curves {
        /// Experiment directory written by `simulate sweep`.
        #[arg(long)]
        experiment: PathBuf,
    },
}

#[derive(Args)]
struct SynthArgs {
    /// Directory for the generated input files.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 30)]
    topics: usize,
    #[arg(long, default_value_t = 50)]
    backgrounds: usize,
    /// Per-modality label flip probability.
    #[arg(long, default_value_t = 0.2)]
    flip: f64,
    #[arg(long, default_value_t = 100)]
    variants: usize,
    #[arg(long, default_value_t = 17)]
    seed: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();

    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind as ClapKind;
            let code = match e.kind() {
                ClapKind::DisplayHelp | ClapKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e.kind() {
                ErrorKind::Input => ExitCode::from(1),
                ErrorKind::Runtime => ExitCode::from(2),
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Index { action } => match action {
            IndexAction::Build { config, out } => index_build(&config, &out),
        },
        Command::Simulate { action } => match action {
            SimulateAction::Run {
                config,
                topic,
                cell,
                out,
            } => simulate_run(&config, &topic, cell, out.as_deref()),
            SimulateAction::Sweep { config, jobs } => simulate_sweep(&config, jobs),
        },
        Command::Eval { action } => match action {
            EvalAction::Sdcg {
                log,
                doc_log_base,
                query_log_base,
                out,
            } => eval_sdcg(&log, doc_log_base, query_log_base, out.as_deref()),
            EvalAction::Timegain { log, out } => eval_timegain(&log, out.as_deref()),
        },
        Command::Export { action } => match action {
            ExportAction::Curves { experiment } => {
                let refreshed = export_curves(&experiment)?;
                println!(
                    "refreshed curve CSVs for {refreshed} cell(s) under {}",
                    experiment.display()
                );
                Ok(())
            }
        },
        Command::Synth(args) => synth(&args),
    }
}

/// Load the config file and apply `--set key=value` overrides on the raw
/// JSON before deserializing.
fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(&args.config).map_err(|source| Error::Io {
        path: args.config.clone(),
        source,
    })?;
    let mut value: serde_json::Value = serde_json::from_str(&text)?;
    for expr in &args.sets {
        apply_set(&mut value, expr)?;
    }
    ExperimentConfig::from_value(value)
}

fn apply_set(value: &mut serde_json::Value, expr: &str) -> Result<()> {
    let (path, raw) = expr
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got {expr:?}")))?;
    let new_value: serde_json::Value =
        serde_json::from_str(raw).unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
    let mut cursor = value;
    let parts: Vec<&str> = path.split('.').collect();
    let (last, init) = parts
        .split_last()
        .expect("split produces at least one part");
    for part in init {
        cursor = cursor
            .as_object_mut()
            .ok_or_else(|| {
                Error::Config(format!("--set path {path:?}: {part:?} is not an object"))
            })?
            .entry(part.to_string())
            .or_insert_with(|| serde_json::Value::Object(Default::default()));
    }
    cursor
        .as_object_mut()
        .ok_or_else(|| Error::Config(format!("--set path {path:?} does not end in an object")))?
        .insert(last.to_string(), new_value);
    Ok(())
}

fn index_build(config_args: &ConfigArgs, out: &Path) -> Result<()> {
    let config = load_config(config_args)?;
    let corpus = corpus::load_corpus(&config.inputs.corpus)?;
    println!(
        "loaded {} tables from {}",
        corpus.len(),
        config.inputs.corpus.display()
    );
    let index = build_index(&corpus, &config.field_weights, config.bm25)?;
    index.save(out)?;
    // Round-trip check: the persisted index must load back identically.
    let reloaded = Index::load(out)?;
    debug_assert_eq!(&reloaded, &index);
    println!(
        "indexed {} documents, {} terms -> {}",
        index.n_docs(),
        index.lexicon().terms().count(),
        out.display()
    );
    Ok(())
}

fn simulate_run(
    config_args: &ConfigArgs,
    topic: &str,
    cell: usize,
    out: Option<&Path>,
) -> Result<()> {
    let config = load_config(config_args)?;
    let (header, log) = run_single(&config, topic, cell)?;
    let jsonl = log.to_jsonl(&header)?;
    match out {
        Some(path) => {
            fs::write(path, &jsonl).map_err(|source| Error::Io {
                path: path.to_path_buf(),
                source,
            })?;
            println!(
                "topic {topic} cell {}: {} queries, gain {} -> {}",
                header.config_id,
                log.queries_issued,
                log.total_gain,
                path.display()
            );
        }
        None => print!("{jsonl}"),
    }
    Ok(())
}

fn simulate_sweep(config_args: &ConfigArgs, jobs: Option<usize>) -> Result<()> {
    let config = load_config(config_args)?;
    let report = run_experiment(&config, jobs)?;
    for warning in &report.warnings {
        log::warn!("{warning}");
    }
    for id in &report.cell_ids {
        let status = if report.skipped_cells.contains(id) {
            "kept"
        } else {
            "written"
        };
        println!("cell {id} {status}");
    }
    println!(
        "sweep complete: {} cell(s) under {}",
        report.cell_ids.len(),
        report.dir.display()
    );
    Ok(())
}

fn read_log(path: &Path) -> Result<SessionLog> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let (_, log) = SessionLog::from_jsonl(&text)?;
    Ok(log)
}

fn print_or_write_curve(points: &[(f64, f64)], label: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            let stats: Vec<CurveStat> = points
                .iter()
                .map(|&(x, y)| CurveStat {
                    x,
                    mean: y,
                    n: 1,
                    stddev: 0.0,
                })
                .collect();
            write_curve_csv(path, &stats)?;
            println!("wrote {} points -> {}", stats.len(), path.display());
        }
        None => {
            for (x, y) in points {
                println!("{label}={x}\tvalue={y}");
            }
        }
    }
    Ok(())
}

fn eval_sdcg(
    log_path: &Path,
    doc_log_base: f64,
    query_log_base: f64,
    out: Option<&Path>,
) -> Result<()> {
    let log = read_log(log_path)?;
    let params = SdcgParams {
        doc_log_base,
        query_log_base,
    };
    let curve = sdcg_curve(&log, &params)?;
    print_or_write_curve(curve.points(), "query", out)?;
    println!("final sdcg: {}", curve.final_value());
    Ok(())
}

fn eval_timegain(log_path: &Path, out: Option<&Path>) -> Result<()> {
    let log = read_log(log_path)?;
    let curve = time_gain_curve(&log)?;
    print_or_write_curve(curve.points(), "t", out)?;
    println!("final gain: {}", curve.final_value());
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        num_topics: args.topics,
        background_tables: args.backgrounds,
        modality_flip: args.flip,
        variants_per_topic: args.variants,
        seed: args.seed,
    };
    let data = generate(&spec)?;
    let paths = write_files(&data, &args.out)?;
    println!(
        "generated {} tables, {} topics under {}",
        data.corpus.len(),
        data.topics.len(),
        args.out.display()
    );

    // A ready-to-run config next to the data keeps the demo to two commands.
    let config = serde_json::json!({
        "inputs": {
            "corpus": paths.corpus,
            "topics": paths.topics,
            "table_qrels": paths.table_qrels,
            "modality_qrels": paths.modality_qrels,
            "query_variants": paths.query_variants,
        },
        "strategy": "d2q_feedback",
        "seed": args.seed,
        "output": args.out.join("runs").join("demo"),
    });
    let config_path = args.out.join("experiment.json");
    fs::write(&config_path, serde_json::to_string_pretty(&config)? + "\n").map_err(|source| {
        Error::Io {
            path: config_path.clone(),
            source,
        }
    })?;
    println!("wrote starter config -> {}", config_path.display());
    Ok(())
}
