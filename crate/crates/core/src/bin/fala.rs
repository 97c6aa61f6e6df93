// Command-line front end: replay launch logs, generate synthetic streams,
// and re-score existing record files.
//
// Exit codes: 0 success, 1 input/schema error, 2 some users failed.

use std::fs;
use std::io::{BufWriter, Write};
use std::num::NonZeroUsize;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fala_core::engine::{DEFAULT_DELTA_MS, DEFAULT_K, DEFAULT_LAMBDA};
use fala_core::harness::replay::DEFAULT_WINDOW;
use fala_core::harness::synth::app_name;
use fala_core::harness::{
    emit_reports, emit_rescored, parse_events, peaked_matrix, read_records, replay, synth_markov,
    EventStream, InputFormat, RunConfig, SyntheticSpec,
};
use fala_core::{DcgVariant, DeltaThreshold, EngineConfig, PredictorKind, RewardScope};

#[derive(Parser)]
#[command(name = "fala", version, about = "Learning-automata next-app prediction and evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replay a launch log through FALA, MRU and MFU and write reports.
    Replay(ReplayArgs),
    /// Generate a synthetic launch log from a Markov chain.
    Synth(SynthArgs),
    /// Re-score an existing records.csv.
    Metrics(MetricsArgs),
}

#[derive(Args)]
struct ReplayArgs {
    /// Launch log (columns user_id,timestamp_ms,app_name).
    #[arg(long)]
    input: PathBuf,
    /// Input encoding: csv or jsonl.
    #[arg(long, default_value = "csv")]
    format: InputFormat,
    /// Learning rate λ, 0 < λ < 1.
    #[arg(long = "lambda", default_value_t = DEFAULT_LAMBDA)]
    lambda: f64,
    /// Transition window Δ in milliseconds, or "inf".
    #[arg(long = "delta-ms", default_value_t = DeltaThreshold::Millis(DEFAULT_DELTA_MS))]
    delta: DeltaThreshold,
    /// Size of the offered top-k list.
    #[arg(long, default_value_t = DEFAULT_K)]
    k: usize,
    /// Rolling window for timeseries.csv.
    #[arg(long, default_value_t = NonZeroUsize::new(DEFAULT_WINDOW).unwrap())]
    window: NonZeroUsize,
    /// Recorded in summary.json.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// in-ktop or always-actual.
    #[arg(long = "reward-scope", default_value = "in-ktop")]
    reward_scope: RewardScope,
    /// printed (1/log2 p) or conventional (1/log2 (p+1)).
    #[arg(long = "dcg-variant", default_value = "printed")]
    dcg_variant: DcgVariant,
    /// Comma-separated subset of fala,mru,mfu.
    #[arg(long, value_delimiter = ',', default_value = "fala,mru,mfu")]
    predictors: Vec<PredictorKind>,
    /// Also score Δ-gated transitions, counting them as FALA misses.
    #[arg(long = "gated-as-miss")]
    gated_as_miss: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of apps (ignored when --matrix is given).
    #[arg(long = "n-apps", default_value_t = 5)]
    n_apps: usize,
    /// Probability of each row's preferred successor.
    #[arg(long, default_value_t = 0.7)]
    peak: f64,
    /// Row-stochastic matrix as a header-less CSV file.
    #[arg(long)]
    matrix: Option<PathBuf>,
    /// Events per user.
    #[arg(long, default_value_t = 10_000)]
    events: usize,
    /// Number of users; user i uses seed + i.
    #[arg(long, default_value_t = 1)]
    users: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long = "inter-arrival-ms", default_value_t = 1_000)]
    inter_arrival_ms: u64,
    /// Output encoding: csv or jsonl.
    #[arg(long, default_value = "csv")]
    format: InputFormat,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    /// records.csv from a previous replay.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = NonZeroUsize::new(DEFAULT_WINDOW).unwrap())]
    window: NonZeroUsize,
    #[arg(long = "dcg-variant", default_value = "printed")]
    dcg_variant: DcgVariant,
    /// Output directory for summary.json and timeseries.csv.
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Replay(args) => run_replay(args),
        Command::Synth(args) => run_synth(args),
        Command::Metrics(args) => run_metrics(args),
    };
    match result {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run_replay(args: ReplayArgs) -> Result<ExitCode, String> {
    let engine = EngineConfig::new(args.lambda, args.delta, args.k, args.reward_scope)
        .map_err(|e| e.to_string())?;
    let mut config = RunConfig::new(engine).with_predictors(&args.predictors);
    config.window = args.window;
    config.gated_as_miss = args.gated_as_miss;
    config.dcg_variant = args.dcg_variant;
    config.seed = args.seed;

    let stream = parse_events(&args.input, args.format).map_err(|e| e.to_string())?;
    let output = replay(&stream, &config);
    emit_reports(&output, &config, &args.out).map_err(|e| e.to_string())?;

    for s in &output.summaries {
        println!(
            "{:<5} recall@{}={:.4} dcg={:.4} mrr={:.4} n={}",
            s.predictor, config.engine.k, s.recall_at_k, s.dcg, s.mrr, s.count
        );
    }
    for f in &output.failures {
        eprintln!("user {} failed: {}", f.user, f.error);
    }
    if output.failures.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "{} of {} users failed",
            output.failures.len(),
            output.failures.len() + output.users.len()
        );
        Ok(ExitCode::from(2))
    }
}

fn read_matrix(path: &Path) -> Result<Vec<Vec<f64>>, String> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| format!("{}: {e}", path.display()))?;
    rdr.records()
        .map(|row| {
            let row = row.map_err(|e| e.to_string())?;
            row.iter()
                .map(|v| v.trim().parse::<f64>().map_err(|e| format!("matrix entry {v:?}: {e}")))
                .collect()
        })
        .collect()
}

fn run_synth(args: SynthArgs) -> Result<ExitCode, String> {
    let matrix = match &args.matrix {
        Some(path) => read_matrix(path)?,
        None => peaked_matrix(args.n_apps, args.peak),
    };
    let mut events = Vec::with_capacity(args.events * args.users);
    for i in 0..args.users {
        let mut spec = SyntheticSpec::new(matrix.clone(), args.events, args.seed.wrapping_add(i as u64));
        spec.inter_arrival_ms = args.inter_arrival_ms;
        spec.user = format!("user{i}");
        let stream = synth_markov(&spec).map_err(|e| e.to_string())?;
        events.extend(stream.users.into_iter().flat_map(|u| u.events));
    }
    let stream = EventStream::from_events(events);
    write_stream(&stream, args.format, &args.out).map_err(|e| format!("{}: {e}", args.out.display()))?;
    eprintln!(
        "wrote {} events over {} apps ({}..{}) to {}",
        stream.event_count(),
        matrix.len(),
        app_name(0),
        app_name(matrix.len().saturating_sub(1)),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn write_stream(stream: &EventStream, format: InputFormat, path: &Path) -> std::io::Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    let mut out = BufWriter::new(fs::File::create(path)?);
    match format {
        InputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["user_id", "timestamp_ms", "app_name"])?;
            for e in stream.events() {
                w.write_record([e.user.as_str(), &e.timestamp_ms.to_string(), e.app.as_str()])?;
            }
            w.flush()?;
        }
        InputFormat::Jsonl => {
            for e in stream.events() {
                let line = serde_json::json!({
                    "user_id": e.user,
                    "timestamp_ms": e.timestamp_ms,
                    "app_name": e.app,
                });
                writeln!(out, "{line}")?;
            }
            out.flush()?;
        }
    }
    Ok(())
}

fn run_metrics(args: MetricsArgs) -> Result<ExitCode, String> {
    let records = read_records(&args.input).map_err(|e| e.to_string())?;
    let report = emit_rescored(&records, args.dcg_variant, args.window, &args.out)
        .map_err(|e| e.to_string())?;
    for s in &report.summaries {
        println!(
            "{:<5} recall={:.4} dcg={:.4} mrr={:.4} n={}",
            s.predictor, s.recall_at_k, s.dcg, s.mrr, s.count
        );
    }
    Ok(ExitCode::SUCCESS)
}
