use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use txwatch::app::{emit_plot_data, evaluate, read_labels, report_series, synth_generate, write_labels, SynthConfig};
use txwatch::ensemble::{
    cells_from_transactions, read_jsonl, run_batch, write_jsonl, write_jsonl_to, Config, DetectorKind, EnsembleReport,
    Mode, StreamEngine,
};
use txwatch::ingest::{infer_account, read_transactions, write_csv, FeatureKind};
use txwatch::{Error, Result};

#[derive(Parser)]
#[command(name = "txwatch", version, about = "Categorized ensemble anomaly detection for account transaction streams")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the detector ensemble over a transaction history.
    #[command(subcommand)]
    Detect(Detect),
    /// Generate a labeled synthetic history.
    Synth(SynthArgs),
    /// Score a report against labels.
    Eval(EvalArgs),
    /// Write per-feature CSV tables for plotting.
    Plotdata(PlotArgs),
}

#[derive(Subcommand)]
enum Detect {
    /// Fit on the first part of the history and score all of it.
    Batch(BatchArgs),
    /// Replay the history through the rolling engine.
    Stream(StreamArgs),
}

#[derive(Args)]
struct Common {
    /// Explorer JSON (`txlist`) or CSV input.
    #[arg(long)]
    input: PathBuf,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated: value, gasprice, gaslimit.
    #[arg(long)]
    features: Option<String>,
    #[arg(long)]
    mode: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Grid step in seconds.
    #[arg(long)]
    grid: Option<i64>,
    /// Report file (JSON lines).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BatchArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct StreamArgs {
    #[command(flatten)]
    common: Common,
    /// Window length in seconds; cells are fed one window at a time.
    #[arg(long)]
    window: Option<i64>,
    /// Retrain interval in seconds.
    #[arg(long)]
    retrain: Option<i64>,
    /// Seconds of history used to bootstrap the models; defaults to the
    /// database span.
    #[arg(long)]
    bootstrap: Option<i64>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Match tolerance in seconds.
    #[arg(long, default_value_t = 120)]
    tolerance: u64,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    report: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Configuration naming the detectors that voted.
    #[arg(long)]
    config: Option<PathBuf>,
}

fn load_config(c: &Common) -> Result<Config> {
    let mut cfg = match &c.config {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    if let Some(f) = &c.features {
        cfg.set("features", f)?;
    }
    if let Some(m) = &c.mode {
        cfg.mode = m.parse::<Mode>()?;
    }
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(g) = c.grid {
        cfg.grid = g;
    }
    Ok(cfg)
}

fn warn(lines: impl IntoIterator<Item = String>) {
    for l in lines {
        eprintln!("warning: {l}");
    }
}

fn detect_batch(a: &BatchArgs) -> Result<()> {
    let cfg = load_config(&a.common)?;
    let txs = read_transactions(&a.common.input, cfg.parse_options())?;
    let report = run_batch(&txs, &cfg)?;
    warn(report.warnings.iter().cloned());
    warn(report.detector_errors.iter().map(|(id, e)| format!("{id} not fitted: {e}")));
    write_jsonl(&report.points, &a.common.out)?;
    eprintln!(
        "{} cells, {} alarms",
        report.points.len(),
        report.points.iter().filter(|p| p.alarm).count()
    );
    Ok(())
}

fn detect_stream(a: &StreamArgs) -> Result<()> {
    let mut cfg = load_config(&a.common)?;
    if let Some(w) = a.window {
        cfg.window = w;
    }
    if let Some(r) = a.retrain {
        cfg.retrain = r;
    }
    cfg.validate()?;
    let txs = read_transactions(&a.common.input, cfg.parse_options())?;
    let account = if cfg.account.is_empty() {
        infer_account(&txs)
    } else {
        cfg.account.clone()
    };
    let cells = cells_from_transactions(&txs, cfg.grid)?;
    let span = a.bootstrap.unwrap_or(cfg.database);
    let boot = cells
        .iter()
        .position(|c| c.start >= cells[0].start + span)
        .ok_or_else(|| Error::InvalidInput(format!("history is shorter than the {span}s bootstrap span")))?;
    let chunk = cfg.window_cells();
    let mut engine = StreamEngine::bootstrap(cfg, account, &cells[..boot])?;
    if let Some(bank) = engine.bank() {
        warn(bank.errors.iter().map(|(id, e)| format!("{id} not fitted: {e}")));
    }
    let mut points = Vec::new();
    let stdout = std::io::stdout();
    let mut alarms_out = stdout.lock();
    for window in cells[boot..].chunks(chunk) {
        let step = engine.advance(window)?;
        warn(step.notices);
        write_jsonl_to(&step.alarms, &mut alarms_out).map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        })?;
        points.extend(step.finalized);
    }
    points.extend(engine.flush());
    alarms_out.flush().ok();
    write_jsonl(&points, &a.common.out)?;
    eprintln!("{} cells scored, {} retrains", points.len(), engine.retrain_count() - 1);
    Ok(())
}

fn synth(a: &SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => SynthConfig::load(p)?,
        None => SynthConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    let (txs, labels) = synth_generate(&cfg)?;
    write_csv(&txs, &a.out)?;
    write_labels(&labels, &a.labels)?;
    eprintln!("{} transactions, {} labels", txs.len(), labels.len());
    Ok(())
}

fn eval(a: &EvalArgs) -> Result<()> {
    let points = read_jsonl(&a.report)?;
    let labels: Vec<i64> = read_labels(&a.labels)?.iter().map(|l| l.timestamp).collect();
    let m = evaluate(&points, &labels, a.tolerance);
    println!("{}", serde_json::to_string(&m).expect("metrics serialize"));
    Ok(())
}

fn plotdata(a: &PlotArgs) -> Result<()> {
    let points = read_jsonl(&a.report)?;
    let detectors = match &a.config {
        Some(p) => Config::load(p)?.detectors,
        None => DetectorKind::ALL.to_vec(),
    };
    let report = EnsembleReport {
        detectors: detectors.iter().map(|k| k.id().to_string()).collect(),
        points,
        ..Default::default()
    };
    let series = report_series(&report.points);
    if series.is_empty() {
        let names: Vec<&str> = FeatureKind::ALL.iter().map(|f| f.name()).collect();
        return Err(Error::InvalidInput(format!("report records carry none of the feature values {names:?}")));
    }
    for path in emit_plot_data(&report, &series, &a.out)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Detect(Detect::Batch(a)) => detect_batch(a),
        Command::Detect(Detect::Stream(a)) => detect_stream(a),
        Command::Synth(a) => synth(a),
        Command::Eval(a) => eval(a),
        Command::Plotdata(a) => plotdata(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
