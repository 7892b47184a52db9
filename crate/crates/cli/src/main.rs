//! `cdgain` command line: target and plan generation, agent simulation, the
//! live-session server, analysis and report rendering.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cdgain::agent::AgentError;
use cdgain::batch::simulate_batch;
use cdgain::experiment::{generate_target_set, plan_session, ExperimentError, Method};
use cdgain::io::{
    agent_transcript, load_config, read_log_file, render_json, render_text, serve, write_log, write_log_file, ConfigError,
    LogError, SessionConfig, CONFIG_ENV,
};
use cdgain::stats::{analyze_records, AnalysisReport, StatsError, DEFAULT_ALPHA};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

#[derive(Parser)]
#[command(name = "cdgain", version, about = "Control-display gain pointing experiments")]
struct Cli {
    /// JSON session config; missing keys take their defaults.
    #[arg(long, global = true, env = CONFIG_ENV)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the target set, or a subject's counterbalanced plan, as JSON.
    Generate(GenerateArgs),
    /// Run synthetic subjects and write their trial log.
    Simulate(SimulateArgs),
    /// Accept live sessions over TCP (newline-delimited JSON).
    Serve(ServeArgs),
    /// Run the statistics pipeline on a trial log and print it as JSON.
    Analyze(AnalyzeArgs),
    /// Render analysis tables from a trial log or an `analyze` output.
    Report(ReportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Targets,
    Plan,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum, default_value = "targets")]
    what: What,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subject: Option<u32>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Number of subjects in the batch.
    #[arg(long)]
    subjects: Option<u32>,
    /// Trial log path (.jsonl or .csv); stdout as JSON lines when omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Instead of a batch, write the client side of one wire session for
    /// `--method`, `--subject` and `--trials`.
    #[arg(long)]
    transcript: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    subject: Option<u32>,
    #[arg(long)]
    trials: Option<usize>,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:7878")]
    addr: String,
    /// Directory receiving one trial log per ended session.
    #[arg(long, default_value = "logs")]
    log_dir: PathBuf,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Trial log (.jsonl or .csv).
    log: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct ReportArgs {
    /// Trial log (.jsonl, .csv) or analysis JSON (.json).
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Failure split by exit code: 1 for bad input, 2 for everything else.
enum Failure {
    Validation(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<LogError> for Failure {
    fn from(e: LogError) -> Self {
        match e {
            LogError::Io(_) => Failure::Runtime(e.to_string()),
            _ => Failure::Validation(e.to_string()),
        }
    }
}

impl From<AgentError> for Failure {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::InvalidParams { .. } => Failure::Validation(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        Failure::Validation(e.to_string())
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

fn load(path: Option<&Path>) -> Result<SessionConfig, Failure> {
    match path {
        Some(p) => {
            info!("config: {}", p.display());
            Ok(load_config(p).map_err(|e| match e {
                ConfigError::Io(io) => Failure::Runtime(format!("{}: {io}", p.display())),
                other => other.into(),
            })?)
        }
        None => Ok(SessionConfig::default()),
    }
}

/// Writes to `out`, or stdout when `None`.
fn emit(out: Option<&Path>, body: &[u8]) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, body).map_err(|e| Failure::Runtime(format!("{}: {e}", p.display()))),
        None => {
            let mut stdout = io::stdout().lock();
            stdout.write_all(body)?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(v).expect("serializable");
    s.push(b'\n');
    s
}

fn generate(cfg: SessionConfig, a: GenerateArgs) -> Result<(), Failure> {
    let seed = a.seed.unwrap_or(cfg.seed);
    let body = match a.what {
        What::Targets => to_json(&generate_target_set(&cfg.setup.display, seed)?),
        What::Plan => to_json(&plan_session(a.subject.unwrap_or(cfg.subject), &cfg.setup.display, seed)?),
    };
    emit(a.out.as_deref(), &body)
}

fn simulate(mut cfg: SessionConfig, a: SimulateArgs) -> Result<(), Failure> {
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    cfg.subjects = a.subjects.unwrap_or(cfg.subjects);
    cfg.method = a.method.unwrap_or(cfg.method);
    cfg.subject = a.subject.unwrap_or(cfg.subject);
    cfg.trials = a.trials.or(cfg.trials);
    cfg.validate()?;

    if let Some(path) = a.transcript {
        let msgs = agent_transcript(&cfg, None)?;
        let body: String = msgs.iter().map(|m| m.to_line() + "\n").collect();
        info!("transcript of {} messages", msgs.len());
        return emit(Some(&path), body.as_bytes());
    }

    let records = simulate_batch(cfg.subjects, &cfg.setup, &cfg.agent, cfg.seed)?;
    info!("simulated {} records for {} subjects", records.len(), cfg.subjects);
    match a.out {
        Some(p) => Ok(write_log_file(&p, &records)?),
        None => Ok(write_log(BufWriter::new(io::stdout().lock()), &records)?),
    }
}

fn run_serve(cfg: SessionConfig, a: ServeArgs) -> Result<(), Failure> {
    cfg.validate()?;
    let listener = TcpListener::bind(&a.addr).map_err(|e| Failure::Runtime(format!("bind {}: {e}", a.addr)))?;
    eprintln!("listening on {}", listener.local_addr()?);
    serve(listener, cfg, Some(a.log_dir))?;
    Ok(())
}

fn analysis_of(path: &Path, alpha: f64) -> Result<AnalysisReport, Failure> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Failure::Validation(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    let records = read_log_file(path)?;
    if records.is_empty() {
        return Err(Failure::Validation(format!("{}: log has no records", path.display())));
    }
    Ok(analyze_records(&records, alpha)?)
}

fn analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    let report = analysis_of(&a.log, a.alpha)?;
    emit(a.out.as_deref(), (render_json(&report) + "\n").as_bytes())
}

fn report(a: ReportArgs) -> Result<(), Failure> {
    let is_analysis = a.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let report: AnalysisReport = if is_analysis {
        let text = fs::read_to_string(&a.input).map_err(|e| Failure::Runtime(format!("{}: {e}", a.input.display())))?;
        serde_json::from_str(&text).map_err(|e| Failure::Validation(format!("{}: {e}", a.input.display())))?
    } else {
        analysis_of(&a.input, a.alpha)?
    };
    let body = match a.format {
        Format::Text => render_text(&report),
        Format::Json => render_json(&report) + "\n",
    };
    emit(a.out.as_deref(), body.as_bytes())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Report(a) => report(a),
        cmd => {
            let cfg = load(cli.config.as_deref())?;
            match cmd {
                Command::Generate(a) => generate(cfg, a),
                Command::Simulate(a) => simulate(cfg, a),
                Command::Serve(a) => run_serve(cfg, a),
                Command::Analyze(_) | Command::Report(_) => unreachable!(),
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
