//! Argument parsing and the subcommand implementations.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use distill::eval::{to_csv_string, PerturbationConfig};
use distill::lexical::{summarize_reports, Detector};
use distill::session::{load_corpus, AbstractionPlan, GroupingPlan};
use distill::validate_trace;
use distill::{
    domains, evaluate_trace_set, filter_trace, ActionRef, Domain, FilterConfig, GoalSet, PipelineInput, Planner,
    SessionStore, Trace,
};

#[derive(Debug, Parser)]
#[command(
    name = "distill",
    version,
    about = "Filter, abstract and group robot task demonstrations"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the session API over HTTP.
    Serve(ServeArgs),
    /// Run all five phases headlessly and print the session export.
    Pipeline(PipelineArgs),
    /// Filter one demonstration and print the result with its audit.
    Filter(FilterArgs),
    /// Compute metrics for a corpus and write them as CSV.
    Eval(EvalArgs),
    /// Detect ordering cues in texts, one per line.
    Lexical(LexicalArgs),
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, env = "DISTILL_DATA_DIR", default_value = "distill-data")]
    pub data_dir: PathBuf,
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Extra domain files served next to the built-in ones.
    #[arg(long = "domain", value_name = "FILE")]
    pub domains: Vec<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupingArg {
    Single,
    Sequential,
}

#[derive(Debug, Args)]
pub struct PipelineArgs {
    /// Built-in domain id or domain file.
    #[arg(long)]
    pub domain: String,
    /// Natural-language instruction file.
    #[arg(long)]
    pub nl: PathBuf,
    /// Demonstration: a JSON array of actions or one action per line.
    #[arg(long)]
    pub trace: PathBuf,
    /// Defaults to the trace file name.
    #[arg(long)]
    pub source_id: Option<String>,
    /// Turn every kept step into its goals.
    #[arg(long)]
    pub abstract_all: bool,
    #[arg(long, value_enum, default_value_t = GroupingArg::Single)]
    pub grouping: GroupingArg,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub domain: String,
    #[arg(long)]
    pub trace: PathBuf,
    /// Advance the planning state after every retained action too.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub domain: String,
    /// Session exports or JSON-lines corpora; repeatable.
    #[arg(long = "corpus", value_name = "FILE", required = true)]
    pub corpora: Vec<PathBuf>,
    /// Named goal set of the domain.
    #[arg(long, conflicts_with = "atoms", required_unless_present = "atoms")]
    pub goal: Option<String>,
    /// Goal atom such as `has(doctor, ibuprofen)`; repeatable.
    #[arg(long = "atom", value_name = "ATOM")]
    pub atoms: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
    #[arg(long, default_value_t = distill::eval::DEFAULT_RETRY_LIMIT)]
    pub retry_limit: usize,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LexicalArgs {
    /// Texts, one per line.
    #[arg(long)]
    pub input: PathBuf,
    /// Use this domain's verb lexicon.
    #[arg(long)]
    pub domain: Option<String>,
    /// Per-category summary CSV.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

/// A built-in domain id, or a path to a domain file.
pub fn load_domain(arg: &str) -> anyhow::Result<Domain> {
    if let Some(d) = domains::builtin(arg) {
        return Ok(d);
    }
    Domain::load(arg).with_context(|| format!("loading domain {arg}"))
}

/// Parses a JSON array of actions, or one action per line (`#` comments).
pub fn parse_actions(text: &str) -> anyhow::Result<Vec<ActionRef>> {
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(text)?);
    }
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.parse().with_context(|| format!("bad action {l:?}")))
        .collect()
}

fn read(path: &Path) -> anyhow::Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Serve(args) => serve(args),
        Command::Pipeline(args) => pipeline(args),
        Command::Filter(args) => filter(args),
        Command::Eval(args) => eval(args),
        Command::Lexical(args) => lexical(args),
    }
}

fn serve(args: ServeArgs) -> anyhow::Result<ExitCode> {
    let mut all = vec![domains::hospital(), domains::mini()];
    for path in &args.domains {
        all.push(Domain::load(path).with_context(|| format!("loading {}", path.display()))?);
    }
    let store = Arc::new(SessionStore::open(&args.data_dir, all)?);
    let addr = SocketAddr::new(args.host, args.port);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        tracing::info!(%addr, data_dir = %args.data_dir.display(), "serving");
        axum::serve(listener, crate::server::router(store))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        anyhow::Ok(())
    })?;
    Ok(ExitCode::SUCCESS)
}

fn pipeline(args: PipelineArgs) -> anyhow::Result<ExitCode> {
    let domain = load_domain(&args.domain)?;
    let source_id = match args.source_id {
        Some(id) => id,
        None => args
            .trace
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "pipeline".into()),
    };
    let input = PipelineInput {
        source_id,
        nl: read(&args.nl)?.trim().to_string(),
        actions: parse_actions(&read(&args.trace)?)?,
        overrides: Vec::new(),
        abstraction: if args.abstract_all {
            AbstractionPlan::All
        } else {
            AbstractionPlan::None
        },
        grouping: match args.grouping {
            GroupingArg::Single => GroupingPlan::Single,
            GroupingArg::Sequential => GroupingPlan::Sequential,
        },
    };
    let session = distill::run_pipeline(&domain, &input, chrono::Utc::now())?;
    emit(args.out.as_deref(), &(session.export().to_json() + "\n"))?;
    Ok(ExitCode::SUCCESS)
}

fn filter(args: FilterArgs) -> anyhow::Result<ExitCode> {
    let domain = load_domain(&args.domain)?;
    let id = args
        .trace
        .file_stem()
        .map_or("trace".into(), |s| s.to_string_lossy().into_owned());
    let trace = Trace::user_created(id, parse_actions(&read(&args.trace)?)?);
    let report = validate_trace(&trace, &domain);
    if !report.is_valid() {
        return Err(distill::Error::InvalidSteps(report).into());
    }
    let config = FilterConfig {
        strict_simulation: args.strict,
    };
    let result = filter_trace(&Planner::new(&domain), &trace, domain.initial_state(), config)?;
    println!("{}", serde_json::to_string_pretty(&result)?);
    Ok(ExitCode::SUCCESS)
}

fn eval(args: EvalArgs) -> anyhow::Result<ExitCode> {
    let domain = load_domain(&args.domain)?;
    let goals: GoalSet = match &args.goal {
        Some(name) => domain.goal(name)?.clone(),
        None => {
            let goals: GoalSet = args.atoms.iter().map(|a| a.parse()).collect::<Result<_, _>>()?;
            goals.iter().try_for_each(|a| domain.check_atom(a))?;
            goals
        }
    };
    let mut corpus = distill::Corpus::default();
    for path in &args.corpora {
        corpus.extend(load_corpus(&read(path)?).with_context(|| format!("parsing {}", path.display()))?);
    }
    if corpus.traces.is_empty() && corpus.specs.is_empty() {
        bail!("the corpus is empty");
    }
    let config = PerturbationConfig {
        retry_limit: args.retry_limit,
        ..PerturbationConfig::new(args.seed, args.trials)
    };
    let rows = evaluate_trace_set(&Planner::new(&domain), &corpus, &goals, &config)?;
    emit(args.out.as_deref(), &to_csv_string(&rows)?)?;
    let failed: Vec<_> = rows.iter().filter(|r| r.error.is_some()).collect();
    for r in &failed {
        eprintln!("{}: {}", r.trace_id, r.error.as_deref().unwrap_or_default());
    }
    Ok(if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn lexical(args: LexicalArgs) -> anyhow::Result<ExitCode> {
    let detector = match &args.domain {
        Some(d) => match load_domain(d)?.verbs() {
            Some(verbs) => Detector::new(verbs),
            None => Detector::new(&distill::lexical::DEFAULT_VERBS),
        },
        None => Detector::new(&distill::lexical::DEFAULT_VERBS),
    };
    let text = read(&args.input)?;
    let reports: Vec<_> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| detector.detect(l))
        .collect();
    let mut out = std::io::stdout().lock();
    for r in &reports {
        serde_json::to_writer(&mut out, r)?;
        writeln!(out)?;
    }
    if let Some(path) = &args.summary {
        let mut w = csv::Writer::from_path(path)?;
        for row in summarize_reports(&reports) {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    Ok(ExitCode::SUCCESS)
}
