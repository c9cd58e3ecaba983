//! The `mmm` command line.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mmm_core::eval::{render_report, score_sample, EvalReport};
use mmm_core::filter::{run_filters, FilterConfig};
use mmm_core::lexicon::LabelLexicon;
use mmm_core::split::{split_train_test, SplitSpec};
use mmm_core::stats::compute_stats;
use mmm_core::{DatasetId, Language, RecordStatus};
use serde::Deserialize;

use crate::config::{load_lexicon, TemplateSet};
use crate::corpus::{self, SplitManifest};
use crate::gateway::{Cassette, HttpTransport, Provider, RetryPolicy, API_KEY_VAR};
use crate::review::{self, ReviewStore};
use crate::translate::{Translator, DEFAULT_CONCURRENCY};

#[derive(Debug, Parser)]
#[command(
    name = "mmm",
    version,
    about = "Translate, filter, review, split and evaluate MMM datasets"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Translate a source corpus into translation records
    Translate(TranslateArgs),
    /// Run the filter chain over translation records
    Filter(FilterArgs),
    /// Serve the review API over filtered records
    ServeReview(ServeArgs),
    /// Apply the review audit log and write the accepted corpus
    Export(ExportArgs),
    /// Split a corpus into train and test sets
    Split(SplitArgs),
    /// Per-cell corpus statistics
    Stats(StatsArgs),
    /// Score generations against a gold corpus
    Eval(EvalArgs),
    /// Label open-domain samples with the model, as records for review
    Annotate(AnnotateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Live,
    Record,
    Replay,
}

#[derive(Debug, Args)]
pub struct GatewayArgs {
    /// live calls the endpoint; record also appends to the cassette; replay
    /// answers only from the cassette
    #[arg(long, value_enum, default_value_t = ModeArg::Live)]
    pub mode: ModeArg,
    #[arg(long)]
    pub cassette: Option<PathBuf>,
    /// Chat completions URL; defaults to $MMM_LLM_ENDPOINT
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long, default_value = "gpt-3.5-turbo")]
    pub model: String,
    #[arg(long, default_value_t = DEFAULT_CONCURRENCY)]
    pub concurrency: usize,
    #[arg(long, default_value_t = 3)]
    pub max_attempts: u32,
    #[arg(long, default_value_t = 60)]
    pub timeout_secs: u64,
    /// Lexicon TSV replacing the bundled one
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Directory of prompt templates replacing the bundled ones
    #[arg(long)]
    pub templates: Option<PathBuf>,
    /// Use only the template with this id
    #[arg(long)]
    pub template: Option<String>,
}

#[derive(Debug, Args)]
pub struct TranslateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated target languages
    #[arg(long, value_delimiter = ',', required = true)]
    pub targets: Vec<Language>,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub gateway: GatewayArgs,
}

#[derive(Debug, Args)]
pub struct FilterConfigArgs {
    /// Require entities to match at token boundaries in spaced scripts
    #[arg(long)]
    pub token_boundary: bool,
    /// Check grounding of TCREE pairs too
    #[arg(long)]
    pub ground_tcree: bool,
}

impl FilterConfigArgs {
    fn config(&self) -> FilterConfig {
        FilterConfig {
            tcree_grounding_exempt: !self.ground_tcree,
            token_boundary: self.token_boundary,
        }
    }
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub accepted: PathBuf,
    #[arg(long)]
    pub rejected: PathBuf,
    /// Also write accepted candidates as a sample corpus
    #[arg(long)]
    pub corpus_out: Option<PathBuf>,
    /// Write retention counts as TSV
    #[arg(long)]
    pub stats: Option<PathBuf>,
    #[command(flatten)]
    pub filter: FilterConfigArgs,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Records from `filter --accepted`
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub audit: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[command(flatten)]
    pub filter: FilterConfigArgs,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long)]
    pub audit: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub filter: FilterConfigArgs,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub seed: u64,
    /// Train size for every cell, replacing the MMM defaults
    #[arg(long)]
    pub train_size: Option<usize>,
    /// Per-cell train size, e.g. SCNM/ja=800; repeatable
    #[arg(long = "cell-size", value_parser = parse_cell_size)]
    pub cell_sizes: Vec<(String, usize)>,
    /// Write the split manifest here
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableFormat {
    Table,
    Tsv,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value_t = TableFormat::Table)]
    pub format: TableFormat,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gold: PathBuf,
    /// Generations: JSONL of {"id", "output"}, or plain text with one
    /// output per line in gold order
    #[arg(long)]
    pub pred: PathBuf,
    /// Also write the report rows as JSON
    #[arg(long)]
    pub json: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub gateway: GatewayArgs,
}

fn parse_cell_size(s: &str) -> Result<(String, usize), String> {
    let (cell, size) = s.split_once('=').ok_or("expected DATASET/lang=N")?;
    let (dataset, lang) = cell.split_once('/').ok_or("expected DATASET/lang=N")?;
    let dataset: DatasetId = dataset.parse().map_err(|e| format!("{e}"))?;
    let lang: Language = lang.parse().map_err(|e| format!("{e}"))?;
    let size = size.parse().map_err(|_| format!("invalid size {size:?}"))?;
    Ok((SplitSpec::cell_key(dataset, lang), size))
}

/// Usage problems exit with 2, everything else with 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn require_file(path: &Path) -> Result<(), CliError> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage(format!("{}: no such file", path.display())))
    }
}

fn runtime<T, E>(r: Result<T, E>) -> Result<T, CliError>
where
    E: std::error::Error + Send + Sync + 'static,
{
    r.map_err(|e| CliError::Runtime(e.into()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Translate(a) => translate(a),
        Command::Filter(a) => filter(a),
        Command::ServeReview(a) => serve_review(a),
        Command::Export(a) => export(a),
        Command::Split(a) => split(a),
        Command::Stats(a) => stats(a),
        Command::Eval(a) => eval(a),
        Command::Annotate(a) => annotate(a),
    }
}

struct Gateway {
    provider: Provider,
    lexicon: LabelLexicon,
    templates: TemplateSet,
    model: String,
    concurrency: usize,
}

fn gateway(args: GatewayArgs) -> Result<Gateway, CliError> {
    if args.concurrency == 0 {
        return Err(usage("--concurrency must be at least 1"));
    }
    if args.max_attempts == 0 {
        return Err(usage("--max-attempts must be at least 1"));
    }
    let lexicon = match &args.lexicon {
        Some(p) => {
            require_file(p)?;
            runtime(load_lexicon(p))?
        }
        None => LabelLexicon::bundled(),
    };
    let mut templates = match &args.templates {
        Some(dir) if !dir.is_dir() => return Err(usage(format!("{}: no such directory", dir.display()))),
        Some(dir) => runtime(TemplateSet::load_dir(dir))?,
        None => TemplateSet::bundled(),
    };
    if let Some(id) = &args.template {
        templates.retain_id(id).map_err(|e| usage(e.to_string()))?;
    }
    let retry = RetryPolicy {
        max_attempts: args.max_attempts,
        ..RetryPolicy::default()
    };
    let transport = || -> Result<HttpTransport, CliError> {
        let timeout = Duration::from_secs(args.timeout_secs);
        match &args.endpoint {
            Some(url) => HttpTransport::new(url.clone(), std::env::var(API_KEY_VAR).ok(), timeout),
            None => HttpTransport::from_env(timeout),
        }
        .map_err(|e| usage(e.to_string()))
    };
    let provider = match (args.mode, &args.cassette) {
        (ModeArg::Replay, None) => return Err(usage("--mode replay requires --cassette")),
        (ModeArg::Record, None) => return Err(usage("--mode record requires --cassette")),
        (ModeArg::Live, Some(_)) => return Err(usage("--cassette needs --mode record or replay")),
        (ModeArg::Replay, Some(path)) => {
            require_file(path)?;
            Provider::replay(runtime(Cassette::open(path))?)
        }
        (ModeArg::Record, Some(path)) => {
            Provider::record(Box::new(transport()?), runtime(Cassette::open(path))?, retry)
        }
        (ModeArg::Live, None) => Provider::live(Box::new(transport()?), retry),
    };
    Ok(Gateway {
        provider,
        lexicon,
        templates,
        model: args.model,
        concurrency: args.concurrency,
    })
}

fn translate(args: TranslateArgs) -> Result<(), CliError> {
    require_file(&args.input)?;
    let gw = gateway(args.gateway)?;
    let sources = runtime(corpus::read_corpus(&args.input))?;
    let translator = Translator {
        lexicon: &gw.lexicon,
        templates: &gw.templates,
        provider: &gw.provider,
        model: gw.model.clone(),
    };
    let records = runtime(translator.translate_batch(&sources, &args.targets, gw.concurrency))?;
    runtime(corpus::write_records(&records, &args.out))?;
    let parsed = records.iter().filter(|r| r.candidate.is_some()).count();
    eprintln!(
        "translated {} records ({} parsed) into {}",
        records.len(),
        parsed,
        args.out.display()
    );
    Ok(())
}

fn filter(args: FilterArgs) -> Result<(), CliError> {
    require_file(&args.input)?;
    let records = runtime(corpus::read_records(&args.input))?;
    let outcome = runtime(run_filters(records, &args.filter.config()))?;
    runtime(corpus::write_records(&outcome.accepted, &args.accepted))?;
    runtime(corpus::write_records(&outcome.rejected, &args.rejected))?;
    if let Some(path) = &args.corpus_out {
        let samples: Vec<_> = outcome.accepted.iter().filter_map(|r| r.candidate.clone()).collect();
        runtime(corpus::write_corpus(&samples, path))?;
    }
    if let Some(path) = &args.stats {
        runtime(corpus::write_atomic(path, outcome.stats.to_tsv().as_bytes()))?;
    }
    if !outcome.stats.is_balanced() {
        return Err(anyhow::anyhow!("retention counts do not balance").into());
    }
    print!("{}", outcome.stats.render_table());
    Ok(())
}

fn serve_review(args: ServeArgs) -> Result<(), CliError> {
    require_file(&args.records)?;
    let store = runtime(ReviewStore::open(&args.records, &args.audit, args.filter.config()))?;
    let rt = runtime(tokio::runtime::Runtime::new())?;
    runtime(rt.block_on(review::serve(Arc::new(store), args.addr)))
}

fn export(args: ExportArgs) -> Result<(), CliError> {
    require_file(&args.records)?;
    require_file(&args.audit)?;
    let store = runtime(ReviewStore::open(&args.records, &args.audit, args.filter.config()))?;
    let manifest = runtime(store.export_accepted(&args.out))?;
    eprintln!("exported {} samples to {}", manifest.count, args.out.display());
    Ok(())
}

fn split(args: SplitArgs) -> Result<(), CliError> {
    require_file(&args.input)?;
    let mut spec = SplitSpec::with_seed(args.seed);
    spec.uniform_train_size = args.train_size;
    spec.train_sizes.extend(args.cell_sizes);
    let samples = runtime(corpus::read_corpus(&args.input))?;
    let split = runtime(split_train_test(samples, &spec))?;
    runtime(corpus::write_corpus(&split.train, &args.train))?;
    runtime(corpus::write_corpus(&split.test, &args.test))?;
    if let Some(path) = &args.manifest {
        runtime(SplitManifest::new(&spec, &split).write(path))?;
    }
    eprintln!("train {} / test {}", split.train.len(), split.test.len());
    Ok(())
}

fn stats(args: StatsArgs) -> Result<(), CliError> {
    require_file(&args.input)?;
    let samples = runtime(corpus::read_corpus(&args.input))?;
    let stats = compute_stats(&samples);
    match args.format {
        TableFormat::Table => print!("{}", stats.render_table()),
        TableFormat::Tsv => print!("{}", stats.to_tsv()),
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
struct Prediction {
    id: String,
    output: String,
}

/// Generations aligned with `gold`. JSONL predictions are matched by id,
/// and a gold sample without one scores as an empty generation. Plain
/// text must have exactly one line per gold sample.
fn load_predictions(path: &Path, gold: &[mmm_core::Sample]) -> anyhow::Result<Vec<String>> {
    if path.extension().is_some_and(|e| e == "jsonl") {
        let preds: Vec<Prediction> = corpus::read_jsonl(path, |p: &Prediction| p.id.as_str())?;
        let mut by_id: HashMap<String, String> = preds.into_iter().map(|p| (p.id, p.output)).collect();
        return Ok(gold.iter().map(|g| by_id.remove(&g.id).unwrap_or_default()).collect());
    }
    let text = fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let lines: Vec<String> = text.lines().map(str::to_owned).collect();
    anyhow::ensure!(
        lines.len() == gold.len(),
        "{}: {} predictions for {} gold samples",
        path.display(),
        lines.len(),
        gold.len()
    );
    Ok(lines)
}

fn eval(args: EvalArgs) -> Result<(), CliError> {
    require_file(&args.gold)?;
    require_file(&args.pred)?;
    let gold = runtime(corpus::read_corpus(&args.gold))?;
    let preds = load_predictions(&args.pred, &gold)?;
    let report = EvalReport::from_scores(
        gold.iter()
            .zip(&preds)
            .map(|(g, p)| (g.dataset, g.language, score_sample(g, p, g.dataset.is_tcree()))),
    );
    print!("{}", render_report(&report));
    if let Some(path) = &args.json {
        let mut json = serde_json::to_string_pretty(&report.rows()).expect("report serializes");
        json.push('\n');
        runtime(corpus::write_atomic(path, json.as_bytes()))?;
    }
    Ok(())
}

fn annotate(args: AnnotateArgs) -> Result<(), CliError> {
    require_file(&args.input)?;
    let gw = gateway(args.gateway)?;
    let samples = runtime(corpus::read_corpus(&args.input))?;
    let translator = Translator {
        lexicon: &gw.lexicon,
        templates: &gw.templates,
        provider: &gw.provider,
        model: gw.model.clone(),
    };
    let records = runtime(translator.annotate_batch(&samples, gw.concurrency))?;
    runtime(corpus::write_records(&records, &args.out))?;
    let labelled = records
        .iter()
        .filter(|r| r.status == RecordStatus::PendingReview)
        .count();
    eprintln!(
        "labelled {labelled} of {} samples into {}",
        records.len(),
        args.out.display()
    );
    Ok(())
}
