//! Command implementations behind the `ltn-offer` binary.

pub mod config;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand};
use ltn_offer::corpus::{chunk_document, generate_synthetic_corpus, load_corpus, write_corpus, Document};
use ltn_offer::evaluation::{
    ie_gates, ie_predicates, llm_direct_decide, make_fold_plan, results_file, run_cv, DirectDecision, IePatternBank,
    PipelineSpec,
};
use ltn_offer::fuzzy::FuzzyBackend;
use ltn_offer::llm::{
    ChatBackend, HttpBackend, JsonCallPolicy, LlmClient, ModelEndpoint, RecordingBackend, ReplayBackend, DEFAULT_URL,
    ENV_URL,
};
use ltn_offer::ltn::{build_audit_report, AuditReport};
use ltn_offer::par::default_jobs;
use ltn_offer::predicates::{
    default_predicate_defs, oracle_estimates, read_estimates, to_channels, write_estimates, ChannelVector, Extractor,
    ExtractorConfig, PredicateEstimate,
};
use ltn_offer::prompts::PromptSet;
use ltn_offer::retrieval::{Bm25Params, CrossEncoderReranker, JaccardReranker, Reranker, RetrievalParams};
use ltn_offer::training::{calibrate_threshold, score_all, train_gates, TrainedModel};
use serde::{Deserialize, Serialize};

use config::{Method, RerankerKind, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "ltn-offer", version, about = "Offer validation with extracted predicates and a gated fuzzy-logic layer")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// JSON run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override a config value, e.g. `--set cv.k=10`. Repeatable.
    #[arg(long = "set", value_name = "K=V", global = true)]
    pub sets: Vec<String>,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Top-level seed; shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic corpus to `<output_dir>/corpus.jsonl`.
    Generate,
    /// Estimate predicates for every document.
    Extract,
    /// Fit gates and threshold on the whole corpus.
    Train,
    /// Cross-validate and write results.
    Evaluate,
    /// Emit the audit report of one document, or of all with `--all`.
    Explain {
        doc_id: Option<String>,
        #[arg(long, conflicts_with = "doc_id")]
        all: bool,
        /// Also print a plain-text rendering.
        #[arg(long)]
        text: bool,
    },
}

/// Failure with its exit code: 2 for usage and configuration, 1 otherwise.
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

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Runtime(e) => write!(f, "{e:#}"),
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

type CliResult<T> = Result<T, CliError>;

pub struct RunContext {
    pub config: RunConfig,
    pub jobs: usize,
}

pub fn run(cli: Cli, out: &mut dyn Write) -> CliResult<()> {
    let mut sets = cli.global.sets.clone();
    if let Some(seed) = cli.global.seed {
        sets.push(format!("seed={seed}"));
    }
    let config = RunConfig::load(cli.global.config.as_deref(), &sets).map_err(|e| usage(e.to_string()))?;
    let jobs = match cli.global.jobs {
        Some(0) => return Err(usage("--jobs must be at least 1")),
        Some(j) => j,
        None => default_jobs(),
    };
    let ctx = RunContext { config, jobs };
    match cli.command {
        Command::Generate => cmd_generate(&ctx, out),
        Command::Extract => cmd_extract(&ctx, out),
        Command::Train => cmd_train(&ctx, out),
        Command::Evaluate => cmd_evaluate(&ctx, out),
        Command::Explain { doc_id, all, text } => cmd_explain(&ctx, doc_id.as_deref(), all, text, out),
    }
}

fn output_dir(cfg: &RunConfig) -> CliResult<&Path> {
    fs::create_dir_all(&cfg.output_dir)
        .with_context(|| format!("creating output directory {}", cfg.output_dir.display()))?;
    Ok(&cfg.output_dir)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).context("serializing output")?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load_docs(cfg: &RunConfig) -> CliResult<Vec<Document>> {
    match (&cfg.corpus.path, &cfg.corpus.synthetic) {
        (Some(path), _) => {
            if !path.exists() {
                return Err(usage(format!("corpus file {} does not exist", path.display())));
            }
            Ok(load_corpus(path).with_context(|| format!("loading corpus {}", path.display()))?)
        }
        (None, Some(s)) => Ok(generate_synthetic_corpus(s.n, s.positive_rate, cfg.synthetic_seed().unwrap_or(cfg.seed))
            .context("generating synthetic corpus")?),
        (None, None) => Err(usage("no corpus configured: set corpus.path or corpus.synthetic")),
    }
}

fn prompts(cfg: &RunConfig) -> CliResult<PromptSet> {
    match &cfg.prompts_dir {
        Some(dir) => PromptSet::with_overrides(dir).map_err(|e| usage(e.to_string())),
        None => Ok(PromptSet::embedded()),
    }
}

type Recorder = Arc<RecordingBackend<Arc<dyn ChatBackend>>>;

/// Client over the configured backend: replay when a transcript is given,
/// otherwise HTTP against `llm.base_url` or the URL in the environment.
fn llm_client(cfg: &RunConfig) -> CliResult<(LlmClient, Option<Recorder>)> {
    let env_url = std::env::var(ENV_URL).ok().filter(|u| !u.trim().is_empty());
    let base_url = cfg.llm.base_url.clone().or(env_url);
    let endpoint = |model: &str| {
        let mut e = ModelEndpoint::new(base_url.clone().unwrap_or_else(|| DEFAULT_URL.to_string()), model);
        e.temperature = cfg.llm.temperature;
        e.max_tokens = cfg.llm.max_tokens;
        e.timeout_secs = cfg.llm.timeout_secs;
        e
    };
    let primary = endpoint(&cfg.llm.model);
    let fallback = cfg.llm.fallback_model.as_deref().filter(|m| !m.is_empty()).map(endpoint);
    for e in std::iter::once(&primary).chain(fallback.as_ref()) {
        e.validate().map_err(|e| usage(format!("llm: {e}")))?;
    }
    let policy = JsonCallPolicy {
        max_attempts: cfg.llm.max_attempts,
    };
    let mut recorder = None;
    let backend: Arc<dyn ChatBackend> = if let Some(path) = &cfg.llm.replay {
        if !path.exists() {
            return Err(usage(format!("replay transcript {} does not exist", path.display())));
        }
        Arc::new(ReplayBackend::load(path).context("loading replay transcript")?)
    } else if base_url.is_some() {
        let http: Arc<dyn ChatBackend> = Arc::new(HttpBackend::new(cfg.llm.max_in_flight));
        if cfg.llm.record.is_some() {
            let r = Arc::new(RecordingBackend::new(http));
            recorder = Some(r.clone());
            r
        } else {
            http
        }
    } else {
        return Err(usage(format!(
            "method {} needs a model: set llm.replay, llm.base_url or {ENV_URL}",
            cfg.method
        )));
    };
    Ok((LlmClient::new(backend, primary, fallback, policy), recorder))
}

fn save_transcript(cfg: &RunConfig, recorder: Option<Recorder>) -> CliResult<()> {
    if let (Some(r), Some(path)) = (recorder, &cfg.llm.record) {
        r.write(path).context("writing transcript")?;
    }
    Ok(())
}

fn extractor(cfg: &RunConfig, client: LlmClient) -> CliResult<Extractor> {
    let prompts = prompts(cfg)?;
    let reranker: Box<dyn Reranker> = match cfg.retrieval.reranker {
        RerankerKind::Jaccard => Box::new(JaccardReranker),
        RerankerKind::Llm => Box::new(CrossEncoderReranker::new(client.clone(), prompts.clone(), cfg.seed)),
    };
    let config = ExtractorConfig {
        chunking: cfg.chunking,
        bm25: Bm25Params {
            k1: cfg.retrieval.k1,
            b: cfg.retrieval.b,
        },
        retrieval: RetrievalParams {
            top_lexical: cfg.retrieval.top_lexical,
            top_final: cfg.retrieval.top_final,
        },
        samples_per_chunk: cfg.extraction.samples_per_chunk,
        seed: cfg.seed,
    };
    Ok(Extractor::new(client, prompts, default_predicate_defs(), reranker, config))
}

fn ie_bank(cfg: &RunConfig) -> CliResult<IePatternBank> {
    match &cfg.ie_patterns {
        Some(path) => IePatternBank::load(path).map_err(|e| usage(e.to_string())),
        None => Ok(IePatternBank::embedded()),
    }
}

/// Predicate estimates for `docs`: read from `extraction.estimates_path` when
/// set, otherwise computed by the configured method.
fn estimates(ctx: &RunContext, docs: &[Document]) -> CliResult<Vec<PredicateEstimate>> {
    let cfg = &ctx.config;
    if let Some(path) = &cfg.extraction.estimates_path {
        if !path.exists() {
            return Err(usage(format!("estimates file {} does not exist", path.display())));
        }
        return Ok(read_estimates(path).with_context(|| format!("reading {}", path.display()))?);
    }
    match cfg.method {
        Method::Oracle => {
            let per_doc = ltn_offer::par::try_map(docs, ctx.jobs, |d| oracle_estimates(d, cfg.chunking))
                .context("oracle predicates need a synthetic corpus")?;
            Ok(per_doc.into_iter().flatten().collect())
        }
        Method::Ie => {
            let bank = ie_bank(cfg)?;
            let per_doc = ltn_offer::par::try_map(docs, ctx.jobs, |d| ie_predicates(d, &bank, cfg.chunking))
                .context("IE predicates")?;
            Ok(per_doc.into_iter().flatten().collect())
        }
        m => match m.extraction() {
            Some(method) => {
                let (client, recorder) = llm_client(cfg)?;
                let ex = extractor(cfg, client)?;
                let est = ex.estimate_corpus(docs, method, ctx.jobs).context("extracting predicates")?;
                save_transcript(cfg, recorder)?;
                Ok(est)
            }
            None => Err(usage(format!("method {m} produces no predicate estimates"))),
        },
    }
}

fn group_by_doc(est: Vec<PredicateEstimate>) -> BTreeMap<String, Vec<PredicateEstimate>> {
    let mut map: BTreeMap<String, Vec<PredicateEstimate>> = BTreeMap::new();
    for e in est {
        map.entry(e.doc_id.clone()).or_default().push(e);
    }
    map
}

fn channel_map(docs: &[Document], est: Vec<PredicateEstimate>) -> CliResult<BTreeMap<String, ChannelVector>> {
    let mut grouped = group_by_doc(est);
    docs.iter()
        .map(|d| {
            let e = grouped
                .remove(&d.id)
                .ok_or_else(|| anyhow!("no predicate estimates for document `{}`", d.id))?;
            let c = to_channels(&e).with_context(|| format!("channels of `{}`", d.id))?;
            Ok((d.id.clone(), c))
        })
        .collect()
}

fn direct_decisions(ctx: &RunContext, docs: &[Document]) -> CliResult<Vec<DirectDecision>> {
    let cfg = &ctx.config;
    if let Some(path) = &cfg.extraction.estimates_path {
        let text = fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
        return text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .enumerate()
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| CliError::Runtime(anyhow!("{} line {}: {e}", path.display(), i + 1)))
            })
            .collect();
    }
    let (client, recorder) = llm_client(cfg)?;
    let prompts = prompts(cfg)?;
    let defs = default_predicate_defs();
    let out = ltn_offer::par::try_map(docs, ctx.jobs, |d| {
        llm_direct_decide(d, &client, &prompts, &defs, cfg.chunking, cfg.seed)
    })
    .context("direct decisions")?;
    save_transcript(cfg, recorder)?;
    Ok(out)
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut text = String::new();
    for r in rows {
        text.push_str(&serde_json::to_string(r).context("serializing")?);
        text.push('\n');
    }
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn cmd_generate(ctx: &RunContext, out: &mut dyn Write) -> CliResult<()> {
    let cfg = &ctx.config;
    let spec = cfg
        .corpus
        .synthetic
        .as_ref()
        .ok_or_else(|| usage("generate needs corpus.synthetic"))?;
    let seed = cfg.synthetic_seed().unwrap_or(cfg.seed);
    let docs = generate_synthetic_corpus(spec.n, spec.positive_rate, seed).context("generating corpus")?;
    let path = output_dir(cfg)?.join("corpus.jsonl");
    write_corpus(&path, &docs).with_context(|| format!("writing {}", path.display()))?;
    let positives = docs.iter().filter(|d| d.label == Some(1)).count();
    writeln!(out, "wrote {} documents ({positives} positive, seed {seed}) to {}", docs.len(), path.display())
        .context("stdout")?;
    Ok(())
}

pub fn cmd_extract(ctx: &RunContext, out: &mut dyn Write) -> CliResult<()> {
    let cfg = &ctx.config;
    if cfg.method == Method::TfidfLtn {
        return Err(usage("tfidf_ltn learns its channels per fold; run `evaluate` instead"));
    }
    let docs = load_docs(cfg)?;
    let dir = output_dir(cfg)?.to_path_buf();
    if cfg.method == Method::LlmDirect {
        let decisions = direct_decisions(ctx, &docs)?;
        let path = dir.join("direct.jsonl");
        write_jsonl(&path, &decisions)?;
        let failed = decisions.iter().filter(|d| d.failed).count();
        writeln!(out, "wrote {} decisions ({failed} failed) to {}", decisions.len(), path.display()).context("stdout")?;
        return Ok(());
    }
    let est = estimates(ctx, &docs)?;
    let path = dir.join("estimates.jsonl");
    write_estimates(&path, &est).with_context(|| format!("writing {}", path.display()))?;
    writeln!(out, "wrote {} estimates for {} documents to {}", est.len(), docs.len(), path.display())
        .context("stdout")?;
    Ok(())
}

/// Contents of `model.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub config_hash: String,
    pub seed: u64,
    pub method: Method,
    pub model: TrainedModel,
}

fn model_path(cfg: &RunConfig, backend: FuzzyBackend, several: bool) -> PathBuf {
    if several {
        cfg.output_dir.join(format!("model-{}.json", backend.name()))
    } else {
        cfg.output_dir.join("model.json")
    }
}

fn labels_of(docs: &[Document]) -> CliResult<Vec<u8>> {
    docs.iter()
        .map(|d| d.label.ok_or_else(|| usage(format!("document `{}` has no label", d.id))))
        .collect()
}

fn check_predicate_method(method: Method, command: &str) -> CliResult<()> {
    match method {
        Method::TfidfLtn | Method::LlmDirect => Err(usage(format!(
            "`{command}` works on predicate estimates; method {method} has none (use `evaluate`)"
        ))),
        _ => Ok(()),
    }
}

pub fn cmd_train(ctx: &RunContext, out: &mut dyn Write) -> CliResult<()> {
    let cfg = &ctx.config;
    check_predicate_method(cfg.method, "train")?;
    let docs = load_docs(cfg)?;
    let labels = labels_of(&docs)?;
    let channels = channel_map(&docs, estimates(ctx, &docs)?)?;
    let xs: Vec<ChannelVector> = docs.iter().map(|d| channels[&d.id]).collect();
    let backends = cfg.ltn.backend.backends();
    output_dir(cfg)?;
    for &backend in &backends {
        let mut model = if cfg.method == Method::Ie {
            TrainedModel {
                alpha: ie_gates(),
                threshold: 0.5,
                backend,
                config: cfg.train,
                loss_curve: Vec::new(),
            }
        } else {
            train_gates(&xs, &labels, backend, &cfg.train).context("training gates")?
        };
        model.threshold =
            calibrate_threshold(&score_all(&xs, &model.alpha, backend), &labels).context("calibrating threshold")?;
        let path = model_path(cfg, backend, backends.len() > 1);
        let file = ModelFile {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            method: cfg.method,
            model,
        };
        write_json(&path, &file)?;
        writeln!(
            out,
            "{:<12} threshold {:.4}  loss {}  -> {}",
            backend.name(),
            file.model.threshold,
            file.model.loss_curve.last().map_or("n/a".to_string(), |l| format!("{l:.5}")),
            path.display()
        )
        .context("stdout")?;
    }
    Ok(())
}

pub fn cmd_evaluate(ctx: &RunContext, out: &mut dyn Write) -> CliResult<()> {
    let cfg = &ctx.config;
    let docs = load_docs(cfg)?;
    let labels = labels_of(&docs)?;
    let pairs: Vec<(String, u8)> = docs.iter().map(|d| d.id.clone()).zip(labels).collect();
    let plan = make_fold_plan(&pairs, cfg.cv.k, cfg.cv.repetitions, cfg.seed).map_err(|e| usage(e.to_string()))?;
    let backends = cfg.ltn.backend.backends();

    let mut specs: Vec<(Option<FuzzyBackend>, PipelineSpec)> = Vec::new();
    match cfg.method {
        Method::LlmDirect => {
            let labels = direct_decisions(ctx, &docs)?.into_iter().map(|d| (d.doc_id, d.label)).collect();
            specs.push((None, PipelineSpec::Direct { labels }));
        }
        Method::TfidfLtn => {
            for &b in &backends {
                specs.push((
                    Some(b),
                    PipelineSpec::TfidfLtn {
                        backend: b,
                        train: cfg.train,
                        tfidf: cfg.tfidf,
                    },
                ));
            }
        }
        Method::Ie => {
            let channels = channel_map(&docs, estimates(ctx, &docs)?)?;
            for &b in &backends {
                specs.push((
                    Some(b),
                    PipelineSpec::FixedGates {
                        channels: channels.clone(),
                        gates: ie_gates(),
                        backend: b,
                    },
                ));
            }
        }
        _ => {
            let channels = channel_map(&docs, estimates(ctx, &docs)?)?;
            for &b in &backends {
                specs.push((
                    Some(b),
                    PipelineSpec::Trained {
                        channels: channels.clone(),
                        backend: b,
                        train: cfg.train,
                    },
                ));
            }
        }
    }

    let dir = output_dir(cfg)?.to_path_buf();
    let hash = cfg.hash();
    writeln!(
        out,
        "{:<14} {:<12} {:>15} {:>15} {:>15} {:>15}",
        "method", "backend", "precision", "recall", "f1", "accuracy"
    )
    .context("stdout")?;
    let several = specs.len() > 1;
    for (backend, spec) in &specs {
        let report = run_cv(&docs, spec, &plan, ctx.jobs).context("cross-validation")?;
        let results = results_file(&report, &hash, cfg.seed, cfg.method.name(), *backend);
        let path = match backend {
            Some(b) if several => dir.join(format!("results-{}.json", b.name())),
            _ => dir.join("results.json"),
        };
        write_json(&path, &results)?;
        let (m, s) = (report.summary.mean, report.summary.std);
        let cell = |a: f64, b: f64| format!("{a:.3} ± {b:.3}");
        writeln!(
            out,
            "{:<14} {:<12} {:>15} {:>15} {:>15} {:>15}",
            cfg.method.name(),
            backend.map_or("-", |b| b.name()),
            cell(m.precision, s.precision),
            cell(m.recall, s.recall),
            cell(m.f1, s.f1),
            cell(m.accuracy, s.accuracy)
        )
        .context("stdout")?;
    }
    Ok(())
}

fn excerpt(text: &str, max: usize) -> String {
    let flat: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    if flat.chars().count() <= max {
        flat
    } else {
        format!("{}...", flat.chars().take(max).collect::<String>())
    }
}

pub fn render_report(r: &AuditReport) -> String {
    let mut s = format!(
        "document {}\n  decision: {} (O_base {:.4} vs threshold {:.4}, backend {})\n  predicates:\n",
        r.doc_id,
        if r.label == 1 { "valid offer" } else { "not a valid offer" },
        r.o_base,
        r.threshold,
        r.backend.name()
    );
    for p in &r.predicates {
        let flags = if p.flags.is_empty() {
            String::new()
        } else {
            let names: Vec<String> = p
                .flags
                .iter()
                .map(|f| serde_json::to_value(f).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default())
                .collect();
            format!(" [{}]", names.join(", "))
        };
        s.push_str(&format!("    {:<12} {:.3}{flags}\n", p.key.as_str(), p.value));
        if let Some(ev) = p.evidence.first() {
            s.push_str(&format!("      {}: \"{}\"\n", ev.chunk, excerpt(&ev.text, 100)));
        }
    }
    s.push_str("  rules:\n");
    for (i, v) in r.rules.rules().iter().enumerate() {
        s.push_str(&format!("    R{} {:.3}\n", i + 1, v));
    }
    s.push_str(&format!("    PosFeature {:.3}\n", r.rules.pos_feature));
    s
}

pub fn cmd_explain(ctx: &RunContext, doc_id: Option<&str>, all: bool, text: bool, out: &mut dyn Write) -> CliResult<()> {
    let cfg = &ctx.config;
    check_predicate_method(cfg.method, "explain")?;
    if doc_id.is_none() && !all {
        return Err(usage("explain needs a DOC_ID or --all"));
    }
    let backends = cfg.ltn.backend.backends();
    let [backend] = backends[..] else {
        return Err(usage("explain needs a single ltn.backend"));
    };
    let path = model_path(cfg, backend, false);
    let model: ModelFile = match fs::read_to_string(&path) {
        Ok(t) => serde_json::from_str(&t).with_context(|| format!("parsing {}", path.display()))?,
        Err(_) => {
            let alt = model_path(cfg, backend, true);
            let t = fs::read_to_string(&alt)
                .map_err(|_| usage(format!("no trained model at {}; run `train` first", path.display())))?;
            serde_json::from_str(&t).with_context(|| format!("parsing {}", alt.display()))?
        }
    };
    if model.method != cfg.method {
        return Err(usage(format!("model was trained with method {}, config says {}", model.method, cfg.method)));
    }
    let docs = load_docs(cfg)?;
    let selected: Vec<&Document> = match doc_id {
        Some(id) => vec![docs
            .iter()
            .find(|d| d.id == id)
            .ok_or_else(|| usage(format!("unknown document `{id}`")))?],
        None => docs.iter().collect(),
    };
    let owned: Vec<Document> = selected.iter().map(|d| (*d).clone()).collect();
    let mut grouped = group_by_doc(estimates(ctx, &owned)?);
    let m = &model.model;
    let reports = selected
        .iter()
        .map(|d| {
            let est = grouped
                .remove(&d.id)
                .ok_or_else(|| anyhow!("no predicate estimates for document `{}`", d.id))?;
            let channels = to_channels(&est)?;
            let chunks = chunk_document(d, cfg.chunking)?;
            Ok(build_audit_report(&d.id, &est, &channels, &chunks, &m.alpha, m.backend, m.threshold)?)
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    if all {
        let path = output_dir(cfg)?.join("audit.jsonl");
        write_jsonl(&path, &reports)?;
        writeln!(out, "wrote {} audit reports to {}", reports.len(), path.display()).context("stdout")?;
    } else {
        writeln!(out, "{}", serde_json::to_string_pretty(&reports[0]).context("serializing")?).context("stdout")?;
    }
    if text {
        for r in &reports {
            write!(out, "{}", render_report(r)).context("stdout")?;
        }
    }
    Ok(())
}
