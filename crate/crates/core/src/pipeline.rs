//! Stage definitions and the config-driven runner.
//!
//! Every CLI subcommand builds a [`Stage`] and runs it through [`run_stage`], so a
//! pipeline config and the equivalent sequence of commands write identical files.

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::align::{align_batch, load_manifest, matched_pairs, AlignConfig, AlignError};
use crate::bleu::{corpus_bleu, BleuConfig, BleuError, Smoothing, TokenizerKind};
use crate::corpus::{self, Corpus, CorpusError, DomainTag, Format};
use crate::dedup::{dedup_against, dedup_within, DedupOptions, NormalizationPolicy};
use crate::filter::{
    score_corpus, select_top_k, threshold_score, tune_k, CommandEvaluator, FilterError, FilterReport, PairScorer,
    RemoteLossScorer, RoundtripBleuScorer,
};
use crate::report::{budget_ratio, evaluate_matrix, time_report, BudgetCurve, EvalMatrix, MatrixManifest, ReportError, TimeReport};
use crate::translate::{BackendSpec, RemoteConfig, TranslateError, TranslationCache, TranslatorGateway};

#[derive(Debug, Error)]
pub enum StageError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Bleu(#[from] BleuError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Invalid(String),
    #[error("{failures} of {documents} document pairs failed to align")]
    PartialAlignment { failures: usize, documents: usize },
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cannot read config {path}: {reason}")]
    Config { path: PathBuf, reason: String },
    #[error("stage {index} ({stage}): input {path} does not exist and no earlier stage produces it")]
    MissingInput { index: usize, stage: &'static str, path: PathBuf },
    #[error("stage {index} ({stage}): {source}")]
    Stage {
        index: usize,
        stage: &'static str,
        #[source]
        source: StageError,
    },
}

impl PipelineError {
    pub fn stage_name(&self) -> Option<&'static str> {
        match self {
            PipelineError::Config { .. } => None,
            PipelineError::MissingInput { stage, .. } | PipelineError::Stage { stage, .. } => Some(stage),
        }
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

/// Settings shared by every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlobalConfig {
    pub workers: usize,
    pub seed: u64,
    pub log_level: String,
    /// Persistent translation cache shared by the align and roundtrip-score stages.
    pub cache: Option<PathBuf>,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        GlobalConfig {
            workers: default_workers(),
            seed: 0,
            log_level: "info".into(),
            cache: None,
        }
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestInput {
    pub path: PathBuf,
    pub format: Format,
    #[serde(default)]
    pub domain: Option<DomainTag>,
    #[serde(default = "default_tier")]
    pub tier: u8,
}

fn default_tier() -> u8 {
    1
}

fn default_max_n() -> usize {
    4
}

/// Corpus-level BLEU options as exposed on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuOptions {
    #[serde(default = "default_max_n")]
    pub max_n: usize,
    #[serde(default)]
    pub lowercase: bool,
    #[serde(default = "default_tokenizer")]
    pub tokenizer: TokenizerKind,
    #[serde(default = "default_corpus_smoothing")]
    pub smoothing: Smoothing,
}

fn default_tokenizer() -> TokenizerKind {
    TokenizerKind::Intl
}

fn default_corpus_smoothing() -> Smoothing {
    Smoothing::None
}

impl Default for BleuOptions {
    fn default() -> Self {
        BleuOptions {
            max_n: 4,
            lowercase: false,
            tokenizer: TokenizerKind::Intl,
            smoothing: Smoothing::None,
        }
    }
}

impl BleuOptions {
    pub fn config(&self) -> BleuConfig {
        BleuConfig {
            max_n: self.max_n,
            case_sensitive: !self.lowercase,
            tokenizer: self.tokenizer,
            smoothing: self.smoothing,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ScorerSpec {
    /// Round-trip BLEU through a translation backend; higher is better.
    Roundtrip { backend: BackendSpec },
    /// Remote per-pair loss; lower is better.
    Remote(RemoteConfig),
}

impl ScorerSpec {
    fn paths(&self) -> Vec<&Path> {
        match self {
            ScorerSpec::Roundtrip { backend } => backend.paths(),
            ScorerSpec::Remote(_) => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "kebab-case")]
pub enum Stage {
    Ingest {
        inputs: Vec<IngestInput>,
        out: PathBuf,
        #[serde(default)]
        name: Option<String>,
    },
    Merge {
        inputs: Vec<PathBuf>,
        out: PathBuf,
        #[serde(default)]
        name: Option<String>,
    },
    Stats {
        input: PathBuf,
        #[serde(default)]
        out: Option<PathBuf>,
        #[serde(default)]
        bucket_width: Option<usize>,
    },
    SampleTest {
        input: PathBuf,
        per_domain: BTreeMap<DomainTag, usize>,
        test_out: PathBuf,
        remainder_out: PathBuf,
        /// Overrides the global seed.
        #[serde(default)]
        seed: Option<u64>,
    },
    Bleu {
        hyp: PathBuf,
        reference: PathBuf,
        #[serde(default, flatten)]
        options: BleuOptions,
        #[serde(default)]
        out: Option<PathBuf>,
    },
    Align {
        pairs: PathBuf,
        backend: BackendSpec,
        #[serde(default)]
        domain: Option<DomainTag>,
        #[serde(default)]
        config: AlignConfig,
        out: PathBuf,
        #[serde(default)]
        report: Option<PathBuf>,
    },
    Score {
        input: PathBuf,
        scorer: ScorerSpec,
        out: PathBuf,
        #[serde(default)]
        checkpoint: Option<PathBuf>,
    },
    Filter {
        input: PathBuf,
        /// Scores unscored input first; already-scored input can omit it.
        #[serde(default)]
        scorer: Option<ScorerSpec>,
        #[serde(default)]
        higher_is_better: Option<bool>,
        #[serde(default)]
        k: Option<usize>,
        #[serde(default)]
        tune_k: Option<Vec<usize>>,
        #[serde(default)]
        evaluator: Option<String>,
        out: PathBuf,
        #[serde(default)]
        report: Option<PathBuf>,
    },
    Dedup {
        input: PathBuf,
        #[serde(default)]
        against: Option<PathBuf>,
        #[serde(default)]
        policy: Option<String>,
        #[serde(default)]
        paranoid: bool,
        out: PathBuf,
        #[serde(default)]
        report: Option<PathBuf>,
    },
    EvalMatrix {
        /// Reference and hypothesis files to score.
        #[serde(default)]
        manifest: Option<PathBuf>,
        /// Precomputed `row → direction → domain → BLEU` values.
        #[serde(default)]
        values: Option<PathBuf>,
        #[serde(default, flatten)]
        options: BleuOptions,
        #[serde(default)]
        out: Option<PathBuf>,
    },
    Budget {
        supervised: PathBuf,
        pretraining: PathBuf,
        target_bleu: f64,
        #[serde(default)]
        out: Option<PathBuf>,
    },
    TimeReport {
        input: PathBuf,
        #[serde(default)]
        out: Option<PathBuf>,
    },
}

impl Stage {
    pub fn name(&self) -> &'static str {
        match self {
            Stage::Ingest { .. } => "ingest",
            Stage::Merge { .. } => "merge",
            Stage::Stats { .. } => "stats",
            Stage::SampleTest { .. } => "sample-test",
            Stage::Bleu { .. } => "bleu",
            Stage::Align { .. } => "align",
            Stage::Score { .. } => "score",
            Stage::Filter { .. } => "filter",
            Stage::Dedup { .. } => "dedup",
            Stage::EvalMatrix { .. } => "eval-matrix",
            Stage::Budget { .. } => "budget",
            Stage::TimeReport { .. } => "time-report",
        }
    }

    /// Files the stage reads. Line-pair ingestion reads `<base>.en` and `<base>.vi`.
    pub fn inputs(&self) -> Vec<PathBuf> {
        let one = |p: &PathBuf| vec![p.clone()];
        match self {
            Stage::Ingest { inputs, .. } => inputs
                .iter()
                .flat_map(|i| match i.format {
                    Format::LinePair => {
                        let (en, vi) = corpus::line_pair_paths(&i.path);
                        vec![en, vi]
                    }
                    _ => vec![i.path.clone()],
                })
                .collect(),
            Stage::Merge { inputs, .. } => inputs.clone(),
            Stage::Stats { input, .. } | Stage::SampleTest { input, .. } | Stage::TimeReport { input, .. } => one(input),
            Stage::Bleu { hyp, reference, .. } => vec![hyp.clone(), reference.clone()],
            Stage::Align { pairs, backend, .. } => std::iter::once(pairs.clone())
                .chain(backend.paths().into_iter().map(Path::to_path_buf))
                .collect(),
            Stage::Score { input, scorer, .. } => std::iter::once(input.clone())
                .chain(scorer.paths().into_iter().map(Path::to_path_buf))
                .collect(),
            Stage::Filter { input, scorer, .. } => std::iter::once(input.clone())
                .chain(scorer.iter().flat_map(|s| s.paths()).map(Path::to_path_buf))
                .collect(),
            Stage::Dedup { input, against, .. } => std::iter::once(input.clone()).chain(against.clone()).collect(),
            Stage::EvalMatrix { manifest, values, .. } => manifest.iter().chain(values).cloned().collect(),
            Stage::Budget {
                supervised,
                pretraining,
                ..
            } => vec![supervised.clone(), pretraining.clone()],
        }
    }

    pub fn outputs(&self) -> Vec<PathBuf> {
        match self {
            Stage::Ingest { out, .. }
            | Stage::Merge { out, .. }
            | Stage::Score { out, .. } => vec![out.clone()],
            Stage::SampleTest {
                test_out, remainder_out, ..
            } => vec![test_out.clone(), remainder_out.clone()],
            Stage::Align { out, report, .. } | Stage::Filter { out, report, .. } | Stage::Dedup { out, report, .. } => {
                std::iter::once(out.clone()).chain(report.clone()).collect()
            }
            Stage::Stats { out, .. }
            | Stage::Bleu { out, .. }
            | Stage::EvalMatrix { out, .. }
            | Stage::Budget { out, .. }
            | Stage::TimeReport { out, .. } => out.iter().cloned().collect(),
        }
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        let fix_backend = |b: &mut BackendSpec| match b {
            BackendSpec::Lexicon { en_vi, vi_en } => {
                en_vi.iter_mut().chain(vi_en.iter_mut()).for_each(fix);
            }
            BackendSpec::Cache { path, .. } => fix(path),
            _ => {}
        };
        let fix_scorer = |s: &mut ScorerSpec| {
            if let ScorerSpec::Roundtrip { backend } = s {
                fix_backend(backend);
            }
        };
        match self {
            Stage::Ingest { inputs, out, .. } => {
                inputs.iter_mut().for_each(|i| fix(&mut i.path));
                fix(out);
            }
            Stage::Merge { inputs, out, .. } => {
                inputs.iter_mut().for_each(fix);
                fix(out);
            }
            Stage::Stats { input, out, .. } | Stage::TimeReport { input, out } => {
                fix(input);
                out.iter_mut().for_each(fix);
            }
            Stage::SampleTest {
                input,
                test_out,
                remainder_out,
                ..
            } => {
                fix(input);
                fix(test_out);
                fix(remainder_out);
            }
            Stage::Bleu { hyp, reference, out, .. } => {
                fix(hyp);
                fix(reference);
                out.iter_mut().for_each(fix);
            }
            Stage::Align {
                pairs,
                backend,
                out,
                report,
                ..
            } => {
                fix(pairs);
                fix_backend(backend);
                fix(out);
                report.iter_mut().for_each(fix);
            }
            Stage::Score {
                input,
                scorer,
                out,
                checkpoint,
            } => {
                fix(input);
                fix_scorer(scorer);
                fix(out);
                checkpoint.iter_mut().for_each(fix);
            }
            Stage::Filter {
                input,
                scorer,
                out,
                report,
                ..
            } => {
                fix(input);
                scorer.iter_mut().for_each(fix_scorer);
                fix(out);
                report.iter_mut().for_each(fix);
            }
            Stage::Dedup {
                input,
                against,
                out,
                report,
                ..
            } => {
                fix(input);
                against.iter_mut().for_each(fix);
                fix(out);
                report.iter_mut().for_each(fix);
            }
            Stage::EvalMatrix {
                manifest, values, out, ..
            } => {
                manifest.iter_mut().chain(values.iter_mut()).chain(out.iter_mut()).for_each(fix);
            }
            Stage::Budget {
                supervised,
                pretraining,
                out,
                ..
            } => {
                fix(supervised);
                fix(pretraining);
                out.iter_mut().for_each(fix);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default)]
    pub global: GlobalConfig,
    pub stages: Vec<Stage>,
}

impl PipelineConfig {
    /// Loads a JSON config; relative paths resolve against the config's directory.
    pub fn load(path: &Path) -> Result<Self, PipelineError> {
        let config_err = |reason: String| PipelineError::Config {
            path: path.to_path_buf(),
            reason,
        };
        let text = std::fs::read_to_string(path).map_err(|e| config_err(e.to_string()))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text).map_err(|e| config_err(e.to_string()))?;
        let base = path.parent().unwrap_or_else(|| Path::new(""));
        for stage in &mut cfg.stages {
            stage.resolve(base);
        }
        if let Some(cache) = cfg.global.cache.as_mut() {
            if cache.is_relative() {
                *cache = base.join(&*cache);
            }
        }
        if cfg.global.workers == 0 {
            return Err(config_err("global.workers must be at least 1".into()));
        }
        Ok(cfg)
    }

    /// Checks that each stage's inputs exist or are written by an earlier stage.
    pub fn validate(&self) -> Result<(), PipelineError> {
        let mut produced: HashSet<PathBuf> = HashSet::new();
        for (index, stage) in self.stages.iter().enumerate() {
            for path in stage.inputs() {
                if !produced.contains(&path) && !path.exists() {
                    return Err(PipelineError::MissingInput {
                        index,
                        stage: stage.name(),
                        path,
                    });
                }
            }
            produced.extend(stage.outputs());
        }
        Ok(())
    }
}

/// What a stage prints: a JSON summary, plus a text table for report stages.
#[derive(Debug, Clone, PartialEq)]
pub struct StageOutput {
    pub summary: Value,
    pub text: Option<String>,
}

impl StageOutput {
    fn json(summary: Value) -> Self {
        StageOutput { summary, text: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunContext {
    pub workers: usize,
    pub seed: u64,
    pub cache: Option<PathBuf>,
}

impl From<&GlobalConfig> for RunContext {
    fn from(g: &GlobalConfig) -> Self {
        RunContext {
            workers: g.workers,
            seed: g.seed,
            cache: g.cache.clone(),
        }
    }
}

impl RunContext {
    fn gateway(&self, backend: &BackendSpec) -> StageResult<TranslatorGateway> {
        let cache = match &self.cache {
            Some(path) => TranslationCache::open(path)?,
            None => TranslationCache::new(),
        };
        Ok(TranslatorGateway::new(backend.build()?, Arc::new(cache)))
    }

    fn scorer(&self, spec: &ScorerSpec) -> StageResult<(Box<dyn PairScorer>, Option<Arc<TranslatorGateway>>)> {
        Ok(match spec {
            ScorerSpec::Roundtrip { backend } => {
                let gateway = Arc::new(self.gateway(backend)?);
                let scorer = RoundtripBleuScorer {
                    gateway: Arc::clone(&gateway),
                    bleu: BleuConfig::default(),
                };
                (Box::new(scorer), Some(gateway))
            }
            ScorerSpec::Remote(cfg) => (Box::new(RemoteLossScorer::new(cfg.clone())?), None),
        })
    }
}

fn create(path: &Path) -> StageResult<BufWriter<File>> {
    let io_err = |source| StageError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(io_err)?;
    }
    Ok(BufWriter::new(File::create(path).map_err(io_err)?))
}

fn write_corpus(corpus: &Corpus, path: &Path) -> StageResult<()> {
    let w = create(path)?;
    corpus::write_jsonl(corpus, w).map_err(|source| StageError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> StageResult<()> {
    let mut w = create(path)?;
    let io_err = |source| StageError::Io {
        path: path.to_path_buf(),
        source,
    };
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(e.into()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(io_err)
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn corpus_name(path: &Path) -> String {
    path.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned())
}

/// Runs one stage on a worker pool of `ctx.workers` threads.
pub fn run_stage(stage: &Stage, ctx: &RunContext) -> StageResult<StageOutput> {
    if ctx.workers == 0 {
        return Err(StageError::Invalid("workers must be at least 1".into()));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.workers)
        .build()
        .map_err(|e| StageError::Invalid(format!("failed to start worker pool: {e}")))?;
    log::info!(target: stage.name(), "start, {} workers", ctx.workers);
    let out = pool.install(|| run_stage_inner(stage, ctx));
    match &out {
        Ok(_) => log::info!(target: stage.name(), "done"),
        Err(e) => log::error!(target: stage.name(), "failed: {e}"),
    }
    out
}

fn run_stage_inner(stage: &Stage, ctx: &RunContext) -> StageResult<StageOutput> {
    match stage {
        Stage::Ingest { inputs, out, name } => {
            let mut corpora = Vec::with_capacity(inputs.len());
            let mut dropped = 0;
            for input in inputs {
                let domain = input.domain.clone().unwrap_or_default();
                let (c, report) = corpus::ingest_with_report(&input.path, input.format, &domain, input.tier)?;
                dropped += report.dropped_empty;
                corpora.push(c);
            }
            let mut merged = corpus::merge(&corpora);
            merged.name = name.clone().unwrap_or_else(|| corpus_name(out));
            write_corpus(&merged, out)?;
            Ok(StageOutput::json(json!({
                "records": merged.len(),
                "dropped_empty": dropped,
                "out": out,
            })))
        }
        Stage::Merge { inputs, out, name } => {
            let corpora = inputs
                .iter()
                .map(|p| corpus::read_jsonl(p))
                .collect::<Result<Vec<_>, _>>()?;
            let mut merged = corpus::merge(&corpora);
            merged.name = name.clone().unwrap_or_else(|| corpus_name(out));
            write_corpus(&merged, out)?;
            Ok(StageOutput::json(json!({ "records": merged.len(), "out": out })))
        }
        Stage::Stats {
            input,
            out,
            bucket_width,
        } => {
            let c = corpus::read_jsonl(input)?;
            let width = bucket_width.unwrap_or(corpus::DEFAULT_BUCKET_WIDTH);
            if width == 0 {
                return Err(StageError::Invalid("bucket width must be at least 1".into()));
            }
            let report = corpus::stats_with_buckets(&c, width);
            if let Some(out) = out {
                write_json(&report, out)?;
            }
            Ok(StageOutput::json(to_value(&report)))
        }
        Stage::SampleTest {
            input,
            per_domain,
            test_out,
            remainder_out,
            seed,
        } => {
            let c = corpus::read_jsonl(input)?;
            let (test, rest) = corpus::sample_test_set(&c, per_domain, seed.unwrap_or(ctx.seed))?;
            write_corpus(&test, test_out)?;
            write_corpus(&rest, remainder_out)?;
            Ok(StageOutput::json(json!({ "test": test.len(), "remainder": rest.len() })))
        }
        Stage::Bleu {
            hyp,
            reference,
            options,
            out,
        } => {
            let read = |p: &Path| -> StageResult<Vec<String>> {
                std::fs::read_to_string(p)
                    .map(|t| t.lines().map(str::to_string).collect())
                    .map_err(|source| StageError::Io {
                        path: p.to_path_buf(),
                        source,
                    })
            };
            let config = options.config();
            config.validate()?;
            let b = corpus_bleu(&read(hyp)?, &read(reference)?, &config)?;
            if let Some(out) = out {
                write_json(&b, out)?;
            }
            Ok(StageOutput::json(to_value(&b)))
        }
        Stage::Align {
            pairs,
            backend,
            domain,
            config,
            out,
            report,
        } => {
            let docs = load_manifest(pairs, &domain.clone().unwrap_or_default())?;
            let gateway = ctx.gateway(backend)?;
            let outcome = align_batch(&docs, &gateway, config, ctx.workers)?;
            gateway.flush()?;
            let matched: Vec<_> = docs
                .iter()
                .zip(&outcome.results)
                .filter_map(|(d, r)| r.as_ref().ok().map(|r| matched_pairs(d, r)))
                .flatten()
                .collect();
            let corpus = Corpus::new(corpus_name(out), matched);
            write_corpus(&corpus, out)?;
            if let Some(path) = report {
                write_json(&outcome.report, path)?;
            }
            if outcome.has_failures() {
                return Err(StageError::PartialAlignment {
                    failures: outcome.report.failures,
                    documents: outcome.report.documents,
                });
            }
            Ok(StageOutput::json(json!({
                "documents": outcome.report.documents,
                "matches": outcome.report.total_matches,
                "backend_translations": outcome.report.backend_translations,
            })))
        }
        Stage::Score {
            input,
            scorer,
            out,
            checkpoint,
        } => {
            let c = corpus::read_jsonl(input)?;
            let (scorer, gateway) = ctx.scorer(scorer)?;
            let scored = score_corpus(&c, scorer.as_ref(), checkpoint.as_deref());
            if let Some(g) = gateway {
                g.flush()?;
            }
            let scored = scored?;
            write_corpus(&scored, out)?;
            Ok(StageOutput::json(json!({
                "records": scored.len(),
                "higher_is_better": scorer.higher_is_better(),
            })))
        }
        Stage::Filter {
            input,
            scorer,
            higher_is_better,
            k,
            tune_k: candidates,
            evaluator,
            out,
            report,
        } => {
            let c = corpus::read_jsonl(input)?;
            let (scored, hib) = match scorer {
                Some(spec) => {
                    let (s, gateway) = ctx.scorer(spec)?;
                    let scored = score_corpus(&c, s.as_ref(), None);
                    if let Some(g) = gateway {
                        g.flush()?;
                    }
                    (scored?, higher_is_better.unwrap_or(s.higher_is_better()))
                }
                None => (c, higher_is_better.unwrap_or(true)),
            };
            let filter_report = match (k, candidates) {
                (Some(k), None) => FilterReport {
                    k_candidates: vec![*k],
                    metric_per_k: Vec::new(),
                    chosen_k: Some(*k),
                    threshold_score: threshold_score(&scored, *k, hib)?,
                    higher_is_better: hib,
                },
                (None, Some(ks)) => {
                    let cmd = evaluator
                        .as_deref()
                        .ok_or_else(|| StageError::Invalid("tuning K needs an evaluator command".into()))?;
                    let workdir = out.parent().map_or_else(|| PathBuf::from("."), Path::to_path_buf);
                    let workdir = if workdir.as_os_str().is_empty() { PathBuf::from(".") } else { workdir };
                    std::fs::create_dir_all(&workdir).map_err(|source| StageError::Io {
                        path: workdir.clone(),
                        source,
                    })?;
                    let mut eval = CommandEvaluator::parse(cmd, workdir)
                        .ok_or_else(|| StageError::Invalid("empty evaluator command".into()))?;
                    tune_k(&scored, ks, hib, &mut eval)?
                }
                _ => return Err(StageError::Invalid("give exactly one of k and tune_k".into())),
            };
            let chosen = filter_report.chosen_k.expect("a K is always chosen");
            let kept = select_top_k(&scored, chosen, hib)?;
            write_corpus(&kept, out)?;
            if let Some(path) = report {
                write_json(&filter_report, path)?;
            }
            Ok(StageOutput::json(to_value(&filter_report)))
        }
        Stage::Dedup {
            input,
            against,
            policy,
            paranoid,
            out,
            report,
        } => {
            let policy: NormalizationPolicy = match policy {
                Some(p) => p.parse().map_err(StageError::Invalid)?,
                None => NormalizationPolicy::default(),
            };
            let opts = DedupOptions {
                policy,
                paranoid: *paranoid,
            };
            let c = corpus::read_jsonl(input)?;
            let (kept, summary) = match against {
                Some(a) => {
                    let (kept, r) = dedup_against(&c, &corpus::read_jsonl(a)?, &opts);
                    (kept, to_value(&r))
                }
                None => {
                    let (kept, r) = dedup_within(&c, &opts);
                    (kept, to_value(&r))
                }
            };
            write_corpus(&kept, out)?;
            if let Some(path) = report {
                write_json(&summary, path)?;
            }
            Ok(StageOutput::json(summary))
        }
        Stage::EvalMatrix {
            manifest,
            values,
            options,
            out,
        } => {
            let matrix = match (manifest, values) {
                (Some(m), None) => {
                    let config = options.config();
                    config.validate()?;
                    evaluate_matrix(&MatrixManifest::load(m)?, &config)?
                }
                (None, Some(v)) => load_matrix_values(v)?,
                _ => return Err(StageError::Invalid("give exactly one of manifest and values".into())),
            };
            if let Some(out) = out {
                write_json(&matrix, out)?;
            }
            Ok(StageOutput {
                summary: to_value(&matrix),
                text: Some(matrix.render_text()),
            })
        }
        Stage::Budget {
            supervised,
            pretraining,
            target_bleu,
            out,
        } => {
            let sup = BudgetCurve::load_csv(supervised, "supervised")?;
            let pre = BudgetCurve::load_csv(pretraining, "pretraining")?;
            let ratio = budget_ratio(&sup, &pre, *target_bleu)?;
            if let Some(out) = out {
                write_json(&ratio, out)?;
            }
            let text = format!(
                "target BLEU {}: supervised {} units, pretraining {} units, ratio {} ({:?})\n",
                ratio.target_bleu, ratio.supervised.data_amount, ratio.pretraining.data_amount, ratio.data_ratio, ratio.bound
            );
            Ok(StageOutput {
                summary: to_value(&ratio),
                text: Some(text),
            })
        }
        Stage::TimeReport { input, out } => {
            let report: TimeReport = time_report(&TimeReport::load_records(input)?);
            if let Some(out) = out {
                write_json(&report, out)?;
            }
            Ok(StageOutput {
                summary: to_value(&report),
                text: Some(report.render_text()),
            })
        }
    }
}

pub fn load_matrix_values(path: &Path) -> StageResult<EvalMatrix> {
    let text = std::fs::read_to_string(path).map_err(|source| StageError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    EvalMatrix::from_json(&text).map_err(|e| match e {
        ReportError::Parse { reason, .. } => ReportError::Parse {
            path: path.to_path_buf(),
            reason,
        }
        .into(),
        other => other.into(),
    })
}

/// Validates the whole config, then runs its stages in order.
pub fn run_pipeline(config: &PipelineConfig) -> Result<Vec<StageOutput>, PipelineError> {
    config.validate()?;
    let ctx = RunContext::from(&config.global);
    let mut outputs = Vec::with_capacity(config.stages.len());
    for (index, stage) in config.stages.iter().enumerate() {
        let out = run_stage(stage, &ctx).map_err(|source| PipelineError::Stage {
            index,
            stage: stage.name(),
            source,
        })?;
        outputs.push(out);
    }
    Ok(outputs)
}
