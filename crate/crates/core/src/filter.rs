//! Quality scoring and top-K selection of noisy bitext.
//!
//! Scoring attaches a finite score to every pair. Selection keeps the `k` best
//! pairs under a total order on `(score, position)`: better score first, and
//! among equal scores the earlier pair wins. Survivors keep corpus order.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::align::AlignError;
use crate::bleu::{sentence_bleu, BleuConfig};
use crate::corpus::{self, Corpus, CorpusError, SentencePair};
use crate::translate::{post_json_with_retries, Direction, RemoteConfig, TranslateError, TranslatorGateway};

#[derive(Debug, Error)]
pub enum FilterError {
    #[error("pair {index} has no score")]
    Unscored { index: usize },
    #[error("k = {k} is outside 0..={len}")]
    KOutOfRange { k: usize, len: usize },
    #[error("scorer produced a non-finite score ({score}) for pair {index}")]
    NonFinite { index: usize, score: f64 },
    #[error("scorer returned {got} scores for {expected} pairs")]
    CountMismatch { expected: usize, got: usize },
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Align(#[from] AlignError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}:{line}: malformed checkpoint entry: {reason}")]
    Checkpoint { path: PathBuf, line: usize, reason: String },
    #[error("no K candidates given")]
    NoCandidates,
    #[error("evaluator failed for k = {k}: {message}")]
    Evaluator {
        k: usize,
        message: String,
        partial: Box<FilterReport>,
    },
}

pub type Result<T> = std::result::Result<T, FilterError>;

/// Per-pair quality oracle.
pub trait PairScorer: Send + Sync {
    fn score_batch(&self, pairs: &[SentencePair]) -> Result<Vec<f64>>;

    fn higher_is_better(&self) -> bool;

    fn batch_size(&self) -> usize {
        256
    }
}

/// `s(e, v)` through a translator gateway; higher is better.
pub struct RoundtripBleuScorer {
    pub gateway: Arc<TranslatorGateway>,
    pub bleu: BleuConfig,
}

impl PairScorer for RoundtripBleuScorer {
    fn score_batch(&self, pairs: &[SentencePair]) -> Result<Vec<f64>> {
        let en: Vec<&str> = pairs.iter().map(|p| p.en.as_str()).collect();
        let vi: Vec<&str> = pairs.iter().map(|p| p.vi.as_str()).collect();
        let en_as_vi = self.gateway.translate(Direction::EN_VI, &en)?;
        let vi_as_en = self.gateway.translate(Direction::VI_EN, &vi)?;
        Ok(pairs
            .par_iter()
            .zip(en_as_vi.par_iter().zip(&vi_as_en))
            .map(|(p, (ev, ve))| sentence_bleu(ve, &p.en, &self.bleu).score + sentence_bleu(ev, &p.vi, &self.bleu).score)
            .collect())
    }

    fn higher_is_better(&self) -> bool {
        true
    }

    fn batch_size(&self) -> usize {
        4096
    }
}

/// Client for `POST {endpoint}/score`; losses, so lower is better.
pub struct RemoteLossScorer {
    config: RemoteConfig,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct ScoreRequest<'a> {
    pairs: Vec<ScorePair<'a>>,
}

#[derive(Serialize)]
struct ScorePair<'a> {
    en: &'a str,
    vi: &'a str,
}

#[derive(Deserialize)]
struct ScoreResponse {
    losses: Vec<f64>,
}

impl RemoteLossScorer {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if config.max_batch == 0 {
            return Err(TranslateError::Config("remote max_batch must be at least 1".into()).into());
        }
        let agent = config.agent();
        Ok(RemoteLossScorer { config, agent })
    }
}

impl PairScorer for RemoteLossScorer {
    fn score_batch(&self, pairs: &[SentencePair]) -> Result<Vec<f64>> {
        let body = ScoreRequest {
            pairs: pairs.iter().map(|p| ScorePair { en: &p.en, vi: &p.vi }).collect(),
        };
        let resp: ScoreResponse =
            post_json_with_retries(&self.agent, &self.config.url("score"), &body, self.config.retries, |r: &ScoreResponse| {
                if r.losses.len() == pairs.len() {
                    Ok(())
                } else {
                    Err(format!("expected {} losses, got {}", pairs.len(), r.losses.len()))
                }
            })?;
        Ok(resp.losses)
    }

    fn higher_is_better(&self) -> bool {
        false
    }

    fn batch_size(&self) -> usize {
        self.config.max_batch
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointEntry {
    index: usize,
    score: f64,
}

fn load_checkpoint(path: &Path) -> Result<BTreeMap<usize, f64>> {
    let mut done = BTreeMap::new();
    if !path.exists() {
        return Ok(done);
    }
    let io_err = |source| FilterError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<CheckpointEntry>(&line) {
            Ok(e) => {
                done.insert(e.index, e.score);
            }
            // Torn line from an interrupted run; those pairs get rescored.
            Err(e) if e.is_eof() => continue,
            Err(e) => {
                return Err(FilterError::Checkpoint {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason: e.to_string(),
                })
            }
        }
    }
    Ok(done)
}

/// Scores every pair, in batches, keeping corpus order.
///
/// With a checkpoint path, each finished batch is appended to it as
/// `{"index", "score"}` lines and already-checkpointed pairs are not rescored.
pub fn score_corpus(corpus: &Corpus, scorer: &dyn PairScorer, checkpoint: Option<&Path>) -> Result<Corpus> {
    let mut scores: Vec<Option<f64>> = vec![None; corpus.len()];
    let mut sink = None;
    if let Some(path) = checkpoint {
        for (index, score) in load_checkpoint(path)? {
            if index < scores.len() {
                scores[index] = Some(score);
            }
        }
        let io_err = |source| FilterError::Io {
            path: path.to_path_buf(),
            source,
        };
        let torn = std::fs::read(path).map(|b| b.last().is_some_and(|&c| c != b'\n')).unwrap_or(false);
        let mut file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
        if torn {
            file.write_all(b"\n").map_err(io_err)?;
        }
        sink = Some((path, BufWriter::new(file)));
    }

    let todo: Vec<usize> = (0..corpus.len()).filter(|&i| scores[i].is_none()).collect();
    for batch in todo.chunks(scorer.batch_size().max(1)) {
        let pairs: Vec<SentencePair> = batch.iter().map(|&i| corpus.pairs[i].clone()).collect();
        let got = scorer.score_batch(&pairs)?;
        if got.len() != batch.len() {
            return Err(FilterError::CountMismatch {
                expected: batch.len(),
                got: got.len(),
            });
        }
        for (&index, &score) in batch.iter().zip(&got) {
            if !score.is_finite() {
                return Err(FilterError::NonFinite { index, score });
            }
            scores[index] = Some(score);
        }
        if let Some((path, out)) = sink.as_mut() {
            let io_err = |source| FilterError::Io {
                path: path.to_path_buf(),
                source,
            };
            for (&index, &score) in batch.iter().zip(&got) {
                serde_json::to_writer(&mut *out, &CheckpointEntry { index, score }).map_err(|e| io_err(e.into()))?;
                out.write_all(b"\n").map_err(io_err)?;
            }
            out.flush().map_err(io_err)?;
        }
    }

    let pairs = corpus
        .pairs
        .iter()
        .zip(scores)
        .map(|(p, s)| {
            let mut p = p.clone();
            p.score = s;
            p
        })
        .collect();
    Ok(Corpus::new(corpus.name.clone(), pairs))
}

fn collect_scores(scored: &Corpus) -> Result<Vec<f64>> {
    scored
        .pairs
        .iter()
        .enumerate()
        .map(|(index, p)| match p.score {
            Some(s) if s.is_finite() => Ok(s),
            Some(score) => Err(FilterError::NonFinite { index, score }),
            None => Err(FilterError::Unscored { index }),
        })
        .collect()
}

fn rank_order(scores: &[f64], higher_is_better: bool) -> impl Fn(&usize, &usize) -> Ordering + '_ {
    move |&a, &b| {
        let by_score = if higher_is_better {
            scores[b].total_cmp(&scores[a])
        } else {
            scores[a].total_cmp(&scores[b])
        };
        by_score.then(a.cmp(&b))
    }
}

/// Positions of the `k` best pairs, ascending.
pub fn top_k_indices(scores: &[f64], k: usize, higher_is_better: bool) -> Vec<usize> {
    assert!(k <= scores.len());
    if k == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, rank_order(scores, higher_is_better));
        idx.truncate(k);
    }
    idx.sort_unstable();
    idx
}

pub fn select_top_k(scored: &Corpus, k: usize, higher_is_better: bool) -> Result<Corpus> {
    let scores = collect_scores(scored)?;
    if k > scores.len() {
        return Err(FilterError::KOutOfRange { k, len: scores.len() });
    }
    let pairs = top_k_indices(&scores, k, higher_is_better)
        .into_iter()
        .map(|i| scored.pairs[i].clone())
        .collect();
    Ok(Corpus::new(scored.name.clone(), pairs))
}

/// Score of the k-th best pair, the admission threshold for `k`.
pub fn threshold_score(scored: &Corpus, k: usize, higher_is_better: bool) -> Result<Option<f64>> {
    let scores = collect_scores(scored)?;
    if k > scores.len() {
        return Err(FilterError::KOutOfRange { k, len: scores.len() });
    }
    if k == 0 {
        return Ok(None);
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    let (_, kth, _) = idx.select_nth_unstable_by(k - 1, rank_order(&scores, higher_is_better));
    Ok(Some(scores[*kth]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterReport {
    pub k_candidates: Vec<usize>,
    pub metric_per_k: Vec<f64>,
    pub chosen_k: Option<usize>,
    pub threshold_score: Option<f64>,
    pub higher_is_better: bool,
}

/// Held-out quality of a candidate sub-corpus; larger is better.
pub trait Evaluator {
    fn evaluate(&mut self, k: usize, candidate: &Corpus) -> std::result::Result<f64, String>;
}

impl<F> Evaluator for F
where
    F: FnMut(usize, &Corpus) -> std::result::Result<f64, String>,
{
    fn evaluate(&mut self, k: usize, candidate: &Corpus) -> std::result::Result<f64, String> {
        self(k, candidate)
    }
}

/// Runs `program args... <candidate.jsonl>` and reads one number from stdout.
pub struct CommandEvaluator {
    pub program: String,
    pub args: Vec<String>,
    pub workdir: PathBuf,
}

impl CommandEvaluator {
    /// Splits `command` on whitespace into program and leading arguments.
    pub fn parse(command: &str, workdir: impl Into<PathBuf>) -> Option<Self> {
        let mut parts = command.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(CommandEvaluator {
            program,
            args: parts.collect(),
            workdir: workdir.into(),
        })
    }
}

impl Evaluator for CommandEvaluator {
    fn evaluate(&mut self, k: usize, candidate: &Corpus) -> std::result::Result<f64, String> {
        let path = self.workdir.join(format!("candidate-k{k}.jsonl"));
        corpus::export(candidate, &path, corpus::Format::Jsonl).map_err(|e| e.to_string())?;
        let output = Command::new(&self.program)
            .args(&self.args)
            .arg(&path)
            .output()
            .map_err(|e| format!("cannot run `{}`: {e}", self.program))?;
        if !output.status.success() {
            return Err(format!(
                "`{}` exited with {}: {}",
                self.program,
                output.status,
                String::from_utf8_lossy(&output.stderr).trim()
            ));
        }
        let stdout = String::from_utf8_lossy(&output.stdout);
        let metric: f64 = stdout
            .trim()
            .parse()
            .map_err(|_| format!("expected a single number on stdout, got `{}`", stdout.trim()))?;
        if metric.is_finite() {
            Ok(metric)
        } else {
            Err(format!("non-finite metric {metric}"))
        }
    }
}

/// Evaluates each candidate K once and keeps the best; ties go to the smaller K.
///
/// On evaluator failure the error carries the report for the candidates done so far.
pub fn tune_k(
    scored: &Corpus,
    k_candidates: &[usize],
    higher_is_better: bool,
    evaluator: &mut dyn Evaluator,
) -> Result<FilterReport> {
    if k_candidates.is_empty() {
        return Err(FilterError::NoCandidates);
    }
    let scores = collect_scores(scored)?;
    if let Some(&k) = k_candidates.iter().find(|&&k| k > scores.len()) {
        return Err(FilterError::KOutOfRange { k, len: scores.len() });
    }

    let mut report = FilterReport {
        k_candidates: Vec::new(),
        metric_per_k: Vec::new(),
        chosen_k: None,
        threshold_score: None,
        higher_is_better,
    };
    for &k in k_candidates {
        let candidate = select_top_k(scored, k, higher_is_better)?;
        match evaluator.evaluate(k, &candidate) {
            Ok(metric) => {
                report.k_candidates.push(k);
                report.metric_per_k.push(metric);
            }
            Err(message) => {
                return Err(FilterError::Evaluator {
                    k,
                    message,
                    partial: Box::new(report),
                })
            }
        }
    }

    let mut best: Option<(usize, f64)> = None;
    for (&k, &m) in report.k_candidates.iter().zip(&report.metric_per_k) {
        best = match best {
            Some((bk, bm)) if bm > m || (bm == m && bk <= k) => Some((bk, bm)),
            _ => Some((k, m)),
        };
    }
    let chosen = best.map(|(k, _)| k);
    report.chosen_k = chosen;
    report.threshold_score = match chosen {
        Some(k) => threshold_score(scored, k, higher_is_better)?,
        None => None,
    };
    Ok(report)
}
