//! Monotone sentence alignment of weakly-aligned document pairs.
//!
//! For English sentences `e_1..e_M` and Vietnamese sentences `v_1..v_N` the
//! aligner fills
//!
//! ```text
//! dp[i][j] = max(dp[i-1][j], dp[i][j-1], dp[i-1][j-1] + s(e_i, v_j))
//! ```
//!
//! with `dp[0][*] = dp[*][0] = 0`, where
//! `s(e, v) = BLEU(t_vi→en(v), e) + BLEU(t_en→vi(e), v)` lies in `[0, 200]`.
//! The diagonal transition is only admitted when `s ≥ min_pair_score` and
//! `s > 0`, which is what lets sentences with no usable counterpart (headers,
//! footers, untranslated boilerplate) fall out as skips.
//!
//! No backpointers are stored. The backtrace walks from `(M, N)` to `(0, 0)` and
//! re-derives which transition produced each cell, preferring match, then
//! skipping the Vietnamese sentence, then skipping the English one.
//!
//! Indices in [`AlignmentResult`] are zero-based sentence positions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bleu::{sentence_bleu, BleuConfig, NgramVocab};
use crate::corpus::{CorpusError, Document, DocumentPair, DomainTag, Lang, SentencePair};
use crate::translate::{Direction, TranslateError, TranslatorGateway};

pub const DEFAULT_MIN_PAIR_SCORE: f64 = 10.0;
pub const DEFAULT_MAX_SENTENCES: usize = 20_000;

#[derive(Debug, Error)]
pub enum AlignError {
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(
        "{side} document has {len} sentences, above the limit of {limit}; split it into smaller sections first"
    )]
    DocumentTooLong { side: Lang, len: usize, limit: usize },
    #[error("invalid alignment config: {0}")]
    Config(String),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("{path}:{line}: {reason}")]
    Manifest {
        path: std::path::PathBuf,
        line: usize,
        reason: String,
    },
    #[error("failed to start worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    pub bleu: BleuConfig,
    /// Matches scoring below this (on the 0–200 pair scale) are never made.
    pub min_pair_score: f64,
    /// Optional limit on how far a match may stray from the length-scaled diagonal, in sentences.
    #[serde(default)]
    pub band: Option<usize>,
    #[serde(default = "default_max_sentences")]
    pub max_sentences: usize,
}

fn default_max_sentences() -> usize {
    DEFAULT_MAX_SENTENCES
}

impl Default for AlignConfig {
    fn default() -> Self {
        AlignConfig {
            bleu: BleuConfig::default(),
            min_pair_score: DEFAULT_MIN_PAIR_SCORE,
            band: None,
            max_sentences: DEFAULT_MAX_SENTENCES,
        }
    }
}

impl AlignConfig {
    pub fn validate(&self) -> Result<(), AlignError> {
        if !(self.min_pair_score >= 0.0) {
            return Err(AlignError::Config(format!(
                "min_pair_score must be a non-negative number, got {}",
                self.min_pair_score
            )));
        }
        self.bleu.validate().map_err(|e| AlignError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub en: usize,
    pub vi: usize,
    pub score: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    pub matches: Vec<Match>,
    pub skipped_en: Vec<usize>,
    pub skipped_vi: Vec<usize>,
    pub total_score: f64,
}

impl AlignmentResult {
    pub fn match_indices(&self) -> Vec<(usize, usize)> {
        self.matches.iter().map(|m| (m.en, m.vi)).collect()
    }
}

/// `(M+1) × (N+1)` table of best partial-alignment totals, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DpTable {
    rows: usize,
    cols: usize,
    scores: Vec<f64>,
}

impl DpTable {
    fn new(m: usize, n: usize) -> Self {
        DpTable {
            rows: m,
            cols: n,
            scores: vec![0.0; (m + 1) * (n + 1)],
        }
    }

    /// Number of English sentences (M).
    pub fn m(&self) -> usize {
        self.rows
    }

    /// Number of Vietnamese sentences (N).
    pub fn n(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.scores[i * (self.cols + 1) + j]
    }

    #[inline]
    fn set(&mut self, i: usize, j: usize, v: f64) {
        self.scores[i * (self.cols + 1) + j] = v;
    }
}

/// Gate on the diagonal transition for cell `(i, j)` (one-based).
#[derive(Debug, Clone, Copy)]
struct MatchGate {
    tau: f64,
    band: Option<(usize, usize, usize)>,
}

impl MatchGate {
    fn new(m: usize, n: usize, tau: f64, band: Option<usize>) -> Self {
        MatchGate {
            tau,
            band: band.map(|b| (m, n, b)),
        }
    }

    #[inline]
    fn in_band(&self, i: usize, j: usize) -> bool {
        match self.band {
            None => true,
            Some((m, n, b)) => {
                // |i/M − j/N| · max(M, N) ≤ b, in exact integer arithmetic.
                let lhs = (i * n).abs_diff(j * m) as u128 * m.max(n) as u128;
                lhs <= b as u128 * (m * n) as u128
            }
        }
    }

    #[inline]
    fn admits(&self, s: f64) -> bool {
        s >= self.tau && s > 0.0
    }
}

/// Runs the DP for an arbitrary pair-score function over zero-based indices.
///
/// `score` is called once per in-band cell while filling the table and again
/// for cells on the backtrace path, so it must be deterministic.
pub fn align_with_scores<F>(m: usize, n: usize, mut score: F, tau: f64, band: Option<usize>) -> (AlignmentResult, DpTable)
where
    F: FnMut(usize, usize) -> f64,
{
    let gate = MatchGate::new(m, n, tau, band);
    let mut dp = DpTable::new(m, n);
    for i in 1..=m {
        for j in 1..=n {
            let mut best = dp.get(i - 1, j).max(dp.get(i, j - 1));
            if gate.in_band(i, j) {
                let s = score(i - 1, j - 1);
                if gate.admits(s) {
                    best = best.max(dp.get(i - 1, j - 1) + s);
                }
            }
            dp.set(i, j, best);
        }
    }

    let mut matches = Vec::new();
    let mut skipped_en = Vec::new();
    let mut skipped_vi = Vec::new();
    let (mut i, mut j) = (m, n);
    while i > 0 && j > 0 {
        let here = dp.get(i, j);
        if gate.in_band(i, j) {
            let s = score(i - 1, j - 1);
            if gate.admits(s) && dp.get(i - 1, j - 1) + s == here {
                matches.push(Match {
                    en: i - 1,
                    vi: j - 1,
                    score: s,
                });
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if dp.get(i, j - 1) == here {
            skipped_vi.push(j - 1);
            j -= 1;
        } else {
            skipped_en.push(i - 1);
            i -= 1;
        }
    }
    skipped_en.extend((0..i).rev());
    skipped_vi.extend((0..j).rev());
    matches.reverse();
    skipped_en.reverse();
    skipped_vi.reverse();

    let result = AlignmentResult {
        matches,
        skipped_en,
        skipped_vi,
        total_score: dp.get(m, n),
    };
    (result, dp)
}

/// Bidirectional pair score `s(e, v)` in `[0, 200]`.
pub fn pair_score(en: &str, vi: &str, gateway: &TranslatorGateway, bleu: &BleuConfig) -> Result<f64, AlignError> {
    let vi_as_en = gateway.translate(Direction::VI_EN, &[vi])?;
    let en_as_vi = gateway.translate(Direction::EN_VI, &[en])?;
    Ok(sentence_bleu(&vi_as_en[0], en, bleu).score + sentence_bleu(&en_as_vi[0], vi, bleu).score)
}

fn check_lengths(pair: &DocumentPair, limit: usize) -> Result<(), AlignError> {
    for doc in [&pair.doc_en, &pair.doc_vi] {
        if doc.len() > limit {
            return Err(AlignError::DocumentTooLong {
                side: doc.lang,
                len: doc.len(),
                limit,
            });
        }
    }
    Ok(())
}

fn warm_pair(pair: &DocumentPair, gateway: &TranslatorGateway) -> Result<(), AlignError> {
    if pair.doc_en.is_empty() || pair.doc_vi.is_empty() {
        return Ok(());
    }
    let en: Vec<&str> = pair.doc_en.texts().collect();
    let vi: Vec<&str> = pair.doc_vi.texts().collect();
    gateway.warm(Direction::EN_VI, &en)?;
    gateway.warm(Direction::VI_EN, &vi)?;
    Ok(())
}

pub fn align_documents(
    pair: &DocumentPair,
    gateway: &TranslatorGateway,
    config: &AlignConfig,
) -> Result<AlignmentResult, AlignError> {
    config.validate()?;
    check_lengths(pair, config.max_sentences)?;
    let (m, n) = (pair.doc_en.len(), pair.doc_vi.len());
    if m == 0 || n == 0 {
        let (result, _) = align_with_scores(m, n, |_, _| 0.0, config.min_pair_score, None);
        return Ok(result);
    }

    warm_pair(pair, gateway)?;
    let en: Vec<&str> = pair.doc_en.texts().collect();
    let vi: Vec<&str> = pair.doc_vi.texts().collect();
    let en_as_vi = gateway.translate(Direction::EN_VI, &en)?;
    let vi_as_en = gateway.translate(Direction::VI_EN, &vi)?;

    let bleu = &config.bleu;
    let mut vocab = NgramVocab::new();
    let en_ref: Vec<_> = en.iter().map(|t| vocab.profile(t, bleu)).collect();
    let vi_ref: Vec<_> = vi.iter().map(|t| vocab.profile(t, bleu)).collect();
    let en_hyp: Vec<_> = vi_as_en.iter().map(|t| vocab.profile(t, bleu)).collect();
    let vi_hyp: Vec<_> = en_as_vi.iter().map(|t| vocab.profile(t, bleu)).collect();

    let score = |i: usize, j: usize| en_hyp[j].bleu_against(&en_ref[i], bleu) + vi_hyp[i].bleu_against(&vi_ref[j], bleu);
    let (result, _) = align_with_scores(m, n, score, config.min_pair_score, config.band);
    Ok(result)
}

/// Aligned pairs as tier-3 corpus records carrying their pair score.
pub fn matched_pairs(pair: &DocumentPair, result: &AlignmentResult) -> Vec<SentencePair> {
    result
        .matches
        .iter()
        .map(|m| {
            let mut sp = SentencePair::new(
                pair.doc_en.sentences[m.en].text.clone(),
                pair.doc_vi.sentences[m.vi].text.clone(),
                pair.doc_en.domain.clone(),
                3,
                pair.pair_id.clone(),
            );
            sp.score = Some(m.score);
            sp
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DocumentReport {
    pub pair_id: String,
    pub en_sentences: usize,
    pub vi_sentences: usize,
    pub matches: usize,
    /// Matches over `min(M, N)`; zero when either side is empty.
    pub match_rate: f64,
    pub total_score: f64,
    /// Distinct sentences this document needed translated (both directions).
    pub translations_needed: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchReport {
    pub documents: usize,
    pub failures: usize,
    pub total_matches: usize,
    pub backend_translations: u64,
    /// Ten equal-width match-rate bins over [0, 1]; the last bin includes 1.0.
    pub match_rate_histogram: [usize; 10],
    pub per_document: Vec<DocumentReport>,
}

pub struct BatchOutcome {
    pub results: Vec<Result<AlignmentResult, AlignError>>,
    pub report: BatchReport,
}

impl BatchOutcome {
    pub fn has_failures(&self) -> bool {
        self.report.failures > 0
    }
}

fn distinct_count<'a>(texts: impl Iterator<Item = &'a str>) -> usize {
    texts.map(str::trim).collect::<std::collections::HashSet<_>>().len()
}

/// Aligns many document pairs on `workers` threads.
///
/// Translations are pre-warmed one document at a time in input order, so the
/// backend sees the same requests whatever the worker count; the DP phase then
/// runs in parallel against the warm cache. A failing document is reported
/// and skipped without stopping the batch.
pub fn align_batch(
    pairs: &[DocumentPair],
    gateway: &TranslatorGateway,
    config: &AlignConfig,
    workers: usize,
) -> Result<BatchOutcome, AlignError> {
    config.validate()?;
    if workers == 0 {
        return Err(AlignError::Config("workers must be at least 1".into()));
    }
    let calls_before = gateway.backend_translations();

    let warmed: Vec<Result<(), AlignError>> = pairs
        .iter()
        .map(|p| {
            check_lengths(p, config.max_sentences)?;
            warm_pair(p, gateway)
        })
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| AlignError::Pool(e.to_string()))?;
    let results: Vec<Result<AlignmentResult, AlignError>> = pool.install(|| {
        pairs
            .par_iter()
            .zip(warmed)
            .map(|(p, warm)| warm.and_then(|_| align_documents(p, gateway, config)))
            .collect()
    });

    let mut report = BatchReport {
        documents: pairs.len(),
        failures: 0,
        total_matches: 0,
        backend_translations: gateway.backend_translations() - calls_before,
        match_rate_histogram: [0; 10],
        per_document: Vec::with_capacity(pairs.len()),
    };
    for (p, r) in pairs.iter().zip(&results) {
        let (m, n) = (p.doc_en.len(), p.doc_vi.len());
        let translations_needed = if m == 0 || n == 0 {
            0
        } else {
            distinct_count(p.doc_en.texts()) + distinct_count(p.doc_vi.texts())
        };
        let mut doc = DocumentReport {
            pair_id: p.pair_id.clone(),
            en_sentences: m,
            vi_sentences: n,
            matches: 0,
            match_rate: 0.0,
            total_score: 0.0,
            translations_needed,
            error: None,
        };
        match r {
            Ok(res) => {
                doc.matches = res.matches.len();
                doc.total_score = res.total_score;
                if m.min(n) > 0 {
                    doc.match_rate = doc.matches as f64 / m.min(n) as f64;
                }
                report.total_matches += doc.matches;
                let bin = ((doc.match_rate * 10.0) as usize).min(9);
                report.match_rate_histogram[bin] += 1;
            }
            Err(e) => {
                report.failures += 1;
                doc.error = Some(e.to_string());
            }
        }
        report.per_document.push(doc);
    }
    Ok(BatchOutcome { results, report })
}

/// Reads a manifest of `en-doc-path \t vi-doc-path [\t domain]` lines.
///
/// Relative paths resolve against the manifest's directory. The English path
/// becomes the pair id.
pub fn load_manifest(path: &std::path::Path, default_domain: &DomainTag) -> Result<Vec<DocumentPair>, AlignError> {
    let text = std::fs::read_to_string(path).map_err(|e| CorpusError::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| std::path::Path::new(""));
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 2 || fields.len() > 3 {
            return Err(AlignError::Manifest {
                path: path.to_path_buf(),
                line: i + 1,
                reason: "expected en-path \\t vi-path [\\t domain]".into(),
            });
        }
        let domain = fields
            .get(2)
            .filter(|d| !d.trim().is_empty())
            .map(|d| DomainTag::parse(d))
            .unwrap_or_else(|| default_domain.clone());
        let resolve = |p: &str| base.join(p.trim());
        let doc_en = Document::read(&resolve(fields[0]), Lang::En, domain.clone())?;
        let doc_vi = Document::read(&resolve(fields[1]), Lang::Vi, domain)?;
        pairs.push(DocumentPair::new(fields[0].trim(), doc_en, doc_vi));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::translate::{CachedTranslations, IdentityTranslator, Lexicon};

    fn doc(lang: Lang, lines: &[&str]) -> Document {
        Document::from_lines(lang, lines.iter().copied(), "d", DomainTag::News)
    }

    fn pair(en: &[&str], vi: &[&str]) -> DocumentPair {
        DocumentPair::new("p", doc(Lang::En, en), doc(Lang::Vi, vi))
    }

    #[test]
    fn pair_score_examples() {
        let gw = TranslatorGateway::with_backend(IdentityTranslator);
        let cfg = BleuConfig::default();
        assert_eq!(pair_score("a b c", "a b c", &gw, &cfg).unwrap(), 200.0);

        let lex = Lexicon::from_entries(Direction::VI_EN, [("mèo", "cat"), ("ngồi", "sat")]).with_inverse(Direction::VI_EN);
        let gw = TranslatorGateway::with_backend(lex);
        let uni = BleuConfig {
            max_n: 1,
            ..Default::default()
        };
        assert_eq!(pair_score("cat sat", "mèo ngồi", &gw, &uni).unwrap(), 200.0);

        let gw = TranslatorGateway::with_backend(Lexicon::new());
        let none = BleuConfig {
            smoothing: crate::bleu::Smoothing::None,
            ..Default::default()
        };
        assert_eq!(pair_score("one two three four", "năm sáu bảy tám", &gw, &none).unwrap(), 0.0);
    }

    #[test]
    fn perfect_diagonal() {
        let gw = TranslatorGateway::with_backend(IdentityTranslator);
        let lines = ["the first line here", "a second sentence now", "and the third one"];
        let r = align_documents(&pair(&lines, &lines), &gw, &AlignConfig::default()).unwrap();
        assert_eq!(r.match_indices(), [(0, 0), (1, 1), (2, 2)]);
        assert!(r.skipped_en.is_empty() && r.skipped_vi.is_empty());
        assert_eq!(r.total_score, 600.0);
    }

    #[test]
    fn leading_header_is_skipped() {
        let gw = TranslatorGateway::with_backend(IdentityTranslator);
        let body = ["the first line here", "a second sentence now", "and the third one"];
        let en = ["CHAPTER ONE HEADER", body[0], body[1], body[2]];
        let r = align_documents(&pair(&en, &body), &gw, &AlignConfig::default()).unwrap();
        assert_eq!(r.skipped_en, [0]);
        assert_eq!(r.match_indices(), [(1, 0), (2, 1), (3, 2)]);
    }

    #[test]
    fn empty_side() {
        let gw = TranslatorGateway::with_backend(IdentityTranslator);
        let r = align_documents(&pair(&["a", "b"], &[]), &gw, &AlignConfig::default()).unwrap();
        assert!(r.matches.is_empty());
        assert_eq!(r.skipped_en, [0, 1]);
        assert_eq!(r.total_score, 0.0);
        assert_eq!(gw.backend_translations(), 0);
    }

    #[test]
    fn zero_score_match_is_stripped() {
        let (r, dp) = align_with_scores(2, 2, |_, _| 0.0, 0.0, None);
        assert!(r.matches.is_empty());
        assert_eq!((r.skipped_en.len(), r.skipped_vi.len()), (2, 2));
        assert_eq!(dp.get(2, 2), 0.0);
    }

    #[test]
    fn tie_prefers_match_then_skip_vi() {
        // Both (0,0) and (0,1) give 5; backtrace from (1,2) tries match (0,1) first.
        let (r, _) = align_with_scores(1, 2, |_, _| 5.0, 0.0, None);
        assert_eq!(r.match_indices(), [(0, 1)]);
        assert_eq!(r.skipped_vi, [0]);
    }

    #[test]
    fn dp_table_monotone_with_zero_border() {
        let scores = [[3.0, 9.0, 1.0], [4.0, 0.0, 7.0]];
        let (_, dp) = align_with_scores(2, 3, |i, j| scores[i][j], 2.0, None);
        for i in 0..=2 {
            for j in 0..=3 {
                if i == 0 || j == 0 {
                    assert_eq!(dp.get(i, j), 0.0);
                } else {
                    assert!(dp.get(i, j) >= dp.get(i - 1, j) && dp.get(i, j) >= dp.get(i, j - 1));
                }
            }
        }
        assert_eq!(dp.get(2, 3), 16.0);
    }

    #[test]
    fn band_restricts_matches() {
        let (r, _) = align_with_scores(4, 4, |i, j| if i == 0 && j == 3 { 100.0 } else { 1.0 }, 0.0, Some(1));
        assert!(r.matches.iter().all(|m| m.en.abs_diff(m.vi) <= 1));
        let (r, _) = align_with_scores(4, 4, |i, j| if i == 0 && j == 3 { 100.0 } else { 1.0 }, 0.0, None);
        assert_eq!(r.total_score, 100.0);
    }

    #[test]
    fn oversized_document_rejected() {
        let gw = TranslatorGateway::with_backend(IdentityTranslator);
        let cfg = AlignConfig {
            max_sentences: 2,
            ..Default::default()
        };
        let err = align_documents(&pair(&["a", "b", "c"], &["a"]), &gw, &cfg).unwrap_err();
        assert!(matches!(err, AlignError::DocumentTooLong { side: Lang::En, len: 3, limit: 2 }));
    }

    #[test]
    fn batch_fail_soft() {
        let good = pair(&["hello there"], &["xin chào"]);
        let bad = pair(&["unknown"], &["xin chào"]);
        let backend = CachedTranslations::from_entries(
            [
                (Direction::EN_VI, "hello there", "xin chào"),
                (Direction::VI_EN, "xin chào", "hello there"),
            ],
            true,
        );
        let gw = TranslatorGateway::with_backend(backend);
        let out = align_batch(&[good, bad], &gw, &AlignConfig::default(), 2).unwrap();
        assert_eq!(out.report.failures, 1);
        assert!(out.results[0].is_ok() && out.results[1].is_err());
        assert_eq!(out.results[0].as_ref().unwrap().matches.len(), 1);
        assert!(out.report.per_document[1].error.as_deref().unwrap().contains("unknown"));
    }

    #[test]
    fn matched_pairs_are_tier_three() {
        let gw = TranslatorGateway::with_backend(IdentityTranslator);
        let p = pair(&["same text here"], &["same text here"]);
        let r = align_documents(&p, &gw, &AlignConfig::default()).unwrap();
        let sp = matched_pairs(&p, &r);
        assert_eq!(sp.len(), 1);
        assert_eq!((sp[0].tier, sp[0].score), (3, Some(200.0)));
    }
}
