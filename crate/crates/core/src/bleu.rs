//! Sentence- and corpus-level BLEU.
//!
//! `score = 100 · BP · exp(mean_n ln p_n)` over exactly `max_n` orders, where `p_n`
//! is the clipped n-gram precision and `BP = exp(1 − ref_len / hyp_len)` for a
//! hypothesis shorter than its reference (1 otherwise, 0 for an empty one).
//!
//! Add-k smoothing touches orders `n ≥ 2` only. Corpus BLEU pools matches,
//! totals and lengths over all segments before computing precisions.
//!
//! [`NgramProfile`] precomputes the interned n-gram multiset of a sentence so that
//! repeated scoring (the alignment DP scores every sentence against every other)
//! reduces to merging two sorted vectors per order.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_general_category::{get_general_category, GeneralCategory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizerKind {
    Whitespace,
    Intl,
}

impl FromStr for TokenizerKind {
    type Err = BleuError;

    fn from_str(s: &str) -> Result<Self, BleuError> {
        match s {
            "whitespace" => Ok(TokenizerKind::Whitespace),
            "intl" => Ok(TokenizerKind::Intl),
            other => Err(BleuError::UnknownTokenizer(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Smoothing {
    None,
    AddK(f64),
}

impl FromStr for Smoothing {
    type Err = BleuError;

    /// Accepts `none`, `add-k` (k = 1) or `add-k:<k>`.
    fn from_str(s: &str) -> Result<Self, BleuError> {
        let bad = || BleuError::UnknownSmoothing(s.to_string());
        match s {
            "none" => Ok(Smoothing::None),
            "add-k" | "add_k" => Ok(Smoothing::AddK(1.0)),
            _ => {
                let k = s
                    .strip_prefix("add-k:")
                    .or_else(|| s.strip_prefix("add_k:"))
                    .ok_or_else(bad)?;
                let k: f64 = k.parse().map_err(|_| bad())?;
                if k > 0.0 && k.is_finite() {
                    Ok(Smoothing::AddK(k))
                } else {
                    Err(bad())
                }
            }
        }
    }
}

impl fmt::Display for Smoothing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Smoothing::None => f.write_str("none"),
            Smoothing::AddK(k) => write!(f, "add-k:{k}"),
        }
    }
}

#[derive(Debug, Error)]
pub enum BleuError {
    #[error("hypothesis and reference lists differ in length ({hyps} vs {refs})")]
    LengthMismatch { hyps: usize, refs: usize },
    #[error("corpus BLEU needs at least one segment")]
    EmptyCorpus,
    #[error("unknown tokenizer `{0}` (expected whitespace or intl)")]
    UnknownTokenizer(String),
    #[error("unknown smoothing `{0}` (expected none, add-k or add-k:<k>)")]
    UnknownSmoothing(String),
    #[error("max_n must be at least 1")]
    InvalidOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuConfig {
    pub max_n: usize,
    pub case_sensitive: bool,
    pub tokenizer: TokenizerKind,
    pub smoothing: Smoothing,
}

impl Default for BleuConfig {
    /// Sentence-level defaults: BLEU-4, case-sensitive, intl tokenizer, add-1 smoothing.
    fn default() -> Self {
        BleuConfig {
            max_n: 4,
            case_sensitive: true,
            tokenizer: TokenizerKind::Intl,
            smoothing: Smoothing::AddK(1.0),
        }
    }
}

impl BleuConfig {
    /// Corpus-level defaults: as [`Default`] but unsmoothed.
    pub fn corpus() -> Self {
        BleuConfig {
            smoothing: Smoothing::None,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), BleuError> {
        if self.max_n == 0 {
            return Err(BleuError::InvalidOrder);
        }
        if let Smoothing::AddK(k) = self.smoothing {
            if !(k > 0.0 && k.is_finite()) {
                return Err(BleuError::UnknownSmoothing(self.smoothing.to_string()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BleuBreakdown {
    pub score: f64,
    pub precisions: Vec<f64>,
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

pub(crate) fn is_punctuation(c: char) -> bool {
    matches!(
        get_general_category(c),
        GeneralCategory::ConnectorPunctuation
            | GeneralCategory::DashPunctuation
            | GeneralCategory::OpenPunctuation
            | GeneralCategory::ClosePunctuation
            | GeneralCategory::InitialPunctuation
            | GeneralCategory::FinalPunctuation
            | GeneralCategory::OtherPunctuation
    )
}

pub fn tokenize(text: &str, config: &BleuConfig) -> Vec<String> {
    let folded;
    let text = if config.case_sensitive {
        text
    } else {
        folded = text.to_lowercase();
        folded.as_str()
    };
    match config.tokenizer {
        TokenizerKind::Whitespace => text.split_whitespace().map(str::to_string).collect(),
        TokenizerKind::Intl => {
            let mut tokens = Vec::new();
            for chunk in text.split_whitespace() {
                let mut current = String::new();
                for c in chunk.chars() {
                    if is_punctuation(c) {
                        if !current.is_empty() {
                            tokens.push(std::mem::take(&mut current));
                        }
                        tokens.push(c.to_string());
                    } else {
                        current.push(c);
                    }
                }
                if !current.is_empty() {
                    tokens.push(current);
                }
            }
            tokens
        }
    }
}

/// Clipped match and total counts per order, plus lengths. Additive over segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramStats {
    pub matches: Vec<u64>,
    pub totals: Vec<u64>,
    pub hyp_len: u64,
    pub ref_len: u64,
}

impl NgramStats {
    pub fn zero(max_n: usize) -> Self {
        NgramStats {
            matches: vec![0; max_n],
            totals: vec![0; max_n],
            hyp_len: 0,
            ref_len: 0,
        }
    }

    pub fn add(&mut self, other: &NgramStats) {
        for (a, b) in self.matches.iter_mut().zip(&other.matches) {
            *a += b;
        }
        for (a, b) in self.totals.iter_mut().zip(&other.totals) {
            *a += b;
        }
        self.hyp_len += other.hyp_len;
        self.ref_len += other.ref_len;
    }

    pub fn from_tokens(hyp: &[String], reference: &[String], max_n: usize) -> Self {
        let mut stats = NgramStats::zero(max_n);
        stats.hyp_len = hyp.len() as u64;
        stats.ref_len = reference.len() as u64;
        for n in 1..=max_n {
            if hyp.len() < n {
                break;
            }
            let mut ref_counts: HashMap<&[String], u64> = HashMap::new();
            if reference.len() >= n {
                for g in reference.windows(n) {
                    *ref_counts.entry(g).or_default() += 1;
                }
            }
            let mut hyp_counts: HashMap<&[String], u64> = HashMap::new();
            for g in hyp.windows(n) {
                *hyp_counts.entry(g).or_default() += 1;
            }
            stats.totals[n - 1] = (hyp.len() - n + 1) as u64;
            stats.matches[n - 1] = hyp_counts
                .iter()
                .map(|(g, &c)| c.min(ref_counts.get(g).copied().unwrap_or(0)))
                .sum();
        }
        stats
    }

    pub fn breakdown(&self, config: &BleuConfig) -> BleuBreakdown {
        let precisions: Vec<f64> = self
            .matches
            .iter()
            .zip(&self.totals)
            .enumerate()
            .map(|(i, (&m, &t))| match config.smoothing {
                Smoothing::AddK(k) if i >= 1 => (m as f64 + k) / (t as f64 + k),
                _ if t == 0 => 0.0,
                _ => m as f64 / t as f64,
            })
            .collect();
        let brevity_penalty = if self.hyp_len >= self.ref_len {
            1.0
        } else if self.hyp_len == 0 {
            0.0
        } else {
            (1.0 - self.ref_len as f64 / self.hyp_len as f64).exp()
        };
        let score = if self.hyp_len == 0 || precisions.iter().any(|&p| p == 0.0) {
            0.0
        } else {
            let log_mean = precisions.iter().map(|p| p.ln()).sum::<f64>() / precisions.len() as f64;
            (100.0 * brevity_penalty * log_mean.exp()).min(100.0)
        };
        BleuBreakdown {
            score,
            precisions,
            brevity_penalty,
            hyp_len: self.hyp_len as usize,
            ref_len: self.ref_len as usize,
        }
    }
}

pub fn sentence_bleu(hyp: &str, reference: &str, config: &BleuConfig) -> BleuBreakdown {
    let h = tokenize(hyp, config);
    let r = tokenize(reference, config);
    NgramStats::from_tokens(&h, &r, config.max_n).breakdown(config)
}

pub fn corpus_bleu<H, R>(hyps: &[H], refs: &[R], config: &BleuConfig) -> Result<BleuBreakdown, BleuError>
where
    H: AsRef<str>,
    R: AsRef<str>,
{
    config.validate()?;
    if hyps.len() != refs.len() {
        return Err(BleuError::LengthMismatch {
            hyps: hyps.len(),
            refs: refs.len(),
        });
    }
    if hyps.is_empty() {
        return Err(BleuError::EmptyCorpus);
    }
    let mut total = NgramStats::zero(config.max_n);
    for (h, r) in hyps.iter().zip(refs) {
        let h = tokenize(h.as_ref(), config);
        let r = tokenize(r.as_ref(), config);
        total.add(&NgramStats::from_tokens(&h, &r, config.max_n));
    }
    Ok(total.breakdown(config))
}

/// Interns tokens and n-grams so profiles can be compared by integer id.
#[derive(Debug, Default)]
pub struct NgramVocab {
    tokens: HashMap<String, u32>,
    ngrams: HashMap<Vec<u32>, u32>,
}

impl NgramVocab {
    pub fn new() -> Self {
        Self::default()
    }

    fn token_id(&mut self, tok: String) -> u32 {
        let next = self.tokens.len() as u32;
        *self.tokens.entry(tok).or_insert(next)
    }

    fn ngram_id(&mut self, gram: &[u32]) -> u32 {
        if let Some(&id) = self.ngrams.get(gram) {
            return id;
        }
        let id = self.ngrams.len() as u32;
        self.ngrams.insert(gram.to_vec(), id);
        id
    }

    pub fn profile(&mut self, text: &str, config: &BleuConfig) -> NgramProfile {
        let ids: Vec<u32> = tokenize(text, config).into_iter().map(|t| self.token_id(t)).collect();
        let orders = (1..=config.max_n)
            .map(|n| {
                if ids.len() < n {
                    return Vec::new();
                }
                let mut grams: Vec<u32> = ids.windows(n).map(|g| self.ngram_id(g)).collect();
                grams.sort_unstable();
                let mut counted: Vec<(u32, u32)> = Vec::new();
                for g in grams {
                    match counted.last_mut() {
                        Some((last, c)) if *last == g => *c += 1,
                        _ => counted.push((g, 1)),
                    }
                }
                counted
            })
            .collect();
        NgramProfile {
            len: ids.len(),
            orders,
        }
    }
}

/// Interned n-gram multiset of one tokenized sentence, sorted by id per order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NgramProfile {
    len: usize,
    orders: Vec<Vec<(u32, u32)>>,
}

impl NgramProfile {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Counts for `self` as hypothesis against `reference`. Both must come from the same vocab.
    pub fn stats_against(&self, reference: &NgramProfile) -> NgramStats {
        let max_n = self.orders.len();
        let mut stats = NgramStats::zero(max_n);
        stats.hyp_len = self.len as u64;
        stats.ref_len = reference.len as u64;
        for n in 0..max_n {
            let hyp = &self.orders[n];
            stats.totals[n] = hyp.iter().map(|&(_, c)| c as u64).sum();
            let refs = &reference.orders[n];
            let (mut i, mut j, mut m) = (0, 0, 0u64);
            while i < hyp.len() && j < refs.len() {
                match hyp[i].0.cmp(&refs[j].0) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        m += hyp[i].1.min(refs[j].1) as u64;
                        i += 1;
                        j += 1;
                    }
                }
            }
            stats.matches[n] = m;
        }
        stats
    }

    pub fn bleu_against(&self, reference: &NgramProfile, config: &BleuConfig) -> f64 {
        self.stats_against(reference).breakdown(config).score
    }
}
