//! Exact deduplication on normalized `(en, vi)` keys.
//!
//! A pair's key is `normalize(en) ⊕ U+0000 ⊕ normalize(vi)`, so identical English
//! with different Vietnamese is not a duplicate. Keys are reduced to seeded
//! 128-bit xxh3 fingerprints; `paranoid` mode additionally compares the full
//! normalized strings inside each fingerprint bucket.
//!
//! The first occurrence of every key survives and survivors keep corpus order.

use std::collections::{HashMap, HashSet};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;
use xxhash_rust::xxh3::Xxh3;

use crate::bleu::is_punctuation;
use crate::corpus::{Corpus, SentencePair};

const FINGERPRINT_SEED: u64 = 0x6d74_6574_6465_6475;
const SHARD_BITS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizationPolicy {
    pub unicode_canonical: bool,
    pub casefold: bool,
    pub collapse_whitespace: bool,
    pub strip_punct: bool,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        NormalizationPolicy {
            unicode_canonical: true,
            casefold: true,
            collapse_whitespace: true,
            strip_punct: false,
        }
    }
}

impl FromStr for NormalizationPolicy {
    type Err = String;

    /// Comma-separated edits applied to the default policy: `none`, `default`,
    /// and `nfc | casefold | whitespace | punct`, each optionally prefixed `no-`.
    fn from_str(s: &str) -> Result<Self, String> {
        let mut p = NormalizationPolicy::default();
        for flag in s.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            let (name, on) = match flag.strip_prefix("no-") {
                Some(rest) => (rest, false),
                None => (flag, true),
            };
            match name {
                "none" if on => {
                    p = NormalizationPolicy {
                        unicode_canonical: false,
                        casefold: false,
                        collapse_whitespace: false,
                        strip_punct: false,
                    }
                }
                "default" if on => p = NormalizationPolicy::default(),
                "nfc" => p.unicode_canonical = on,
                "casefold" => p.casefold = on,
                "whitespace" => p.collapse_whitespace = on,
                "punct" => p.strip_punct = on,
                _ => return Err(format!("unknown normalization flag `{flag}`")),
            }
        }
        Ok(p)
    }
}

/// Canonical composition, lowercasing, punctuation removal, whitespace collapse.
///
/// Composition is reapplied at the end when enabled, since lowercasing and
/// punctuation removal can leave recomposable sequences; this keeps the
/// function idempotent.
pub fn normalize(text: &str, policy: &NormalizationPolicy) -> String {
    let mut s: String = if policy.unicode_canonical {
        text.nfc().collect()
    } else {
        text.to_string()
    };
    if policy.casefold {
        s = s.to_lowercase();
    }
    if policy.strip_punct {
        s.retain(|c| !is_punctuation(c));
    }
    if policy.collapse_whitespace {
        s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    if policy.unicode_canonical && (policy.casefold || policy.strip_punct) {
        s = s.nfc().collect();
    }
    s
}

fn pair_key(pair: &SentencePair, policy: &NormalizationPolicy) -> String {
    let mut key = normalize(&pair.en, policy);
    key.push('\0');
    key.push_str(&normalize(&pair.vi, policy));
    key
}

fn fingerprint(key: &str) -> u128 {
    let mut h = Xxh3::with_seed(FINGERPRINT_SEED);
    h.update(key.as_bytes());
    h.digest128()
}

fn shard_of(fp: u128) -> usize {
    (fp >> (128 - SHARD_BITS)) as usize
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DedupOptions {
    pub policy: NormalizationPolicy,
    /// Resolve fingerprint collisions by comparing full normalized keys.
    pub paranoid: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DedupReport {
    pub input: usize,
    pub kept: usize,
    pub removed: usize,
    pub removal_fraction: f64,
}

impl DedupReport {
    fn new(input: usize, kept: usize) -> Self {
        DedupReport {
            input,
            kept,
            removed: input - kept,
            removal_fraction: if input == 0 { 0.0 } else { (input - kept) as f64 / input as f64 },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapReport {
    pub input: usize,
    pub within_removed: usize,
    pub overlap: usize,
    pub kept: usize,
}

/// Returns ascending indices of first occurrences.
fn first_occurrences(corpus: &Corpus, opts: &DedupOptions) -> Vec<usize> {
    let fps: Vec<u128> = corpus
        .pairs
        .par_iter()
        .map(|p| fingerprint(&pair_key(p, &opts.policy)))
        .collect();
    let mut shards: Vec<Vec<usize>> = vec![Vec::new(); 1 << SHARD_BITS];
    for (i, &fp) in fps.iter().enumerate() {
        shards[shard_of(fp)].push(i);
    }
    let mut survivors: Vec<usize> = shards
        .into_par_iter()
        .flat_map_iter(|members| {
            let mut kept = Vec::new();
            if opts.paranoid {
                let mut seen: HashMap<u128, Vec<String>> = HashMap::new();
                for i in members {
                    let key = pair_key(&corpus.pairs[i], &opts.policy);
                    let bucket = seen.entry(fps[i]).or_default();
                    if !bucket.contains(&key) {
                        bucket.push(key);
                        kept.push(i);
                    }
                }
            } else {
                let mut seen = HashSet::with_capacity(members.len());
                for i in members {
                    if seen.insert(fps[i]) {
                        kept.push(i);
                    }
                }
            }
            kept
        })
        .collect();
    survivors.par_sort_unstable();
    survivors
}

pub fn dedup_within(corpus: &Corpus, opts: &DedupOptions) -> (Corpus, DedupReport) {
    let keep = first_occurrences(corpus, opts);
    let pairs: Vec<SentencePair> = keep.iter().map(|&i| corpus.pairs[i].clone()).collect();
    let report = DedupReport::new(corpus.len(), pairs.len());
    (Corpus::new(corpus.name.clone(), pairs), report)
}

/// Within-deduplicates `corpus` and drops pairs whose key occurs in `against`.
pub fn dedup_against(corpus: &Corpus, against: &Corpus, opts: &DedupOptions) -> (Corpus, OverlapReport) {
    let keep = first_occurrences(corpus, opts);
    let within_removed = corpus.len() - keep.len();

    let survivors: Vec<usize> = if opts.paranoid {
        let known: HashSet<String> = against.pairs.par_iter().map(|p| pair_key(p, &opts.policy)).collect();
        keep.into_par_iter()
            .filter(|&i| !known.contains(&pair_key(&corpus.pairs[i], &opts.policy)))
            .collect()
    } else {
        let known: HashSet<u128> = against
            .pairs
            .par_iter()
            .map(|p| fingerprint(&pair_key(p, &opts.policy)))
            .collect();
        keep.into_par_iter()
            .filter(|&i| !known.contains(&fingerprint(&pair_key(&corpus.pairs[i], &opts.policy))))
            .collect()
    };
    let kept_within = corpus.len() - within_removed;
    let report = OverlapReport {
        input: corpus.len(),
        within_removed,
        overlap: kept_within - survivors.len(),
        kept: survivors.len(),
    };
    let pairs = survivors.iter().map(|&i| corpus.pairs[i].clone()).collect();
    (Corpus::new(corpus.name.clone(), pairs), report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DomainTag;

    fn corpus(pairs: &[(&str, &str)]) -> Corpus {
        Corpus::new(
            "c",
            pairs
                .iter()
                .map(|(e, v)| SentencePair::new(*e, *v, DomainTag::News, 1, "t"))
                .collect(),
        )
    }

    #[test]
    fn normalize_examples() {
        let p = NormalizationPolicy::default();
        assert_eq!(normalize("  The CAT  ", &p), "the cat");
        assert_eq!(normalize("e\u{301}", &p), normalize("\u{e9}", &p));
        assert_eq!(normalize("e\u{301}", &p), "\u{e9}");
        let punct = NormalizationPolicy {
            strip_punct: true,
            ..p
        };
        assert_eq!(normalize("Hello , world!", &punct), "hello world");
    }

    #[test]
    fn policy_flags() {
        assert_eq!("".parse::<NormalizationPolicy>().unwrap(), NormalizationPolicy::default());
        let p: NormalizationPolicy = "no-casefold,punct".parse().unwrap();
        assert!(!p.casefold && p.strip_punct && p.unicode_canonical);
        let none: NormalizationPolicy = "none,whitespace".parse().unwrap();
        assert!(none.collapse_whitespace && !none.casefold && !none.unicode_canonical);
        assert!("bogus".parse::<NormalizationPolicy>().is_err());
    }

    #[test]
    fn repeated_pair_kept_once() {
        let c = corpus(&[("a", "b"), ("A", "b "), ("a", "b"), ("x", "y")]);
        let (out, report) = dedup_within(&c, &DedupOptions::default());
        assert_eq!(out.pairs.iter().map(|p| p.en.as_str()).collect::<Vec<_>>(), ["a", "x"]);
        assert_eq!((report.kept, report.removed), (2, 2));
        assert_eq!(report.removal_fraction, 0.5);
    }

    #[test]
    fn same_english_different_vietnamese_survives() {
        let c = corpus(&[("hello", "xin chào"), ("hello", "chào bạn")]);
        assert_eq!(dedup_within(&c, &DedupOptions::default()).0.len(), 2);
    }

    #[test]
    fn distinct_corpus_unchanged() {
        let c = corpus(&[("a", "b"), ("c", "d")]);
        let (out, report) = dedup_within(&c, &DedupOptions::default());
        assert_eq!(out, c);
        assert_eq!(report.removed, 0);
        let (empty, r) = dedup_within(&Corpus::default(), &DedupOptions::default());
        assert!(empty.is_empty());
        assert_eq!(r.removal_fraction, 0.0);
    }

    #[test]
    fn against_examples() {
        let a = corpus(&[("1", "1"), ("2", "2"), ("3", "3"), ("4", "4"), ("5", "5")]);
        let b = corpus(&[("2", "2"), ("5", "5"), ("9", "9")]);
        for paranoid in [false, true] {
            let opts = DedupOptions {
                paranoid,
                ..Default::default()
            };
            let (out, report) = dedup_against(&a, &b, &opts);
            assert_eq!(out.pairs.iter().map(|p| p.en.as_str()).collect::<Vec<_>>(), ["1", "3", "4"]);
            assert_eq!((report.overlap, report.kept), (2, 3));
            assert!(dedup_against(&a, &a, &opts).0.is_empty());
            let (same, r) = dedup_against(&a, &corpus(&[("z", "z")]), &opts);
            assert_eq!((same, r.overlap), (a.clone(), 0));
        }
    }

    #[test]
    fn paranoid_agrees_with_fingerprints() {
        let c = corpus(&[("a", "b"), ("a", "b"), ("b", "a"), ("a\0b", ""), ("a", "\0b")]);
        let fast = dedup_within(&c, &DedupOptions::default()).0;
        let slow = dedup_within(
            &c,
            &DedupOptions {
                paranoid: true,
                ..Default::default()
            },
        )
        .0;
        assert_eq!(fast, slow);
    }
}
