//! Translation backends and the shared translation cache.
//!
//! Every translation needed by alignment or round-trip scoring goes through a
//! [`TranslatorGateway`], which deduplicates requests against a
//! [`TranslationCache`] before reaching the backend. With a warm cache a
//! document pair of `M` and `N` sentences costs at most `M + N` backend
//! translations.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Lang;

#[derive(Debug, Error)]
pub enum TranslateError {
    #[error("no cached {direction} translation for `{text}`")]
    CacheMiss { direction: Direction, text: String },
    #[error("input {index} is empty")]
    EmptyText { index: usize },
    #[error("{path}:{line}: malformed lexicon line: {reason}")]
    Lexicon {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}:{line}: malformed cache entry: {reason}")]
    CacheFile {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("remote translator failed after {attempts} attempts: {message}")]
    Remote { attempts: usize, message: String },
    #[error("invalid direction: {0}")]
    InvalidDirection(String),
    #[error("invalid backend configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, TranslateError>;

/// Source and target language of a translation. The two always differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Direction {
    src: Lang,
    dst: Lang,
}

impl Direction {
    pub const EN_VI: Direction = Direction {
        src: Lang::En,
        dst: Lang::Vi,
    };
    pub const VI_EN: Direction = Direction {
        src: Lang::Vi,
        dst: Lang::En,
    };

    pub fn new(src: Lang, dst: Lang) -> Result<Self> {
        if src == dst {
            return Err(TranslateError::InvalidDirection(format!("{src} to {dst}")));
        }
        Ok(Direction { src, dst })
    }

    pub fn src(self) -> Lang {
        self.src
    }

    pub fn dst(self) -> Lang {
        self.dst
    }

    pub fn inverse(self) -> Direction {
        Direction {
            src: self.dst,
            dst: self.src,
        }
    }

    /// Table-style label, e.g. `En-Vi`.
    pub fn label(self) -> &'static str {
        match self.src {
            Lang::En => "En-Vi",
            Lang::Vi => "Vi-En",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.src, self.dst)
    }
}

impl FromStr for Direction {
    type Err = TranslateError;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_lowercase();
        let (src, dst) = lower
            .split_once(['-', '→', '>'])
            .ok_or_else(|| TranslateError::InvalidDirection(s.to_string()))?;
        let parse = |t: &str| t.trim_start_matches('>').parse::<Lang>().map_err(TranslateError::InvalidDirection);
        Direction::new(parse(src)?, parse(dst)?)
    }
}

impl TryFrom<String> for Direction {
    type Error = TranslateError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Direction> for String {
    fn from(d: Direction) -> Self {
        d.to_string()
    }
}

/// A translation oracle for either direction.
pub trait Translator: Send + Sync {
    /// Translates `texts`, returning one output per input in the same order.
    fn translate(&self, direction: Direction, texts: &[String]) -> Result<Vec<String>>;

    /// Largest number of texts worth sending in one call.
    fn preferred_batch(&self) -> usize {
        1024
    }
}

/// Copies its input. Useful as a scoring baseline and in tests.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityTranslator;

impl Translator for IdentityTranslator {
    fn translate(&self, _direction: Direction, texts: &[String]) -> Result<Vec<String>> {
        Ok(texts.to_vec())
    }
}

#[derive(Debug, Clone, Default)]
struct PhraseTable {
    entries: HashMap<String, String>,
    max_words: usize,
}

impl PhraseTable {
    fn insert(&mut self, src: &str, dst: &str) {
        let words: Vec<&str> = src.split_whitespace().collect();
        if words.is_empty() {
            return;
        }
        self.max_words = self.max_words.max(words.len());
        self.entries.entry(words.join(" ")).or_insert_with(|| dst.trim().to_string());
    }

    fn apply(&self, text: &str) -> String {
        let words: Vec<&str> = text.split_whitespace().collect();
        let mut out: Vec<&str> = Vec::with_capacity(words.len());
        let mut i = 0;
        'outer: while i < words.len() {
            let longest = self.max_words.min(words.len() - i);
            for span in (1..=longest).rev() {
                let key = if span == 1 {
                    std::borrow::Cow::Borrowed(words[i])
                } else {
                    std::borrow::Cow::Owned(words[i..i + span].join(" "))
                };
                if let Some(dst) = self.entries.get(key.as_ref()) {
                    out.push(dst);
                    i += span;
                    continue 'outer;
                }
            }
            out.push(words[i]);
            i += 1;
        }
        out.join(" ")
    }
}

/// Word/phrase substitution translator.
///
/// Lookup is greedy longest-match over whitespace tokens; tokens with no entry
/// pass through unchanged. Matching is case-sensitive. When a key appears more
/// than once the first entry wins.
#[derive(Debug, Clone, Default)]
pub struct Lexicon {
    tables: HashMap<Direction, PhraseTable>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, direction: Direction, src: &str, dst: &str) {
        self.tables.entry(direction).or_default().insert(src, dst);
    }

    pub fn from_entries<'a>(direction: Direction, entries: impl IntoIterator<Item = (&'a str, &'a str)>) -> Self {
        let mut lex = Lexicon::new();
        for (s, d) in entries {
            lex.insert(direction, s, d);
        }
        lex
    }

    /// Loads `src \t dst` lines for `direction`. Blank and `#` lines are skipped.
    pub fn load_tsv(&mut self, path: &Path, direction: Direction) -> Result<()> {
        let file = File::open(path).map_err(|source| TranslateError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|source| TranslateError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |reason: &str| TranslateError::Lexicon {
                path: path.to_path_buf(),
                line: i + 1,
                reason: reason.to_string(),
            };
            let mut fields = line.split('\t');
            let (Some(src), Some(dst), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(malformed("expected exactly two tab-separated columns"));
            };
            if src.trim().is_empty() || dst.trim().is_empty() {
                return Err(malformed("empty column"));
            }
            self.insert(direction, src, dst);
        }
        Ok(())
    }

    /// Adds the reversed entries of `direction` to the opposite direction.
    pub fn with_inverse(mut self, direction: Direction) -> Self {
        let forward: Vec<(String, String)> = self
            .tables
            .get(&direction)
            .map(|t| {
                let mut e: Vec<_> = t.entries.iter().map(|(k, v)| (k.clone(), v.clone())).collect();
                e.sort();
                e
            })
            .unwrap_or_default();
        for (src, dst) in forward {
            self.insert(direction.inverse(), &dst, &src);
        }
        self
    }

    pub fn translate_one(&self, direction: Direction, text: &str) -> String {
        match self.tables.get(&direction) {
            Some(t) => t.apply(text),
            None => text.split_whitespace().collect::<Vec<_>>().join(" "),
        }
    }
}

impl Translator for Lexicon {
    fn translate(&self, direction: Direction, texts: &[String]) -> Result<Vec<String>> {
        Ok(texts.iter().map(|t| self.translate_one(direction, t)).collect())
    }
}

#[derive(Serialize, Deserialize)]
struct CacheRecord {
    src: Lang,
    dst: Lang,
    input: String,
    output: String,
}

type CacheKey = (Direction, String);

#[derive(Default)]
struct CacheInner {
    map: HashMap<CacheKey, String>,
    unflushed: Vec<CacheKey>,
}

/// Insert-once translation store keyed by direction and trimmed source text.
///
/// Readers run concurrently; insertions serialize on a write lock and never
/// replace an existing value. With a backing file, [`flush`](Self::flush)
/// appends the entries inserted since the last flush.
#[derive(Default)]
pub struct TranslationCache {
    inner: RwLock<CacheInner>,
    path: Option<PathBuf>,
    hits: AtomicU64,
    misses: AtomicU64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheCounters {
    pub entries: usize,
    pub hits: u64,
    pub misses: u64,
}

fn cache_key(direction: Direction, text: &str) -> CacheKey {
    (direction, text.trim().to_string())
}

impl TranslationCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens (or prepares to create) a JSONL cache file.
    pub fn open(path: &Path) -> Result<Self> {
        let cache = TranslationCache {
            path: Some(path.to_path_buf()),
            ..Default::default()
        };
        if path.exists() {
            let entries = read_cache_file(path)?;
            let mut inner = cache.inner.write().unwrap();
            for (key, out) in entries {
                inner.map.entry(key).or_insert(out);
            }
        }
        Ok(cache)
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Lookup that updates hit/miss counters.
    pub fn get(&self, direction: Direction, text: &str) -> Option<String> {
        let found = self.peek(direction, text);
        let counter = if found.is_some() { &self.hits } else { &self.misses };
        counter.fetch_add(1, Ordering::Relaxed);
        found
    }

    pub fn peek(&self, direction: Direction, text: &str) -> Option<String> {
        let inner = self.inner.read().unwrap();
        inner.map.get(&cache_key(direction, text)).cloned()
    }

    /// Inserts unless the key exists. Returns whether the value was stored.
    pub fn insert(&self, direction: Direction, text: &str, output: String) -> bool {
        let key = cache_key(direction, text);
        let mut inner = self.inner.write().unwrap();
        if inner.map.contains_key(&key) {
            return false;
        }
        inner.unflushed.push(key.clone());
        inner.map.insert(key, output);
        true
    }

    pub fn len(&self) -> usize {
        self.inner.read().unwrap().map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn counters(&self) -> CacheCounters {
        CacheCounters {
            entries: self.len(),
            hits: self.hits.load(Ordering::Relaxed),
            misses: self.misses.load(Ordering::Relaxed),
        }
    }

    /// Appends unflushed entries to the backing file. No-op without one.
    pub fn flush(&self) -> Result<usize> {
        let Some(path) = &self.path else {
            return Ok(0);
        };
        let mut inner = self.inner.write().unwrap();
        if inner.unflushed.is_empty() {
            return Ok(0);
        }
        let io_err = |source| TranslateError::Io {
            path: path.clone(),
            source,
        };
        let file = OpenOptions::new().create(true).append(true).open(path).map_err(io_err)?;
        let mut out = BufWriter::new(file);
        for key in &inner.unflushed {
            let rec = CacheRecord {
                src: key.0.src(),
                dst: key.0.dst(),
                input: key.1.clone(),
                output: inner.map[key].clone(),
            };
            serde_json::to_writer(&mut out, &rec).map_err(|e| io_err(e.into()))?;
            out.write_all(b"\n").map_err(io_err)?;
        }
        out.flush().map_err(io_err)?;
        let n = inner.unflushed.len();
        inner.unflushed.clear();
        Ok(n)
    }
}

fn read_cache_file(path: &Path) -> Result<Vec<(CacheKey, String)>> {
    let io_err = |source| TranslateError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = File::open(path).map_err(io_err)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| TranslateError::CacheFile {
            path: path.to_path_buf(),
            line: i + 1,
            reason,
        };
        let rec: CacheRecord = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let dir = Direction::new(rec.src, rec.dst).map_err(|e| malformed(e.to_string()))?;
        out.push((cache_key(dir, &rec.input), rec.output));
    }
    Ok(out)
}

/// Serves translations from a precomputed cache file.
///
/// In strict mode a missing entry is an error; otherwise the source text is
/// returned unchanged.
pub struct CachedTranslations {
    entries: HashMap<CacheKey, String>,
    strict: bool,
}

impl CachedTranslations {
    pub fn load(path: &Path, strict: bool) -> Result<Self> {
        let mut entries = HashMap::new();
        for (key, out) in read_cache_file(path)? {
            entries.entry(key).or_insert(out);
        }
        Ok(CachedTranslations { entries, strict })
    }

    pub fn from_entries<'a>(
        entries: impl IntoIterator<Item = (Direction, &'a str, &'a str)>,
        strict: bool,
    ) -> Self {
        let mut map = HashMap::new();
        for (d, input, output) in entries {
            map.entry(cache_key(d, input)).or_insert_with(|| output.to_string());
        }
        CachedTranslations { entries: map, strict }
    }
}

impl Translator for CachedTranslations {
    fn translate(&self, direction: Direction, texts: &[String]) -> Result<Vec<String>> {
        texts
            .iter()
            .map(|t| match self.entries.get(&cache_key(direction, t)) {
                Some(out) => Ok(out.clone()),
                None if self.strict => Err(TranslateError::CacheMiss {
                    direction,
                    text: t.clone(),
                }),
                None => Ok(t.trim().to_string()),
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteConfig {
    pub endpoint: String,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: f64,
    #[serde(default = "default_max_batch")]
    pub max_batch: usize,
    #[serde(default = "default_retries")]
    pub retries: usize,
    #[serde(default = "default_concurrency")]
    pub concurrency: usize,
}

fn default_timeout_secs() -> f64 {
    60.0
}
fn default_max_batch() -> usize {
    64
}
fn default_retries() -> usize {
    3
}
fn default_concurrency() -> usize {
    4
}

impl RemoteConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        RemoteConfig {
            endpoint: endpoint.into(),
            timeout_secs: default_timeout_secs(),
            max_batch: default_max_batch(),
            retries: default_retries(),
            concurrency: default_concurrency(),
        }
    }

    pub(crate) fn agent(&self) -> ureq::Agent {
        ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(self.timeout_secs.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into()
    }

    pub(crate) fn url(&self, route: &str) -> String {
        format!("{}/{route}", self.endpoint.trim_end_matches('/'))
    }
}

/// POSTs `body` to `url`, retrying up to `retries` extra times with backoff.
pub(crate) fn post_json_with_retries<B, T>(
    agent: &ureq::Agent,
    url: &str,
    body: &B,
    retries: usize,
    validate: impl Fn(&T) -> std::result::Result<(), String>,
) -> Result<T>
where
    B: Serialize,
    T: serde::de::DeserializeOwned,
{
    let mut last = String::new();
    for attempt in 0..=retries {
        if attempt > 0 {
            std::thread::sleep(Duration::from_millis((50u64 << attempt.min(6)).min(2000)));
        }
        let outcome = agent
            .post(url)
            .send_json(body)
            .map_err(|e| e.to_string())
            .and_then(|mut resp| {
                if resp.status() != 200 {
                    return Err(format!("HTTP {}", resp.status()));
                }
                resp.body_mut().read_json::<T>().map_err(|e| e.to_string())
            })
            .and_then(|parsed| validate(&parsed).map(|_| parsed));
        match outcome {
            Ok(v) => return Ok(v),
            Err(e) => {
                log::warn!("{url}: attempt {} failed: {e}", attempt + 1);
                last = e;
            }
        }
    }
    Err(TranslateError::Remote {
        attempts: retries + 1,
        message: last,
    })
}

/// HTTP client for `POST {endpoint}/translate`.
pub struct RemoteTranslator {
    config: RemoteConfig,
    agent: ureq::Agent,
}

#[derive(Serialize)]
struct TranslateRequest<'a> {
    source_lang: Lang,
    target_lang: Lang,
    texts: &'a [String],
}

#[derive(Deserialize)]
struct TranslateResponse {
    translations: Vec<String>,
}

impl RemoteTranslator {
    pub fn new(config: RemoteConfig) -> Result<Self> {
        if config.max_batch == 0 {
            return Err(TranslateError::Config("remote max_batch must be at least 1".into()));
        }
        let agent = config.agent();
        Ok(RemoteTranslator { config, agent })
    }

    fn send_batch(&self, direction: Direction, texts: &[String]) -> Result<Vec<String>> {
        let body = TranslateRequest {
            source_lang: direction.src(),
            target_lang: direction.dst(),
            texts,
        };
        let resp: TranslateResponse = post_json_with_retries(
            &self.agent,
            &self.config.url("translate"),
            &body,
            self.config.retries,
            |r: &TranslateResponse| {
                if r.translations.len() == texts.len() {
                    Ok(())
                } else {
                    Err(format!(
                        "expected {} translations, got {}",
                        texts.len(),
                        r.translations.len()
                    ))
                }
            },
        )?;
        Ok(resp.translations)
    }
}

impl Translator for RemoteTranslator {
    fn translate(&self, direction: Direction, texts: &[String]) -> Result<Vec<String>> {
        let chunks: Vec<&[String]> = texts.chunks(self.config.max_batch).collect();
        let mut out = Vec::with_capacity(texts.len());
        for wave in chunks.chunks(self.config.concurrency.max(1)) {
            let results: Vec<Result<Vec<String>>> = std::thread::scope(|s| {
                let handles: Vec<_> = wave
                    .iter()
                    .map(|chunk| s.spawn(move || self.send_batch(direction, chunk)))
                    .collect();
                handles.into_iter().map(|h| h.join().expect("remote worker panicked")).collect()
            });
            for r in results {
                out.extend(r?);
            }
        }
        Ok(out)
    }

    fn preferred_batch(&self) -> usize {
        self.config.max_batch * self.config.concurrency.max(1)
    }
}

/// Declarative backend choice, as found in configs and on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendSpec {
    Identity,
    /// Either table may be omitted; a missing direction uses the inverse of the other.
    Lexicon {
        en_vi: Option<PathBuf>,
        vi_en: Option<PathBuf>,
    },
    Cache {
        path: PathBuf,
        #[serde(default)]
        strict: bool,
    },
    Remote(RemoteConfig),
}

impl BackendSpec {
    pub fn build(&self) -> Result<Arc<dyn Translator>> {
        Ok(match self {
            BackendSpec::Identity => Arc::new(IdentityTranslator),
            BackendSpec::Lexicon { en_vi, vi_en } => {
                let mut lex = Lexicon::new();
                if let Some(p) = en_vi {
                    lex.load_tsv(p, Direction::EN_VI)?;
                }
                if let Some(p) = vi_en {
                    lex.load_tsv(p, Direction::VI_EN)?;
                }
                match (en_vi, vi_en) {
                    (Some(_), None) => lex = lex.with_inverse(Direction::EN_VI),
                    (None, Some(_)) => lex = lex.with_inverse(Direction::VI_EN),
                    (None, None) => {
                        return Err(TranslateError::Config("lexicon backend needs at least one table".into()))
                    }
                    _ => {}
                }
                Arc::new(lex)
            }
            BackendSpec::Cache { path, strict } => Arc::new(CachedTranslations::load(path, *strict)?),
            BackendSpec::Remote(cfg) => Arc::new(RemoteTranslator::new(cfg.clone())?),
        })
    }

    pub fn paths(&self) -> Vec<&Path> {
        match self {
            BackendSpec::Lexicon { en_vi, vi_en } => en_vi.iter().chain(vi_en).map(PathBuf::as_path).collect(),
            BackendSpec::Cache { path, .. } => vec![path.as_path()],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct WarmStats {
    pub requested: usize,
    pub distinct: usize,
    pub already_cached: usize,
    pub backend_translations: usize,
}

/// Backend plus cache plus call accounting.
pub struct TranslatorGateway {
    backend: Arc<dyn Translator>,
    cache: Arc<TranslationCache>,
    backend_translations: AtomicU64,
    backend_requests: AtomicU64,
    dispatch: Mutex<()>,
}

impl TranslatorGateway {
    pub fn new(backend: Arc<dyn Translator>, cache: Arc<TranslationCache>) -> Self {
        TranslatorGateway {
            backend,
            cache,
            backend_translations: AtomicU64::new(0),
            backend_requests: AtomicU64::new(0),
            dispatch: Mutex::new(()),
        }
    }

    pub fn with_backend(backend: impl Translator + 'static) -> Self {
        Self::new(Arc::new(backend), Arc::new(TranslationCache::new()))
    }

    pub fn cache(&self) -> &TranslationCache {
        &self.cache
    }

    /// Number of texts sent to the backend so far.
    pub fn backend_translations(&self) -> u64 {
        self.backend_translations.load(Ordering::Relaxed)
    }

    pub fn backend_requests(&self) -> u64 {
        self.backend_requests.load(Ordering::Relaxed)
    }

    /// Ensures every text has a cached translation, translating each distinct
    /// miss once. Entries are committed chunk by chunk, so a failing backend
    /// keeps what was already translated.
    pub fn warm<S: AsRef<str>>(&self, direction: Direction, texts: &[S]) -> Result<WarmStats> {
        for (index, t) in texts.iter().enumerate() {
            if t.as_ref().trim().is_empty() {
                return Err(TranslateError::EmptyText { index });
            }
        }
        let mut stats = WarmStats {
            requested: texts.len(),
            ..Default::default()
        };
        let mut seen = HashSet::new();
        let mut distinct = Vec::new();
        for t in texts {
            let key = t.as_ref().trim();
            if seen.insert(key) {
                distinct.push(key);
            }
        }
        stats.distinct = distinct.len();

        // Serializing dispatch keeps concurrent warmers from translating the same miss twice.
        let _guard = self.dispatch.lock().unwrap();
        let misses: Vec<String> = distinct
            .into_iter()
            .filter(|t| self.cache.peek(direction, t).is_none())
            .map(str::to_string)
            .collect();
        stats.already_cached = stats.distinct - misses.len();
        for chunk in misses.chunks(self.backend.preferred_batch().max(1)) {
            self.backend_requests.fetch_add(1, Ordering::Relaxed);
            self.backend_translations.fetch_add(chunk.len() as u64, Ordering::Relaxed);
            let outputs = self.backend.translate(direction, chunk)?;
            if outputs.len() != chunk.len() {
                return Err(TranslateError::Remote {
                    attempts: 1,
                    message: format!("backend returned {} outputs for {} inputs", outputs.len(), chunk.len()),
                });
            }
            for (src, out) in chunk.iter().zip(outputs) {
                self.cache.insert(direction, src, out);
            }
            stats.backend_translations += chunk.len();
        }
        Ok(stats)
    }

    /// Translates through the cache. Output is parallel to `texts`.
    pub fn translate<S: AsRef<str>>(&self, direction: Direction, texts: &[S]) -> Result<Vec<String>> {
        self.warm(direction, texts)?;
        texts
            .iter()
            .map(|t| {
                self.cache.get(direction, t.as_ref()).ok_or_else(|| TranslateError::CacheMiss {
                    direction,
                    text: t.as_ref().to_string(),
                })
            })
            .collect()
    }

    pub fn flush(&self) -> Result<usize> {
        self.cache.flush()
    }
}
