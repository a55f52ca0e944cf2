//! Parallel-corpus data model and file formats.
//!
//! Three on-disk formats are supported:
//!
//! - `jsonl`: one object per line with keys `en`, `vi`, `domain`, `tier`, `source`
//!   and an optional `score`. Unknown keys are carried through untouched.
//! - `tsv`: `en \t vi \t domain? \t tier?`, with an optional `en\tvi...` header line.
//! - `line-pair`: two files sharing a basename, `<base>.en` and `<base>.vi`, one
//!   sentence per line.
//!
//! Records whose English or Vietnamese side is blank after trimming are dropped
//! during ingestion and counted in [`IngestReport::dropped_empty`].

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::bleu::{tokenize, BleuConfig};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error(
        "line-pair files differ in length: {en_count} English lines vs {vi_count} Vietnamese lines \
         (first unpaired line {first_unpaired_line})"
    )]
    LineCountMismatch {
        en_count: usize,
        vi_count: usize,
        first_unpaired_line: usize,
    },
    #[error("{path}:{line}: malformed record: {reason}")]
    Malformed {
        path: PathBuf,
        line: usize,
        reason: String,
    },
    #[error("unknown corpus format `{0}` (expected line-pair, tsv or jsonl)")]
    UnknownFormat(String),
    #[error("domain `{domain}` has {available} pairs but {requested} were requested (shortfall {shortfall})")]
    InsufficientDomain {
        domain: DomainTag,
        requested: usize,
        available: usize,
        shortfall: usize,
    },
    #[error("pair {index} cannot be written as {format}: {reason}")]
    Unrepresentable {
        index: usize,
        format: Format,
        reason: &'static str,
    },
}

impl CorpusError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        CorpusError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CorpusError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    En,
    Vi,
}

impl Lang {
    pub fn as_str(self) -> &'static str {
        match self {
            Lang::En => "en",
            Lang::Vi => "vi",
        }
    }

    pub fn other(self) -> Lang {
        match self {
            Lang::En => Lang::Vi,
            Lang::Vi => Lang::En,
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Lang {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "en" => Ok(Lang::En),
            "vi" => Ok(Lang::Vi),
            other => Err(format!("unsupported language tag `{other}`")),
        }
    }
}

/// Content domain of a pair or document.
///
/// Unrecognised labels are kept verbatim in [`DomainTag::Other`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "String", into = "String")]
pub enum DomainTag {
    Law,
    Religion,
    News,
    Medical,
    Ted,
    Subtitles,
    Software,
    Wiki,
    Other(String),
}

impl DomainTag {
    /// Maps a label onto a tag. Known labels match case-insensitively.
    pub fn parse(label: &str) -> DomainTag {
        match label.trim().to_lowercase().as_str() {
            "law" => DomainTag::Law,
            "religion" => DomainTag::Religion,
            "news" => DomainTag::News,
            "medical" => DomainTag::Medical,
            "ted" => DomainTag::Ted,
            "subtitles" => DomainTag::Subtitles,
            "software" => DomainTag::Software,
            "wiki" => DomainTag::Wiki,
            _ => DomainTag::Other(label.trim().to_string()),
        }
    }

    pub fn as_str(&self) -> &str {
        match self {
            DomainTag::Law => "law",
            DomainTag::Religion => "religion",
            DomainTag::News => "news",
            DomainTag::Medical => "medical",
            DomainTag::Ted => "ted",
            DomainTag::Subtitles => "subtitles",
            DomainTag::Software => "software",
            DomainTag::Wiki => "wiki",
            DomainTag::Other(raw) => raw,
        }
    }
}

impl Default for DomainTag {
    fn default() -> Self {
        DomainTag::Other("other".to_string())
    }
}

impl fmt::Display for DomainTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl From<String> for DomainTag {
    fn from(s: String) -> Self {
        DomainTag::parse(&s)
    }
}

impl From<DomainTag> for String {
    fn from(d: DomainTag) -> Self {
        d.as_str().to_string()
    }
}

impl FromStr for DomainTag {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(DomainTag::parse(s))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    pub text: String,
    pub lang: Lang,
}

impl Sentence {
    pub fn new(text: impl Into<String>, lang: Lang) -> Self {
        Sentence {
            text: text.into(),
            lang,
        }
    }
}

/// Ordered, single-language list of sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    pub lang: Lang,
    pub sentences: Vec<Sentence>,
    pub source_id: String,
    pub domain: DomainTag,
}

impl Document {
    /// Builds a document, dropping lines that are blank after trimming.
    pub fn from_lines<I, S>(lang: Lang, lines: I, source_id: impl Into<String>, domain: DomainTag) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let sentences = lines
            .into_iter()
            .map(Into::into)
            .filter(|s: &String| !s.trim().is_empty())
            .map(|text| Sentence { text, lang })
            .collect();
        Document {
            lang,
            sentences,
            source_id: source_id.into(),
            domain,
        }
    }

    /// Reads a pre-segmented document, one sentence per line.
    pub fn read(path: &Path, lang: Lang, domain: DomainTag) -> Result<Self> {
        let lines = read_lines(path)?;
        Ok(Document::from_lines(lang, lines, path.display().to_string(), domain))
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.sentences.iter().map(|s| s.text.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DocumentPair {
    pub pair_id: String,
    pub doc_en: Document,
    pub doc_vi: Document,
}

impl DocumentPair {
    pub fn new(pair_id: impl Into<String>, doc_en: Document, doc_vi: Document) -> Self {
        debug_assert_eq!(doc_en.lang, Lang::En);
        debug_assert_eq!(doc_vi.lang, Lang::Vi);
        DocumentPair {
            pair_id: pair_id.into(),
            doc_en,
            doc_vi,
        }
    }
}

/// One aligned bitext plus provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentencePair {
    pub en: String,
    pub vi: String,
    pub domain: DomainTag,
    pub tier: u8,
    #[serde(rename = "source")]
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<f64>,
    /// Keys outside the schema, preserved on round-trip.
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl SentencePair {
    pub fn new(
        en: impl Into<String>,
        vi: impl Into<String>,
        domain: DomainTag,
        tier: u8,
        source_id: impl Into<String>,
    ) -> Self {
        SentencePair {
            en: en.into(),
            vi: vi.into(),
            domain,
            tier,
            source_id: source_id.into(),
            score: None,
            extra: Map::new(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub name: String,
    pub pairs: Vec<SentencePair>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, pairs: Vec<SentencePair>) -> Self {
        Corpus {
            name: name.into(),
            pairs,
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    #[serde(rename = "line-pair")]
    LinePair,
    #[serde(rename = "tsv")]
    Tsv,
    #[serde(rename = "jsonl")]
    Jsonl,
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::LinePair => "line-pair",
            Format::Tsv => "tsv",
            Format::Jsonl => "jsonl",
        })
    }
}

impl FromStr for Format {
    type Err = CorpusError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "line-pair" => Ok(Format::LinePair),
            "tsv" => Ok(Format::Tsv),
            "jsonl" => Ok(Format::Jsonl),
            other => Err(CorpusError::UnknownFormat(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct IngestReport {
    pub records: usize,
    pub dropped_empty: usize,
}

fn valid_tier(tier: i64) -> bool {
    (1..=4).contains(&tier)
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let file = File::open(path).map_err(|e| CorpusError::io(path, e))?;
    BufReader::new(file)
        .lines()
        .collect::<io::Result<Vec<_>>>()
        .map_err(|e| CorpusError::io(path, e))
}

/// `<base>.en` / `<base>.vi` for a line-pair path given as the basename or either file.
pub fn line_pair_paths(path: &Path) -> (PathBuf, PathBuf) {
    let base = match path.extension().and_then(|e| e.to_str()) {
        Some("en") | Some("vi") => path.with_extension(""),
        _ => path.to_path_buf(),
    };
    let mut en = base.clone().into_os_string();
    en.push(".en");
    let mut vi = base.into_os_string();
    vi.push(".vi");
    (PathBuf::from(en), PathBuf::from(vi))
}

fn corpus_name(path: &Path) -> String {
    let (en, _) = line_pair_paths(path);
    let stem_source = if path.exists() { path } else { en.as_path() };
    stem_source
        .file_stem()
        .and_then(|s| s.to_str())
        .map(str::to_string)
        .unwrap_or_default()
}

pub fn ingest(path: &Path, format: Format, default_domain: &DomainTag, default_tier: u8) -> Result<Corpus> {
    let (corpus, report) = ingest_with_report(path, format, default_domain, default_tier)?;
    if report.dropped_empty > 0 {
        log::warn!(
            "{}: dropped {} of {} records with an empty side",
            path.display(),
            report.dropped_empty,
            report.records
        );
    }
    Ok(corpus)
}

pub fn ingest_with_report(
    path: &Path,
    format: Format,
    default_domain: &DomainTag,
    default_tier: u8,
) -> Result<(Corpus, IngestReport)> {
    let name = corpus_name(path);
    let mut report = IngestReport::default();
    let mut pairs = Vec::new();
    let mut admit = |pair: SentencePair, report: &mut IngestReport| {
        report.records += 1;
        if pair.en.trim().is_empty() || pair.vi.trim().is_empty() {
            report.dropped_empty += 1;
        } else {
            pairs.push(pair);
        }
    };

    match format {
        Format::LinePair => {
            let (en_path, vi_path) = line_pair_paths(path);
            let en = read_lines(&en_path)?;
            let vi = read_lines(&vi_path)?;
            if en.len() != vi.len() {
                return Err(CorpusError::LineCountMismatch {
                    en_count: en.len(),
                    vi_count: vi.len(),
                    first_unpaired_line: en.len().min(vi.len()) + 1,
                });
            }
            for (e, v) in en.into_iter().zip(vi) {
                admit(
                    SentencePair::new(e, v, default_domain.clone(), default_tier, name.clone()),
                    &mut report,
                );
            }
        }
        Format::Tsv => {
            let lines = read_lines(path)?;
            for (i, line) in lines.iter().enumerate() {
                let fields: Vec<&str> = line.split('\t').collect();
                if i == 0 && is_tsv_header(&fields) {
                    continue;
                }
                if line.is_empty() {
                    continue;
                }
                let malformed = |reason: String| CorpusError::Malformed {
                    path: path.to_path_buf(),
                    line: i + 1,
                    reason,
                };
                if fields.len() < 2 || fields.len() > 4 {
                    return Err(malformed(format!("expected 2 to 4 tab-separated fields, found {}", fields.len())));
                }
                let domain = match fields.get(2) {
                    Some(d) if !d.trim().is_empty() => DomainTag::parse(d),
                    _ => default_domain.clone(),
                };
                let tier = match fields.get(3) {
                    Some(t) if !t.trim().is_empty() => {
                        let t: i64 = t.trim().parse().map_err(|_| malformed(format!("tier `{t}` is not an integer")))?;
                        if !valid_tier(t) {
                            return Err(malformed(format!("tier {t} outside 1..=4")));
                        }
                        t as u8
                    }
                    _ => default_tier,
                };
                admit(
                    SentencePair::new(fields[0], fields[1], domain, tier, name.clone()),
                    &mut report,
                );
            }
        }
        Format::Jsonl => {
            let lines = read_lines(path)?;
            for (i, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let pair = parse_jsonl_record(line, default_domain, default_tier, &name).map_err(|reason| {
                    CorpusError::Malformed {
                        path: path.to_path_buf(),
                        line: i + 1,
                        reason,
                    }
                })?;
                admit(pair, &mut report);
            }
        }
    }
    Ok((Corpus::new(name, pairs), report))
}

fn is_tsv_header(fields: &[&str]) -> bool {
    fields.len() >= 2 && fields[0].trim().eq_ignore_ascii_case("en") && fields[1].trim().eq_ignore_ascii_case("vi")
}

#[derive(Deserialize)]
struct JsonlRecord {
    en: String,
    vi: String,
    #[serde(default)]
    domain: Option<String>,
    #[serde(default)]
    tier: Option<i64>,
    #[serde(default)]
    source: Option<String>,
    #[serde(default)]
    score: Option<f64>,
    #[serde(flatten)]
    extra: Map<String, Value>,
}

fn parse_jsonl_record(
    line: &str,
    default_domain: &DomainTag,
    default_tier: u8,
    default_source: &str,
) -> std::result::Result<SentencePair, String> {
    let rec: JsonlRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let tier = match rec.tier {
        Some(t) if valid_tier(t) => t as u8,
        Some(t) => return Err(format!("tier {t} outside 1..=4")),
        None => default_tier,
    };
    let domain = match rec.domain {
        Some(d) if !d.trim().is_empty() => DomainTag::parse(&d),
        _ => default_domain.clone(),
    };
    Ok(SentencePair {
        en: rec.en,
        vi: rec.vi,
        domain,
        tier,
        source_id: rec.source.unwrap_or_else(|| default_source.to_string()),
        score: rec.score,
        extra: rec.extra,
    })
}

/// Ingests several files in parallel; the result keeps argument order.
pub fn ingest_many(
    inputs: &[(PathBuf, Format)],
    default_domain: &DomainTag,
    default_tier: u8,
) -> Result<Vec<Corpus>> {
    inputs
        .par_iter()
        .map(|(path, format)| ingest(path, *format, default_domain, default_tier))
        .collect()
}

/// Reads a JSONL corpus with no defaults beyond the schema's.
pub fn read_jsonl(path: &Path) -> Result<Corpus> {
    ingest(path, Format::Jsonl, &DomainTag::default(), 1)
}

pub fn write_jsonl<W: Write>(corpus: &Corpus, mut out: W) -> io::Result<()> {
    for pair in &corpus.pairs {
        serde_json::to_writer(&mut out, pair)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Writes `corpus` to `path`. Line-pair output goes to `<base>.en` and `<base>.vi`.
pub fn export(corpus: &Corpus, path: &Path, format: Format) -> Result<()> {
    let create = |p: &Path| -> Result<BufWriter<File>> {
        if let Some(parent) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| CorpusError::io(parent, e))?;
        }
        File::create(p).map(BufWriter::new).map_err(|e| CorpusError::io(p, e))
    };
    match format {
        Format::Jsonl => {
            let out = create(path)?;
            write_jsonl(corpus, out).map_err(|e| CorpusError::io(path, e))
        }
        Format::Tsv => {
            for (index, p) in corpus.pairs.iter().enumerate() {
                if [&p.en, &p.vi].iter().any(|t| t.contains(['\t', '\n', '\r'])) {
                    return Err(CorpusError::Unrepresentable {
                        index,
                        format,
                        reason: "text contains a tab or line break",
                    });
                }
            }
            let mut out = create(path)?;
            let write = |out: &mut BufWriter<File>| -> io::Result<()> {
                for p in &corpus.pairs {
                    writeln!(out, "{}\t{}\t{}\t{}", p.en, p.vi, p.domain, p.tier)?;
                }
                out.flush()
            };
            write(&mut out).map_err(|e| CorpusError::io(path, e))
        }
        Format::LinePair => {
            for (index, p) in corpus.pairs.iter().enumerate() {
                if [&p.en, &p.vi].iter().any(|t| t.contains(['\n', '\r'])) {
                    return Err(CorpusError::Unrepresentable {
                        index,
                        format,
                        reason: "text contains a line break",
                    });
                }
            }
            let (en_path, vi_path) = line_pair_paths(path);
            for (side_path, side) in [(&en_path, Lang::En), (&vi_path, Lang::Vi)] {
                let mut out = create(side_path)?;
                let write = |out: &mut BufWriter<File>| -> io::Result<()> {
                    for p in &corpus.pairs {
                        let text = if side == Lang::En { &p.en } else { &p.vi };
                        out.write_all(text.as_bytes())?;
                        out.write_all(b"\n")?;
                    }
                    out.flush()
                };
                write(&mut out).map_err(|e| CorpusError::io(side_path, e))?;
            }
            Ok(())
        }
    }
}

/// Concatenates corpora in argument order. Duplicates are kept.
pub fn merge(corpora: &[Corpus]) -> Corpus {
    let name = corpora.iter().map(|c| c.name.as_str()).collect::<Vec<_>>().join("+");
    let pairs = corpora.iter().flat_map(|c| c.pairs.iter().cloned()).collect();
    Corpus::new(name, pairs)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SideStats {
    pub tokens: usize,
    /// Sentence counts keyed by the lower edge of each length bucket (in tokens).
    pub length_histogram: BTreeMap<usize, usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct StatsReport {
    pub total: usize,
    pub per_domain: BTreeMap<String, usize>,
    pub per_tier: BTreeMap<u8, usize>,
    pub bucket_width: usize,
    pub en: SideStats,
    pub vi: SideStats,
}

impl StatsReport {
    pub fn domain_count(&self, domain: &DomainTag) -> usize {
        self.per_domain.get(domain.as_str()).copied().unwrap_or(0)
    }
}

pub const DEFAULT_BUCKET_WIDTH: usize = 10;

pub fn stats(corpus: &Corpus) -> StatsReport {
    stats_with_buckets(corpus, DEFAULT_BUCKET_WIDTH)
}

pub fn stats_with_buckets(corpus: &Corpus, bucket_width: usize) -> StatsReport {
    let bucket_width = bucket_width.max(1);
    let config = BleuConfig::default();
    let mut report = StatsReport {
        bucket_width,
        ..Default::default()
    };
    for pair in &corpus.pairs {
        report.total += 1;
        *report.per_domain.entry(pair.domain.to_string()).or_default() += 1;
        *report.per_tier.entry(pair.tier).or_default() += 1;
        for (text, side) in [(&pair.en, &mut report.en), (&pair.vi, &mut report.vi)] {
            let n = tokenize(text, &config).len();
            side.tokens += n;
            *side.length_histogram.entry(n / bucket_width * bucket_width).or_default() += 1;
        }
    }
    report
}

/// Draws a per-domain test set uniformly without replacement.
///
/// Both outputs keep the corpus order. Domains are visited in sorted order from a
/// single seeded stream, so the split depends only on `seed` and the input.
pub fn sample_test_set(
    corpus: &Corpus,
    per_domain: &BTreeMap<DomainTag, usize>,
    seed: u64,
) -> Result<(Corpus, Corpus)> {
    let mut by_domain: BTreeMap<&DomainTag, Vec<usize>> = BTreeMap::new();
    for (i, p) in corpus.pairs.iter().enumerate() {
        by_domain.entry(&p.domain).or_default().push(i);
    }
    for (domain, &requested) in per_domain {
        let available = by_domain.get(domain).map_or(0, Vec::len);
        if requested > available {
            return Err(CorpusError::InsufficientDomain {
                domain: domain.clone(),
                requested,
                available,
                shortfall: requested - available,
            });
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut in_test = vec![false; corpus.len()];
    for (domain, &requested) in per_domain {
        if requested == 0 {
            continue;
        }
        let members = &by_domain[domain];
        for k in rand::seq::index::sample(&mut rng, members.len(), requested) {
            in_test[members[k]] = true;
        }
    }

    let (mut test, mut rest) = (Vec::new(), Vec::new());
    for (pair, chosen) in corpus.pairs.iter().zip(in_test) {
        if chosen {
            test.push(pair.clone());
        } else {
            rest.push(pair.clone());
        }
    }
    Ok((
        Corpus::new(format!("{}-test", corpus.name), test),
        Corpus::new(format!("{}-remainder", corpus.name), rest),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn pair(en: &str, vi: &str, domain: DomainTag, tier: u8) -> SentencePair {
        SentencePair::new(en, vi, domain, tier, "t")
    }

    #[test]
    fn line_pair_preserves_order() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("c.en"), "a\nb\nc\n").unwrap();
        fs::write(dir.path().join("c.vi"), "x\r\ny\r\nz\r\n").unwrap();
        let c = ingest(&dir.path().join("c"), Format::LinePair, &DomainTag::Ted, 1).unwrap();
        let texts: Vec<_> = c.pairs.iter().map(|p| (p.en.as_str(), p.vi.as_str())).collect();
        assert_eq!(texts, [("a", "x"), ("b", "y"), ("c", "z")]);
        assert_eq!(c.name, "c");
    }

    #[test]
    fn line_pair_count_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("c.en"), "1\n2\n3\n4\n5\n").unwrap();
        fs::write(dir.path().join("c.vi"), "1\n2\n3\n4\n").unwrap();
        let err = ingest(&dir.path().join("c.en"), Format::LinePair, &DomainTag::Ted, 1).unwrap_err();
        match err {
            CorpusError::LineCountMismatch {
                en_count,
                vi_count,
                first_unpaired_line,
            } => assert_eq!((en_count, vi_count, first_unpaired_line), (5, 4, 5)),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn jsonl_record_metadata_overrides_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        fs::write(&path, "{\"en\":\"x\",\"vi\":\"y\",\"domain\":\"law\",\"tier\":4}\n").unwrap();
        let c = ingest(&path, Format::Jsonl, &DomainTag::News, 1).unwrap();
        assert_eq!(c.pairs[0].domain, DomainTag::Law);
        assert_eq!(c.pairs[0].tier, 4);
        assert_eq!(c.pairs[0].source_id, "c");
    }

    #[test]
    fn jsonl_malformed_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.jsonl");
        fs::write(&path, "{\"en\":\"x\",\"vi\":\"y\"}\n{\"en\":\"x\"}\n").unwrap();
        let err = ingest(&path, Format::Jsonl, &DomainTag::News, 1).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }), "{err}");
        fs::write(&path, "{\"en\":\"x\",\"vi\":\"y\",\"tier\":7}\n").unwrap();
        let err = ingest(&path, Format::Jsonl, &DomainTag::News, 1).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 1, .. }), "{err}");
    }

    #[test]
    fn unknown_domain_and_format() {
        assert_eq!(DomainTag::parse("Law"), DomainTag::Law);
        assert_eq!(DomainTag::parse("poetry"), DomainTag::Other("poetry".into()));
        assert!(matches!("xml".parse::<Format>(), Err(CorpusError::UnknownFormat(_))));
    }

    #[test]
    fn blank_sides_dropped_and_counted() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("c.en"), "a\n  \nc\n").unwrap();
        fs::write(dir.path().join("c.vi"), "x\ny\n\t\n").unwrap();
        let (c, report) = ingest_with_report(&dir.path().join("c"), Format::LinePair, &DomainTag::Ted, 1).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(report, IngestReport { records: 3, dropped_empty: 2 });
    }

    #[test]
    fn tsv_header_sniffing_and_fields() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.tsv");
        fs::write(&path, "en\tvi\tdomain\ttier\nhello\txin chào\tnews\t2\nbye\ttạm biệt\n").unwrap();
        let c = ingest(&path, Format::Tsv, &DomainTag::Wiki, 1).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!((c.pairs[0].domain.clone(), c.pairs[0].tier), (DomainTag::News, 2));
        assert_eq!((c.pairs[1].domain.clone(), c.pairs[1].tier), (DomainTag::Wiki, 1));

        fs::write(&path, "a\tb\nc\n").unwrap();
        let err = ingest(&path, Format::Tsv, &DomainTag::Wiki, 1).unwrap_err();
        assert!(matches!(err, CorpusError::Malformed { line: 2, .. }));
    }

    #[test]
    fn jsonl_round_trip_keeps_extras() {
        let dir = tempfile::tempdir().unwrap();
        let src = dir.path().join("in.jsonl");
        fs::write(
            &src,
            "{\"en\":\"a\",\"vi\":\"b\",\"domain\":\"poetry\",\"tier\":2,\"source\":\"s\",\"score\":0.1,\"note\":{\"k\":[1,2]}}\n",
        )
        .unwrap();
        let c = read_jsonl(&src).unwrap();
        assert_eq!(c.pairs[0].extra["note"], serde_json::json!({"k": [1, 2]}));
        let out = dir.path().join("out.jsonl");
        export(&c, &out, Format::Jsonl).unwrap();
        let mut back = read_jsonl(&out).unwrap();
        back.name = c.name.clone();
        assert_eq!(back, c);
    }

    #[test]
    fn export_empty_corpus_writes_empty_file() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("e.jsonl");
        export(&Corpus::default(), &out, Format::Jsonl).unwrap();
        assert_eq!(fs::read(&out).unwrap(), b"");
        assert!(read_jsonl(&out).unwrap().is_empty());
    }

    #[test]
    fn line_pair_export_round_trip_text() {
        let dir = tempfile::tempdir().unwrap();
        let c = Corpus::new(
            "c",
            vec![pair("one", "một", DomainTag::Law, 2), pair("two", "hai", DomainTag::News, 3)],
        );
        let base = dir.path().join("rt");
        export(&c, &base, Format::LinePair).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("rt.en")).unwrap(), "one\ntwo\n");
        let back = ingest(&base, Format::LinePair, &DomainTag::Other("x".into()), 1).unwrap();
        let texts = |c: &Corpus| c.pairs.iter().map(|p| (p.en.clone(), p.vi.clone())).collect::<Vec<_>>();
        assert_eq!(texts(&back), texts(&c));
    }

    #[test]
    fn merge_concatenates() {
        let a = Corpus::new("a", vec![pair("1", "1", DomainTag::Law, 1), pair("2", "2", DomainTag::Law, 1)]);
        let b = Corpus::new("b", vec![pair("3", "3", DomainTag::News, 1); 3]);
        let m = merge(&[a.clone(), b]);
        assert_eq!(m.len(), 5);
        assert_eq!(m.pairs[0].en, "1");
        assert!(merge(&[]).is_empty());
        assert_eq!(merge(&[a.clone(), a.clone()]).len(), 4);
    }

    #[test]
    fn stats_counts() {
        let mut pairs = vec![pair("a b", "c", DomainTag::Law, 1); 3];
        pairs.extend(vec![pair("Hello, world", "x", DomainTag::News, 3); 2]);
        let s = stats(&Corpus::new("c", pairs));
        assert_eq!(s.total, 5);
        assert_eq!(s.domain_count(&DomainTag::Law), 3);
        assert_eq!(s.domain_count(&DomainTag::News), 2);
        assert_eq!(s.en.tokens, 3 * 2 + 2 * 3);
        assert_eq!(s.per_tier, BTreeMap::from([(1, 3), (3, 2)]));

        let empty = stats(&Corpus::default());
        assert_eq!(empty.total, 0);
        assert!(empty.per_domain.is_empty() && empty.per_tier.is_empty());
        assert_eq!(empty.en.tokens + empty.vi.tokens, 0);
    }

    #[test]
    fn tier_histogram() {
        let c = Corpus::new(
            "c",
            [1, 1, 3].iter().map(|&t| pair("a", "b", DomainTag::Law, t)).collect(),
        );
        assert_eq!(stats(&c).per_tier, BTreeMap::from([(1, 2), (3, 1)]));
    }

    #[test]
    fn sampling_partitions_and_is_deterministic() {
        let c = Corpus::new(
            "c",
            (0..3).map(|i| pair(&format!("law{i}"), "v", DomainTag::Law, 1)).collect(),
        );
        let want = BTreeMap::from([(DomainTag::Law, 1)]);
        let (test, rest) = sample_test_set(&c, &want, 7).unwrap();
        assert_eq!((test.len(), rest.len()), (1, 2));
        assert!(rest.pairs.iter().all(|p| p.en != test.pairs[0].en));
        assert_eq!(sample_test_set(&c, &want, 7).unwrap(), (test, rest));
    }

    #[test]
    fn sampling_shortfall_names_domain() {
        let c = Corpus::new("c", vec![pair("a", "b", DomainTag::News, 1); 2]);
        let err = sample_test_set(&c, &BTreeMap::from([(DomainTag::News, 4)]), 0).unwrap_err();
        match err {
            CorpusError::InsufficientDomain { domain, shortfall, .. } => {
                assert_eq!((domain, shortfall), (DomainTag::News, 2))
            }
            other => panic!("unexpected {other}"),
        }
    }
}
