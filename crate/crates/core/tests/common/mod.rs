#![allow(dead_code)]

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use bitextkit::corpus::{Document, DocumentPair, DomainTag, Lang};
use bitextkit::translate::{Direction, Lexicon, Translator};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

// ---------- brute-force oracles ----------

fn ngrams(tokens: &[String], n: usize) -> Vec<&[String]> {
    if tokens.len() < n {
        return Vec::new();
    }
    (0..=tokens.len() - n).map(|i| &tokens[i..i + n]).collect()
}

/// Unsmoothed BLEU by direct counting: no hashing, no interning.
pub fn bleu_oracle(hyp: &[String], reference: &[String], max_n: usize) -> f64 {
    if hyp.is_empty() {
        return 0.0;
    }
    let mut log_sum = 0.0;
    for n in 1..=max_n {
        let hg = ngrams(hyp, n);
        let rg = ngrams(reference, n);
        if hg.is_empty() {
            return 0.0;
        }
        let mut seen: Vec<&[String]> = Vec::new();
        let mut matched = 0usize;
        for g in &hg {
            if seen.contains(g) {
                continue;
            }
            seen.push(g);
            let in_hyp = hg.iter().filter(|x| *x == g).count();
            let in_ref = rg.iter().filter(|x| *x == g).count();
            matched += in_hyp.min(in_ref);
        }
        if matched == 0 {
            return 0.0;
        }
        log_sum += (matched as f64 / hg.len() as f64).ln();
    }
    let (h, r) = (hyp.len() as f64, reference.len() as f64);
    let bp = if h < r { (1.0 - r / h).exp() } else { 1.0 };
    100.0 * bp * (log_sum / max_n as f64).exp()
}

/// Best total over every monotone partial matching whose pairs all score at least `tau`.
///
/// Sums accumulate in matching order, so the result is bit-comparable with a
/// left-to-right DP even for non-integer scores.
pub fn best_matching(scores: &[Vec<f64>], tau: f64) -> f64 {
    fn go(scores: &[Vec<f64>], tau: f64, i: usize, j: usize, acc: f64) -> f64 {
        if i == scores.len() {
            return acc;
        }
        let mut best = go(scores, tau, i + 1, j, acc);
        for jj in j..scores[i].len() {
            if scores[i][jj] >= tau {
                best = best.max(go(scores, tau, i + 1, jj + 1, acc + scores[i][jj]));
            }
        }
        best
    }
    go(scores, tau, 0, 0, 0.0)
}

/// First `k` indices after a stable sort by score, returned in corpus order.
pub fn stable_sort_top_k(scores: &[f64], k: usize, higher_is_better: bool) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| {
        let o = scores[a].partial_cmp(&scores[b]).unwrap();
        if higher_is_better {
            o.reverse()
        } else {
            o
        }
    });
    let mut top = idx[..k].to_vec();
    top.sort_unstable();
    top
}

// ---------- synthetic bilingual documents ----------

const EN_SYLLABLES: &[&str] = &[
    "ba", "ce", "di", "fo", "gu", "ha", "ke", "li", "mo", "nu", "pa", "re", "si", "to", "vu", "wa", "ze", "bro", "cla",
    "dri", "ple", "sto", "tra", "gri",
];
const VI_SYLLABLES: &[&str] = &[
    "anh", "bạn", "cây", "dòng", "đất", "em", "gió", "hoa", "không", "lúa", "mưa", "nước", "ông", "phố", "quê", "rừng",
    "sông", "tình", "ước", "việt", "xanh", "yêu", "nhà", "trời", "chợ", "đường", "biển", "núi", "mây", "làng",
];

/// A word-for-word lexicon between invented English words and two-syllable Vietnamese phrases.
pub struct SyntheticLexicon {
    pub en: Vec<String>,
    pub vi: Vec<String>,
}

impl SyntheticLexicon {
    pub fn new(size: usize) -> Self {
        let mut en = Vec::with_capacity(size);
        let mut vi = Vec::with_capacity(size);
        for k in 0..size {
            let a = EN_SYLLABLES[k % EN_SYLLABLES.len()];
            let b = EN_SYLLABLES[(k / EN_SYLLABLES.len()) % EN_SYLLABLES.len()];
            let c = EN_SYLLABLES[k / (EN_SYLLABLES.len() * EN_SYLLABLES.len())];
            en.push(format!("{a}{b}{c}"));
            let x = VI_SYLLABLES[k % VI_SYLLABLES.len()];
            let y = VI_SYLLABLES[(k / VI_SYLLABLES.len()) % VI_SYLLABLES.len()];
            let z = k / (VI_SYLLABLES.len() * VI_SYLLABLES.len());
            vi.push(if z == 0 { format!("{x} {y}") } else { format!("{x}{z} {y}") });
        }
        SyntheticLexicon { en, vi }
    }

    pub fn translator(&self) -> Lexicon {
        Lexicon::from_entries(Direction::EN_VI, self.en.iter().map(String::as_str).zip(self.vi.iter().map(String::as_str)))
            .with_inverse(Direction::EN_VI)
    }

    pub fn write_tsv(&self, path: &Path) {
        let body: String = self.en.iter().zip(&self.vi).map(|(e, v)| format!("{e}\t{v}\n")).collect();
        std::fs::write(path, body).unwrap();
    }

    /// A random sentence as (English, Vietnamese).
    pub fn sentence(&self, rng: &mut impl Rng, len: usize) -> (String, String) {
        let ids: Vec<usize> = (0..len).map(|_| rng.gen_range(0..self.en.len())).collect();
        let en: Vec<&str> = ids.iter().map(|&i| self.en[i].as_str()).collect();
        let vi: Vec<&str> = ids.iter().map(|&i| self.vi[i].as_str()).collect();
        (capitalize(&en.join(" ")) + ".", capitalize(&vi.join(" ")) + ".")
    }
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

pub struct SyntheticPair {
    pub pair: DocumentPair,
    /// Zero-based (en, vi) indices of the sentences that translate each other.
    pub truth: Vec<(usize, usize)>,
}

/// Builds `true_len` translated sentences, then inserts unmatched sentences into
/// each side at random positions until they make up `noise` of that side.
pub fn synthetic_pair(lex: &SyntheticLexicon, rng: &mut ChaCha8Rng, id: &str, true_len: usize, noise: f64) -> SyntheticPair {
    let true_pairs: Vec<(String, String)> = (0..true_len).map(|_| {
        let len = rng.gen_range(6..=14);
        lex.sentence(rng, len)
    }).collect();
    let n_noise = ((true_len as f64) * noise / (1.0 - noise)).round() as usize;

    let side = |pick: fn(&(String, String)) -> String, rng: &mut ChaCha8Rng| {
        let mut slots: Vec<Option<usize>> = (0..true_len).map(Some).collect();
        for _ in 0..n_noise {
            let at = rng.gen_range(0..=slots.len());
            slots.insert(at, None);
        }
        let mut position_of = vec![0; true_len];
        let mut lines = Vec::with_capacity(slots.len());
        for (pos, slot) in slots.iter().enumerate() {
            match slot {
                Some(t) => {
                    position_of[*t] = pos;
                    lines.push(pick(&true_pairs[*t]));
                }
                None => {
                    let len = rng.gen_range(6..=14);
                    lines.push(pick(&lex.sentence(rng, len)));
                }
            }
        }
        (lines, position_of)
    };
    let (en_lines, en_pos) = side(|p| p.0.clone(), rng);
    let (vi_lines, vi_pos) = side(|p| p.1.clone(), rng);
    let truth = (0..true_len).map(|t| (en_pos[t], vi_pos[t])).collect();
    SyntheticPair {
        pair: DocumentPair::new(
            id,
            Document::from_lines(Lang::En, en_lines, format!("{id}.en"), DomainTag::News),
            Document::from_lines(Lang::Vi, vi_lines, format!("{id}.vi"), DomainTag::News),
        ),
        truth,
    }
}

/// The 50-pair benchmark corpus: 20 to 40 translated sentences per document, 20% noise per side.
pub fn synthetic_batch(seed: u64, docs: usize) -> (SyntheticLexicon, Vec<SyntheticPair>) {
    let lex = SyntheticLexicon::new(4000);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..docs)
        .map(|d| {
            let len = rng.gen_range(20..=40);
            synthetic_pair(&lex, &mut rng, &format!("doc{d:03}"), len, 0.2)
        })
        .collect();
    (lex, pairs)
}

/// Writes the documents plus a manifest; returns the manifest path.
pub fn write_documents(dir: &Path, pairs: &[SyntheticPair]) -> std::path::PathBuf {
    let mut manifest = String::new();
    for p in pairs {
        let en = format!("{}.en.txt", p.pair.pair_id);
        let vi = format!("{}.vi.txt", p.pair.pair_id);
        std::fs::write(dir.join(&en), p.pair.doc_en.texts().collect::<Vec<_>>().join("\n") + "\n").unwrap();
        std::fs::write(dir.join(&vi), p.pair.doc_vi.texts().collect::<Vec<_>>().join("\n") + "\n").unwrap();
        manifest.push_str(&format!("{en}\t{vi}\tnews\n"));
    }
    let path = dir.join("pairs.tsv");
    std::fs::write(&path, manifest).unwrap();
    path
}

pub fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    v
}

/// Wraps a translator and counts `translate` invocations and texts sent.
pub struct CountingTranslator<T> {
    pub inner: T,
    pub calls: Arc<AtomicUsize>,
    pub texts: Arc<AtomicUsize>,
}

impl<T> CountingTranslator<T> {
    pub fn new(inner: T) -> Self {
        CountingTranslator {
            inner,
            calls: Arc::new(AtomicUsize::new(0)),
            texts: Arc::new(AtomicUsize::new(0)),
        }
    }
}

impl<T: Translator> Translator for CountingTranslator<T> {
    fn translate(&self, direction: Direction, texts: &[String]) -> bitextkit::translate::Result<Vec<String>> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.texts.fetch_add(texts.len(), Ordering::SeqCst);
        self.inner.translate(direction, texts)
    }
}

// ---------- minimal HTTP stub ----------

pub type Handler = dyn Fn(&str, &Value) -> (u16, Value) + Send + Sync;

/// A one-thread-per-connection JSON-over-HTTP server on localhost.
pub struct StubServer {
    pub url: String,
    pub requests: Arc<AtomicUsize>,
}

impl StubServer {
    pub fn start(handler: impl Fn(&str, &Value) -> (u16, Value) + Send + Sync + 'static) -> StubServer {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let requests = Arc::new(AtomicUsize::new(0));
        let handler: Arc<Handler> = Arc::new(handler);
        let counter = Arc::clone(&requests);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let handler = Arc::clone(&handler);
                let counter = Arc::clone(&counter);
                std::thread::spawn(move || {
                    let mut reader = BufReader::new(stream);
                    loop {
                        let mut request_line = String::new();
                        if reader.read_line(&mut request_line).unwrap_or(0) == 0 {
                            return;
                        }
                        let path = request_line.split_whitespace().nth(1).unwrap_or("/").to_string();
                        let mut headers: HashMap<String, String> = HashMap::new();
                        loop {
                            let mut line = String::new();
                            if reader.read_line(&mut line).unwrap_or(0) == 0 {
                                return;
                            }
                            let line = line.trim_end();
                            if line.is_empty() {
                                break;
                            }
                            if let Some((k, v)) = line.split_once(':') {
                                headers.insert(k.trim().to_ascii_lowercase(), v.trim().to_string());
                            }
                        }
                        let len: usize = headers.get("content-length").and_then(|v| v.parse().ok()).unwrap_or(0);
                        let mut body = vec![0; len];
                        if reader.read_exact(&mut body).is_err() {
                            return;
                        }
                        counter.fetch_add(1, Ordering::SeqCst);
                        let json: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
                        let (status, reply) = handler(&path, &json);
                        let payload = reply.to_string();
                        let response = format!(
                            "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{payload}",
                            payload.len()
                        );
                        let stream = reader.get_mut();
                        let _ = stream.write_all(response.as_bytes());
                        let _ = stream.flush();
                        return;
                    }
                });
            }
        });
        StubServer { url, requests }
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}
