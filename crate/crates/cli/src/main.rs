use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use bitextkit::align::AlignConfig;
use bitextkit::bleu::{Smoothing, TokenizerKind};
use bitextkit::corpus::{DomainTag, Format};
use bitextkit::pipeline::{
    default_workers, run_pipeline, run_stage, BleuOptions, IngestInput, PipelineConfig, RunContext, ScorerSpec, Stage,
    StageOutput,
};
use bitextkit::translate::{BackendSpec, RemoteConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "bitextkit", version, about = "Build, clean and evaluate English-Vietnamese parallel corpora")]
struct Cli {
    /// Threads for every parallel stage [default: available CPUs]
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Seed for randomized stages
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Persistent translation cache (JSONL)
    #[arg(long, global = true, env = "BITEXTKIT_CACHE")]
    cache: Option<PathBuf>,

    /// error, warn, info, debug or trace
    #[arg(long, global = true, env = "BITEXTKIT_LOG")]
    log_level: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Read TSV, JSONL or line-pair files into one JSONL corpus
    Ingest {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value = "jsonl")]
        format: Format,
        /// Domain for records that carry none
        #[arg(long)]
        domain: Option<String>,
        #[arg(long, default_value_t = 1)]
        tier: u8,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Concatenate JSONL corpora
    Merge {
        #[arg(long = "in", required = true, num_args = 1..)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        name: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-domain and per-tier counts, token totals, length histograms
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        bucket_width: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw a seeded per-domain test set
    SampleTest {
        #[arg(long = "in")]
        input: PathBuf,
        /// DOMAIN=COUNT, repeatable
        #[arg(long = "per-domain", required = true, value_parser = parse_domain_count)]
        per_domain: Vec<(DomainTag, usize)>,
        #[arg(long)]
        test_out: PathBuf,
        #[arg(long)]
        remainder_out: PathBuf,
    },
    /// Corpus BLEU of a hypothesis file against a reference file
    Bleu {
        #[arg(long)]
        hyp: PathBuf,
        #[arg(long = "ref")]
        reference: PathBuf,
        #[command(flatten)]
        bleu: BleuArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Align document pairs listed in a manifest
    Align {
        /// TSV of en-doc-path, vi-doc-path and an optional domain
        #[arg(long)]
        pairs: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, default_value_t = bitextkit::align::DEFAULT_MIN_PAIR_SCORE)]
        min_pair_score: f64,
        #[arg(long)]
        band: Option<usize>,
        #[arg(long)]
        domain: Option<String>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Attach a quality score to every pair
    Score {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        scorer: ScorerKind,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Keep the K best pairs, or tune K with an evaluator command
    Filter {
        #[arg(long = "in")]
        input: PathBuf,
        /// Score first; omit when the input already carries scores
        #[arg(long, value_enum)]
        scorer: Option<ScorerKind>,
        #[command(flatten)]
        backend: BackendArgs,
        #[arg(long, conflicts_with = "tune_k")]
        k: Option<usize>,
        /// Comma-separated candidate K values
        #[arg(long, value_delimiter = ',', requires = "evaluator")]
        tune_k: Option<Vec<usize>>,
        /// Command run with the candidate corpus path appended; prints one number
        #[arg(long)]
        evaluator: Option<String>,
        /// Treat scores as losses
        #[arg(long)]
        lower_is_better: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Remove normalized duplicates, optionally also pairs found in another corpus
    Dedup {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        against: Option<PathBuf>,
        /// Comma-separated: none, default, nfc, casefold, whitespace, punct, with optional no- prefix
        #[arg(long)]
        policy: Option<String>,
        /// Compare full keys instead of trusting fingerprints
        #[arg(long)]
        paranoid: bool,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Systems × (direction, domain) BLEU table
    EvalMatrix {
        #[arg(long, required_unless_present = "values", conflicts_with = "values")]
        manifest: Option<PathBuf>,
        /// Precomputed values: {"row": {"En-Vi": {"law": 22.07}}}
        #[arg(long)]
        values: Option<PathBuf>,
        #[command(flatten)]
        bleu: BleuArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Data needed by two curves to reach a target BLEU
    Budget {
        /// CSV: data_amount,bleu[,wall_hours]
        #[arg(long)]
        supervised: PathBuf,
        #[arg(long)]
        pretraining: PathBuf,
        #[arg(long)]
        target: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Hours and yield per data-source tier
    TimeReport {
        /// CSV: tier,human_hours,machine_hours,pairs_collected
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the stages listed in a JSON config
    Pipeline {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Args)]
struct BleuArgs {
    #[arg(long, default_value_t = 4)]
    max_n: usize,
    /// Lowercase before matching
    #[arg(long, overrides_with = "no_lc")]
    lc: bool,
    #[arg(long)]
    no_lc: bool,
    #[arg(long, default_value = "intl")]
    tokenizer: TokenizerKind,
    #[arg(long, default_value = "none")]
    smoothing: Smoothing,
}

impl BleuArgs {
    fn options(&self) -> BleuOptions {
        BleuOptions {
            max_n: self.max_n,
            lowercase: self.lc && !self.no_lc,
            tokenizer: self.tokenizer,
            smoothing: self.smoothing,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BackendKind {
    Identity,
    Lexicon,
    Cache,
    Remote,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ScorerKind {
    Roundtrip,
    Remote,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum)]
    backend: Option<BackendKind>,
    /// Phrase table, en \t vi per line
    #[arg(long)]
    lexicon_en_vi: Option<PathBuf>,
    /// Phrase table, vi \t en per line
    #[arg(long)]
    lexicon_vi_en: Option<PathBuf>,
    /// Precomputed translations for the cache backend
    #[arg(long)]
    translations: Option<PathBuf>,
    /// Fail on texts missing from --translations
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    timeout_secs: Option<f64>,
    #[arg(long)]
    max_batch: Option<usize>,
    #[arg(long)]
    retries: Option<usize>,
    #[arg(long)]
    concurrency: Option<usize>,
}

impl BackendArgs {
    fn remote(&self) -> anyhow::Result<RemoteConfig> {
        let endpoint = self.endpoint.clone().context("--endpoint is required for a remote service")?;
        let mut cfg = RemoteConfig::new(endpoint);
        if let Some(v) = self.timeout_secs {
            cfg.timeout_secs = v;
        }
        if let Some(v) = self.max_batch {
            cfg.max_batch = v;
        }
        if let Some(v) = self.retries {
            cfg.retries = v;
        }
        if let Some(v) = self.concurrency {
            cfg.concurrency = v;
        }
        Ok(cfg)
    }

    fn spec(&self) -> anyhow::Result<BackendSpec> {
        let kind = self.backend.context("--backend is required")?;
        Ok(match kind {
            BackendKind::Identity => BackendSpec::Identity,
            BackendKind::Lexicon => {
                if self.lexicon_en_vi.is_none() && self.lexicon_vi_en.is_none() {
                    bail!("the lexicon backend needs --lexicon-en-vi or --lexicon-vi-en");
                }
                BackendSpec::Lexicon {
                    en_vi: self.lexicon_en_vi.clone(),
                    vi_en: self.lexicon_vi_en.clone(),
                }
            }
            BackendKind::Cache => BackendSpec::Cache {
                path: self.translations.clone().context("the cache backend needs --translations")?,
                strict: self.strict,
            },
            BackendKind::Remote => BackendSpec::Remote(self.remote()?),
        })
    }

    fn scorer(&self, kind: ScorerKind) -> anyhow::Result<ScorerSpec> {
        Ok(match kind {
            ScorerKind::Roundtrip => ScorerSpec::Roundtrip { backend: self.spec()? },
            ScorerKind::Remote => ScorerSpec::Remote(self.remote()?),
        })
    }
}

fn parse_domain_count(s: &str) -> Result<(DomainTag, usize), String> {
    let (domain, count) = s.split_once('=').ok_or_else(|| format!("expected DOMAIN=COUNT, got `{s}`"))?;
    let count = count.trim().parse().map_err(|_| format!("bad count in `{s}`"))?;
    Ok((DomainTag::parse(domain.trim()), count))
}

fn build_stage(command: Command) -> anyhow::Result<Stage> {
    Ok(match command {
        Command::Ingest {
            inputs,
            format,
            domain,
            tier,
            name,
            out,
        } => Stage::Ingest {
            inputs: inputs
                .into_iter()
                .map(|path| IngestInput {
                    path,
                    format,
                    domain: domain.as_deref().map(DomainTag::parse),
                    tier,
                })
                .collect(),
            out,
            name,
        },
        Command::Merge { inputs, name, out } => Stage::Merge { inputs, out, name },
        Command::Stats {
            input,
            bucket_width,
            out,
        } => Stage::Stats {
            input,
            out,
            bucket_width,
        },
        Command::SampleTest {
            input,
            per_domain,
            test_out,
            remainder_out,
        } => {
            let mut counts = BTreeMap::new();
            for (domain, n) in per_domain {
                if counts.insert(domain.clone(), n).is_some() {
                    bail!("domain `{domain}` given twice");
                }
            }
            Stage::SampleTest {
                input,
                per_domain: counts,
                test_out,
                remainder_out,
                seed: None,
            }
        }
        Command::Bleu {
            hyp,
            reference,
            bleu,
            out,
        } => Stage::Bleu {
            hyp,
            reference,
            options: bleu.options(),
            out,
        },
        Command::Align {
            pairs,
            backend,
            min_pair_score,
            band,
            domain,
            out,
            report,
        } => Stage::Align {
            pairs,
            backend: backend.spec()?,
            domain: domain.as_deref().map(DomainTag::parse),
            config: AlignConfig {
                min_pair_score,
                band,
                ..AlignConfig::default()
            },
            out,
            report,
        },
        Command::Score {
            input,
            scorer,
            backend,
            checkpoint,
            out,
        } => Stage::Score {
            input,
            scorer: backend.scorer(scorer)?,
            out,
            checkpoint,
        },
        Command::Filter {
            input,
            scorer,
            backend,
            k,
            tune_k,
            evaluator,
            lower_is_better,
            out,
            report,
        } => {
            if k.is_none() && tune_k.is_none() {
                bail!("give --k or --tune-k");
            }
            Stage::Filter {
                input,
                scorer: scorer.map(|s| backend.scorer(s)).transpose()?,
                higher_is_better: lower_is_better.then_some(false),
                k,
                tune_k,
                evaluator,
                out,
                report,
            }
        }
        Command::Dedup {
            input,
            against,
            policy,
            paranoid,
            out,
            report,
        } => Stage::Dedup {
            input,
            against,
            policy,
            paranoid,
            out,
            report,
        },
        Command::EvalMatrix {
            manifest,
            values,
            bleu,
            out,
        } => Stage::EvalMatrix {
            manifest,
            values,
            options: bleu.options(),
            out,
        },
        Command::Budget {
            supervised,
            pretraining,
            target,
            out,
        } => Stage::Budget {
            supervised,
            pretraining,
            target_bleu: target,
            out,
        },
        Command::TimeReport { input, out } => Stage::TimeReport { input, out },
        Command::Pipeline { .. } => unreachable!("handled by the caller"),
    })
}

fn init_logging(level: &str) {
    env_logger::Builder::new()
        .parse_filters(level)
        .format(|buf, record| {
            let line = serde_json::json!({
                "level": record.level().as_str(),
                "stage": record.target(),
                "message": record.args().to_string(),
            });
            writeln!(buf, "{line}")
        })
        .target(env_logger::Target::Stderr)
        .init();
}

fn print_output(out: &StageOutput) -> std::io::Result<()> {
    let mut stdout = std::io::stdout().lock();
    match &out.text {
        Some(text) => stdout.write_all(text.as_bytes())?,
        None => writeln!(stdout, "{}", serde_json::to_string_pretty(&out.summary).expect("JSON value"))?,
    }
    stdout.flush()
}

fn fail(stage: Option<&str>, error: &anyhow::Error) -> ExitCode {
    let body = serde_json::json!({ "error": error.to_string(), "stage": stage });
    eprintln!("{body}");
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.log_level.as_deref().unwrap_or("info"));

    if let Command::Pipeline { config } = &cli.command {
        let mut cfg = match PipelineConfig::load(config) {
            Ok(c) => c,
            Err(e) => return fail(Some("pipeline"), &anyhow!(e)),
        };
        if let Some(w) = cli.workers {
            cfg.global.workers = w;
        }
        if let Some(s) = cli.seed {
            cfg.global.seed = s;
        }
        if cli.cache.is_some() {
            cfg.global.cache = cli.cache.clone();
        }
        return match run_pipeline(&cfg) {
            Ok(outputs) => {
                let summaries: Vec<_> = outputs.into_iter().map(|o| o.summary).collect();
                println!("{}", serde_json::to_string_pretty(&summaries).expect("JSON value"));
                ExitCode::SUCCESS
            }
            Err(e) => {
                let stage = e.stage_name();
                fail(stage, &anyhow!(e))
            }
        };
    }

    let ctx = RunContext {
        workers: cli.workers.unwrap_or_else(default_workers),
        seed: cli.seed.unwrap_or(0),
        cache: cli.cache,
    };
    let stage = match build_stage(cli.command) {
        Ok(s) => s,
        Err(e) => return fail(None, &e),
    };
    match run_stage(&stage, &ctx) {
        Ok(out) => match print_output(&out) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => fail(Some(stage.name()), &anyhow!(e)),
        },
        Err(e) => fail(Some(stage.name()), &anyhow!(e)),
    }
}
