use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use mixnoise::alignprobe::{synth_corpus, train_model1_texts, ProbeReport, SynthSpec};
use mixnoise::calibrate::{calibrate_replace_prob, RECOMMENDED_SAMPLE};
use mixnoise::corpus::{load_corpus, sample_paragraphs, Corpus, InvalidUtf8Policy, LoadOptions, Pretokenizer};
use mixnoise::dictionary::{compose_pivot, parse_muse, parse_muse_with_langs, BilingualDictionary};
use mixnoise::pipeline::{generate_dataset, GenerateOptions, PipelineConfig, PipelineError, Record};
use mixnoise::stats::{load_vocab, report_from_dataset};
use mixnoise::load_config;

mod manifest;

use manifest::{sidecar, Manifest};

/// Noisy mixed-language corpus generation for denoising pre-training.
#[derive(Parser)]
#[command(name = "mixnoise", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a MUSE dictionary, optionally pivot it, and write MUSE format.
    BuildDict(BuildDictArgs),
    /// Find the replacement probability that hits a target mixing ratio.
    Calibrate(CalibrateArgs),
    /// Write a JSON-lines dataset of (noisy mixed input, clean target) pairs.
    Generate(GenerateArgs),
    /// Recompute the report of an existing dataset.
    Stats(StatsArgs),
    /// Train IBM Model 1 on a dataset and score it against a planted lexicon.
    Probe(ProbeArgs),
    /// Write a synthetic Zipf corpus and its planted dictionary.
    Synth(SynthArgs),
}

#[derive(Args, Serialize)]
struct PipelineFlags {
    /// JSON config file mirroring the pipeline configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Config override, e.g. `--set noise.mask_fraction=0.2`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Disable span masking and sentence permutation.
    #[arg(long)]
    no_noise: bool,
    #[arg(long)]
    no_deletion: bool,
    #[arg(long)]
    no_replacement: bool,
}

impl PipelineFlags {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = load_config(self.config.as_deref(), &self.overrides)?;
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if self.no_noise {
            cfg.noise.enabled = false;
        }
        if self.no_deletion {
            cfg.mix.deletion_enabled = false;
        }
        if self.no_replacement {
            cfg.mix.replacement_enabled = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Serialize)]
struct CorpusFlags {
    /// Monolingual corpus, one paragraph per line.
    #[arg(long)]
    corpus: PathBuf,
    /// Shell command that segments lines (stdin -> stdout, one line each).
    #[arg(long)]
    pretokenizer: Option<String>,
    /// Skip lines that are not valid UTF-8 instead of aborting.
    #[arg(long)]
    skip_invalid: bool,
    #[arg(long, default_value = "und")]
    lang: String,
}

impl CorpusFlags {
    fn load(&self) -> Result<Corpus> {
        let opts = LoadOptions {
            pretokenizer: self.pretokenizer.clone().map(Pretokenizer::new),
            invalid_utf8: if self.skip_invalid {
                InvalidUtf8Policy::Skip
            } else {
                InvalidUtf8Policy::Abort
            },
            language_tag: self.lang.clone(),
        };
        let corpus = load_corpus(&self.corpus, &opts)?;
        if corpus.skipped_invalid > 0 {
            eprintln!("skipped {} invalid UTF-8 lines", corpus.skipped_invalid);
        }
        Ok(corpus)
    }
}

#[derive(Args, Serialize)]
struct BuildDictArgs {
    /// MUSE dictionary (X-Y, or X-En when pivoting).
    #[arg(long)]
    dict: PathBuf,
    /// En-Y dictionary to compose with.
    #[arg(long)]
    pivot: Option<PathBuf>,
    /// Language tags of --dict as `src-tgt`, overriding the file name.
    #[arg(long)]
    dict_langs: Option<String>,
    /// Language tags of --pivot as `src-tgt`.
    #[arg(long)]
    pivot_langs: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct CalibrateArgs {
    #[command(flatten)]
    corpus: CorpusFlags,
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value_t = 0.30)]
    target_ratio: f64,
    /// Paragraphs sampled for the search.
    #[arg(long, default_value_t = RECOMMENDED_SAMPLE)]
    sample: usize,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long)]
    #[serde(skip)]
    workers: Option<usize>,
    /// Result JSON; printed to stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GenerateArgs {
    #[command(flatten)]
    corpus: CorpusFlags,
    #[arg(long)]
    dict: PathBuf,
    #[command(flatten)]
    pipeline: PipelineFlags,
    #[arg(long)]
    #[serde(skip)]
    workers: Option<usize>,
    /// Reference vocabulary (one word per line) for the OOV rate.
    #[arg(long)]
    vocab: Option<PathBuf>,
    /// Add per-token action codes to each record.
    #[arg(long)]
    audit: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct StatsArgs {
    /// JSON-lines dataset written by `generate`.
    dataset: PathBuf,
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ProbeArgs {
    /// JSON-lines dataset written by `generate`.
    #[arg(long)]
    data: PathBuf,
    /// Planted dictionary (target-side word -> input-side word).
    #[arg(long)]
    dict: PathBuf,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SynthArgs {
    #[arg(long, default_value_t = 200)]
    vocab_size: usize,
    #[arg(long, default_value_t = 5000)]
    sentences: usize,
    #[arg(long, default_value_t = 5)]
    min_len: usize,
    #[arg(long, default_value_t = 15)]
    max_len: usize,
    #[arg(long, default_value_t = 1.0)]
    zipf: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Corpus output path.
    #[arg(long)]
    out: PathBuf,
    /// Planted dictionary output path.
    #[arg(long)]
    dict: PathBuf,
}

fn workers(requested: Option<usize>) -> usize {
    requested.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn args_value<T: Serialize>(args: &T) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(args)?)
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn parse_langs(tags: &str) -> Result<(String, String)> {
    match tags.split_once('-') {
        Some((a, b)) if !a.is_empty() && !b.is_empty() => Ok((a.to_owned(), b.to_owned())),
        _ => bail!("language tags must look like `src-tgt`, got `{tags}`"),
    }
}

fn read_dict(path: &Path, langs: Option<&str>) -> Result<BilingualDictionary> {
    let dict = match langs {
        Some(tags) => {
            let (s, t) = parse_langs(tags)?;
            parse_muse_with_langs(path, &s, &t)?
        }
        None => parse_muse(path)?,
    };
    Ok(dict)
}

fn build_dict(args: &BuildDictArgs) -> Result<()> {
    let mut dict = read_dict(&args.dict, args.dict_langs.as_deref())?;
    let mut manifest = Manifest::new("build-dict", args_value(args)?).input(&args.dict)?;
    if let Some(pivot) = &args.pivot {
        let right = read_dict(pivot, args.pivot_langs.as_deref())?;
        dict = compose_pivot(&dict, &right)?;
        manifest = manifest.input(pivot)?;
    }
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut out = BufWriter::new(file);
    dict.write_muse(&mut out)?;
    out.flush()?;
    manifest.output(&args.out)?.write_beside(&args.out)?;
    eprintln!(
        "{}-{}: {} words, {} pairs",
        dict.src_lang,
        dict.tgt_lang,
        dict.len(),
        dict.pair_count()
    );
    Ok(())
}

fn calibrate(args: &CalibrateArgs) -> Result<()> {
    let cfg = args.pipeline.resolve()?;
    let corpus = args.corpus.load()?;
    let dict = parse_muse(&args.dict)?;
    let sample = sample_paragraphs(&corpus, args.sample, cfg.seed);
    if sample.len() < RECOMMENDED_SAMPLE {
        eprintln!(
            "note: calibrating on {} paragraphs; at least {RECOMMENDED_SAMPLE} are recommended",
            sample.len()
        );
    }
    let result = calibrate_replace_prob(&sample, &dict, &cfg, args.target_ratio, workers(args.workers))?;
    match &args.out {
        Some(path) => {
            write_json(path, &result)?;
            Manifest::new("calibrate", args_value(args)?)
                .config(&cfg, cfg.seed)?
                .input(&args.corpus.corpus)?
                .input(&args.dict)?
                .output(path)?
                .write_beside(path)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&result)?),
    }
    if result.feasible {
        println!("recommended replace_prob: {}", result.replace_prob);
    } else {
        println!(
            "target {} exceeds coverage {:.4}; best achievable ratio {:.4} at replace_prob 1",
            args.target_ratio, result.coverage, result.achieved_ratio
        );
    }
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let mut cfg = args.pipeline.resolve()?;
    let corpus = args.corpus.load()?;
    let dict = parse_muse(&args.dict)?;
    if cfg.direction_label.is_empty() {
        cfg.direction_label = format!("{}->{}", dict.src_lang, dict.tgt_lang);
    }
    let vocab = args.vocab.as_ref().map(load_vocab).transpose()?;

    let partial = sidecar(&args.out, "partial");
    let _ = fs::remove_file(&partial);
    let file = File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let mut out = BufWriter::new(file);
    let opts = GenerateOptions {
        workers: workers(args.workers),
        audit: args.audit,
        vocab: vocab.as_ref(),
    };
    let report = match generate_dataset(&corpus, &dict, &cfg, &mut out, &opts) {
        Ok(r) => r,
        Err(err) => {
            if let PipelineError::Sink { written, .. } = &err {
                let _ = fs::write(&partial, format!("{written}\n"));
            }
            return Err(err.into());
        }
    };
    drop(out);

    if report.coverage_bound_holds() == Some(false) {
        bail!("mixing ratio exceeds dictionary coverage; report is inconsistent");
    }
    let report_path = sidecar(&args.out, "report.json");
    let mut json = report.to_json();
    json["direction_label"] = serde_json::Value::String(cfg.direction_label.clone());
    write_json(&report_path, &json)?;

    let mut manifest = Manifest::new("generate", args_value(args)?)
        .config(&cfg, cfg.seed)?
        .input(&args.corpus.corpus)?
        .input(&args.dict)?;
    if let Some(v) = &args.vocab {
        manifest = manifest.input(v)?;
    }
    manifest
        .output(&args.out)?
        .output(&report_path)?
        .write_beside(&args.out)?;
    print!("{report}");
    Ok(())
}

fn stats(args: &StatsArgs) -> Result<()> {
    let vocab = args.vocab.as_ref().map(load_vocab).transpose()?;
    let file = File::open(&args.dataset).with_context(|| format!("opening {}", args.dataset.display()))?;
    let report = report_from_dataset(BufReader::new(file), vocab.as_ref())?;
    print!("{report}");
    if let Some(path) = &args.out {
        write_json(path, &report.to_json())?;
        let mut manifest = Manifest::new("stats", args_value(args)?).input(&args.dataset)?;
        if let Some(v) = &args.vocab {
            manifest = manifest.input(v)?;
        }
        manifest.output(path)?.write_beside(path)?;
    }
    Ok(())
}

fn probe(args: &ProbeArgs) -> Result<()> {
    let planted = parse_muse(&args.dict)?;
    let text = fs::read_to_string(&args.data).with_context(|| format!("reading {}", args.data.display()))?;
    let records: Vec<Record> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("line {}", i + 1)))
        .collect::<Result<_>>()?;
    let fit = train_model1_texts(
        records.iter().map(|r| (r.input.as_str(), r.target.as_str())),
        args.iterations,
    )?;
    let report = ProbeReport::new(&fit, &planted, records.len());
    println!("precision@1: {:.4}", report.precision_at_1);
    match &args.out {
        Some(path) => {
            write_json(path, &report)?;
            Manifest::new("probe", args_value(args)?)
                .input(&args.data)?
                .input(&args.dict)?
                .output(path)?
                .write_beside(path)?;
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

fn synth(args: &SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        vocab_size: args.vocab_size,
        n_sentences: args.sentences,
        min_len: args.min_len,
        max_len: args.max_len,
        zipf_exponent: args.zipf,
        seed: args.seed,
    };
    let (corpus, dict) = synth_corpus(&spec)?;
    let mut out = BufWriter::new(File::create(&args.out)?);
    corpus.write_text(&mut out)?;
    out.flush()?;
    drop(out);
    let mut out = BufWriter::new(File::create(&args.dict)?);
    dict.write_muse(&mut out)?;
    out.flush()?;
    drop(out);
    Manifest::new("synth", args_value(args)?)
        .config(&spec, spec.seed)?
        .output(&args.out)?
        .output(&args.dict)?
        .write_beside(&args.out)?;
    eprintln!("{} paragraphs, {} tokens", corpus.len(), corpus.token_count());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::BuildDict(a) => build_dict(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Generate(a) => generate(a),
        Command::Stats(a) => stats(a),
        Command::Probe(a) => probe(a),
        Command::Synth(a) => synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
