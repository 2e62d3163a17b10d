mod settings;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use messyseg_core::ablation::{run_ablation, AblationPlan, RunResult};
use messyseg_core::crf::extract_segments;
use messyseg_core::data::{
    inject_ocr_noise, parse_corpus, split_corpus, synth_generate, write_corpus, Document, NoiseConfig,
    SynthConfig,
};
use messyseg_core::eval::evaluate_corpus;
use messyseg_core::model::{
    load_checkpoint, predict_corpus, save_checkpoint, train, EpochRecord, Protocol, TrainOptions,
};
use messyseg_core::selfcheck::{run_selfcheck, SelfCheckOptions};
use messyseg_core::{Error, Result, Tag, TagScheme};

use settings::{load_inputs, load_sidecar, EmbeddingFlags, ModelFlags};

#[derive(Parser, Debug)]
#[command(name = "messyseg", version, about = "Segment OCR'd newspaper pages into articles")]
struct Cli {
    /// Worker threads (MESSYSEG_THREADS caps this)
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProtocolArg {
    /// Early stopping on dev P_k
    Dev,
    /// Fixed epochs on train and dev together
    Combined,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a labelled synthetic corpus
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Character-level OCR noise rate
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Shuffle a corpus into train, dev and test files
    Split {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, default_value = "0.6,0.2,0.2")]
        ratios: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Train a tagger and write a checkpoint
    Train {
        #[arg(long)]
        corpus: PathBuf,
        /// Dev corpus for early stopping
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Training log (TSV); defaults to the checkpoint path plus .log.tsv
        #[arg(long)]
        log: Option<PathBuf>,
        /// Train on corpus and dev together for this many epochs
        #[arg(long)]
        combined_epochs: Option<usize>,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        inputs: EmbeddingFlags,
    },
    /// Label a corpus with a trained checkpoint
    Predict {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        contextual_sidecar: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a checkpoint or saved predictions against a gold corpus
    Evaluate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
        checkpoint: Option<PathBuf>,
        /// Corpus file whose labels are the predictions
        #[arg(long)]
        predictions: Option<PathBuf>,
        /// Scheme of the predictions (taken from the checkpoint when given)
        #[arg(long)]
        scheme: Option<String>,
        #[arg(long)]
        contextual_sidecar: Option<PathBuf>,
        /// Writes PREFIX.tsv and PREFIX.json
        #[arg(long)]
        report: PathBuf,
    },
    /// Train and score the feature and scheme grid over several seeds
    Ablate {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        dev: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Feature sets, e.g. all,no-contextual,no-static-no-distance
        #[arg(long, default_value = "all,no-contextual,no-static,no-distance")]
        grid: String,
        #[arg(long, default_value = "bio,bi")]
        schemes: String,
        /// Number of seeds per cell
        #[arg(long, default_value_t = 3)]
        seeds: u64,
        #[arg(long, value_enum, default_value_t = ProtocolArg::Dev)]
        protocol: ProtocolArg,
        #[arg(long, default_value_t = 10)]
        combined_epochs: usize,
        /// Cell pairs to compare, e.g. bio/all:bio/no-static (repeatable)
        #[arg(long = "compare")]
        compare: Vec<String>,
        /// Writes PREFIX.tsv, PREFIX.json and per-run files under PREFIX.runs/
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        inputs: EmbeddingFlags,
    },
    /// Gradient and brute-force oracle checks
    Selfcheck {
        /// Test fixture: corrupt one backward pass, which must be caught
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn thread_count(flag: Option<usize>) -> usize {
    let available = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut n = flag.unwrap_or(available).max(1);
    if let Some(cap) = std::env::var("MESSYSEG_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        n = n.min(cap.max(1));
    }
    n
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, contents)
        .and_then(|_| fs::rename(&tmp, path))
        .map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn median(mut xs: Vec<usize>) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.sort_unstable();
    let m = xs.len() / 2;
    if xs.len() % 2 == 1 {
        xs[m] as f64
    } else {
        (xs[m - 1] + xs[m]) as f64 / 2.0
    }
}

fn corpus_stats(docs: &[Document]) -> String {
    let mut per_doc = Vec::new();
    let mut chars = Vec::new();
    for d in docs {
        let segs = d.labels().map(extract_segments).unwrap_or_default();
        per_doc.push(segs.len());
        for s in segs {
            let (a, b) = s.char_span(d.tokens());
            chars.push(b - a);
        }
    }
    format!(
        "docs {}\tsegments {}\tmedian_segments_per_doc {}\tmedian_segment_chars {}",
        docs.len(),
        chars.len(),
        median(per_doc),
        median(chars)
    )
}

fn cmd_synth(n: usize, seed: u64, noise: f64, out: &Path) -> Result<()> {
    if n == 0 {
        return Err(Error::Usage("--n must be at least 1".into()));
    }
    let mut docs = synth_generate(n, seed, &SynthConfig::default())?;
    if noise > 0.0 {
        let cfg = NoiseConfig::uniform(noise, seed);
        docs = docs.iter().map(|d| inject_ocr_noise(d, &cfg)).collect::<Result<_>>()?;
    }
    write_corpus(&docs, out)?;
    println!("{}", corpus_stats(&docs));
    Ok(())
}

fn parse_ratios(s: &str) -> Result<(f64, f64, f64)> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Usage(format!("--ratios {s:?}: {e}")))?;
    match parts[..] {
        [a, b, c] => Ok((a, b, c)),
        _ => Err(Error::Usage(format!("--ratios needs three values, got {s:?}"))),
    }
}

fn cmd_split(corpus: &Path, ratios: &str, seed: u64, out_dir: &Path) -> Result<()> {
    let docs = parse_corpus(corpus)?;
    let split = split_corpus(&docs, parse_ratios(ratios)?, seed)?;
    fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    for (name, part) in [("train", &split.train), ("dev", &split.dev), ("test", &split.test)] {
        write_corpus(part, out_dir.join(format!("{name}.jsonl")))?;
        println!("{name}\t{}", part.len());
    }
    Ok(())
}

fn log_tsv(log: &[EpochRecord]) -> String {
    let mut s = String::from("epoch\ttrain_loss\tdev_pk\timproved\n");
    for r in log {
        let pk = r.dev_pk.map_or("nan".to_string(), |v| format!("{v:.6}"));
        let _ = writeln!(s, "{}\t{:.6}\t{}\t{}", r.epoch, r.train_loss, pk, r.improved);
    }
    s
}

fn require_labels(docs: &[Document], path: &Path) -> Result<()> {
    match docs.iter().find(|d| d.labels().is_none()) {
        Some(d) => Err(Error::Data(format!("{}: document {:?} has no labels", path.display(), d.doc_id))),
        None => Ok(()),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    corpus: &Path,
    dev: &Path,
    checkpoint: &Path,
    log: Option<&Path>,
    combined_epochs: Option<usize>,
    model: &ModelFlags,
    inputs: &EmbeddingFlags,
    threads: usize,
) -> Result<()> {
    let mut config = model.resolve()?;
    let loaded = load_inputs(inputs, &mut config)?;
    let train_docs = parse_corpus(corpus)?;
    let dev_docs = parse_corpus(dev)?;
    require_labels(&train_docs, corpus)?;
    require_labels(&dev_docs, dev)?;
    let protocol = match combined_epochs {
        Some(epochs) => Protocol::Combined { epochs },
        None => Protocol::DevEarlyStop,
    };
    let options = TrainOptions {
        protocol,
        threads,
        sidecar: loaded.sidecar,
    };
    info!("training on {} documents ({} dev), {threads} threads", train_docs.len(), dev_docs.len());
    let out = train(&train_docs, &dev_docs, &config, loaded.statics, &options)?;
    save_checkpoint(&out.tagger, checkpoint)?;
    let log_path = log.map_or_else(|| with_suffix(checkpoint, ".log.tsv"), Path::to_path_buf);
    write_file(&log_path, &log_tsv(&out.log))?;
    println!("epochs {}\tbest_epoch {}", out.log.len(), out.best_epoch);
    Ok(())
}

fn cmd_predict(corpus: &Path, checkpoint: &Path, sidecar: Option<&Path>, out: &Path, threads: usize) -> Result<()> {
    let mut tagger = load_checkpoint(checkpoint)?;
    if let Some(p) = sidecar {
        tagger.set_sidecar(Some(load_sidecar(p)?));
    }
    let mut docs = parse_corpus(corpus)?;
    let preds = predict_corpus(&tagger, &docs, threads)?;
    for (d, p) in docs.iter_mut().zip(preds) {
        d.set_labels(Some(p))?;
    }
    write_corpus(&docs, out)?;
    println!("{}", corpus_stats(&docs));
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_evaluate(
    corpus: &Path,
    checkpoint: Option<&Path>,
    predictions: Option<&Path>,
    scheme: Option<&str>,
    sidecar: Option<&Path>,
    report: &Path,
    threads: usize,
) -> Result<()> {
    let gold = parse_corpus(corpus)?;
    if gold.is_empty() {
        return Err(Error::Usage(format!("{}: evaluation set is empty", corpus.display())));
    }
    let flag_scheme = scheme.map(str::parse::<TagScheme>).transpose()?;
    let (preds, scheme) = match (checkpoint, predictions) {
        (Some(ck), _) => {
            let mut tagger = load_checkpoint(ck)?;
            let own = tagger.config().scheme;
            if flag_scheme.is_some_and(|s| s != own) {
                return Err(Error::Usage(format!(
                    "--scheme {} does not match the checkpoint's {} tagset",
                    flag_scheme.unwrap().name(),
                    own.name()
                )));
            }
            if let Some(p) = sidecar {
                tagger.set_sidecar(Some(load_sidecar(p)?));
            }
            (predict_corpus(&tagger, &gold, threads)?, own)
        }
        (None, Some(path)) => {
            let docs = parse_corpus(path)?;
            let preds = match_predictions(&gold, &docs, path)?;
            let scheme = flag_scheme.unwrap_or_else(|| infer_scheme(&preds));
            (preds, scheme)
        }
        (None, None) => return Err(Error::Usage("pass --checkpoint or --predictions".into())),
    };
    let mut out = evaluate_corpus(&gold, &preds, scheme)?;
    out.metadata.insert("corpus".into(), corpus.display().to_string());
    let tsv = out.to_tsv();
    write_file(&with_suffix(report, ".tsv"), &tsv)?;
    write_file(&with_suffix(report, ".json"), &out.to_json())?;
    print!("{tsv}");
    Ok(())
}

fn infer_scheme(preds: &[Vec<Tag>]) -> TagScheme {
    if preds.iter().flatten().any(|t| *t == Tag::Outside) {
        TagScheme::Bio
    } else {
        TagScheme::Bi
    }
}

fn match_predictions(gold: &[Document], predicted: &[Document], path: &Path) -> Result<Vec<Vec<Tag>>> {
    if gold.len() != predicted.len() {
        return Err(Error::Usage(format!(
            "{}: {} documents, gold corpus has {}",
            path.display(),
            predicted.len(),
            gold.len()
        )));
    }
    gold.iter()
        .zip(predicted)
        .map(|(g, p)| {
            if g.doc_id != p.doc_id {
                return Err(Error::Usage(format!(
                    "{}: document {:?} where gold has {:?}",
                    path.display(),
                    p.doc_id,
                    g.doc_id
                )));
            }
            p.labels()
                .map(<[Tag]>::to_vec)
                .ok_or_else(|| Error::Data(format!("{}: document {:?} has no labels", path.display(), p.doc_id)))
        })
        .collect()
}

fn run_file_name(r: &RunResult) -> String {
    let cell: String = r
        .cell
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    format!("{cell}.seed{}.json", r.seed)
}

#[allow(clippy::too_many_arguments)]
fn cmd_ablate(
    data: (&Path, &Path, &Path),
    grid: &str,
    schemes: &str,
    seeds: u64,
    protocol: Protocol,
    compare: &[String],
    report: &Path,
    model: &ModelFlags,
    inputs: &EmbeddingFlags,
    threads: usize,
) -> Result<()> {
    if seeds == 0 {
        return Err(Error::Usage("--seeds must be at least 1".into()));
    }
    let mut base = model.resolve()?;
    let loaded = load_inputs(inputs, &mut base)?;
    let features: Vec<&str> = grid.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
    let schemes = schemes
        .split(',')
        .map(|s| s.trim().parse::<TagScheme>())
        .collect::<Result<Vec<_>>>()?;
    let cells = AblationPlan::grid(&features, &schemes)?;
    let comparisons = compare
        .iter()
        .map(|c| match c.split_once(':') {
            Some((a, b)) if [a, b].iter().all(|n| cells.iter().any(|x| x.name == *n)) => {
                Ok((a.to_string(), b.to_string()))
            }
            _ => Err(Error::Usage(format!("--compare {c:?} must name two grid cells as a:b"))),
        })
        .collect::<Result<Vec<_>>>()?;
    let (train_p, dev_p, test_p) = data;
    let (train_docs, dev_docs, test_docs) = (parse_corpus(train_p)?, parse_corpus(dev_p)?, parse_corpus(test_p)?);
    for (docs, p) in [(&train_docs, train_p), (&dev_docs, dev_p), (&test_docs, test_p)] {
        require_labels(docs, p)?;
    }
    let plan = AblationPlan {
        seeds: (0..seeds).map(|i| base.seed + i).collect(),
        base,
        cells,
        protocol,
        comparisons,
        threads,
    };
    let runs_dir = with_suffix(report, ".runs");
    fs::create_dir_all(&runs_dir).map_err(|source| Error::Io {
        path: runs_dir.clone(),
        source,
    })?;
    let mut write_err = None;
    let out = run_ablation(
        &plan,
        &train_docs,
        &dev_docs,
        &test_docs,
        loaded.statics,
        loaded.sidecar,
        |r| {
            match &r.error {
                Some(e) => eprintln!("run {} seed {} failed: {e}", r.cell, r.seed),
                None => eprintln!("run {} seed {}: pk {:.4} f1 {:.4}", r.cell, r.seed, r.pk, r.f1),
            }
            let json = serde_json::to_string_pretty(r).expect("run serializes");
            if let Err(e) = write_file(&runs_dir.join(run_file_name(r)), &json) {
                write_err.get_or_insert(e);
            }
        },
    )?;
    if let Some(e) = write_err {
        return Err(e);
    }
    let tsv = out.to_tsv();
    write_file(&with_suffix(report, ".tsv"), &tsv)?;
    write_file(&with_suffix(report, ".json"), &out.to_json())?;
    print!("{tsv}");
    Ok(())
}

fn cmd_selfcheck(inject_fault: bool) -> Result<bool> {
    let report = run_selfcheck(SelfCheckOptions { inject_fault });
    for c in &report.checks {
        println!(
            "{}\t{}\t{:.2}s\t{}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.seconds,
            c.detail
        );
    }
    Ok(report.passed())
}

fn run(cli: Cli) -> Result<ExitCode> {
    let threads = thread_count(cli.threads);
    match cli.command {
        Command::Synth { n, seed, noise, out } => cmd_synth(n, seed, noise, &out)?,
        Command::Split {
            corpus,
            ratios,
            seed,
            out_dir,
        } => cmd_split(&corpus, &ratios, seed, &out_dir)?,
        Command::Train {
            corpus,
            dev,
            checkpoint,
            log,
            combined_epochs,
            model,
            inputs,
        } => cmd_train(&corpus, &dev, &checkpoint, log.as_deref(), combined_epochs, &model, &inputs, threads)?,
        Command::Predict {
            corpus,
            checkpoint,
            contextual_sidecar,
            out,
        } => cmd_predict(&corpus, &checkpoint, contextual_sidecar.as_deref(), &out, threads)?,
        Command::Evaluate {
            corpus,
            checkpoint,
            predictions,
            scheme,
            contextual_sidecar,
            report,
        } => cmd_evaluate(
            &corpus,
            checkpoint.as_deref(),
            predictions.as_deref(),
            scheme.as_deref(),
            contextual_sidecar.as_deref(),
            &report,
            threads,
        )?,
        Command::Ablate {
            corpus,
            dev,
            test,
            grid,
            schemes,
            seeds,
            protocol,
            combined_epochs,
            compare,
            report,
            model,
            inputs,
        } => {
            let protocol = match protocol {
                ProtocolArg::Dev => Protocol::DevEarlyStop,
                ProtocolArg::Combined => Protocol::Combined {
                    epochs: combined_epochs,
                },
            };
            cmd_ablate(
                (&corpus, &dev, &test),
                &grid,
                &schemes,
                seeds,
                protocol,
                &compare,
                &report,
                &model,
                &inputs,
                threads,
            )?
        }
        Command::Selfcheck { inject_fault } => {
            if !cmd_selfcheck(inject_fault)? {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("messyseg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
