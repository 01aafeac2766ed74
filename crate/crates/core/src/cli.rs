//! Command-line front end. [`run`] parses arguments, executes one
//! subcommand and returns the process exit status.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::conllu::{read_conllu, validate, write_conllu, Edu};
use crate::error::Error;
use crate::eval::{gold_heads, length_error_analysis, length_table_csv, run_cv, uas_counts, ModelSpec};
use crate::graph::Decoder;
use crate::model::{Architecture, Hyper, Model, TrainOptions};
use crate::preprocess::{convert, read_jsonl, RemovableChars};
use crate::synth::synthetic_corpus;
use crate::treebank::HeadVector;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_TRAINING: i32 = 3;

#[derive(Parser, Debug)]
#[command(name = "edudep", version, about = "Dependency parsing for elementary discourse units")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Cleanse JSON-lines EDUs and write CoNLL-U.
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Comma-separated code points or ranges, e.g. U+0000-U+001F,U+FEFF.
        #[arg(long)]
        remove_chars: Option<String>,
    },
    /// Check format and tree constraints of every EDU.
    Validate {
        #[arg(long)]
        input: PathBuf,
        /// Require exactly one ROOT dependent per EDU.
        #[arg(long)]
        strict: bool,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Train a parser and write a checkpoint.
    Train {
        #[arg(long)]
        input: PathBuf,
        /// Held-out EDUs for early stopping.
        #[arg(long)]
        dev: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Predict heads with a trained checkpoint.
    Parse {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, value_parser = parse_decoder_choice)]
        decoder: Option<DecoderChoice>,
    },
    /// Unlabeled attachment score of predictions against gold heads.
    Eval {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// K-fold cross-validation.
    Cv {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        json: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Mean error rate per EDU length and a fitted line.
    AnalyzeLength {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Generate a synthetic annotated corpus.
    Synth {
        #[arg(long, default_value_t = 100)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        min_len: usize,
        #[arg(long, default_value_t = 24)]
        max_len: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug, Default)]
struct ModelArgs {
    #[arg(long, value_parser = parse_arch)]
    arch: Option<Architecture>,
    #[arg(long, value_parser = parse_decoder_choice)]
    decoder: Option<DecoderChoice>,
    #[arg(long)]
    seed: Option<u64>,
    /// Flat key=value file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    word_dim: Option<usize>,
    #[arg(long)]
    pos_dim: Option<usize>,
    #[arg(long)]
    hidden_dim: Option<usize>,
    #[arg(long)]
    arc_dim: Option<usize>,
    #[arg(long)]
    mlp_hidden: Option<usize>,
    #[arg(long)]
    min_word_count: Option<usize>,
    #[arg(long)]
    init_scale: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum DecoderChoice {
    Transition,
    Graph(Decoder),
}

fn parse_arch(s: &str) -> Result<Architecture, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_decoder_choice(s: &str) -> Result<DecoderChoice, String> {
    match s {
        "transition" => Ok(DecoderChoice::Transition),
        other => other.parse().map(DecoderChoice::Graph).map_err(|e: Error| e.to_string()),
    }
}

/// A failure with its exit status.
#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    fn data(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => EXIT_USAGE,
            Error::Training(_) => EXIT_TRAINING,
            _ => EXIT_DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }

    fn training(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_TRAINING,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }

    fn file(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure {
            code: EXIT_DATA,
            message: format!("{}: {}", path.display(), e),
        }
    }
}

type CliResult<T> = std::result::Result<T, Failure>;

/// Runs the command line `args` (program name first). Regular output goes
/// to `out`, diagnostics and log lines to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = out.write_all(rendered.as_bytes());
                    EXIT_OK
                }
                _ => {
                    let _ = err.write_all(rendered.as_bytes());
                    EXIT_USAGE
                }
            };
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Failure::file(path, e))
}

fn read_edus(path: &Path) -> CliResult<Vec<Edu>> {
    read_conllu(open(path)?).map_err(|e| Failure::file(path, e))
}

/// Writes the whole payload to a sibling file and renames it into place,
/// so a failed run never leaves a truncated output behind.
fn emit(path: Option<&Path>, payload: &[u8], out: &mut dyn Write) -> CliResult<()> {
    match path {
        None => out.write_all(payload).map_err(|e| Failure::data(e.into())),
        Some(p) => {
            let mut tmp = p.as_os_str().to_owned();
            tmp.push(".partial");
            let tmp = PathBuf::from(tmp);
            fs::write(&tmp, payload)
                .and_then(|_| fs::rename(&tmp, p))
                .map_err(|e| {
                    let _ = fs::remove_file(&tmp);
                    Failure::file(p, e)
                })
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(value).expect("reports serialize");
    s.push(b'\n');
    s
}

/// Settings read from a `key=value` file.
#[derive(Debug, Default)]
struct Config(BTreeMap<String, String>);

const CONFIG_KEYS: &[&str] = &[
    "arch",
    "decoder",
    "seed",
    "k",
    "workers",
    "epochs",
    "patience",
    "lr",
    "beta1",
    "beta2",
    "epsilon",
    "word_dim",
    "pos_dim",
    "hidden_dim",
    "arc_dim",
    "mlp_hidden",
    "min_word_count",
    "init_scale",
];

impl Config {
    fn parse(text: &str) -> CliResult<Config> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Failure::usage(format!("config line {}: expected key=value", i + 1)))?;
            let key = key.trim().replace('-', "_");
            if !CONFIG_KEYS.contains(&key.as_str()) {
                return Err(Failure::usage(format!("config line {}: unknown key {:?}", i + 1, key)));
            }
            map.insert(key, value.trim().to_string());
        }
        Ok(Config(map))
    }

    fn load(path: Option<&Path>) -> CliResult<Config> {
        match path {
            None => Ok(Config::default()),
            Some(p) => Config::parse(&fs::read_to_string(p).map_err(|e| Failure::file(p, e))?),
        }
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> CliResult<Option<T>> {
        self.0
            .get(key)
            .map(|v| v.parse().map_err(|_| Failure::usage(format!("config key {}: invalid value {:?}", key, v))))
            .transpose()
    }
}

struct Resolved {
    arch: Architecture,
    decoder: Option<Decoder>,
    hyper: Hyper,
}

fn resolve(args: &ModelArgs, config: &Config, need_seed: bool) -> CliResult<Resolved> {
    let arch = match args.arch {
        Some(a) => a,
        None => match config.0.get("arch") {
            Some(s) => parse_arch(s).map_err(Failure::usage)?,
            None => return Err(Failure::usage("missing --arch")),
        },
    };
    let choice = match args.decoder {
        Some(d) => Some(d),
        None => config
            .0
            .get("decoder")
            .map(|s| parse_decoder_choice(s).map_err(Failure::usage))
            .transpose()?,
    };
    let decoder = check_decoder(arch, choice)?;

    let mut hyper = Hyper::default();
    macro_rules! setting {
        ($field:expr, $flag:expr, $key:literal) => {
            if let Some(v) = $flag.or(config.get($key)?) {
                $field = v;
            }
        };
    }
    setting!(hyper.seed, args.seed, "seed");
    setting!(hyper.epochs, args.epochs, "epochs");
    setting!(hyper.patience, args.patience, "patience");
    setting!(hyper.adam.learning_rate, args.lr, "lr");
    setting!(hyper.adam.beta1, None, "beta1");
    setting!(hyper.adam.beta2, None, "beta2");
    setting!(hyper.adam.epsilon, None, "epsilon");
    setting!(hyper.word_dim, args.word_dim, "word_dim");
    setting!(hyper.pos_dim, args.pos_dim, "pos_dim");
    setting!(hyper.hidden_dim, args.hidden_dim, "hidden_dim");
    setting!(hyper.arc_dim, args.arc_dim, "arc_dim");
    setting!(hyper.mlp_hidden, args.mlp_hidden, "mlp_hidden");
    setting!(hyper.min_word_count, args.min_word_count, "min_word_count");
    setting!(hyper.init_scale, args.init_scale, "init_scale");
    if need_seed && args.seed.is_none() && config.get::<u64>("seed")?.is_none() {
        return Err(Failure::usage("--seed is required (on the command line or in the config)"));
    }
    hyper.validate().map_err(|e| Failure::usage(e.to_string()))?;
    Ok(Resolved { arch, decoder, hyper })
}

fn check_decoder(arch: Architecture, choice: Option<DecoderChoice>) -> CliResult<Option<Decoder>> {
    match (arch.is_transition(), choice) {
        (true, None | Some(DecoderChoice::Transition)) => Ok(None),
        (false, None) => Ok(Some(Decoder::Mst)),
        (false, Some(DecoderChoice::Graph(d))) => Ok(Some(d)),
        (true, Some(DecoderChoice::Graph(_))) => {
            Err(Failure::usage(format!("architecture {} only supports --decoder transition", arch)))
        }
        (false, Some(DecoderChoice::Transition)) => {
            Err(Failure::usage("the biaffine architecture needs --decoder eisner, greedy or mst"))
        }
    }
}

/// Gold and predicted heads after checking the files line up.
fn paired_heads(gold: &Path, pred: &Path) -> CliResult<(Vec<HeadVector>, Vec<HeadVector>)> {
    let g = gold_heads(&read_edus(gold)?).map_err(|e| Failure::file(gold, e))?;
    let p = gold_heads(&read_edus(pred)?).map_err(|e| Failure::file(pred, e))?;
    uas_counts(&g, &p).map_err(Failure::data)?;
    Ok((g, p))
}

#[derive(Serialize)]
struct EvalSummary {
    uas: f64,
    correct_heads: usize,
    total_heads: usize,
    edus: usize,
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> CliResult<i32> {
    match command {
        Command::Convert {
            input,
            output,
            remove_chars,
        } => {
            let removable = match remove_chars {
                Some(spec) => RemovableChars::parse(&spec).map_err(|e| Failure::usage(e.to_string()))?,
                None => RemovableChars::default(),
            };
            let raws = read_jsonl(open(&input)?).map_err(|e| Failure::file(&input, e))?;
            let edus = convert(&raws, &removable).map_err(Failure::data)?;
            let text = write_conllu(&edus).map_err(Failure::data)?;
            emit(output.as_deref(), text.as_bytes(), out)?;
            let _ = writeln!(err, "converted {} EDUs", edus.len());
            Ok(EXIT_OK)
        }
        Command::Validate { input, strict, json } => {
            let edus = read_edus(&input)?;
            let mut text = String::new();
            let mut reports = Vec::with_capacity(edus.len());
            let mut failures = 0;
            for (i, edu) in edus.iter().enumerate() {
                let r = validate(edu, strict);
                let ok = r.format_ok && r.is_tree;
                failures += usize::from(!ok);
                text.push_str(&format!(
                    "EDU {}\t{}\tformat_ok={}\tis_tree={}\troot_count={}\tprojective={}\n",
                    i + 1,
                    if ok { "OK" } else { "FAIL" },
                    r.format_ok,
                    r.is_tree,
                    r.root_count,
                    r.is_projective
                ));
                for m in &r.messages {
                    text.push_str(&format!("  {}\n", m));
                }
                reports.push(r);
            }
            text.push_str(&format!("{} EDUs, {} failed\n", edus.len(), failures));
            if let Some(path) = json {
                emit(Some(&path), &to_json(&reports), out)?;
            }
            out.write_all(text.as_bytes()).map_err(|e| Failure::data(e.into()))?;
            Ok(if failures == 0 { EXIT_OK } else { EXIT_DATA })
        }
        Command::Train {
            input,
            dev,
            output,
            model,
        } => {
            let config = Config::load(model.config.as_deref())?;
            let r = resolve(&model, &config, true)?;
            let corpus = read_edus(&input)?;
            let dev = dev.map(|p| read_edus(&p)).transpose()?;
            let options = TrainOptions {
                dev: dev.as_deref(),
                target_dev_uas: None,
            };
            let _ = writeln!(err, "training {} on {} EDUs", r.arch, corpus.len());
            let (trained, report) = Model::train(r.arch, &corpus, &r.hyper, &options).map_err(Failure::training)?;
            let _ = writeln!(
                err,
                "{} epochs, {} EDUs used, {} skipped, final epoch loss {:.4}",
                report.epochs_run,
                report.used,
                report.skipped,
                report.epoch_losses.last().copied().unwrap_or(f64::NAN)
            );
            if let Some(u) = report.best_dev_uas {
                let _ = writeln!(err, "best dev UAS {:.4} at epoch {}", u, report.best_epoch.unwrap_or(0));
            }
            emit(Some(&output), &trained.to_bytes().map_err(Failure::data)?, out)?;
            Ok(EXIT_OK)
        }
        Command::Parse {
            model,
            input,
            output,
            decoder,
        } => {
            let m = Model::load(open(&model)?).map_err(|e| Failure::file(&model, e))?;
            let decoder = check_decoder(m.architecture(), decoder)?;
            let edus = read_edus(&input)?;
            let parsed = edus
                .iter()
                .map(|e| m.parse(e, decoder).and_then(|h| e.with_heads(&h)))
                .collect::<crate::Result<Vec<_>>>()
                .map_err(Failure::data)?;
            let text = write_conllu(&parsed).map_err(Failure::data)?;
            emit(output.as_deref(), text.as_bytes(), out)?;
            Ok(EXIT_OK)
        }
        Command::Eval { gold, pred, json } => {
            let (g, p) = paired_heads(&gold, &pred)?;
            let (correct, total) = uas_counts(&g, &p).map_err(Failure::data)?;
            if total == 0 {
                return Err(Failure::data(Error::Eval("no heads to score".into())));
            }
            let summary = EvalSummary {
                uas: correct as f64 / total as f64,
                correct_heads: correct,
                total_heads: total,
                edus: g.len(),
            };
            if let Some(path) = json {
                emit(Some(&path), &to_json(&summary), out)?;
            }
            writeln!(out, "UAS {:.4}", summary.uas).map_err(|e| Failure::data(e.into()))?;
            Ok(EXIT_OK)
        }
        Command::Cv {
            input,
            k,
            workers,
            json,
            csv,
            model,
        } => {
            let config = Config::load(model.config.as_deref())?;
            let r = resolve(&model, &config, true)?;
            let k = match k {
                Some(k) => k,
                None => config.get("k")?.unwrap_or(10),
            };
            let workers = match workers {
                Some(w) => w,
                None => config.get("workers")?.unwrap_or(1),
            };
            if workers == 0 {
                return Err(Failure::usage("--workers must be positive"));
            }
            let corpus = read_edus(&input)?;
            let spec = ModelSpec {
                architecture: r.arch,
                decoder: r.decoder,
                hyper: r.hyper,
            };
            let seed = spec.hyper.seed;
            let report = run_cv(&corpus, &spec, k, seed, workers).map_err(Failure::data)?;
            if report.mean_uas.is_none() {
                let _ = err.write_all(report.to_text().as_bytes());
                return Err(Failure {
                    code: EXIT_TRAINING,
                    message: "every fold failed to train".into(),
                });
            }
            if let Some(path) = json {
                emit(Some(&path), &to_json(&report), out)?;
            }
            if let Some(path) = csv {
                emit(Some(&path), length_table_csv(&report.per_length).as_bytes(), out)?;
            }
            out.write_all(report.to_text().as_bytes()).map_err(|e| Failure::data(e.into()))?;
            Ok(EXIT_OK)
        }
        Command::AnalyzeLength { gold, pred, output } => {
            let (g, p) = paired_heads(&gold, &pred)?;
            let analysis = length_error_analysis(&g, &p).map_err(Failure::data)?;
            emit(output.as_deref(), length_table_csv(&analysis.per_length).as_bytes(), out)?;
            match analysis.regression {
                Some(r) => {
                    let _ = writeln!(err, "error_rate = {} * length + {}", r.slope, r.intercept);
                }
                None => {
                    let _ = writeln!(err, "fewer than two distinct lengths; no regression line");
                }
            }
            Ok(EXIT_OK)
        }
        Command::Synth {
            n,
            min_len,
            max_len,
            seed,
            output,
        } => {
            let corpus = synthetic_corpus(n, min_len, max_len, seed).map_err(Failure::data)?;
            let text = write_conllu(&corpus).map_err(Failure::data)?;
            emit(output.as_deref(), text.as_bytes(), out)?;
            Ok(EXIT_OK)
        }
    }
}
