//! Command-line front end.
//!
//! Exit status is 0 on success, 1 for bad input or failed checks, 2 for
//! internal errors. Output is written to the supplied writers so the whole
//! command surface can be driven from tests.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{build_verse_index, filter_by_score, ingest, split_quatrain_corpus, Corpus};
use crate::creativity::creativity_score;
use crate::rules::RuleTable;
use crate::scoring::{
    histogram, score_poem_weighted, RhymeCheck, ScoreReport, ToneCheck, Weights,
};
use crate::semloss::gradcheck::check_custom_loss;
use crate::semloss::{custom_loss, random_instance, InstanceDims, PairReduction};

pub const GRADCHECK_STEP: f64 = 1e-5;
pub const GRADCHECK_TOLERANCE: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Internal(_) => 2,
        }
    }
}

fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

fn io_err(e: std::io::Error) -> CliError {
    CliError::Internal(e.to_string())
}

#[derive(Debug, Parser)]
#[command(name = "lucbat", version, about = "Luc Bat template scoring and corpus tools")]
pub struct RunConfig {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum Format {
    #[default]
    Text,
    Jsonl,
}

#[derive(Debug, Args)]
pub struct RulesArg {
    /// Near-rhyme table (one group per line); defaults to the bundled table.
    #[arg(long = "rules", value_name = "PATH")]
    pub path: Option<PathBuf>,
}

impl RulesArg {
    fn load(&self) -> Result<RuleTable, CliError> {
        match &self.path {
            Some(p) => RuleTable::load(p).map_err(input_err),
            None => Ok(RuleTable::default_table()),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every quatrain of every poem in a file.
    Score {
        input: PathBuf,
        #[command(flatten)]
        rules: RulesArg,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
        /// Rhyme and tone penalty weights, e.g. `0.7,0.3`.
        #[arg(long, value_parser = parse_weights, default_value = "1,1")]
        weights: Weights,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Keep poems scoring at least the threshold.
    Filter {
        input: PathBuf,
        #[arg(long)]
        min_score: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        stats: Option<PathBuf>,
        #[command(flatten)]
        rules: RulesArg,
    },
    /// Creativity score of generated poems against a training corpus.
    Creativity {
        #[arg(long)]
        generated: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Histogram of scores (JSONL score records or one number per line).
    Report {
        scores: PathBuf,
        #[arg(long, default_value_t = 10.0)]
        bins: f64,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
    /// Split poems into quatrains, optionally shuffled.
    Quatrains {
        input: PathBuf,
        #[arg(long, requires = "seed")]
        shuffle: bool,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Finite-difference check of the loss gradients on a random instance.
    Losscheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        dmodel: usize,
        #[arg(long, default_value_t = 3)]
        dhidden: usize,
        #[arg(long, default_value_t = 7)]
        vocab: usize,
        #[arg(long, default_value_t = 6)]
        len: usize,
        #[arg(long, default_value_t = 2)]
        stanzas: usize,
        /// Use the mean over components for the pair distance.
        #[arg(long)]
        mean: bool,
        #[arg(long, value_enum, default_value_t)]
        format: Format,
    },
}

fn parse_weights(s: &str) -> Result<Weights, String> {
    let (r, t) = s
        .split_once(',')
        .ok_or_else(|| format!("expected wR,wT, got {s:?}"))?;
    let parse = |v: &str| -> Result<f64, String> {
        let x: f64 = v.trim().parse().map_err(|_| format!("bad weight {v:?}"))?;
        if x > 0.0 && x.is_finite() {
            Ok(x)
        } else {
            Err(format!("weights must be positive, got {v:?}"))
        }
    };
    Ok(Weights {
        rhyme: parse(r)?,
        tone: parse(t)?,
    })
}

/// One scored stanza, as written by `score --format jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub poem_id: String,
    pub stanza_index: usize,
    #[serde(rename = "R")]
    pub wrong_rhyme: usize,
    #[serde(rename = "T")]
    pub wrong_tone: usize,
    pub n: usize,
    pub score: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub rhyme: Vec<RhymeCheck>,
    pub tone: Vec<ToneCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub poem_id: String,
    pub error: String,
}

impl ScoreRecord {
    fn new(poem_id: &str, stanza_index: usize, r: ScoreReport) -> Self {
        ScoreRecord {
            poem_id: poem_id.to_string(),
            stanza_index,
            wrong_rhyme: r.wrong_rhyme,
            wrong_tone: r.wrong_tone,
            n: r.n_pairs,
            score: r.score,
            diagnostics: Diagnostics {
                rhyme: r.rhyme_diagnostics,
                tone: r.tone_diagnostics,
            },
        }
    }
}

/// Parses argv (including the program name) and runs the command.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let config = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return 1;
            }
            let _ = write!(out, "{}", e.render());
            return 0;
        }
    };
    match execute(&config, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "lucbat: {e}");
            e.exit_code()
        }
    }
}

pub fn execute(config: &RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match &config.command {
        Command::Score {
            input,
            rules,
            format,
            weights,
            jobs,
        } => cmd_score(input, &rules.load()?, *format, *weights, *jobs, out, err),
        Command::Filter {
            input,
            min_score,
            out: out_path,
            stats,
            rules,
        } => cmd_filter(input, *min_score, out_path, stats.as_deref(), &rules.load()?, out),
        Command::Creativity {
            generated,
            corpus,
            format,
        } => cmd_creativity(generated, corpus, *format, out),
        Command::Report {
            scores,
            bins,
            format,
        } => cmd_report(scores, *bins, *format, out),
        Command::Quatrains {
            input,
            shuffle,
            seed,
            out: out_path,
        } => cmd_quatrains(input, if *shuffle { *seed } else { None }, out_path, err),
        Command::Losscheck {
            seed,
            dmodel,
            dhidden,
            vocab,
            len,
            stanzas,
            mean,
            format,
        } => {
            let dims = InstanceDims {
                d_model: *dmodel,
                d_hidden: *dhidden,
                vocab: *vocab,
                max_len: *len,
                stanzas: *stanzas,
            };
            let reduction = if *mean {
                PairReduction::Mean
            } else {
                PairReduction::Sum
            };
            cmd_losscheck(*seed, dims, reduction, *format, out)
        }
    }
}

fn load_corpus(path: &Path) -> Result<Corpus, CliError> {
    ingest(&[path]).map_err(input_err)
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))
}

fn annotate(poem_text: &str, stanza_index: usize, r: &ScoreRecord) -> String {
    let lines: Vec<&str> = poem_text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .skip((stanza_index - 1) * 4)
        .take(4)
        .collect();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{} stanza {}: score {:.3} (R={}, T={}, n={})",
        r.poem_id, r.stanza_index, r.score, r.wrong_rhyme, r.wrong_tone, r.n
    );
    let bad_tone: Vec<_> = r.diagnostics.tone.iter().filter(|d| !d.ok).collect();
    let bad_rhyme: Vec<_> = r.diagnostics.rhyme.iter().filter(|d| !d.ok).collect();
    for (li, line) in lines.iter().enumerate() {
        let words: Vec<String> = line
            .split_whitespace()
            .enumerate()
            .map(|(wi, w)| {
                let at = |line: usize, word: usize| line == li + 1 && word == wi + 1;
                let t = bad_tone.iter().any(|d| at(d.position.line, d.position.word));
                let rh = bad_rhyme.iter().any(|d| at(d.position.line, d.position.word));
                match (rh, t) {
                    (false, false) => w.to_string(),
                    (true, false) => format!("[{w}]^R"),
                    (false, true) => format!("[{w}]^T"),
                    (true, true) => format!("[{w}]^RT"),
                }
            })
            .collect();
        let _ = writeln!(s, "  {}", words.join(" "));
    }
    for d in bad_rhyme {
        let _ = writeln!(
            s,
            "  rhyme ({},{}) does not rhyme with anchor ({},{})",
            d.position.line, d.position.word, d.anchor.line, d.anchor.word
        );
    }
    for d in bad_tone {
        let _ = writeln!(
            s,
            "  tone ({},{}) expected {}, got {}",
            d.position.line, d.position.word, d.expected, d.actual
        );
    }
    s
}

fn cmd_score(
    input: &Path,
    table: &RuleTable,
    format: Format,
    weights: Weights,
    jobs: usize,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let corpus = load_corpus(input)?;
    let results: Vec<_> = pool(jobs)?.install(|| {
        corpus
            .poems
            .par_iter()
            .map(|p| score_poem_weighted(&p.text, table, weights))
            .collect()
    });
    let mut failed = 0;
    for (poem, result) in corpus.poems.iter().zip(results) {
        match result {
            Ok(scored) => {
                for (i, report) in scored.stanzas.into_iter().enumerate() {
                    let rec = ScoreRecord::new(&poem.id, i + 1, report);
                    match format {
                        Format::Jsonl => writeln!(out, "{}", json(&rec)?).map_err(io_err)?,
                        Format::Text => write!(out, "{}", annotate(&poem.text, i + 1, &rec)).map_err(io_err)?,
                    }
                }
            }
            Err(e) => {
                failed += 1;
                writeln!(err, "{}: {e}", poem.id).map_err(io_err)?;
                if format == Format::Jsonl {
                    let rec = ErrorRecord {
                        poem_id: poem.id.clone(),
                        error: e.to_string(),
                    };
                    writeln!(out, "{}", json(&rec)?).map_err(io_err)?;
                }
            }
        }
    }
    Ok(if failed > 0 { 1 } else { 0 })
}

fn json<T: Serialize>(v: &T) -> Result<String, CliError> {
    serde_json::to_string(v).map_err(|e| CliError::Internal(e.to_string()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn cmd_filter(
    input: &Path,
    min_score: f64,
    out_path: &Path,
    stats_path: Option<&Path>,
    table: &RuleTable,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    if !min_score.is_finite() {
        return Err(CliError::Input(format!("invalid --min-score {min_score}")));
    }
    let corpus = load_corpus(input)?;
    let (kept, stats) = filter_by_score(&corpus, table, min_score);
    write_file(out_path, &kept.to_text())?;
    let record = json(&stats)?;
    match stats_path {
        Some(p) => write_file(p, &format!("{record}\n"))?,
        None => writeln!(out, "{record}").map_err(io_err)?,
    }
    Ok(0)
}

fn cmd_creativity(generated: &Path, corpus: &Path, format: Format, out: &mut dyn Write) -> Result<i32, CliError> {
    let generated = load_corpus(generated)?;
    let index = build_verse_index(&load_corpus(corpus)?);
    let report = creativity_score(&generated, &index).map_err(input_err)?;
    match format {
        Format::Jsonl => {
            for p in &report.per_poem {
                writeln!(out, "{}", json(p)?).map_err(io_err)?;
            }
            writeln!(out, "{}", json(&serde_json::json!({ "C": report.creativity }))?).map_err(io_err)?;
        }
        Format::Text => {
            for p in &report.per_poem {
                writeln!(
                    out,
                    "{}: {}/{} verses copied (c = {:?})",
                    p.poem_id, p.copied_verses, p.total_verses, p.copied_ratio
                )
                .map_err(io_err)?;
            }
            writeln!(out, "C = {:?}", report.creativity).map_err(io_err)?;
        }
    }
    Ok(0)
}

/// Reads scores from JSONL score records or bare numbers, one per line.
pub fn read_scores(text: &str) -> Result<Vec<f64>, String> {
    let mut scores = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if line.starts_with('{') {
            let v: serde_json::Value =
                serde_json::from_str(line).map_err(|e| format!("line {}: {e}", i + 1))?;
            if v.get("error").is_some() {
                continue;
            }
            let s = v
                .get("score")
                .and_then(serde_json::Value::as_f64)
                .ok_or_else(|| format!("line {}: record has no numeric score", i + 1))?;
            scores.push(s);
        } else {
            scores.push(
                line.parse()
                    .map_err(|_| format!("line {}: not a number: {line:?}", i + 1))?,
            );
        }
    }
    Ok(scores)
}

fn cmd_report(path: &Path, bin_width: f64, format: Format, out: &mut dyn Write) -> Result<i32, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let scores = read_scores(&text).map_err(CliError::Input)?;
    let h = histogram(&scores, bin_width, 0.0, 100.0).map_err(input_err)?;
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    match format {
        Format::Jsonl => {
            for b in &h.bins {
                writeln!(out, "{}", json(b)?).map_err(io_err)?;
            }
            let summary = serde_json::json!({
                "count": scores.len(), "mean": mean, "below": h.below, "above": h.above
            });
            writeln!(out, "{}", json(&summary)?).map_err(io_err)?;
        }
        Format::Text => {
            let widest = h.bins.iter().map(|b| b.count).max().unwrap_or(0).max(1);
            let last = h.bins.len() - 1;
            for (i, b) in h.bins.iter().enumerate() {
                let close = if i == last { ']' } else { ')' };
                let bar = "#".repeat((b.count * 50).div_ceil(widest));
                writeln!(out, "[{:>5}, {:>5}{close} {:>6} {bar}", b.lo, b.hi, b.count).map_err(io_err)?;
            }
            writeln!(out, "count {}  mean {:.4}  below {}  above {}", scores.len(), mean, h.below, h.above)
                .map_err(io_err)?;
        }
    }
    Ok(0)
}

fn cmd_quatrains(input: &Path, seed: Option<u64>, out_path: &Path, err: &mut dyn Write) -> Result<i32, CliError> {
    let corpus = load_corpus(input)?;
    let (quatrains, excluded) = split_quatrain_corpus(&corpus, seed);
    for e in &excluded {
        writeln!(err, "excluded {}: {}", e.id, e.reason).map_err(io_err)?;
    }
    write_file(out_path, &quatrains.to_text())?;
    Ok(0)
}

#[derive(Debug, Serialize)]
struct LossCheckRecord {
    seed: u64,
    ce: f64,
    mse: f64,
    total: f64,
    checked: usize,
    max_relative_error: f64,
    max_absolute_error: f64,
    step: f64,
    tolerance: f64,
    passed: bool,
}

fn cmd_losscheck(
    seed: u64,
    dims: InstanceDims,
    reduction: PairReduction,
    format: Format,
    out: &mut dyn Write,
) -> Result<i32, CliError> {
    if dims.d_model == 0 || dims.d_hidden == 0 || dims.vocab == 0 || dims.max_len == 0 || dims.stanzas == 0 {
        return Err(CliError::Input("all dimensions must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (block, attn, lstm) = random_instance(dims, &mut rng);
    let loss = custom_loss(&block, &attn, &lstm, reduction).map_err(|e| CliError::Internal(e.to_string()))?;
    let report = check_custom_loss(&block, &attn, &lstm, reduction, GRADCHECK_STEP)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let passed = report.passed(GRADCHECK_TOLERANCE);
    let rec = LossCheckRecord {
        seed,
        ce: loss.ce,
        mse: loss.mse,
        total: loss.total,
        checked: report.checked,
        max_relative_error: report.max_relative_error,
        max_absolute_error: report.max_absolute_error,
        step: GRADCHECK_STEP,
        tolerance: GRADCHECK_TOLERANCE,
        passed,
    };
    match format {
        Format::Jsonl => writeln!(out, "{}", json(&rec)?).map_err(io_err)?,
        Format::Text => {
            writeln!(out, "seed {seed}: ce {:.6}  mse {:.6}  total {:.6}", rec.ce, rec.mse, rec.total)
                .map_err(io_err)?;
            writeln!(
                out,
                "checked {} gradient components, max relative error {:.3e} (abs {:.3e}), tolerance {:.0e}",
                rec.checked, rec.max_relative_error, rec.max_absolute_error, GRADCHECK_TOLERANCE
            )
            .map_err(io_err)?;
            writeln!(out, "{}", if passed { "PASS" } else { "FAIL" }).map_err(io_err)?;
        }
    }
    Ok(if passed { 0 } else { 1 })
}
