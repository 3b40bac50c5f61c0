//! Stanza segmentation, rhyme/tone violation counting and the template score.
//!
//! For a stanza of `n` six-eight pairs with `R` wrong-rhyme words and `T`
//! wrong-tone words the score is
//!
//! ```text
//! 100 * (1 - w_r * R / (3n - 1) - w_t * T / (7n))
//! ```
//!
//! with both weights 1.0 by default. Only non-anchor chain members can be
//! wrong-rhyme words, each compared with the anchor of its chain. Scores are
//! not clamped.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rules::{build_rhyme_chains, tone_template, LineKind, Position, RuleTable};
use crate::syllable::{parse_syllable, Syllable, ToneClass};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("line {line}: expected {expected} syllables, got {got}")]
    WrongSyllableCount {
        line: usize,
        expected: usize,
        got: usize,
    },
    #[error("{lines} lines cannot be split into six-eight pairs")]
    OddLineCount { lines: usize },
    #[error("line {line}: cannot parse {token:?}")]
    UnparseableToken { line: usize, token: String },
    #[error("empty poem")]
    Empty,
    #[error("stanza {stanza}: {source}")]
    InStanza {
        stanza: usize,
        #[source]
        source: Box<ScoreError>,
    },
    #[error("histogram needs at least one score")]
    EmptyInput,
    #[error("invalid histogram range or bin width")]
    InvalidBins,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stanza {
    lines: Vec<Vec<Syllable>>,
}

impl Stanza {
    /// Validates alternating 6/8 line lengths.
    pub fn new(lines: Vec<Vec<Syllable>>) -> Result<Self, ScoreError> {
        if lines.is_empty() {
            return Err(ScoreError::Empty);
        }
        if lines.len() % 2 != 0 {
            return Err(ScoreError::OddLineCount { lines: lines.len() });
        }
        for (i, line) in lines.iter().enumerate() {
            let expected = LineKind::of_line(i + 1).len();
            if line.len() != expected {
                return Err(ScoreError::WrongSyllableCount {
                    line: i + 1,
                    expected,
                    got: line.len(),
                });
            }
        }
        Ok(Stanza { lines })
    }

    pub fn lines(&self) -> &[Vec<Syllable>] {
        &self.lines
    }

    pub fn n_pairs(&self) -> usize {
        self.lines.len() / 2
    }

    pub fn at(&self, pos: Position) -> &Syllable {
        &self.lines[pos.line - 1][pos.word - 1]
    }

    /// Lines rebuilt from normalized syllables.
    pub fn to_text(&self) -> String {
        self.lines
            .iter()
            .map(|l| l.iter().map(|s| s.normalized.as_str()).collect::<Vec<_>>().join(" "))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

fn non_blank_lines(raw: &str) -> Vec<&str> {
    raw.lines().map(str::trim).filter(|l| !l.is_empty()).collect()
}

fn tokens(line: &str) -> impl Iterator<Item = &str> {
    line.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_alphanumeric()))
        .filter(|t| !t.is_empty())
}

/// Parses raw text (one verse per line, blank lines ignored) into a stanza of
/// any number of six-eight pairs.
pub fn segment_stanza(raw_poem: &str) -> Result<Stanza, ScoreError> {
    let lines = non_blank_lines(raw_poem);
    if lines.is_empty() {
        return Err(ScoreError::Empty);
    }
    if lines.len() % 2 != 0 {
        return Err(ScoreError::OddLineCount { lines: lines.len() });
    }
    let mut parsed = Vec::with_capacity(lines.len());
    for (i, line) in lines.iter().enumerate() {
        let toks: Vec<&str> = tokens(line).collect();
        let expected = LineKind::of_line(i + 1).len();
        if toks.len() != expected {
            return Err(ScoreError::WrongSyllableCount {
                line: i + 1,
                expected,
                got: toks.len(),
            });
        }
        let syls = toks
            .iter()
            .map(|t| {
                parse_syllable(t).map_err(|_| ScoreError::UnparseableToken {
                    line: i + 1,
                    token: t.to_string(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        parsed.push(syls);
    }
    Stanza::new(parsed)
}

/// Relative weights of the rhyme and tone penalties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub rhyme: f64,
    pub tone: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            rhyme: 1.0,
            tone: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhymeCheck {
    pub position: Position,
    pub anchor: Position,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToneCheck {
    pub position: Position,
    pub expected: ToneClass,
    pub actual: ToneClass,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub n_pairs: usize,
    pub wrong_rhyme: usize,
    pub wrong_tone: usize,
    pub score: f64,
    pub rhyme_diagnostics: Vec<RhymeCheck>,
    pub tone_diagnostics: Vec<ToneCheck>,
}

/// The closed-form score for given counts.
pub fn template_score(n_pairs: usize, wrong_rhyme: usize, wrong_tone: usize, w: Weights) -> f64 {
    let n = n_pairs as f64;
    100.0 * (1.0 - w.rhyme * wrong_rhyme as f64 / (3.0 * n - 1.0) - w.tone * wrong_tone as f64 / (7.0 * n))
}

pub fn score_stanza(stanza: &Stanza, table: &RuleTable) -> ScoreReport {
    score_stanza_weighted(stanza, table, Weights::default())
}

pub fn score_stanza_weighted(stanza: &Stanza, table: &RuleTable, weights: Weights) -> ScoreReport {
    let n = stanza.n_pairs();
    let chains = build_rhyme_chains(n).expect("stanza has at least one pair");

    let mut rhyme_diagnostics = Vec::with_capacity(2 * n);
    for chain in &chains {
        let anchor = stanza.at(chain.anchor());
        for &pos in chain.members() {
            rhyme_diagnostics.push(RhymeCheck {
                position: pos,
                anchor: chain.anchor(),
                ok: table.rhymes_with(anchor, stanza.at(pos)),
            });
        }
    }

    let mut tone_diagnostics = Vec::with_capacity(7 * n);
    for line in 1..=stanza.lines.len() {
        for (word, expected) in tone_template(LineKind::of_line(line)) {
            let position = Position::new(line, word);
            let actual = stanza.at(position).tone_class;
            tone_diagnostics.push(ToneCheck {
                position,
                expected,
                actual,
                ok: actual == expected,
            });
        }
    }

    let wrong_rhyme = rhyme_diagnostics.iter().filter(|d| !d.ok).count();
    let wrong_tone = tone_diagnostics.iter().filter(|d| !d.ok).count();
    ScoreReport {
        n_pairs: n,
        wrong_rhyme,
        wrong_tone,
        score: template_score(n, wrong_rhyme, wrong_tone, weights),
        rhyme_diagnostics,
        tone_diagnostics,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoemScore {
    pub stanzas: Vec<ScoreReport>,
    pub mean_score: f64,
}

/// Splits a poem into consecutive quatrains and scores each.
pub fn score_poem(raw_poem: &str, table: &RuleTable) -> Result<PoemScore, ScoreError> {
    score_poem_weighted(raw_poem, table, Weights::default())
}

pub fn score_poem_weighted(
    raw_poem: &str,
    table: &RuleTable,
    weights: Weights,
) -> Result<PoemScore, ScoreError> {
    let quatrains = split_quatrains(raw_poem)?;
    let stanzas = quatrains
        .iter()
        .enumerate()
        .map(|(i, q)| {
            segment_stanza(q)
                .map(|s| score_stanza_weighted(&s, table, weights))
                .map_err(|e| ScoreError::InStanza {
                    stanza: i + 1,
                    source: Box::new(e),
                })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mean_score = stanzas.iter().map(|r| r.score).sum::<f64>() / stanzas.len() as f64;
    Ok(PoemScore {
        stanzas,
        mean_score,
    })
}

/// Groups the non-blank lines of a poem into four-line blocks.
pub fn split_quatrains(raw_poem: &str) -> Result<Vec<String>, ScoreError> {
    let lines = non_blank_lines(raw_poem);
    if lines.is_empty() {
        return Err(ScoreError::Empty);
    }
    if lines.len() % 4 != 0 {
        return Err(ScoreError::OddLineCount { lines: lines.len() });
    }
    Ok(lines.chunks(4).map(|c| c.join("\n")).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bins: Vec<Bin>,
    pub below: usize,
    pub above: usize,
}

/// Fixed-width histogram over `[min, max]`. Bins are right-exclusive except
/// the last, which also holds `max`.
pub fn histogram(scores: &[f64], bin_width: f64, min: f64, max: f64) -> Result<Histogram, ScoreError> {
    if scores.is_empty() {
        return Err(ScoreError::EmptyInput);
    }
    if !(bin_width > 0.0) || !(max > min) || !bin_width.is_finite() {
        return Err(ScoreError::InvalidBins);
    }
    let n_bins = ((max - min) / bin_width).ceil() as usize;
    let mut bins: Vec<Bin> = (0..n_bins)
        .map(|i| Bin {
            lo: min + i as f64 * bin_width,
            hi: (min + (i + 1) as f64 * bin_width).min(max),
            count: 0,
        })
        .collect();
    let (mut below, mut above) = (0, 0);
    for &s in scores {
        if s < min {
            below += 1;
        } else if s > max || s.is_nan() {
            above += 1;
        } else {
            let idx = (((s - min) / bin_width).floor() as usize).min(n_bins - 1);
            bins[idx].count += 1;
        }
    }
    Ok(Histogram { bins, below, above })
}
