//! The Luc Bat template: tone positions, rhyme chains and the near-rhyme
//! registry.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::syllable::{is_valid_rime, Syllable, ToneClass};

const DEFAULT_TABLE: &str = include_str!("../data/near_rhymes.txt");

#[derive(Debug, Error)]
pub enum RulesError {
    #[error("pair count must be at least 1, got {0}")]
    InvalidPairCount(usize),
    #[error("word index {index} out of range for a {kind:?} line")]
    IndexOutOfRange { kind: LineKind, index: usize },
    #[error("line {line}: {rime:?} is not a toneless rime")]
    InvalidRime { line: usize, rime: String },
    #[error("line {line}: rime {rime:?} already belongs to the group on line {first_line}")]
    OverlappingGroups {
        line: usize,
        first_line: usize,
        rime: String,
    },
    #[error("reading rule table: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LineKind {
    Six,
    Eight,
}

impl LineKind {
    pub fn len(self) -> usize {
        match self {
            LineKind::Six => 6,
            LineKind::Eight => 8,
        }
    }

    /// Kind of the 1-based line `line` in an alternating six-eight poem.
    pub fn of_line(line: usize) -> LineKind {
        if line % 2 == 1 {
            LineKind::Six
        } else {
            LineKind::Eight
        }
    }
}

/// A 1-based (line, word) coordinate inside a stanza.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Position {
    pub line: usize,
    pub word: usize,
}

impl Position {
    pub const fn new(line: usize, word: usize) -> Self {
        Position { line, word }
    }
}

/// Word positions that must share a rhyme. The first position is the anchor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RhymeChain {
    pub positions: Vec<Position>,
}

impl RhymeChain {
    pub fn anchor(&self) -> Position {
        self.positions[0]
    }

    pub fn members(&self) -> &[Position] {
        &self.positions[1..]
    }
}

/// Rhyme chains for a poem of `n_pairs` six-eight pairs: the two sixth words
/// of the opening pair, then each eight-line's last word linked to the sixth
/// words of the next two lines.
pub fn build_rhyme_chains(n_pairs: usize) -> Result<Vec<RhymeChain>, RulesError> {
    if n_pairs < 1 {
        return Err(RulesError::InvalidPairCount(n_pairs));
    }
    let mut chains = vec![RhymeChain {
        positions: vec![Position::new(1, 6), Position::new(2, 6)],
    }];
    for k in 1..n_pairs {
        chains.push(RhymeChain {
            positions: vec![
                Position::new(2 * k, 8),
                Position::new(2 * k + 1, 6),
                Position::new(2 * k + 2, 6),
            ],
        });
    }
    Ok(chains)
}

/// Tone class required at `word_index` (1-based), or `None` where the
/// template leaves the word free.
pub fn expected_tone(kind: LineKind, word_index: usize) -> Result<Option<ToneClass>, RulesError> {
    if word_index == 0 || word_index > kind.len() {
        return Err(RulesError::IndexOutOfRange {
            kind,
            index: word_index,
        });
    }
    Ok(match word_index {
        4 => Some(ToneClass::Oblique),
        2 | 6 | 8 => Some(ToneClass::Level),
        _ => None,
    })
}

/// All templated positions of a line kind with their required class.
pub fn tone_template(kind: LineKind) -> Vec<(usize, ToneClass)> {
    (1..=kind.len())
        .filter_map(|i| expected_tone(kind, i).ok().flatten().map(|c| (i, c)))
        .collect()
}

/// Near-rhyme registry. Groups partition the rimes they mention, so
/// "rhymes with" is an equivalence relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleTable {
    groups: Vec<Vec<String>>,
    group_of: HashMap<String, usize>,
    version: String,
}

impl RuleTable {
    /// Builds a table from explicit groups. Rimes must be toneless; a rime
    /// may appear in at most one group.
    pub fn from_groups<I, G, S>(groups: I, version: impl Into<String>) -> Result<Self, RulesError>
    where
        I: IntoIterator<Item = G>,
        G: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut table = RuleTable {
            groups: Vec::new(),
            group_of: HashMap::new(),
            version: version.into(),
        };
        let mut first_line = Vec::new();
        for (i, group) in groups.into_iter().enumerate() {
            let line = i + 1;
            let idx = table.groups.len();
            let mut kept = Vec::new();
            for rime in group {
                let rime: String = rime.as_ref().nfc().collect::<String>().to_lowercase();
                if !is_valid_rime(&rime) {
                    return Err(RulesError::InvalidRime { line, rime });
                }
                match table.group_of.get(&rime) {
                    Some(&g) if g == idx => {}
                    Some(&g) => {
                        return Err(RulesError::OverlappingGroups {
                            line,
                            first_line: first_line[g],
                            rime,
                        })
                    }
                    None => {
                        table.group_of.insert(rime.clone(), idx);
                        kept.push(rime);
                    }
                }
            }
            if !kept.is_empty() {
                table.groups.push(kept);
                first_line.push(line);
            }
        }
        Ok(table)
    }

    /// Parses the text format: one group per line, whitespace-separated
    /// rimes, `#` starts a comment. Error line numbers refer to the text.
    pub fn parse(text: &str, version: impl Into<String>) -> Result<Self, RulesError> {
        let lines: Vec<(usize, Vec<&str>)> = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").split_whitespace().collect()))
            .collect();
        let mut groups = vec![Vec::new(); lines.last().map_or(0, |(n, _)| *n)];
        for (n, rimes) in lines {
            groups[n - 1] = rimes;
        }
        Self::from_groups(groups, version)
    }

    pub fn load(path: &Path) -> Result<Self, RulesError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text, path.display().to_string())
    }

    /// The table shipped with the crate.
    pub fn default_table() -> Self {
        Self::parse(DEFAULT_TABLE, "default-1").expect("bundled rule table is valid")
    }

    pub fn groups(&self) -> &[Vec<String>] {
        &self.groups
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn rimes_compatible(&self, a: &str, b: &str) -> bool {
        if a == b {
            return true;
        }
        match (self.group_of.get(a), self.group_of.get(b)) {
            (Some(x), Some(y)) => x == y,
            _ => false,
        }
    }

    /// Tone-blind rhyme test on parsed syllables.
    pub fn rhymes_with(&self, a: &Syllable, b: &Syllable) -> bool {
        self.rimes_compatible(&a.rime, &b.rime)
    }
}

impl Default for RuleTable {
    fn default() -> Self {
        Self::default_table()
    }
}

pub fn rhymes_with(a: &Syllable, b: &Syllable, table: &RuleTable) -> bool {
    table.rhymes_with(a, b)
}
