//! Poem collections: ingestion, quatrain splitting, seeded shuffling,
//! score filtering, and the verse index.
//!
//! On disk a corpus is UTF-8 text with poems separated by one or more blank
//! lines. Shuffling uses ChaCha8 seeded with `seed_from_u64(seed)`, so a
//! given seed produces the same order on every platform.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::rules::RuleTable;
use crate::scoring::{score_poem, split_quatrains};
use crate::syllable::normalize_verse;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: not valid UTF-8 (byte offset {offset})")]
    InvalidEncoding { path: PathBuf, offset: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Poem {
    pub id: String,
    pub text: String,
}

impl Poem {
    pub fn verses(&self) -> impl Iterator<Item = &str> {
        self.text.lines().map(str::trim).filter(|l| !l.is_empty())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub poems: Vec<Poem>,
    pub provenance: Vec<PathBuf>,
}

/// Splits text into blank-line-delimited blocks, each stored in composed form.
pub fn split_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            if !current.is_empty() {
                blocks.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim());
        }
    }
    if !current.is_empty() {
        blocks.push(current.join("\n"));
    }
    blocks.into_iter().map(|b| b.nfc().collect()).collect()
}

impl Corpus {
    /// Builds a corpus from in-memory text; ids are `<source>#<ordinal>`.
    pub fn from_text(source: &str, text: &str) -> Self {
        let poems = split_blocks(text)
            .into_iter()
            .enumerate()
            .map(|(i, text)| Poem {
                id: format!("{source}#{}", i + 1),
                text,
            })
            .collect();
        Corpus {
            poems,
            provenance: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.poems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poems.is_empty()
    }

    /// Blank-line separated text, one poem per block, trailing newline.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (i, p) in self.poems.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            let _ = writeln!(out, "{}", p.text);
        }
        out
    }
}

fn read_utf8(path: &Path) -> Result<String, CorpusError> {
    let bytes = std::fs::read(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    String::from_utf8(bytes).map_err(|e| CorpusError::InvalidEncoding {
        path: path.to_path_buf(),
        offset: e.utf8_error().valid_up_to(),
    })
}

/// Reads files in parallel and concatenates them in argument order. A path
/// listed more than once gets an `@k` suffix so ids stay unique.
pub fn ingest<P: AsRef<Path> + Sync>(paths: &[P]) -> Result<Corpus, CorpusError> {
    let texts = paths
        .par_iter()
        .map(|p| read_utf8(p.as_ref()))
        .collect::<Result<Vec<_>, _>>()?;
    let mut corpus = Corpus::default();
    let mut seen: HashSet<String> = HashSet::new();
    for (path, text) in paths.iter().zip(texts) {
        let path = path.as_ref();
        let mut source = path.display().to_string();
        let mut k = 1;
        while !seen.insert(source.clone()) {
            k += 1;
            source = format!("{}@{k}", path.display());
        }
        corpus.poems.extend(Corpus::from_text(&source, &text).poems);
        corpus.provenance.push(path.to_path_buf());
    }
    Ok(corpus)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub id: String,
    pub reason: String,
}

/// Splits every poem into quatrains (ids `<poem>/q<k>`) and optionally
/// permutes them with the seeded generator. Poems whose line count is not a
/// multiple of four are excluded and reported.
pub fn split_quatrain_corpus(corpus: &Corpus, seed: Option<u64>) -> (Corpus, Vec<Exclusion>) {
    let mut poems = Vec::new();
    let mut excluded = Vec::new();
    for poem in &corpus.poems {
        match split_quatrains(&poem.text) {
            Ok(qs) => poems.extend(qs.into_iter().enumerate().map(|(k, text)| Poem {
                id: format!("{}/q{}", poem.id, k + 1),
                text,
            })),
            Err(e) => excluded.push(Exclusion {
                id: poem.id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    if let Some(seed) = seed {
        poems.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    (
        Corpus {
            poems,
            provenance: corpus.provenance.clone(),
        },
        excluded,
    )
}

pub fn split_and_shuffle(corpus: &Corpus, seed: u64) -> (Corpus, Vec<Exclusion>) {
    split_quatrain_corpus(corpus, Some(seed))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterStats {
    pub kept_count: usize,
    pub dropped_count: usize,
    /// `None` when nothing was kept.
    pub mean_score_kept: Option<f64>,
    pub dropped: Vec<Exclusion>,
}

/// Keeps poems whose mean quatrain score is at least `min_score`.
pub fn filter_by_score(corpus: &Corpus, table: &RuleTable, min_score: f64) -> (Corpus, FilterStats) {
    let scored: Vec<_> = corpus
        .poems
        .par_iter()
        .map(|p| score_poem(&p.text, table))
        .collect();
    let mut kept = Vec::new();
    let mut kept_scores = Vec::new();
    let mut dropped = Vec::new();
    for (poem, result) in corpus.poems.iter().zip(scored) {
        match result {
            Ok(s) if s.mean_score >= min_score => {
                kept.push(poem.clone());
                kept_scores.push(s.mean_score);
            }
            Ok(s) => dropped.push(Exclusion {
                id: poem.id.clone(),
                reason: format!("score {:.4} below {min_score}", s.mean_score),
            }),
            Err(e) => dropped.push(Exclusion {
                id: poem.id.clone(),
                reason: e.to_string(),
            }),
        }
    }
    let mean_score_kept = if kept_scores.is_empty() {
        None
    } else {
        Some(kept_scores.iter().sum::<f64>() / kept_scores.len() as f64)
    };
    let stats = FilterStats {
        kept_count: kept.len(),
        dropped_count: dropped.len(),
        mean_score_kept,
        dropped,
    };
    (
        Corpus {
            poems: kept,
            provenance: corpus.provenance.clone(),
        },
        stats,
    )
}

/// Set of normalized verses of a corpus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VerseIndex {
    verses: HashSet<String>,
}

impl VerseIndex {
    pub fn len(&self) -> usize {
        self.verses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.verses.is_empty()
    }

    pub fn insert(&mut self, verse: &str) {
        let v = normalize_verse(verse);
        if !v.is_empty() {
            self.verses.insert(v);
        }
    }

    /// Membership after normalization of the query.
    pub fn contains(&self, verse: &str) -> bool {
        self.verses.contains(&normalize_verse(verse))
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.verses.iter().map(String::as_str)
    }
}

pub fn build_verse_index(corpus: &Corpus) -> VerseIndex {
    let mut index = VerseIndex::default();
    for poem in &corpus.poems {
        for verse in poem.verses() {
            index.insert(verse);
        }
    }
    index
}
