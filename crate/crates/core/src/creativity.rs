//! Creativity score: the mean fraction of verses a generated poem did not
//! copy verbatim (after normalization) from the training corpus.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{Corpus, VerseIndex};
use crate::syllable::normalize_verse;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CreativityError {
    #[error("no generated poems")]
    EmptyGeneratedSet,
    #[error("poem {0} has no verses")]
    EmptyPoem(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoemOverlap {
    pub poem_id: String,
    pub copied_verses: usize,
    pub total_verses: usize,
    /// Fraction of verses found in the index.
    pub copied_ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreativityReport {
    pub per_poem: Vec<PoemOverlap>,
    pub creativity: f64,
}

pub fn poem_overlap(id: &str, verses: &[&str], index: &VerseIndex) -> Result<PoemOverlap, CreativityError> {
    // every occurrence counts, repeated verses included
    let normalized: Vec<String> = verses
        .iter()
        .map(|v| normalize_verse(v))
        .filter(|v| !v.is_empty())
        .collect();
    if normalized.is_empty() {
        return Err(CreativityError::EmptyPoem(id.to_string()));
    }
    let copied = normalized.iter().filter(|v| index.contains(v)).count();
    Ok(PoemOverlap {
        poem_id: id.to_string(),
        copied_verses: copied,
        total_verses: normalized.len(),
        copied_ratio: copied as f64 / normalized.len() as f64,
    })
}

pub fn creativity_score(generated: &Corpus, index: &VerseIndex) -> Result<CreativityReport, CreativityError> {
    if generated.is_empty() {
        return Err(CreativityError::EmptyGeneratedSet);
    }
    let per_poem = generated
        .poems
        .iter()
        .map(|p| poem_overlap(&p.id, &p.verses().collect::<Vec<_>>(), index))
        .collect::<Result<Vec<_>, _>>()?;
    let creativity =
        per_poem.iter().map(|p| 1.0 - p.copied_ratio).sum::<f64>() / per_poem.len() as f64;
    Ok(CreativityReport {
        per_poem,
        creativity,
    })
}
