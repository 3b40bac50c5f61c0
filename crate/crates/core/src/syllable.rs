//! Vietnamese syllable parsing: onset/rime segmentation and tone extraction.
//!
//! Tone marks are recovered from the canonical decomposition (NFD) of the
//! token, so composed and decomposed inputs parse identically. The stored
//! `normalized` form places the tone mark on the canonical vowel of the rime,
//! which makes `hòa` and `hoà` the same syllable.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

const GRAVE: char = '\u{0300}';
const ACUTE: char = '\u{0301}';
const TILDE: char = '\u{0303}';
const HOOK_ABOVE: char = '\u{0309}';
const DOT_BELOW: char = '\u{0323}';

/// Consonant onsets, longest first so a linear scan yields the longest match.
const ONSETS: [&str; 27] = [
    "ngh", "ch", "gh", "gi", "kh", "ng", "nh", "ph", "qu", "th", "tr", "b", "c", "d", "đ", "g",
    "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "x",
];

const CODAS: [&str; 8] = ["ch", "ng", "nh", "c", "m", "n", "p", "t"];

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SyllableError {
    #[error("not a Vietnamese syllable: {0:?}")]
    NotASyllable(String),
    #[error("more than one tone mark in {0:?}")]
    MultipleToneMarks(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Tone {
    Ngang,
    Huyen,
    Sac,
    Hoi,
    Nga,
    Nang,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ToneClass {
    /// Bằng.
    Level,
    /// Trắc.
    Oblique,
}

impl Tone {
    pub fn class(self) -> ToneClass {
        match self {
            Tone::Ngang | Tone::Huyen => ToneClass::Level,
            Tone::Sac | Tone::Hoi | Tone::Nga | Tone::Nang => ToneClass::Oblique,
        }
    }

    fn from_mark(c: char) -> Option<Tone> {
        match c {
            GRAVE => Some(Tone::Huyen),
            ACUTE => Some(Tone::Sac),
            HOOK_ABOVE => Some(Tone::Hoi),
            TILDE => Some(Tone::Nga),
            DOT_BELOW => Some(Tone::Nang),
            _ => None,
        }
    }

    /// The combining mark for this tone, `None` for the unmarked ngang.
    pub fn mark(self) -> Option<char> {
        match self {
            Tone::Ngang => None,
            Tone::Huyen => Some(GRAVE),
            Tone::Sac => Some(ACUTE),
            Tone::Hoi => Some(HOOK_ABOVE),
            Tone::Nga => Some(TILDE),
            Tone::Nang => Some(DOT_BELOW),
        }
    }
}

impl fmt::Display for ToneClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ToneClass::Level => "level",
            ToneClass::Oblique => "oblique",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Syllable {
    pub raw: String,
    pub normalized: String,
    pub onset: String,
    /// Nucleus plus coda, tone mark removed.
    pub rime: String,
    pub tone: Tone,
    pub tone_class: ToneClass,
}

impl fmt::Display for Syllable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.normalized)
    }
}

/// True for the twelve Vietnamese vowel letters (toneless, lowercase, composed).
pub fn is_vowel(c: char) -> bool {
    matches!(
        c,
        'a' | 'ă' | 'â' | 'e' | 'ê' | 'i' | 'o' | 'ô' | 'ơ' | 'u' | 'ư' | 'y'
    )
}

fn is_consonant(c: char) -> bool {
    matches!(
        c,
        'b' | 'c' | 'd' | 'đ' | 'g' | 'h' | 'k' | 'l' | 'm' | 'n' | 'p' | 'q' | 'r' | 's' | 't'
            | 'v' | 'x'
    )
}

/// Strips tone marks from a lowercased token, returning the composed toneless
/// form and the tone.
fn split_tone(token: &str) -> Result<(String, Tone), SyllableError> {
    let mut tone = None;
    let mut rest = String::with_capacity(token.len());
    for c in token.nfd() {
        match Tone::from_mark(c) {
            Some(t) => {
                if tone.is_some() {
                    return Err(SyllableError::MultipleToneMarks(token.to_string()));
                }
                tone = Some(t);
            }
            None => rest.push(c),
        }
    }
    Ok((rest.nfc().collect(), tone.unwrap_or(Tone::Ngang)))
}

fn split_onset(toneless: &str) -> (&str, &str) {
    // "gi" is an onset only when a vowel follows; "gì", "gìn" keep the i.
    if let Some(after) = toneless.strip_prefix("gi") {
        if after.chars().next().is_some_and(is_vowel) {
            return ("gi", after);
        }
        return ("g", &toneless[1..]);
    }
    for onset in ONSETS {
        if let Some(after) = toneless.strip_prefix(onset) {
            return (onset, after);
        }
    }
    ("", toneless)
}

/// Checks that a toneless rime is a vowel cluster of one to three letters
/// followed by an optional coda consonant.
pub fn is_valid_rime(rime: &str) -> bool {
    let vowels = rime.chars().take_while(|&c| is_vowel(c)).count();
    if !(1..=3).contains(&vowels) {
        return false;
    }
    let coda: String = rime.chars().skip(vowels).collect();
    coda.is_empty() || CODAS.contains(&coda.as_str())
}

/// Index (in chars) of the vowel that carries the tone mark in a toneless rime.
fn tone_position(rime: &str) -> usize {
    let chars: Vec<char> = rime.chars().collect();
    let vowels: Vec<usize> = (0..chars.len()).take_while(|&i| is_vowel(chars[i])).collect();
    if let Some(i) = vowels.iter().rev().find(|&&i| chars[i] == 'ơ') {
        return *i;
    }
    if let Some(i) = vowels
        .iter()
        .find(|&&i| matches!(chars[i], 'ă' | 'â' | 'ê' | 'ô' | 'ơ' | 'ư'))
    {
        // ư alone in "ưu", "ưi" or with ơ handled above.
        return *i;
    }
    let has_coda = vowels.len() < chars.len();
    match (vowels.len(), has_coda) {
        (1, _) => vowels[0],
        (_, true) => *vowels.last().unwrap(),
        (2, false) => vowels[0],
        (_, false) => vowels[1],
    }
}

/// Places `tone` on the canonical vowel of `rime` and returns `onset + rime`
/// in composed form.
pub fn compose(onset: &str, rime: &str, tone: Tone) -> String {
    let mut out = String::from(onset);
    let pos = tone_position(rime);
    for (i, c) in rime.chars().enumerate() {
        out.push(c);
        if i == pos {
            if let Some(m) = tone.mark() {
                out.push(m);
            }
        }
    }
    out.nfc().collect()
}

pub fn parse_syllable(token: &str) -> Result<Syllable, SyllableError> {
    let not_syllable = || SyllableError::NotASyllable(token.to_string());
    let lower: String = token.nfc().collect::<String>().to_lowercase();
    if lower.is_empty() {
        return Err(not_syllable());
    }
    let (toneless, tone) = split_tone(&lower)?;
    if !toneless.chars().all(|c| is_vowel(c) || is_consonant(c)) {
        return Err(not_syllable());
    }
    let (onset, rime) = split_onset(&toneless);
    if !is_valid_rime(rime) {
        return Err(not_syllable());
    }
    Ok(Syllable {
        raw: token.to_string(),
        normalized: compose(onset, rime, tone),
        onset: onset.to_string(),
        rime: rime.to_string(),
        tone,
        tone_class: tone.class(),
    })
}

fn is_stripped_punct(c: char) -> bool {
    matches!(
        c,
        '.' | ',' | '!' | '?' | ';' | ':' | '\'' | '"' | '…' | '(' | ')' | '-' | '–' | '—'
            | '“' | '”' | '‘' | '’' | '«' | '»'
    )
}

/// Canonical verse form: composed, lowercase, punctuation removed, single
/// spaces, trimmed.
pub fn normalize_verse(line: &str) -> String {
    let cleaned: String = line
        .nfc()
        .flat_map(char::to_lowercase)
        .map(|c| if is_stripped_punct(c) { ' ' } else { c })
        .collect();
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}
