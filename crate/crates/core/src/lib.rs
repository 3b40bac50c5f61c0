//! Luc Bat poetry toolkit: Vietnamese syllable parsing, template scoring,
//! corpus preparation, creativity scoring, and a gradient-checked
//! contextual-vector loss.

pub mod cli;
pub mod corpus;
pub mod creativity;
pub mod rules;
pub mod scoring;
pub mod semloss;
pub mod syllable;

pub use rules::{build_rhyme_chains, expected_tone, LineKind, Position, RhymeChain, RuleTable};
pub use scoring::{score_poem, score_stanza, segment_stanza, ScoreReport, Stanza};
pub use syllable::{normalize_verse, parse_syllable, Syllable, Tone, ToneClass};
