#![allow(dead_code)]

use lucbat::rules::{LineKind, Position};
use lucbat::syllable::{compose, parse_syllable, Tone, ToneClass};

pub const KIEU: &str = "Trăm năm trong cõi người ta\n\
                        Chữ tài chữ mệnh khéo là ghét nhau\n\
                        Trải qua một cuộc bể dâu\n\
                        Những điều trông thấy mà đau đớn lòng";

/// The fourteen templated tone positions of a quatrain.
pub fn tone_positions() -> Vec<Position> {
    let mut out = Vec::new();
    for line in 1..=4 {
        let words: &[usize] = match LineKind::of_line(line) {
            LineKind::Six => &[2, 4, 6],
            LineKind::Eight => &[2, 4, 6, 8],
        };
        out.extend(words.iter().map(|&w| Position::new(line, w)));
    }
    out
}

/// Non-anchor rhyme positions of a quatrain.
pub const RHYME_MEMBERS: [Position; 3] = [Position::new(2, 6), Position::new(3, 6), Position::new(4, 6)];

pub fn words(poem: &str) -> Vec<Vec<String>> {
    poem.lines()
        .map(|l| l.split_whitespace().map(str::to_string).collect())
        .collect()
}

pub fn join(lines: &[Vec<String>]) -> String {
    lines.iter().map(|l| l.join(" ")).collect::<Vec<_>>().join("\n")
}

/// Same onset and rime, tone class switched.
pub fn flip_tone(word: &str) -> String {
    let s = parse_syllable(word).unwrap();
    let tone = match s.tone_class {
        ToneClass::Level => Tone::Sac,
        ToneClass::Oblique => Tone::Ngang,
    };
    compose(&s.onset, &s.rime, tone)
}

/// The Kiều quatrain with `rhyme` breaks at the first `rhyme` non-anchor
/// positions and tone violations at the given templated positions.
pub fn planted_quatrain(rhyme_breaks: &[Position], tone_flips: &[Position]) -> String {
    let mut lines = words(KIEU);
    for p in rhyme_breaks {
        // "lòng" keeps a Level tone and shares no rime group with "ta"/"nhau"
        lines[p.line - 1][p.word - 1] = "lòng".to_string();
    }
    for p in tone_flips {
        let w = &mut lines[p.line - 1][p.word - 1];
        *w = flip_tone(w);
    }
    join(&lines)
}
