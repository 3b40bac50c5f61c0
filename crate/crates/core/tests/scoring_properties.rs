mod common;

use std::collections::HashSet;

use common::{planted_quatrain, tone_positions, KIEU, RHYME_MEMBERS};
use lucbat::rules::{build_rhyme_chains, expected_tone, tone_template, LineKind, RuleTable};
use lucbat::scoring::{histogram, score_stanza, segment_stanza, template_score, Weights};
use lucbat::syllable::parse_syllable;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn score(poem: &str) -> lucbat::ScoreReport {
    score_stanza(&segment_stanza(poem).unwrap(), &RuleTable::default_table())
}

#[test]
fn rhyme_relation_is_an_equivalence() {
    let table = RuleTable::default_table();
    let mut rimes: Vec<String> = table.groups().iter().flatten().cloned().collect();
    rimes.extend(["a", "ong", "ương", "e", "ưng", "ôc"].map(String::from));
    let syl = |r: &str| parse_syllable(&format!("t{r}")).unwrap();
    let syls: Vec<_> = rimes.iter().map(|r| syl(r)).collect();
    for a in &syls {
        assert!(table.rhymes_with(a, a));
        for b in &syls {
            assert_eq!(table.rhymes_with(a, b), table.rhymes_with(b, a));
            if !table.rhymes_with(a, b) {
                continue;
            }
            for c in &syls {
                if table.rhymes_with(b, c) {
                    assert!(table.rhymes_with(a, c), "{} {} {}", a.rime, b.rime, c.rime);
                }
            }
        }
    }
}

#[test]
fn default_table_is_a_partition() {
    let table = RuleTable::default_table();
    let mut seen = HashSet::new();
    for r in table.groups().iter().flatten() {
        assert!(seen.insert(r.clone()), "{r} appears twice");
        assert!(lucbat::syllable::is_valid_rime(r));
    }
}

#[test]
fn chains_are_disjoint_and_count_3n_minus_1() {
    for n in 1..=50 {
        let chains = build_rhyme_chains(n).unwrap();
        let all: Vec<_> = chains.iter().flat_map(|c| c.positions.clone()).collect();
        let distinct: HashSet<_> = all.iter().collect();
        assert_eq!(all.len(), 3 * n - 1);
        assert_eq!(distinct.len(), all.len());
        assert_eq!(chains.len(), n);
    }
}

#[test]
fn odd_positions_are_free() {
    for kind in [LineKind::Six, LineKind::Eight] {
        for i in (1..=kind.len()).step_by(2) {
            assert_eq!(expected_tone(kind, i).unwrap(), None);
        }
    }
    assert_eq!(tone_template(LineKind::Six).len(), 3);
    assert_eq!(tone_template(LineKind::Eight).len(), 4);
}

#[test]
fn each_tone_flip_costs_100_over_7n() {
    let base = score(KIEU).score;
    for p in tone_positions() {
        let r = score(&planted_quatrain(&[], &[p]));
        assert_eq!((r.wrong_rhyme, r.wrong_tone), (0, 1), "{p:?}");
        assert!((base - r.score - 100.0 / 14.0).abs() < 1e-9);
    }
}

#[test]
fn each_rhyme_break_costs_100_over_3n_minus_1() {
    for p in RHYME_MEMBERS {
        let r = score(&planted_quatrain(&[p], &[]));
        assert_eq!((r.wrong_rhyme, r.wrong_tone), (1, 0));
        assert!((100.0 - r.score - 100.0 / 5.0).abs() < 1e-9);
    }
}

#[test]
fn all_128_tone_patterns_match_brute_force() {
    let positions: Vec<_> = tone_positions().into_iter().take(7).collect();
    for mask in 0u32..128 {
        let flips: Vec<_> = (0..7).filter(|b| mask >> b & 1 == 1).map(|b| positions[b]).collect();
        let r = score(&planted_quatrain(&[], &flips));
        let k = mask.count_ones() as f64;
        let oracle = 100.0 * (1.0 - 0.0 / 5.0 - k / 14.0);
        assert_eq!(r.wrong_tone, flips.len());
        assert!((r.score - oracle).abs() < 1e-9, "mask {mask:b}");
    }
}

#[test]
fn anchor_break_counts_against_both_members() {
    // changing the anchor (2,8) breaks (3,6) and (4,6) relative to it
    let poem = KIEU.replacen("ghét nhau", "ghét lòng", 1);
    let r = score(&poem);
    assert_eq!(r.wrong_rhyme, 2);
}

#[test]
fn longer_stanza_diagnostics() {
    let eight = format!("{KIEU}\n{KIEU}");
    let r = score(&eight);
    assert_eq!(r.n_pairs, 4);
    assert_eq!(r.rhyme_diagnostics.len(), 3 * 4 - 1 - 4);
    assert_eq!(r.tone_diagnostics.len(), 28);
    // (4,8) "lòng" anchors line 5/6 sixth words "ta"/"là": both wrong
    assert_eq!(r.wrong_rhyme, 2);
}

#[test]
fn histogram_matches_naive_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let scores: Vec<f64> = (0..500).map(|_| rng.gen_range(-5.0..=105.0)).collect();
    let h = histogram(&scores, 10.0, 0.0, 100.0).unwrap();
    for b in &h.bins {
        let last = b.hi == 100.0;
        let naive = scores
            .iter()
            .filter(|&&s| s >= b.lo && (s < b.hi || (last && s <= b.hi)))
            .count();
        assert_eq!(b.count, naive);
    }
    let in_range = scores.iter().filter(|s| (0.0..=100.0).contains(*s)).count();
    assert_eq!(h.bins.iter().map(|b| b.count).sum::<usize>(), in_range);
    assert_eq!(h.below + h.above + in_range, 500);
}

fn plant() -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (
        prop::sample::subsequence(vec![0usize, 1, 2], 0..=3),
        prop::sample::subsequence((0..14).collect::<Vec<_>>(), 0..=14),
    )
}

proptest! {
    #[test]
    fn planted_counts_give_closed_form((rb, tf) in plant()) {
        let rhyme: Vec<_> = rb.iter().map(|&i| RHYME_MEMBERS[i]).collect();
        let tones = tone_positions();
        let flips: Vec<_> = tf.iter().map(|&i| tones[i]).collect();
        let poem = planted_quatrain(&rhyme, &flips);
        let r = score(&poem);
        prop_assert_eq!(r.wrong_rhyme, rb.len());
        prop_assert_eq!(r.wrong_tone, tf.len());
        prop_assert!(r.score <= 100.0);
        prop_assert_eq!(r.score == 100.0, rb.is_empty() && tf.is_empty());
        let expected = 100.0 * (1.0 - rb.len() as f64 / 5.0 - tf.len() as f64 / 14.0);
        prop_assert!((r.score - expected).abs() < 1e-9);
        prop_assert_eq!(r.score, template_score(2, rb.len(), tf.len(), Weights::default()));

        // re-tokenizing from normalized text gives the identical report
        let stanza = segment_stanza(&poem).unwrap();
        let again = score(&stanza.to_text());
        prop_assert_eq!(again, r);
    }

    #[test]
    fn one_more_violation_never_raises_score((rb, tf) in plant(), extra in 0usize..17) {
        let tones = tone_positions();
        let rhyme: Vec<_> = rb.iter().map(|&i| RHYME_MEMBERS[i]).collect();
        let flips: Vec<_> = tf.iter().map(|&i| tones[i]).collect();
        let before = score(&planted_quatrain(&rhyme, &flips)).score;
        let (mut rhyme2, mut flips2) = (rhyme.clone(), flips.clone());
        if extra < 14 {
            if flips2.contains(&tones[extra]) { return Ok(()); }
            flips2.push(tones[extra]);
        } else {
            let p = RHYME_MEMBERS[extra - 14];
            if rhyme2.contains(&p) { return Ok(()); }
            rhyme2.push(p);
        }
        let after = score(&planted_quatrain(&rhyme2, &flips2)).score;
        prop_assert!(after <= before);
    }
}
