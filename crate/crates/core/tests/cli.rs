mod common;

use std::path::Path;

use common::{planted_quatrain, tone_positions, KIEU, RHYME_MEMBERS};
use lucbat::cli::{run, ScoreRecord};
use lucbat::corpus::Corpus;
use lucbat::{score_poem, RuleTable};

struct Outcome {
    code: i32,
    stdout: String,
    stderr: String,
}

fn lucbat(args: &[&str]) -> Outcome {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("lucbat").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    Outcome {
        code,
        stdout: String::from_utf8(out).unwrap(),
        stderr: String::from_utf8(err).unwrap(),
    }
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn mixed_poems() -> String {
    let tones = tone_positions();
    [
        KIEU.to_string(),
        planted_quatrain(&RHYME_MEMBERS[..1], &[]),
        format!("{KIEU}\n{}", planted_quatrain(&[], &tones[..3])),
        planted_quatrain(&RHYME_MEMBERS[..2], &tones[..5]),
    ]
    .join("\n\n")
}

#[test]
fn score_jsonl_perfect_quatrain() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "poems.txt", KIEU);
    let o = lucbat(&["score", &f, "--format", "jsonl"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let lines: Vec<_> = o.stdout.lines().collect();
    assert_eq!(lines.len(), 1);
    let rec: ScoreRecord = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(rec.score, 100.0);
    assert_eq!((rec.wrong_rhyme, rec.wrong_tone, rec.n), (0, 0, 2));
    assert_eq!(rec.diagnostics.tone.len(), 14);
    let v: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    for key in ["poem_id", "stanza_index", "R", "T", "n", "score", "diagnostics"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn score_records_one_per_stanza_in_input_order() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "poems.txt", &mixed_poems());
    let one = lucbat(&["score", &f, "--format", "jsonl", "--jobs", "1"]);
    let four = lucbat(&["score", &f, "--format", "jsonl", "--jobs", "4"]);
    assert_eq!(one.code, 0);
    assert_eq!(one.stdout, four.stdout);
    let recs: Vec<ScoreRecord> = one.stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 5);
    let scores: Vec<f64> = recs.iter().map(|r| r.score).collect();
    assert_eq!(scores[0], 100.0);
    assert!((scores[1] - 80.0).abs() < 1e-9);
    assert_eq!((recs[2].poem_id.as_str(), recs[3].stanza_index), (recs[3].poem_id.as_str(), 2));
}

#[test]
fn score_text_marks_violations() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "p.txt", &KIEU.replacen("thấy", "thầy", 1));
    let o = lucbat(&["score", &f]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("[thầy]^T"), "{}", o.stdout);
    assert!(o.stdout.contains("tone (4,4) expected oblique, got level"));
}

#[test]
fn score_weights_and_rules_override() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "p.txt", &planted_quatrain(&RHYME_MEMBERS[..1], &tone_positions()[..1]));
    let o = lucbat(&["score", &f, "--format", "jsonl", "--weights", "0.7,0.3"]);
    let rec: ScoreRecord = serde_json::from_str(o.stdout.trim()).unwrap();
    assert!((rec.score - 100.0 * (1.0 - 0.7 / 5.0 - 0.3 / 14.0)).abs() < 1e-9);

    // without the {au, âu} group, "dâu" no longer rhymes with "nhau"
    let rules = write(dir.path(), "rules.txt", "# tiny\nai ay\n");
    let k = write(dir.path(), "k.txt", KIEU);
    let o = lucbat(&["score", &k, "--format", "jsonl", "--rules", &rules]);
    let rec: ScoreRecord = serde_json::from_str(o.stdout.trim()).unwrap();
    assert_eq!(rec.wrong_rhyme, 1);

    let bad = write(dir.path(), "bad.txt", "au âu\nâu ao\n");
    let o = lucbat(&["score", &k, "--rules", &bad]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("âu"));

    let o = lucbat(&["score", &k, "--weights", "-1,1"]);
    assert_eq!(o.code, 1);
}

#[test]
fn score_reports_bad_poems_and_continues() {
    let dir = tempfile::tempdir().unwrap();
    let three = KIEU.lines().take(3).collect::<Vec<_>>().join("\n");
    let f = write(dir.path(), "p.txt", &format!("{three}\n\n{KIEU}"));
    let o = lucbat(&["score", &f, "--format", "jsonl"]);
    assert_eq!(o.code, 1);
    let lines: Vec<serde_json::Value> = o.stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    assert!(lines[0].get("error").is_some());
    assert_eq!(lines[1]["score"], 100.0);
}

#[test]
fn argument_errors_name_the_token() {
    let o = lucbat(&["score", "x.txt", "--frobnicate"]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("--frobnicate"));
    let o = lucbat(&["filter", "x.txt", "--out", "y"]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("--min-score"));
    let o = lucbat(&["quatrains", "x.txt", "--shuffle", "--out", "y"]);
    assert_eq!(o.code, 1);
    assert!(o.stderr.contains("--seed"));
    let o = lucbat(&["score", "/definitely/not/here.txt"]);
    assert_eq!(o.code, 1);
    assert_eq!(lucbat(&["--help"]).code, 0);
}

#[test]
fn quatrains_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "in.txt", &format!("{}\n\none\ntwo", mixed_poems()));
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    let c = dir.path().join("c.txt");
    for out in [&a, &b] {
        let o = lucbat(&["quatrains", &f, "--shuffle", "--seed", "7", "--out", out.to_str().unwrap()]);
        assert_eq!(o.code, 0);
        assert!(o.stderr.contains("excluded"));
    }
    lucbat(&["quatrains", &f, "--shuffle", "--seed", "8", "--out", c.to_str().unwrap()]);
    let (ta, tb, tc) = (
        std::fs::read(&a).unwrap(),
        std::fs::read(&b).unwrap(),
        std::fs::read(&c).unwrap(),
    );
    assert_eq!(ta, tb);
    let blocks = |t: &[u8]| {
        let mut v: Vec<String> = Corpus::from_text("x", std::str::from_utf8(t).unwrap())
            .poems
            .into_iter()
            .map(|p| p.text)
            .collect();
        v.sort();
        v
    };
    assert_eq!(blocks(&ta).len(), 5);
    assert_eq!(blocks(&ta), blocks(&tc));

    let plain = dir.path().join("plain.txt");
    lucbat(&["quatrains", &f, "--out", plain.to_str().unwrap()]);
    let first = Corpus::from_text("x", &std::fs::read_to_string(&plain).unwrap());
    assert_eq!(first.poems[0].text, KIEU.lines().map(str::trim).collect::<Vec<_>>().join("\n"));
}

#[test]
fn filter_output_rescores_above_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "in.txt", &mixed_poems());
    let out = dir.path().join("kept.txt");
    let stats = dir.path().join("stats.json");
    let o = lucbat(&[
        "filter", &f, "--min-score", "85", "--out", out.to_str().unwrap(), "--stats", stats.to_str().unwrap(),
    ]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let kept = Corpus::from_text("k", &std::fs::read_to_string(&out).unwrap());
    let table = RuleTable::default_table();
    assert_eq!(kept.len(), 2);
    for p in &kept.poems {
        assert!(score_poem(&p.text, &table).unwrap().mean_score >= 85.0);
    }
    let s: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&stats).unwrap()).unwrap();
    assert_eq!(s["kept_count"], 2);
    assert_eq!(s["dropped_count"], 2);

    let o = lucbat(&["filter", &f, "--min-score", "100.01", "--out", out.to_str().unwrap()]);
    assert!(o.stdout.contains("\"kept_count\":0"));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "");
}

#[test]
fn creativity_disjoint_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let g = write(dir.path(), "g.txt", "gió đưa cành trúc la đà\nmột hai ba bốn");
    let c = write(dir.path(), "c.txt", KIEU);
    let o = lucbat(&["creativity", "--generated", &g, "--corpus", &c]);
    assert_eq!(o.code, 0);
    assert!(o.stdout.contains("C = 1.0"), "{}", o.stdout);

    let g2 = write(dir.path(), "g2.txt", "Trăm năm trong cõi người ta!\nmới toanh");
    let o = lucbat(&["creativity", "--generated", &g2, "--corpus", &c, "--format", "jsonl"]);
    let last: serde_json::Value = serde_json::from_str(o.stdout.lines().last().unwrap()).unwrap();
    assert_eq!(last["C"], 0.5);

    let empty = write(dir.path(), "e.txt", "");
    assert_eq!(lucbat(&["creativity", "--generated", &empty, "--corpus", &c]).code, 1);
}

#[test]
fn report_reads_score_stream() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "in.txt", &mixed_poems());
    let scored = lucbat(&["score", &f, "--format", "jsonl"]);
    let s = write(dir.path(), "scores.jsonl", &scored.stdout);
    let o = lucbat(&["report", &s, "--format", "jsonl"]);
    assert_eq!(o.code, 0, "{}", o.stderr);
    let recs: Vec<serde_json::Value> = o.stdout.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs.len(), 11);
    assert_eq!(recs[10]["count"], 5);
    let total: u64 = recs[..10].iter().map(|r| r["count"].as_u64().unwrap()).sum();
    assert_eq!(total, 5);

    let nums = write(dir.path(), "n.txt", "100\n100\n95\n");
    let o = lucbat(&["report", &nums]);
    assert!(o.stdout.contains("[   90,   100]      3"), "{}", o.stdout);
    let empty = write(dir.path(), "e.txt", "\n");
    assert_eq!(lucbat(&["report", &empty]).code, 1);
    assert_eq!(lucbat(&["report", &nums, "--bins", "0"]).code, 1);
}

#[test]
fn losscheck_passes_and_is_deterministic() {
    let a = lucbat(&["losscheck", "--seed", "5", "--format", "jsonl"]);
    let b = lucbat(&["losscheck", "--seed", "5", "--format", "jsonl"]);
    assert_eq!(a.code, 0);
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_str(a.stdout.trim()).unwrap();
    assert_eq!(v["passed"], true);
    assert!(v["max_relative_error"].as_f64().unwrap() <= 1e-4);

    let o = lucbat(&["losscheck", "--dmodel", "8", "--dhidden", "8", "--vocab", "16", "--len", "12", "--stanzas", "3", "--mean"]);
    assert_eq!(o.code, 0, "{}", o.stdout);
    assert!(o.stdout.contains("PASS"));
    assert_eq!(lucbat(&["losscheck", "--dmodel", "0"]).code, 1);
}

#[test]
fn every_command_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let f = write(dir.path(), "in.txt", &mixed_poems());
    let c = write(dir.path(), "c.txt", KIEU);
    let nums = write(dir.path(), "n.txt", "10\n55.5\n100\n");
    let out1 = dir.path().join("o1.txt");
    let out2 = dir.path().join("o2.txt");
    let runs: Vec<Vec<String>> = vec![
        vec!["score".into(), f.clone(), "--format".into(), "jsonl".into()],
        vec!["score".into(), f.clone()],
        vec!["creativity".into(), "--generated".into(), f.clone(), "--corpus".into(), c.clone()],
        vec!["report".into(), nums.clone()],
        vec!["losscheck".into(), "--seed".into(), "11".into()],
    ];
    for args in runs {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let a = lucbat(&args);
        let b = lucbat(&args);
        assert_eq!((a.code, &a.stdout), (b.code, &b.stdout), "{args:?}");
    }
    for cmd in [["filter", "--min-score", "50"], ["quatrains", "--seed", "3"]] {
        for out in [&out1, &out2] {
            let mut args = vec![cmd[0], &f, cmd[1], cmd[2], "--out", out.to_str().unwrap()];
            if cmd[0] == "quatrains" {
                args.push("--shuffle");
            }
            assert_eq!(lucbat(&args).code, 0);
        }
        assert_eq!(std::fs::read(&out1).unwrap(), std::fs::read(&out2).unwrap());
    }
}
