//! Python bindings for `lucbat`.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lucbat::cli::{GRADCHECK_STEP, GRADCHECK_TOLERANCE};
use lucbat::corpus::{build_verse_index, split_quatrain_corpus, Corpus};
use lucbat::creativity::creativity_score;
use lucbat::scoring::{score_poem_weighted, template_score, Weights};
use lucbat::semloss::gradcheck::check_custom_loss;
use lucbat::semloss::{ce_loss as ce_loss_impl, custom_loss, random_instance, InstanceDims, PairReduction};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

#[pyclass(name = "Syllable", frozen, get_all)]
struct PySyllable {
    raw: String,
    normalized: String,
    onset: String,
    rime: String,
    tone: String,
    tone_class: String,
}

#[pymethods]
impl PySyllable {
    fn __repr__(&self) -> String {
        format!(
            "Syllable({:?}, onset={:?}, rime={:?}, tone={})",
            self.normalized, self.onset, self.rime, self.tone
        )
    }

    fn __str__(&self) -> &str {
        &self.normalized
    }
}

#[pyfunction]
fn parse_syllable(word: &str) -> PyResult<PySyllable> {
    let s = lucbat::parse_syllable(word).map_err(value_err)?;
    Ok(PySyllable {
        raw: s.raw,
        normalized: s.normalized,
        onset: s.onset,
        rime: s.rime,
        tone: format!("{:?}", s.tone).to_lowercase(),
        tone_class: s.tone_class.to_string(),
    })
}

#[pyfunction]
fn normalize_verse(verse: &str) -> String {
    lucbat::normalize_verse(verse)
}

/// Near-rhyme table. `RuleTable()` is the bundled default.
#[pyclass(name = "RuleTable", frozen)]
struct PyRuleTable(lucbat::RuleTable);

#[pymethods]
impl PyRuleTable {
    #[new]
    fn new() -> Self {
        PyRuleTable(lucbat::RuleTable::default_table())
    }

    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        lucbat::RuleTable::load(&path).map(PyRuleTable).map_err(value_err)
    }

    #[staticmethod]
    #[pyo3(signature = (text, version = "custom"))]
    fn parse(text: &str, version: &str) -> PyResult<Self> {
        lucbat::RuleTable::parse(text, version).map(PyRuleTable).map_err(value_err)
    }

    #[getter]
    fn version(&self) -> String {
        self.0.version().to_string()
    }

    #[getter]
    fn groups(&self) -> Vec<Vec<String>> {
        self.0.groups().to_vec()
    }

    fn rimes_compatible(&self, a: &str, b: &str) -> bool {
        self.0.rimes_compatible(a, b)
    }

    fn rhymes(&self, a: &str, b: &str) -> PyResult<bool> {
        let a = lucbat::parse_syllable(a).map_err(value_err)?;
        let b = lucbat::parse_syllable(b).map_err(value_err)?;
        Ok(self.0.rhymes_with(&a, &b))
    }
}

#[pyclass(name = "ScoreReport", frozen, get_all)]
struct PyScoreReport {
    n_pairs: usize,
    wrong_rhyme: usize,
    wrong_tone: usize,
    score: f64,
    /// `(line, word, anchor_line, anchor_word)` of each failed rhyme.
    rhyme_violations: Vec<(usize, usize, usize, usize)>,
    /// `(line, word, expected, actual)` of each failed tone.
    tone_violations: Vec<(usize, usize, String, String)>,
}

#[pymethods]
impl PyScoreReport {
    fn __repr__(&self) -> String {
        format!(
            "ScoreReport(score={}, R={}, T={}, n={})",
            self.score, self.wrong_rhyme, self.wrong_tone, self.n_pairs
        )
    }
}

impl From<lucbat::ScoreReport> for PyScoreReport {
    fn from(r: lucbat::ScoreReport) -> Self {
        PyScoreReport {
            n_pairs: r.n_pairs,
            wrong_rhyme: r.wrong_rhyme,
            wrong_tone: r.wrong_tone,
            score: r.score,
            rhyme_violations: r
                .rhyme_diagnostics
                .iter()
                .filter(|d| !d.ok)
                .map(|d| (d.position.line, d.position.word, d.anchor.line, d.anchor.word))
                .collect(),
            tone_violations: r
                .tone_diagnostics
                .iter()
                .filter(|d| !d.ok)
                .map(|d| (d.position.line, d.position.word, d.expected.to_string(), d.actual.to_string()))
                .collect(),
        }
    }
}

/// Scores every quatrain of a poem; returns `(mean_score, [ScoreReport])`.
#[pyfunction]
#[pyo3(signature = (poem, table = None, rhyme_weight = 1.0, tone_weight = 1.0))]
fn score_poem(
    poem: &str,
    table: Option<&PyRuleTable>,
    rhyme_weight: f64,
    tone_weight: f64,
) -> PyResult<(f64, Vec<PyScoreReport>)> {
    let default;
    let table = match table {
        Some(t) => &t.0,
        None => {
            default = lucbat::RuleTable::default_table();
            &default
        }
    };
    let weights = Weights {
        rhyme: rhyme_weight,
        tone: tone_weight,
    };
    let scored = score_poem_weighted(poem, table, weights).map_err(value_err)?;
    Ok((scored.mean_score, scored.stanzas.into_iter().map(Into::into).collect()))
}

#[pyfunction]
#[pyo3(name = "template_score", signature = (n_pairs, wrong_rhyme, wrong_tone, rhyme_weight = 1.0, tone_weight = 1.0))]
fn py_template_score(n_pairs: usize, wrong_rhyme: usize, wrong_tone: usize, rhyme_weight: f64, tone_weight: f64) -> f64 {
    template_score(
        n_pairs,
        wrong_rhyme,
        wrong_tone,
        Weights {
            rhyme: rhyme_weight,
            tone: tone_weight,
        },
    )
}

/// Splits blank-line separated poems into quatrains, shuffled when a seed is
/// given. Returns `([(id, text)], [(excluded_id, reason)])`.
#[pyfunction]
#[pyo3(signature = (text, seed = None, source = "input"))]
fn split_quatrains(text: &str, seed: Option<u64>, source: &str) -> (Vec<(String, String)>, Vec<(String, String)>) {
    let (quatrains, excluded) = split_quatrain_corpus(&Corpus::from_text(source, text), seed);
    (
        quatrains.poems.into_iter().map(|p| (p.id, p.text)).collect(),
        excluded.into_iter().map(|e| (e.id, e.reason)).collect(),
    )
}

/// Creativity of `generated` against `corpus`, both blank-line separated.
#[pyfunction]
fn creativity(generated: &str, corpus: &str) -> PyResult<f64> {
    let index = build_verse_index(&Corpus::from_text("corpus", corpus));
    creativity_score(&Corpus::from_text("generated", generated), &index)
        .map(|r| r.creativity)
        .map_err(value_err)
}

/// Mean next-token cross entropy; row `i` of `logits` predicts `targets[i]`.
#[pyfunction]
fn ce_loss(logits: Vec<Vec<f64>>, targets: Vec<usize>) -> PyResult<f64> {
    ce_loss_impl(&logits, &targets).map_err(value_err)
}

/// Finite-difference check of the combined loss on a seeded random instance.
#[pyfunction]
#[pyo3(signature = (seed = 0, d_model = 4, d_hidden = 3, vocab = 7, max_len = 6, stanzas = 2, mean = false))]
fn gradcheck(
    py: Python<'_>,
    seed: u64,
    d_model: usize,
    d_hidden: usize,
    vocab: usize,
    max_len: usize,
    stanzas: usize,
    mean: bool,
) -> PyResult<Py<PyAny>> {
    if [d_model, d_hidden, vocab, max_len, stanzas].contains(&0) {
        return Err(PyValueError::new_err("all dimensions must be positive"));
    }
    let dims = InstanceDims {
        d_model,
        d_hidden,
        vocab,
        max_len,
        stanzas,
    };
    let reduction = if mean { PairReduction::Mean } else { PairReduction::Sum };
    let (block, attn, lstm) = random_instance(dims, &mut ChaCha8Rng::seed_from_u64(seed));
    let loss = custom_loss(&block, &attn, &lstm, reduction).map_err(value_err)?;
    let report = check_custom_loss(&block, &attn, &lstm, reduction, GRADCHECK_STEP).map_err(value_err)?;
    let out = pyo3::types::PyDict::new(py);
    out.set_item("ce", loss.ce)?;
    out.set_item("mse", loss.mse)?;
    out.set_item("total", loss.total)?;
    out.set_item("checked", report.checked)?;
    out.set_item("max_relative_error", report.max_relative_error)?;
    out.set_item("passed", report.passed(GRADCHECK_TOLERANCE))?;
    Ok(out.into_any().unbind())
}

#[pymodule]
fn lucbat_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PySyllable>()?;
    m.add_class::<PyRuleTable>()?;
    m.add_class::<PyScoreReport>()?;
    m.add_function(wrap_pyfunction!(parse_syllable, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_verse, m)?)?;
    m.add_function(wrap_pyfunction!(score_poem, m)?)?;
    m.add_function(wrap_pyfunction!(py_template_score, m)?)?;
    m.add_function(wrap_pyfunction!(split_quatrains, m)?)?;
    m.add_function(wrap_pyfunction!(creativity, m)?)?;
    m.add_function(wrap_pyfunction!(ce_loss, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    Ok(())
}
