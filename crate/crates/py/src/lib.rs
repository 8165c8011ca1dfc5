//! Python bindings for the framing toolkit.

use std::collections::BTreeMap;

use framing::baselines::TfidfModel;
use framing::corpus::{self, CorpusConfig};
use framing::groundtruth::{self, Leaning, SurveyTable};
use framing::measurement::{self, DistanceMatrix};
use framing::promptgen::{self, MinSources, TemplateSet};
use framing::representation::{self, FramingScores, WeightedToken};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

type Merges = Vec<(Vec<String>, Vec<String>, f64)>;
type Aligned = (Vec<String>, BTreeMap<String, Vec<f64>>);

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(sources: Vec<String>, values: Vec<Vec<f64>>) -> PyResult<DistanceMatrix> {
    DistanceMatrix::new(sources, values).map_err(value_err)
}

/// Split a paragraph into `(text, word_count, overlength)` chunks.
#[pyfunction]
#[pyo3(signature = (paragraph, max_words = 256))]
fn split_paragraph(paragraph: &str, max_words: usize) -> PyResult<Vec<(String, usize, bool)>> {
    let cfg = CorpusConfig {
        max_words,
        ..CorpusConfig::default()
    };
    Ok(corpus::split_paragraph(paragraph, &cfg)
        .map_err(value_err)?
        .into_iter()
        .map(|c| (c.text, c.word_count, c.overlength))
        .collect())
}

#[pyfunction]
fn cosine_distance(u: Vec<f64>, v: Vec<f64>) -> PyResult<f64> {
    measurement::cosine_distance(&u, &v).map_err(value_err)
}

/// Tau-b between two rankings given as lists of tie groups.
#[pyfunction]
fn kendall_tau(a: Vec<Vec<String>>, b: Vec<Vec<String>>) -> PyResult<f64> {
    measurement::kendall_tau(&a, &b).map_err(value_err)
}

/// Tau-b between two rank vectors; equal ranks are ties.
#[pyfunction]
fn tau_b(x: Vec<usize>, y: Vec<usize>) -> PyResult<f64> {
    measurement::tau_b(&x, &y).map_err(value_err)
}

/// For each anchor, the other sources by ascending distance, as tie groups.
#[pyfunction]
fn similarity_rankings(
    sources: Vec<String>,
    distances: Vec<Vec<f64>>,
) -> PyResult<BTreeMap<String, Vec<Vec<String>>>> {
    let dm = matrix(sources, distances)?;
    Ok(measurement::similarity_rankings(&dm)
        .map_err(value_err)?
        .into_iter()
        .map(|r| (r.anchor.clone(), r.tie_groups()))
        .collect())
}

/// Complete-linkage merges as `(left, right, distance)`.
#[pyfunction]
fn agglomerative_cluster(
    sources: Vec<String>,
    distances: Vec<Vec<f64>>,
) -> PyResult<Merges> {
    let dm = matrix(sources, distances)?;
    Ok(measurement::agglomerative_cluster(&dm)
        .map_err(value_err)?
        .merges
        .into_iter()
        .map(|m| (m.left, m.right, m.distance))
        .collect())
}

/// Survey table in CSV form to per-outlet `{category: ratio}` profiles.
#[pyfunction]
#[pyo3(signature = (csv_text, baseline = None))]
fn normalize_survey(
    csv_text: &str,
    baseline: Option<&str>,
) -> PyResult<BTreeMap<String, BTreeMap<String, f64>>> {
    let table = SurveyTable::from_reader(csv_text.as_bytes(), baseline, "<python>").map_err(value_err)?;
    Ok(groundtruth::normalize_survey(&table)
        .map_err(value_err)?
        .into_iter()
        .map(|p| (p.outlet, p.categories.into_iter().zip(p.values).collect()))
        .collect())
}

/// Leaning label (e.g. "Lean Left") to its score on the -2..2 scale.
#[pyfunction]
fn leaning_score(label: &str) -> PyResult<i8> {
    Ok(label.parse::<Leaning>().map_err(value_err)?.score())
}

/// Union-and-zero-fill alignment of per-source `{token: value}` maps.
/// Returns the vocabulary and one row per source.
#[pyfunction]
fn align(
    distributions: BTreeMap<String, BTreeMap<String, f64>>,
) -> PyResult<Aligned> {
    let scores = distributions
        .into_iter()
        .map(|(s, d)| {
            let entries = d
                .into_iter()
                .map(|(token, value)| WeightedToken {
                    token,
                    value,
                    floored: false,
                })
                .collect();
            (
                s,
                FramingScores {
                    prompt_id: String::new(),
                    entries,
                },
            )
        })
        .collect();
    let m = representation::align(&scores, "").map_err(value_err)?;
    Ok((m.vocabulary, m.rows))
}

/// N-grams shared by at least `min_sources` sources (all when omitted).
#[pyfunction]
#[pyo3(signature = (texts_by_source, n, min_sources = None))]
fn extract_shared_ngrams(
    texts_by_source: BTreeMap<String, Vec<String>>,
    n: usize,
    min_sources: Option<usize>,
) -> PyResult<Vec<Vec<String>>> {
    let sets = texts_by_source
        .into_iter()
        .map(|(s, texts)| {
            let insts = texts
                .into_iter()
                .enumerate()
                .map(|(i, t)| corpus::Instance::new(format!("{s}/{i}"), t, s.clone(), "py"))
                .collect::<Result<Vec<_>, _>>()
                .map_err(value_err)?;
            Ok((s, insts))
        })
        .collect::<PyResult<BTreeMap<_, _>>>()?;
    let min = min_sources.map_or(MinSources::All, MinSources::AtLeast);
    promptgen::extract_shared_ngrams(&sets, n, min).map_err(value_err)
}

/// The built-in manual prompts for a topic as `(id, text_with_mask, candidates)`.
#[pyfunction]
fn manual_prompts(topic: &str, terms: Vec<String>) -> PyResult<Vec<(String, String, Vec<String>)>> {
    let refs: Vec<&str> = terms.iter().map(String::as_str).collect();
    let templates = TemplateSet::default_for(topic, &refs).templates(topic);
    Ok(promptgen::expand_manual_templates(&templates)
        .map_err(value_err)?
        .into_iter()
        .map(|p| (p.id, p.text_with_mask, p.candidates.unwrap_or_default()))
        .collect())
}

/// TF-IDF vectorizer over word n-grams.
#[pyclass(name = "TfidfModel", module = "framing_py")]
struct PyTfidf {
    inner: TfidfModel,
}

#[pymethods]
impl PyTfidf {
    #[new]
    #[pyo3(signature = (docs, max_n = 3))]
    fn new(docs: Vec<String>, max_n: usize) -> PyResult<Self> {
        let refs: Vec<&str> = docs.iter().map(String::as_str).collect();
        Ok(PyTfidf {
            inner: TfidfModel::fit_ngrams(refs, max_n).map_err(value_err)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn vocabulary(&self) -> BTreeMap<String, usize> {
        self.inner.vocabulary.clone()
    }

    fn embed(&self, text: &str) -> Vec<f64> {
        self.inner.embed(text).vector
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(value_err)
    }
}

#[pymodule]
fn framing_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(split_paragraph, m)?)?;
    m.add_function(wrap_pyfunction!(cosine_distance, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(tau_b, m)?)?;
    m.add_function(wrap_pyfunction!(similarity_rankings, m)?)?;
    m.add_function(wrap_pyfunction!(agglomerative_cluster, m)?)?;
    m.add_function(wrap_pyfunction!(normalize_survey, m)?)?;
    m.add_function(wrap_pyfunction!(leaning_score, m)?)?;
    m.add_function(wrap_pyfunction!(align, m)?)?;
    m.add_function(wrap_pyfunction!(extract_shared_ngrams, m)?)?;
    m.add_function(wrap_pyfunction!(manual_prompts, m)?)?;
    m.add_class::<PyTfidf>()?;
    Ok(())
}
