use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BaselineError, ARTIFACT_VERSION};
use crate::text::token_strings;

/// Contiguous n-grams of length 1..=`max_n`, joined with single spaces.
pub fn ngrams(tokens: &[String], max_n: usize) -> Vec<String> {
    let mut out = Vec::new();
    for n in 1..=max_n {
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub version: u32,
    pub max_n: usize,
    /// N-gram to column index; columns are in lexicographic n-gram order.
    pub vocabulary: BTreeMap<String, usize>,
    pub document_frequencies: Vec<u64>,
    pub document_count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TfidfEmbedding {
    pub vector: Vec<f64>,
    /// No n-gram of the document is in the vocabulary.
    pub zero: bool,
}

impl TfidfModel {
    /// Fit over unigrams to trigrams.
    pub fn fit<'a, I>(docs: I) -> Result<Self, BaselineError>
    where
        I: IntoParallelIterator<Item = &'a str>,
    {
        Self::fit_ngrams(docs, 3)
    }

    pub fn fit_ngrams<'a, I>(docs: I, max_n: usize) -> Result<Self, BaselineError>
    where
        I: IntoParallelIterator<Item = &'a str>,
    {
        if max_n == 0 {
            return Err(BaselineError::Config("n-gram length must be positive".into()));
        }
        let sets: Vec<BTreeSet<String>> = docs
            .into_par_iter()
            .map(|d| ngrams(&token_strings(d), max_n).into_iter().collect())
            .collect();
        if sets.is_empty() {
            return Err(BaselineError::EmptyCorpus);
        }
        let mut df: BTreeMap<String, u64> = BTreeMap::new();
        for set in sets.iter() {
            for g in set {
                *df.entry(g.clone()).or_default() += 1;
            }
        }
        let vocabulary = df.keys().enumerate().map(|(i, g)| (g.clone(), i)).collect();
        Ok(TfidfModel {
            version: ARTIFACT_VERSION,
            max_n,
            vocabulary,
            document_frequencies: df.into_values().collect(),
            document_count: sets.len() as u64,
        })
    }

    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    /// `ln((1 + N) / (1 + df)) + 1`.
    pub fn idf(&self, column: usize) -> f64 {
        let n = self.document_count as f64;
        let df = self.document_frequencies[column] as f64;
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    }

    /// Nonzero (column, weight) pairs in column order, L2-normalized.
    pub fn embed_sparse(&self, text: &str) -> Vec<(usize, f64)> {
        let mut tf: HashMap<usize, u64> = HashMap::new();
        for g in ngrams(&token_strings(text), self.max_n) {
            if let Some(&c) = self.vocabulary.get(&g) {
                *tf.entry(c).or_default() += 1;
            }
        }
        let mut w: Vec<(usize, f64)> = tf
            .into_iter()
            .map(|(c, n)| (c, n as f64 * self.idf(c)))
            .collect();
        w.sort_by_key(|p| p.0);
        let norm = w.iter().map(|p| p.1 * p.1).sum::<f64>().sqrt();
        if norm > 0.0 {
            for p in &mut w {
                p.1 /= norm;
            }
        }
        w
    }

    pub fn embed(&self, text: &str) -> TfidfEmbedding {
        let sparse = self.embed_sparse(text);
        let mut vector = vec![0.0; self.dim()];
        for &(c, v) in &sparse {
            vector[c] = v;
        }
        TfidfEmbedding {
            vector,
            zero: sparse.is_empty(),
        }
    }

    /// Embed documents in parallel; output order is input order.
    pub fn embed_all<'a, I>(&self, docs: I) -> Vec<TfidfEmbedding>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let docs: Vec<&str> = docs.into_iter().collect();
        docs.par_iter().map(|d| self.embed(d)).collect()
    }
}
