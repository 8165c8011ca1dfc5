//! Collapsed Gibbs sampling LDA over unigram tokens.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{BaselineError, ARTIFACT_VERSION};
use crate::text::token_strings;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LdaConfig {
    pub num_topics: usize,
    /// Document-topic prior; `None` means `50 / num_topics`.
    pub alpha: Option<f64>,
    pub beta: f64,
    /// Full Gibbs sweeps over the training corpus.
    pub passes: usize,
    /// Sweeps per document when embedding.
    pub inference_iterations: usize,
    pub max_vocab: usize,
    pub seed: u64,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            num_topics: 10,
            alpha: None,
            beta: 0.01,
            passes: 2,
            inference_iterations: 20,
            max_vocab: 2_000_000,
            seed: 42,
        }
    }
}

impl LdaConfig {
    pub fn alpha(&self) -> f64 {
        self.alpha.unwrap_or(50.0 / self.num_topics as f64)
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        let bad = |m: &str| Err(BaselineError::Config(m.into()));
        if self.num_topics == 0 {
            return bad("num_topics must be positive");
        }
        if !(self.alpha() > 0.0 && self.alpha().is_finite()) {
            return bad("alpha must be positive");
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return bad("beta must be positive");
        }
        if self.max_vocab == 0 {
            return bad("max_vocab must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub version: u32,
    pub config: LdaConfig,
    pub vocabulary: BTreeMap<String, usize>,
    /// `topic_word_counts[k][w]`.
    pub topic_word_counts: Vec<Vec<u64>>,
    pub topic_totals: Vec<u64>,
    /// Final topic assignment of every training token, per document.
    pub assignments: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaEmbedding {
    /// Smoothed topic proportions; sums to 1.
    pub theta: Vec<f64>,
    /// No in-vocabulary word; `theta` is uniform.
    pub empty: bool,
}

fn sample(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

impl LdaModel {
    pub fn fit<'a, I>(docs: I, config: &LdaConfig) -> Result<Self, BaselineError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        config.validate()?;
        let tokenized: Vec<Vec<String>> = docs.into_iter().map(token_strings).collect();
        if tokenized.is_empty() {
            return Err(BaselineError::EmptyCorpus);
        }
        let mut freq: HashMap<&str, u64> = HashMap::new();
        for t in tokenized.iter().flatten() {
            *freq.entry(t.as_str()).or_default() += 1;
        }
        let mut by_freq: Vec<(&str, u64)> = freq.into_iter().collect();
        by_freq.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        by_freq.truncate(config.max_vocab);
        let mut kept: Vec<&str> = by_freq.into_iter().map(|p| p.0).collect();
        kept.sort_unstable();
        let vocabulary: BTreeMap<String, usize> = kept
            .iter()
            .enumerate()
            .map(|(i, w)| (w.to_string(), i))
            .collect();

        let docs: Vec<Vec<usize>> = tokenized
            .iter()
            .map(|d| d.iter().filter_map(|t| vocabulary.get(t).copied()).collect())
            .collect();
        let k = config.num_topics;
        let v = vocabulary.len();
        let (alpha, beta) = (config.alpha(), config.beta);
        let vbeta = v as f64 * beta;

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut nkw = vec![vec![0u64; v]; k];
        let mut nk = vec![0u64; k];
        let mut ndk = vec![vec![0u64; k]; docs.len()];
        let mut z: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
        for (d, doc) in docs.iter().enumerate() {
            let zd: Vec<usize> = doc.iter().map(|_| rng.random_range(0..k)).collect();
            for (&w, &t) in doc.iter().zip(&zd) {
                nkw[t][w] += 1;
                nk[t] += 1;
                ndk[d][t] += 1;
            }
            z.push(zd);
        }
        let mut weights = vec![0.0; k];
        for _ in 0..config.passes {
            for (d, doc) in docs.iter().enumerate() {
                for (i, &w) in doc.iter().enumerate() {
                    let old = z[d][i];
                    nkw[old][w] -= 1;
                    nk[old] -= 1;
                    ndk[d][old] -= 1;
                    for t in 0..k {
                        weights[t] = (ndk[d][t] as f64 + alpha) * (nkw[t][w] as f64 + beta)
                            / (nk[t] as f64 + vbeta);
                    }
                    let new = sample(&mut rng, &weights);
                    nkw[new][w] += 1;
                    nk[new] += 1;
                    ndk[d][new] += 1;
                    z[d][i] = new;
                }
            }
        }
        Ok(LdaModel {
            version: ARTIFACT_VERSION,
            config: config.clone(),
            vocabulary,
            topic_word_counts: nkw,
            topic_totals: nk,
            assignments: z,
        })
    }

    pub fn num_topics(&self) -> usize {
        self.config.num_topics
    }

    /// Smoothed topic-word distribution of topic `k`.
    pub fn topic_word(&self, k: usize) -> Vec<f64> {
        let v = self.vocabulary.len() as f64;
        let denom = self.topic_totals[k] as f64 + v * self.config.beta;
        self.topic_word_counts[k]
            .iter()
            .map(|&c| (c as f64 + self.config.beta) / denom)
            .collect()
    }

    /// Topic proportions of `text` by Gibbs sampling its assignments against
    /// the fixed trained counts. The chain is seeded from the model seed so
    /// a text always gets the same embedding.
    pub fn embed(&self, text: &str) -> LdaEmbedding {
        let k = self.num_topics();
        let doc: Vec<usize> = token_strings(text)
            .iter()
            .filter_map(|t| self.vocabulary.get(t).copied())
            .collect();
        if doc.is_empty() {
            return LdaEmbedding {
                theta: vec![1.0 / k as f64; k],
                empty: true,
            };
        }
        let (alpha, beta) = (self.config.alpha(), self.config.beta);
        let vbeta = self.vocabulary.len() as f64 * beta;
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        let mut z: Vec<usize> = doc.iter().map(|_| rng.random_range(0..k)).collect();
        let mut ndk = vec![0u64; k];
        for &t in &z {
            ndk[t] += 1;
        }
        let mut weights = vec![0.0; k];
        for _ in 0..self.config.inference_iterations {
            for (i, &w) in doc.iter().enumerate() {
                ndk[z[i]] -= 1;
                for t in 0..k {
                    weights[t] = (ndk[t] as f64 + alpha)
                        * (self.topic_word_counts[t][w] as f64 + beta)
                        / (self.topic_totals[t] as f64 + vbeta);
                }
                z[i] = sample(&mut rng, &weights);
                ndk[z[i]] += 1;
            }
        }
        let denom = doc.len() as f64 + k as f64 * alpha;
        LdaEmbedding {
            theta: ndk.iter().map(|&c| (c as f64 + alpha) / denom).collect(),
            empty: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Vec<String> {
        let mut docs = Vec::new();
        for i in 0..10 {
            docs.push(format!("apple banana cherry apple banana cherry date apple {i}"));
            docs.push(format!("xenon yttrium zinc xenon yttrium zinc wolfram xenon {i}"));
        }
        docs
    }

    #[test]
    fn embeddings_sum_to_one() {
        let docs = corpus();
        let m = LdaModel::fit(docs.iter().map(String::as_str), &LdaConfig::default()).unwrap();
        for d in &docs {
            let e = m.embed(d);
            assert!((e.theta.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            assert!(e.theta.iter().all(|&x| x > 0.0));
        }
        for k in 0..m.num_topics() {
            assert!((m.topic_word(k).iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        let e = m.embed("");
        assert!(e.empty);
        assert_eq!(e.theta, vec![0.1; 10]);
    }

    #[test]
    fn deterministic_under_seed() {
        let docs = corpus();
        let cfg = LdaConfig::default();
        let a = LdaModel::fit(docs.iter().map(String::as_str), &cfg).unwrap();
        let b = LdaModel::fit(docs.iter().map(String::as_str), &cfg).unwrap();
        assert_eq!(a.assignments, b.assignments);
        assert_eq!(a.embed(&docs[0]).theta, b.embed(&docs[0]).theta);
    }

    #[test]
    fn disjoint_vocabularies_separate() {
        let docs = corpus();
        let cfg = LdaConfig {
            num_topics: 2,
            alpha: Some(0.1),
            passes: 50,
            ..LdaConfig::default()
        };
        let m = LdaModel::fit(docs.iter().map(String::as_str), &cfg).unwrap();
        let argmax = |d: &str| {
            let t = m.embed(d).theta;
            usize::from(t[1] > t[0])
        };
        let fruit = argmax(&docs[0]);
        let metal = argmax(&docs[1]);
        assert_ne!(fruit, metal);
        for pair in docs.chunks(2) {
            assert_eq!(argmax(&pair[0]), fruit);
            assert_eq!(argmax(&pair[1]), metal);
        }
    }

    #[test]
    fn vocabulary_cap_keeps_most_frequent() {
        let cfg = LdaConfig {
            max_vocab: 2,
            ..LdaConfig::default()
        };
        let m = LdaModel::fit(vec!["a a a b b c"], &cfg).unwrap();
        assert_eq!(m.vocabulary.keys().collect::<Vec<_>>(), vec!["a", "b"]);
        assert!(LdaModel::fit(Vec::<&str>::new(), &cfg).is_err());
        let bad = LdaConfig {
            num_topics: 0,
            ..LdaConfig::default()
        };
        assert!(LdaModel::fit(vec!["a"], &bad).is_err());
    }
}
