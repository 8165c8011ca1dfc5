use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::MeasureError;
use crate::representation::{FramingMatrix, TopicRepresentation};

/// `1 - u.v / (|u| |v|)`, clamped to [0, 2]. Zero vectors have no direction
/// and yield [`MeasureError::UndefinedDistance`].
pub fn cosine_distance(u: &[f64], v: &[f64]) -> Result<f64, MeasureError> {
    if u.len() != v.len() {
        return Err(MeasureError::LengthMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Err(MeasureError::UndefinedDistance);
    }
    Ok((1.0 - dot / (nu.sqrt() * nv.sqrt())).clamp(0.0, 2.0))
}

/// Symmetric, zero-diagonal matrix of nonnegative distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub sources: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn new(sources: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, MeasureError> {
        let n = sources.len();
        let bad = |m: String| Err(MeasureError::InvalidMatrix(m));
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return bad(format!("expected {n}x{n} values"));
        }
        for i in 0..n {
            if values[i][i] != 0.0 {
                return bad(format!("diagonal entry {i} is {}", values[i][i]));
            }
            for j in 0..n {
                let v = values[i][j];
                if !(v.is_finite() && v >= 0.0) {
                    return bad(format!("entry ({i},{j}) = {v}"));
                }
                if v != values[j][i] {
                    return bad(format!("asymmetric at ({i},{j})"));
                }
            }
        }
        Ok(DistanceMatrix { sources, values })
    }

    /// Build from a pairwise function evaluated on the upper triangle.
    pub fn from_fn<F>(sources: Vec<String>, mut f: F) -> Result<Self, MeasureError>
    where
        F: FnMut(usize, usize) -> Result<f64, MeasureError>,
    {
        let n = sources.len();
        let mut values = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let d = f(i, j)?;
                values[i][j] = d;
                values[j][i] = d;
            }
        }
        DistanceMatrix::new(sources, values)
    }

    pub fn index(&self, source: &str) -> Option<usize> {
        self.sources.iter().position(|s| s == source)
    }

    pub fn get(&self, a: &str, b: &str) -> Option<f64> {
        Some(self.values[self.index(a)?][self.index(b)?])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairDistance {
    pub mean: f64,
    pub used: usize,
    /// Prompts where either row was all zeros.
    pub excluded: Vec<String>,
}

fn row<'a>(m: &'a FramingMatrix, source: &str) -> Result<&'a [f64], MeasureError> {
    m.row(source).ok_or_else(|| MeasureError::MissingSource {
        outlet: source.to_string(),
        prompt_id: m.prompt_id.clone(),
    })
}

/// Mean cosine distance between two sources over a topic's prompts,
/// excluding prompts where the distance is undefined.
pub fn pair_distance(
    rep: &TopicRepresentation,
    a: &str,
    b: &str,
) -> Result<PairDistance, MeasureError> {
    if rep.matrices.is_empty() {
        return Err(MeasureError::EmptyRepresentation);
    }
    let mut sum = 0.0;
    let mut used = 0;
    let mut excluded = Vec::new();
    for m in &rep.matrices {
        let (ra, rb) = (row(m, a)?, row(m, b)?);
        if a == b {
            used += 1;
            continue;
        }
        match cosine_distance(ra, rb) {
            Ok(d) => {
                sum += d;
                used += 1;
            }
            Err(MeasureError::UndefinedDistance) => excluded.push(m.prompt_id.clone()),
            Err(e) => return Err(e),
        }
    }
    if used == 0 {
        return Err(MeasureError::AllPromptsUndefined(a.into(), b.into()));
    }
    if !excluded.is_empty() {
        log::info!(
            "({a}, {b}): {} prompt(s) excluded for undefined distance",
            excluded.len()
        );
    }
    Ok(PairDistance {
        mean: if a == b { 0.0 } else { sum / used as f64 },
        used,
        excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairExclusion {
    pub a: String,
    pub b: String,
    pub prompts: Vec<String>,
}

/// Source-by-source mean distances for a topic. Pairs are computed in
/// parallel; results are placed deterministically.
pub fn topic_distance_matrix(
    rep: &TopicRepresentation,
) -> Result<(DistanceMatrix, Vec<PairExclusion>), MeasureError> {
    let sources = rep.sources();
    let pairs: Vec<(usize, usize)> = (0..sources.len())
        .flat_map(|i| (i + 1..sources.len()).map(move |j| (i, j)))
        .collect();
    let results: Vec<Result<PairDistance, MeasureError>> = pairs
        .par_iter()
        .map(|&(i, j)| pair_distance(rep, &sources[i], &sources[j]))
        .collect();
    let n = sources.len();
    let mut values = vec![vec![0.0; n]; n];
    let mut exclusions = Vec::new();
    for (&(i, j), r) in pairs.iter().zip(results) {
        let pd = r?;
        values[i][j] = pd.mean;
        values[j][i] = pd.mean;
        if !pd.excluded.is_empty() {
            exclusions.push(PairExclusion {
                a: sources[i].clone(),
                b: sources[j].clone(),
                prompts: pd.excluded,
            });
        }
    }
    Ok((DistanceMatrix::new(sources, values)?, exclusions))
}

/// Distances from a single prompt's matrix. Fails if any pair is undefined.
pub fn prompt_distance_matrix(m: &FramingMatrix) -> Result<DistanceMatrix, MeasureError> {
    let sources: Vec<String> = m.rows.keys().cloned().collect();
    let rows: Vec<&Vec<f64>> = m.rows.values().collect();
    DistanceMatrix::from_fn(sources, |i, j| cosine_distance(rows[i], rows[j]))
}
