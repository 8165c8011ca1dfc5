use serde::{Deserialize, Serialize};

use super::{DistanceMatrix, MeasureError};

/// Ordered tie groups: items in the same group share a rank.
pub type Ranking = Vec<Vec<String>>;

/// The other sources ordered from closest to farthest from `anchor`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRanking {
    pub anchor: String,
    pub ranked: Vec<String>,
    pub distances: Vec<f64>,
    /// Some adjacent entries share a distance; their relative order is
    /// lexicographic.
    pub tied: bool,
}

impl SimilarityRanking {
    /// Group entries with exactly equal distances.
    pub fn tie_groups(&self) -> Ranking {
        let mut groups: Ranking = Vec::new();
        let mut last: Option<f64> = None;
        for (s, &d) in self.ranked.iter().zip(&self.distances) {
            match (last, groups.last_mut()) {
                (Some(prev), Some(g)) if prev == d => g.push(s.clone()),
                _ => groups.push(vec![s.clone()]),
            }
            last = Some(d);
        }
        groups
    }
}

/// One ranking per source, in matrix order. Rankings need not be symmetric.
pub fn similarity_rankings(dm: &DistanceMatrix) -> Result<Vec<SimilarityRanking>, MeasureError> {
    let n = dm.sources.len();
    if n < 3 {
        return Err(MeasureError::TooFewSources { needed: 3, got: n });
    }
    Ok((0..n)
        .map(|i| {
            let mut others: Vec<(f64, &String)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dm.values[i][j], &dm.sources[j]))
                .collect();
            others.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
            let tied = others.windows(2).any(|w| w[0].0 == w[1].0);
            SimilarityRanking {
                anchor: dm.sources[i].clone(),
                ranked: others.iter().map(|(_, s)| (*s).clone()).collect(),
                distances: others.iter().map(|(d, _)| *d).collect(),
                tied,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm3(ab: f64, ac: f64, bc: f64) -> DistanceMatrix {
        DistanceMatrix::new(
            vec!["A".into(), "B".into(), "C".into()],
            vec![vec![0.0, ab, ac], vec![ab, 0.0, bc], vec![ac, bc, 0.0]],
        )
        .unwrap()
    }

    #[test]
    fn basic_and_asymmetric_rankings() {
        let r = similarity_rankings(&dm3(0.1, 0.3, 0.05)).unwrap();
        assert_eq!(r[0].ranked, vec!["B", "C"]);
        assert_eq!(r[0].distances, vec![0.1, 0.3]);
        assert_eq!(r[1].ranked, vec!["C", "A"]);
        assert!(!r[0].tied);
    }

    #[test]
    fn ties_are_lexicographic_and_flagged() {
        let r = similarity_rankings(&dm3(0.2, 0.2, 0.5)).unwrap();
        assert_eq!(r[0].ranked, vec!["B", "C"]);
        assert!(r[0].tied);
        assert_eq!(r[0].tie_groups(), vec![vec!["B".to_string(), "C".to_string()]]);
        assert_eq!(r[1].tie_groups().len(), 2);
    }

    #[test]
    fn needs_three_sources() {
        let dm = DistanceMatrix::new(
            vec!["A".into(), "B".into()],
            vec![vec![0.0, 1.0], vec![1.0, 0.0]],
        )
        .unwrap();
        assert!(matches!(
            similarity_rankings(&dm),
            Err(MeasureError::TooFewSources { .. })
        ));
    }
}
