//! Reference similarity rankings of outlets from audience surveys (per-ideology
//! shares normalized by the all-adults share) and from five-point leaning
//! labels.

use std::collections::BTreeSet;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::measurement::{
    cosine_distance, similarity_rankings, DistanceMatrix, MeasureError, SimilarityRanking,
};

#[derive(Debug, thiserror::Error)]
pub enum GroundTruthError {
    #[error("outlet {0} has a zero baseline share; its profile is undefined")]
    ZeroBaseline(String),
    #[error("no baseline category found (expected {0:?})")]
    NoBaseline(String),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("unknown leaning label {0:?}")]
    UnknownLeaning(String),
    #[error("malformed survey table: {0}")]
    Malformed(String),
    #[error(transparent)]
    Measure(#[from] MeasureError),
}

/// Audience shares (percentages) per outlet and ideology category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyTable {
    pub outlets: Vec<String>,
    pub categories: Vec<String>,
    /// Index into `categories` of the all-adults column.
    pub baseline: usize,
    /// `shares[outlet][category]`.
    pub shares: Vec<Vec<f64>>,
}

impl SurveyTable {
    pub fn validate(&self) -> Result<(), GroundTruthError> {
        let bad = |m: String| Err(GroundTruthError::Malformed(m));
        if self.baseline >= self.categories.len() {
            return bad("baseline index out of range".into());
        }
        if self.shares.len() != self.outlets.len() {
            return bad("one share row per outlet required".into());
        }
        for (o, row) in self.outlets.iter().zip(&self.shares) {
            if row.len() != self.categories.len() {
                return bad(format!("{o}: expected {} shares", self.categories.len()));
            }
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return bad(format!("{o}: non-finite share {v}"));
            }
        }
        Ok(())
    }

    /// Parse a delimited table: a header row of categories after an outlet
    /// column, then one row per outlet. Percent signs are optional. The
    /// baseline is the column named `baseline`, or else the first column
    /// whose name starts with "all".
    pub fn from_reader<R: std::io::Read>(
        reader: R,
        baseline: Option<&str>,
        label: &str,
    ) -> Result<Self, GroundTruthError> {
        let parse_err = |message: String| GroundTruthError::Parse {
            path: label.to_string(),
            message,
        };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| parse_err(e.to_string()))?.clone();
        let categories: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let wanted = baseline.map(str::to_lowercase);
        let baseline_idx = categories
            .iter()
            .position(|c| match &wanted {
                Some(w) => c.to_lowercase() == *w,
                None => c.to_lowercase().starts_with("all"),
            })
            .ok_or_else(|| {
                GroundTruthError::NoBaseline(baseline.unwrap_or("All ...").to_string())
            })?;
        let mut outlets = Vec::new();
        let mut shares = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| parse_err(e.to_string()))?;
            let outlet = rec.get(0).unwrap_or_default().to_string();
            let row = rec
                .iter()
                .skip(1)
                .map(|v| {
                    v.trim_end_matches('%')
                        .trim()
                        .parse::<f64>()
                        .map_err(|e| parse_err(format!("row {}: {v:?}: {e}", i + 2)))
                })
                .collect::<Result<Vec<f64>, _>>()?;
            outlets.push(outlet);
            shares.push(row);
        }
        let t = SurveyTable {
            outlets,
            categories,
            baseline: baseline_idx,
            shares,
        };
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path, baseline: Option<&str>) -> Result<Self, GroundTruthError> {
        let f = std::fs::File::open(path).map_err(|e| GroundTruthError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_reader(f, baseline, &path.display().to_string())
    }
}

/// Share ratios relative to the all-adults baseline, one per non-baseline
/// category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdeologyProfile {
    pub outlet: String,
    pub categories: Vec<String>,
    pub values: Vec<f64>,
}

pub fn normalize_survey(table: &SurveyTable) -> Result<Vec<IdeologyProfile>, GroundTruthError> {
    table.validate()?;
    let categories: Vec<String> = table
        .categories
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != table.baseline)
        .map(|(_, c)| c.clone())
        .collect();
    table
        .outlets
        .iter()
        .zip(&table.shares)
        .map(|(outlet, row)| {
            let base = row[table.baseline];
            if base <= 0.0 {
                return Err(GroundTruthError::ZeroBaseline(outlet.clone()));
            }
            Ok(IdeologyProfile {
                outlet: outlet.clone(),
                categories: categories.clone(),
                values: row
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != table.baseline)
                    .map(|(_, v)| v / base)
                    .collect(),
            })
        })
        .collect()
}

pub fn survey_distance(a: &IdeologyProfile, b: &IdeologyProfile) -> Result<f64, MeasureError> {
    cosine_distance(&a.values, &b.values)
}

/// Five-point political leaning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Leaning {
    Left,
    LeanLeft,
    Center,
    LeanRight,
    Right,
}

impl Leaning {
    pub fn score(self) -> i8 {
        match self {
            Leaning::Left => -2,
            Leaning::LeanLeft => -1,
            Leaning::Center => 0,
            Leaning::LeanRight => 1,
            Leaning::Right => 2,
        }
    }

    pub fn from_score(v: i8) -> Option<Self> {
        Some(match v {
            -2 => Leaning::Left,
            -1 => Leaning::LeanLeft,
            0 => Leaning::Center,
            1 => Leaning::LeanRight,
            2 => Leaning::Right,
            _ => return None,
        })
    }
}

impl FromStr for Leaning {
    type Err = GroundTruthError;

    /// Accepts labels ("lean left", "Lean-Left", "center") or the integers -2..2.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_lowercase()
            .chars()
            .map(|c| if c == ' ' || c == '_' { '-' } else { c })
            .collect();
        let l = match norm.as_str() {
            "left" => Leaning::Left,
            "lean-left" => Leaning::LeanLeft,
            "center" | "centre" => Leaning::Center,
            "lean-right" => Leaning::LeanRight,
            "right" => Leaning::Right,
            other => other
                .parse::<i8>()
                .ok()
                .and_then(Leaning::from_score)
                .ok_or_else(|| GroundTruthError::UnknownLeaning(s.to_string()))?,
        };
        Ok(l)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaningScore {
    pub outlet: String,
    pub leaning: Leaning,
}

pub fn leaning_distance(a: &LeaningScore, b: &LeaningScore) -> f64 {
    f64::from((a.leaning.score() - b.leaning.score()).abs())
}

/// Read an `outlet,leaning` table with a header row.
pub fn load_leanings(path: &Path) -> Result<Vec<LeaningScore>, GroundTruthError> {
    let label = path.display().to_string();
    let parse_err = |message: String| GroundTruthError::Parse {
        path: label.clone(),
        message,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(e.to_string()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_err(e.to_string()))?;
        match (rec.get(0), rec.get(1)) {
            (Some(o), Some(l)) => out.push(LeaningScore {
                outlet: o.to_string(),
                leaning: l.parse()?,
            }),
            _ => return Err(parse_err(format!("expected two columns, got {}", rec.len()))),
        }
    }
    Ok(out)
}

/// A loaded ground-truth dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum GroundTruth {
    Survey(Vec<IdeologyProfile>),
    Leaning(Vec<LeaningScore>),
}

impl GroundTruth {
    pub fn outlets(&self) -> Vec<String> {
        match self {
            GroundTruth::Survey(p) => p.iter().map(|x| x.outlet.clone()).collect(),
            GroundTruth::Leaning(s) => s.iter().map(|x| x.outlet.clone()).collect(),
        }
    }

    /// Keep only `outlets`. Returns the outlets dropped from this dataset and
    /// the requested outlets it does not cover.
    pub fn restrict(&self, outlets: &[String]) -> (GroundTruth, Vec<String>, Vec<String>) {
        let keep: BTreeSet<&str> = outlets.iter().map(String::as_str).collect();
        let have: BTreeSet<String> = self.outlets().into_iter().collect();
        let dropped: Vec<String> = have
            .iter()
            .filter(|o| !keep.contains(o.as_str()))
            .cloned()
            .collect();
        let missing: Vec<String> = keep
            .iter()
            .filter(|o| !have.contains(**o))
            .map(|o| o.to_string())
            .collect();
        for o in &dropped {
            log::warn!("ground truth outlet {o} is not in the experiment; dropped");
        }
        for o in &missing {
            log::warn!("experiment outlet {o} has no ground truth; dropped");
        }
        let restricted = match self {
            GroundTruth::Survey(p) => GroundTruth::Survey(
                p.iter()
                    .filter(|x| keep.contains(x.outlet.as_str()))
                    .cloned()
                    .collect(),
            ),
            GroundTruth::Leaning(s) => GroundTruth::Leaning(
                s.iter()
                    .filter(|x| keep.contains(x.outlet.as_str()))
                    .cloned()
                    .collect(),
            ),
        };
        (restricted, dropped, missing)
    }

    /// Pairwise distances with outlets in sorted order.
    pub fn distance_matrix(&self) -> Result<DistanceMatrix, GroundTruthError> {
        Ok(match self {
            GroundTruth::Survey(p) => {
                let mut p = p.clone();
                p.sort_by(|a, b| a.outlet.cmp(&b.outlet));
                DistanceMatrix::from_fn(p.iter().map(|x| x.outlet.clone()).collect(), |i, j| {
                    survey_distance(&p[i], &p[j])
                })?
            }
            GroundTruth::Leaning(s) => {
                let mut s = s.clone();
                s.sort_by(|a, b| a.outlet.cmp(&b.outlet));
                DistanceMatrix::from_fn(s.iter().map(|x| x.outlet.clone()).collect(), |i, j| {
                    Ok(leaning_distance(&s[i], &s[j]))
                })?
            }
        })
    }
}

pub fn ground_truth_rankings(gt: &GroundTruth) -> Result<Vec<SimilarityRanking>, GroundTruthError> {
    Ok(similarity_rankings(&gt.distance_matrix()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SOA_S: &str = "\
outlet,All U.S. adults,Democrat/Lean Dem,Republican/Lean Rep,Liberal Dem,Cons/Mod Dem,Mod/Lib Rep,Conservative Rep
ABC News,33%,37%,30%,32%,42%,36%,26%
Breitbart,4%,0%,8%,0%,1%,3%,11%
";

    #[test]
    fn survey_ratios_match_worked_values() {
        let t = SurveyTable::from_reader(SOA_S.as_bytes(), None, "inline").unwrap();
        let p = normalize_survey(&t).unwrap();
        let abc = [1.12, 0.91, 0.97, 1.27, 1.09, 0.79];
        let breitbart = [0.00, 2.00, 0.00, 0.25, 0.75, 2.75];
        for (got, want) in p[0].values.iter().zip(abc) {
            assert!((got - want).abs() <= 0.005, "{got} vs {want}");
        }
        for (got, want) in p[1].values.iter().zip(breitbart) {
            assert!((got - want).abs() <= 0.005, "{got} vs {want}");
        }
        assert_eq!(p[0].categories.len(), 6);
    }

    #[test]
    fn cnn_democrat_ratio() {
        let t = SurveyTable {
            outlets: vec!["CNN".into()],
            categories: vec!["All".into(), "Democrat".into()],
            baseline: 0,
            shares: vec![vec![47.0, 67.0]],
        };
        let v = normalize_survey(&t).unwrap()[0].values[0];
        assert!((v - 1.43).abs() <= 0.005);
    }

    #[test]
    fn zero_baseline_names_outlet() {
        let t = SurveyTable {
            outlets: vec!["Ghost".into()],
            categories: vec!["All".into(), "D".into()],
            baseline: 0,
            shares: vec![vec![0.0, 1.0]],
        };
        assert!(matches!(normalize_survey(&t), Err(GroundTruthError::ZeroBaseline(o)) if o == "Ghost"));
    }

    #[test]
    fn baseline_rows_give_all_ones() {
        let t = SurveyTable {
            outlets: vec!["a".into(), "b".into()],
            categories: vec!["All".into(), "x".into(), "y".into()],
            baseline: 0,
            shares: vec![vec![20.0, 20.0, 20.0], vec![7.0, 7.0, 7.0]],
        };
        for p in normalize_survey(&t).unwrap() {
            assert_eq!(p.values, vec![1.0, 1.0]);
        }
    }

    #[test]
    fn leaning_labels_and_distance() {
        let s = |o: &str, l: &str| LeaningScore {
            outlet: o.into(),
            leaning: l.parse().unwrap(),
        };
        assert_eq!(leaning_distance(&s("a", "left"), &s("b", "right")), 4.0);
        assert_eq!(leaning_distance(&s("a", "Lean Left"), &s("b", "lean-left")), 0.0);
        assert_eq!(leaning_distance(&s("a", "center"), &s("b", "lean_right")), 1.0);
        assert_eq!(leaning_distance(&s("a", "-2"), &s("b", "2")), 4.0);
        assert!("far-left".parse::<Leaning>().is_err());
    }

    #[test]
    fn leaning_rankings_and_ties() {
        let gt = GroundTruth::Leaning(vec![
            LeaningScore { outlet: "A".into(), leaning: Leaning::Left },
            LeaningScore { outlet: "B".into(), leaning: Leaning::Center },
            LeaningScore { outlet: "C".into(), leaning: Leaning::Right },
            LeaningScore { outlet: "D".into(), leaning: Leaning::Right },
        ]);
        let r = ground_truth_rankings(&gt).unwrap();
        assert_eq!(r[0].ranked, vec!["B", "C", "D"]);
        assert!(r[0].tied);
        assert_eq!(r[0].tie_groups(), vec![vec!["B".to_string()], vec!["C".into(), "D".into()]]);
        assert!(r[1].tied);
    }

    #[test]
    fn restrict_reports_both_directions() {
        let gt = GroundTruth::Leaning(vec![
            LeaningScore { outlet: "A".into(), leaning: Leaning::Left },
            LeaningScore { outlet: "B".into(), leaning: Leaning::Center },
        ]);
        let (r, dropped, missing) = gt.restrict(&["A".into(), "Z".into()]);
        assert_eq!(r.outlets(), vec!["A"]);
        assert_eq!(dropped, vec!["B"]);
        assert_eq!(missing, vec!["Z"]);
    }

    #[test]
    fn load_leaning_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("mbr.csv");
        std::fs::write(&p, "outlet,leaning\ncnn,lean left\nfox,right\n").unwrap();
        let l = load_leanings(&p).unwrap();
        assert_eq!(l[1].leaning, Leaning::Right);
        std::fs::write(&p, "outlet,leaning\ncnn,sideways\n").unwrap();
        assert!(load_leanings(&p).is_err());
    }
}
