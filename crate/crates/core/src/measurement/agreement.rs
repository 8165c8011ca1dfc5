use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::{
    kendall_tau, prompt_distance_matrix, similarity_rankings, MeasureError, SimilarityRanking,
};
use crate::promptgen::MaskedPrompt;
use crate::representation::{FramingMatrix, TopicRepresentation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementReport {
    pub per_source_tau: BTreeMap<String, f64>,
    pub mean_tau: f64,
    /// Population standard deviation over anchors.
    pub std_tau: f64,
    /// Anchors whose tau is undefined (one side is a single tie group).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub undefined: Vec<String>,
}

pub(crate) fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-anchor tau-b between predicted and ground-truth rankings, plus the
/// mean and spread over anchors.
pub fn agreement(
    predicted: &[SimilarityRanking],
    truth: &[SimilarityRanking],
) -> Result<AgreementReport, MeasureError> {
    let truth: HashMap<&str, &SimilarityRanking> =
        truth.iter().map(|r| (r.anchor.as_str(), r)).collect();
    let mut per_source_tau = BTreeMap::new();
    let mut undefined = Vec::new();
    for p in predicted {
        let t = truth
            .get(p.anchor.as_str())
            .ok_or_else(|| MeasureError::AnchorMissing(p.anchor.clone()))?;
        match kendall_tau(&p.tie_groups(), &t.tie_groups()) {
            Ok(tau) => {
                per_source_tau.insert(p.anchor.clone(), tau);
            }
            Err(MeasureError::UndefinedTau) => undefined.push(p.anchor.clone()),
            Err(e) => return Err(e),
        }
    }
    if per_source_tau.is_empty() {
        return Err(MeasureError::NoDefinedTau);
    }
    let taus: Vec<f64> = per_source_tau.values().copied().collect();
    let (mean_tau, std_tau) = mean_std(&taus);
    Ok(AgreementReport {
        per_source_tau,
        mean_tau,
        std_tau,
        undefined,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub prompt_id: String,
    pub mean_tau: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceAgreement {
    pub records: Vec<InstanceRecord>,
    /// Prompts with an undefined pairwise distance or no defined tau.
    pub skipped: Vec<String>,
}

fn matrix_agreement(
    m: &FramingMatrix,
    truth: &[SimilarityRanking],
) -> Result<f64, MeasureError> {
    let dm = prompt_distance_matrix(m)?;
    Ok(agreement(&similarity_rankings(&dm)?, truth)?.mean_tau)
}

/// Mean tau computed from each prompt's own rankings.
pub fn instance_level_agreement(
    rep: &TopicRepresentation,
    truth: &[SimilarityRanking],
) -> Result<InstanceAgreement, MeasureError> {
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for m in &rep.matrices {
        match matrix_agreement(m, truth) {
            Ok(mean_tau) => records.push(InstanceRecord {
                prompt_id: m.prompt_id.clone(),
                mean_tau,
            }),
            Err(MeasureError::UndefinedDistance | MeasureError::NoDefinedTau) => {
                skipped.push(m.prompt_id.clone())
            }
            Err(e) => return Err(e),
        }
    }
    Ok(InstanceAgreement { records, skipped })
}

/// Equal-width bins over [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

pub fn histogram(records: &[InstanceRecord], bins: usize) -> Histogram {
    let bins = bins.max(1);
    let width = 2.0 / bins as f64;
    let edges = (0..=bins).map(|i| -1.0 + i as f64 * width).collect();
    let mut counts = vec![0; bins];
    for r in records {
        let b = (((r.mean_tau + 1.0) / width).floor() as isize).clamp(0, bins as isize - 1);
        counts[b as usize] += 1;
    }
    Histogram { edges, counts }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeRow {
    pub prompt_id: String,
    pub tau: f64,
    pub text_with_mask: Option<String>,
    pub gold_token: Option<String>,
    /// Highest-valued tokens per source.
    pub top_predictions: BTreeMap<String, Vec<(String, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeReport {
    pub worst: Vec<ExtremeRow>,
    pub best: Vec<ExtremeRow>,
    /// `k` exceeded the number of records.
    pub clamped: bool,
    /// A selection was extended to keep every record tied at its boundary.
    pub boundary_ties: bool,
}

/// The `k` lowest- and highest-tau prompts with their per-source top tokens.
pub fn extreme_instances(
    records: &[InstanceRecord],
    k: usize,
    rep: &TopicRepresentation,
    prompts: &[MaskedPrompt],
    top_n: usize,
) -> Result<ExtremeReport, MeasureError> {
    if records.is_empty() {
        return Err(MeasureError::NoRecords);
    }
    let clamped = k > records.len();
    if clamped {
        log::warn!("k = {k} exceeds {} records; clamping", records.len());
    }
    let k = k.min(records.len()).max(1);
    let matrices: HashMap<&str, &FramingMatrix> =
        rep.matrices.iter().map(|m| (m.prompt_id.as_str(), m)).collect();
    let prompts: HashMap<&str, &MaskedPrompt> =
        prompts.iter().map(|p| (p.id.as_str(), p)).collect();

    let row = |r: &InstanceRecord| {
        let p = prompts.get(r.prompt_id.as_str());
        let top_predictions = matrices
            .get(r.prompt_id.as_str())
            .map(|m| {
                m.rows
                    .keys()
                    .map(|s| (s.clone(), m.top_tokens(s, top_n)))
                    .collect()
            })
            .unwrap_or_default();
        ExtremeRow {
            prompt_id: r.prompt_id.clone(),
            tau: r.mean_tau,
            text_with_mask: p.map(|p| p.text_with_mask.clone()),
            gold_token: p.and_then(|p| p.gold_token.clone()),
            top_predictions,
        }
    };
    let mut asc: Vec<&InstanceRecord> = records.iter().collect();
    asc.sort_by(|a, b| {
        a.mean_tau
            .total_cmp(&b.mean_tau)
            .then_with(|| a.prompt_id.cmp(&b.prompt_id))
    });
    let mut desc = asc.clone();
    desc.sort_by(|a, b| {
        b.mean_tau
            .total_cmp(&a.mean_tau)
            .then_with(|| a.prompt_id.cmp(&b.prompt_id))
    });
    let take = |sorted: &[&InstanceRecord]| -> (Vec<ExtremeRow>, bool) {
        let boundary = sorted[k - 1].mean_tau;
        let n = k + sorted[k..]
            .iter()
            .take_while(|r| r.mean_tau == boundary)
            .count();
        (sorted[..n].iter().map(|r| row(r)).collect(), n > k)
    };
    let (worst, tw) = take(&asc);
    let (best, tb) = take(&desc);
    Ok(ExtremeReport {
        worst,
        best,
        clamped,
        boundary_ties: tw || tb,
    })
}
