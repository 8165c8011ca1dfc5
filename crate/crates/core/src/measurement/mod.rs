//! Distances between sources, similarity rankings, rank agreement and
//! clustering.

mod agreement;
mod cluster;
mod distance;
mod kendall;
mod ranking;

pub use agreement::{
    agreement, extreme_instances, histogram, instance_level_agreement, AgreementReport,
    ExtremeReport, ExtremeRow, Histogram, InstanceAgreement, InstanceRecord,
};
pub use cluster::{agglomerative_cluster, Dendrogram, DendrogramNode, Merge};
pub use distance::{
    cosine_distance, pair_distance, prompt_distance_matrix, topic_distance_matrix, DistanceMatrix,
    PairDistance, PairExclusion,
};
pub use kendall::{kendall_tau, tau_b};
pub use ranking::{similarity_rankings, Ranking, SimilarityRanking};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MeasureError {
    #[error("undefined distance: zero vector")]
    UndefinedDistance,
    #[error("vector lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("every prompt gives an undefined distance for ({0}, {1})")]
    AllPromptsUndefined(String, String),
    #[error("source {outlet} missing from prompt {prompt_id}")]
    MissingSource { outlet: String, prompt_id: String },
    #[error("need at least {needed} sources, got {got}")]
    TooFewSources { needed: usize, got: usize },
    #[error("rankings cover different items")]
    ItemSetsDiffer,
    #[error("need at least two ranked items")]
    TooFewItems,
    #[error("tau-b undefined: one ranking is a single tie group")]
    UndefinedTau,
    #[error("anchor {0} missing from ground truth")]
    AnchorMissing(String),
    #[error("no anchor has a defined tau")]
    NoDefinedTau,
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
    #[error("no records")]
    NoRecords,
    #[error("topic representation has no prompts")]
    EmptyRepresentation,
}
