//! Classification metrics, cluster cohesion, 2-D projection and stance
//! read-outs for states and governors.

mod cluster;
mod export;
mod metrics;
mod stance;

pub use cluster::{dbi, pca_project, PcaProjector, Projector};
pub use export::{projection_svg, write_projection_csv, write_stance_csv};
pub use metrics::{harmonic_combine, metrics, Metrics, MetricsReport};
pub use stance::{continuous_stance, governor_label, stance_scores, StanceScore, GOVERNOR_LABELS};

#[derive(Debug, thiserror::Error)]
pub enum AnalysisError {
    #[error("empty input")]
    Empty,
    #[error("length mismatch: {0} vs {1}")]
    Length(usize, usize),
    #[error("class {0} outside 0..5")]
    Class(usize),
    #[error("need at least 2 clusters, got {0}")]
    TooFewClusters(usize),
    #[error("clusters {0} and {1} have coincident centroids")]
    Degenerate(usize, usize),
    #[error("cannot project {rows} points onto {dims} dimensions")]
    Dims { rows: usize, dims: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
