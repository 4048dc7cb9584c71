//! Approximation-quality metrics and rank-ordered element ablation.

mod ablation;
mod metrics;
mod quality;

pub use ablation::{
    ablate_by_rank, mean_curve, removal_order, AblationCurve, AblationPoint, MeanAblationPoint, RemovalOrder,
};
pub use metrics::{lad_fit, lad_slope, pearson_r, relative_error, LadFit};
pub use quality::{
    batch_quality, sampled_fraction_percent, ApproxQualityReport, EvalItem, QualityCell, QualityGrid, VideoMetrics,
};
