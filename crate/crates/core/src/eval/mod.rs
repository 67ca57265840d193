//! Recall@K,N over every test position, per-offset curves, sequence-length
//! buckets, bootstrap uplifts and parameter counts.

mod metrics;
mod params;
mod recommender;
mod report;
mod uplift;

pub use metrics::{
    bucket_breakdown, evaluate, mean_points, parse_buckets, per_offset_recall, point_recalls, recall_k_n,
    recommend_all, sum_points, BucketRow, OffsetPoint, Recommendations, DEFAULT_BUCKETS,
};
pub use params::count_params;
pub use recommender::{top_k, BayesOracle, Recommender};
pub use report::{metric_key, EvalReport, ReportSpec};
pub use uplift::{sequence_totals, uplift_ci, SequenceTotals, Uplift};
