//! Planted-pair detection: uniform bucketing and hashed bucketing, both
//! scored through a recursively applied tensor.

pub mod bucket;
pub mod calibrate;
pub mod detect;
pub mod lemmas;
pub mod plan;
pub mod run;

pub use bucket::{bucket_lsh, bucket_uniform, BucketState, Window};
pub use calibrate::{null_calibration, CalibrationReport};
pub use detect::{detect, RoundScores, VarianceModel};
pub use lemmas::{lemma_checks, LemmaReport};
pub use plan::{
    best_threshold, best_threshold_of, g_schedule, lsh_copies, plan_lsh, plan_uniform, skew_metrics, IndicatorSet, PlanKind,
    SkewMetrics,
    SolverConfig, SolverPlan,
};
pub use run::{solve_lsh, solve_uniform, verify_candidates, CoordinateLayout, DetectionReport, FlaggedBuckets, RoundStats};
