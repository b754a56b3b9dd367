//! Accuracy metrics, synthetic ground truth and the ablation benchmark.

pub mod gradcheck;
pub mod harness;
pub mod metrics;
pub mod synth;

pub use gradcheck::{gradcheck_case, gradient_check, GradCheckCase, GradCheckConfig, GradCheckReport, GradSample};
pub use harness::{evaluate, run_benchmark, run_scene, selection_config, table2_configs, BenchConfig, BenchReport, ConfigSummary, ObjectOutcome, FULL_LABEL};
pub use metrics::{distance_log_error, orientation_similarity, reprojection_error_metric, scale_error, GeoMetrics};
pub use synth::{
    bench_camera, class_dimensions, gen_single_object_scene, gen_synthetic_scene, gen_synthetic_scene_with, masked, object_silhouette, Difficulty,
    ObjectTarget, SyntheticScene, MAX_OCCLUSION_RATIO, MIN_VISIBLE_PIXELS,
};
