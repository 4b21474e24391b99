//! Fidelity checks: GLMs, summary statistics, QQ data and the comparison
//! report.

mod glm;
mod report;
mod stats;

pub use glm::{fit_glm, predict_glm, Family, GlmFit, CONVERGENCE_TOLERANCE, MAX_ITERATIONS};
pub use report::{
    compare, comparison_codec, fit_frequency, fit_severity, observed_vs_predicted, CompareOptions,
    ComparisonReport, Curve, CurveBin, CurveKind, DatasetReport, FidelityModels,
};
pub use stats::{
    claim_mix, confusion_matrix, ks_distance, pure_premium, pure_premiums, qq_points,
    quantile_sorted, stats_by_count, summary_stats, ConfusionMatrix, CountSummary, SummaryStats,
};
