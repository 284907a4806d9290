//! Forecast evaluation: chronological split, growing-window forecasts from
//! every test anchor, MAE / RMSE / MAPE per horizon, glycemic confusion
//! matrices, forecast ranges and component ablations.

mod ablation;
mod harness;
mod metrics;
mod report;

pub use ablation::{evaluate_subjects, run_ablation, summarize, AblationRow, AblationTable, HorizonSummary, Removal};
pub use harness::{
    derive_seed, score_rolling, sliding_window_eval, BstsForecaster, NoiselessForecaster, EvalConfig, FittedBsts, Forecaster,
    HorizonMetrics, MetricsReport, Split,
};
pub use metrics::{
    compute_metrics, compute_metrics_with, glycemic_confusion, Confusion, MapeDenominator, Metrics, Thresholds, BANDS,
};
pub use report::EvaluationReport;
