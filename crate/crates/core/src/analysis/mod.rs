//! Experiment procedures built on the model and inference layers.

mod lda;
mod scan;
mod severity;
mod sweep;

pub use lda::{
    condition_centroids, dataset_fingerprint, lda_fit, lda_transform, scatter_matrices, LdaProjection,
    DEFAULT_LDA_COMPONENTS,
};
pub use scan::{field_scan_2d, FieldScan, GridSpec};
pub use severity::{point_predictions, severity_grid, SeverityGrid, SeverityPanel, DIAGNOSED_SEVERITIES};
pub use sweep::{
    select_dropout_rate, sweep_dropout, sweep_metrics, CurvePoint, RateSelection, SweepEntry, SweepMetrics,
    SweepResult, DEFAULT_KNEE, DEFAULT_MAX_RATE, DEFAULT_RATES,
};
