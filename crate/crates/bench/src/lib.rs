//! Experiment harness for `recipgm`: grid search over `(λ_S, λ_L, α)`,
//! cross-validation on held-out samples, scores against a known ground truth
//! and plot-ready output.

pub mod emit;
pub mod estimate;
pub mod grid;
pub mod metrics;

pub use emit::{emit, read_report_json, read_summary_csv, summary, Format, SummaryRow};
pub use estimate::EstimateDoc;
pub use grid::{cross_validate, grid_search, split_series, Axis, CellRecord, GridOptions, GridSpec, RunReport, Split};
pub use metrics::{spectral_error, support_error, support_f1, theta_grid};
