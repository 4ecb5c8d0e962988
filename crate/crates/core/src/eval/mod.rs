//! Metrics, evaluation reports, experiment sweeps and attention traces.

pub mod metrics;
pub mod report;
pub mod sweep;
pub mod trace;

pub use metrics::{exact_match, f1_token, normalize_answer};
pub use report::{evaluate, EvalEcho, EvalRecord, EvalReport};
pub use sweep::{render_table, sweep_noise, sweep_steps, CellRun, Experiment, SweepRow, SweepTable};
pub use trace::{export_trace, render_heatmap, Trace};
