//! Exact baseline, metrics and timing.

pub mod metrics;
pub mod oracle;
pub mod run;
pub mod timing;

pub use metrics::{f1_qac, f1_qar, ArityMetrics, MetricsError, MetricsReport, QacOutcome, QarOutcome};
pub use oracle::{answers, assignment_holds, holds, literal_holds, oracle_solve, OracleConfig, OracleError, OracleMode, OracleResult};
pub use run::{evaluate_qac, evaluate_qar, instance_rng};
pub use timing::{linear_fit_r2, spearman, timing_profile, TimingRow};
