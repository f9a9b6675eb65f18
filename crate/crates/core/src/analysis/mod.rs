//! Exact oracles for the bundled deterministic environments and the metrics
//! used to compare agents: action gaps, reward-leading Q-value windows and
//! cross-trial learning curves.

mod metrics;
mod oracle;

pub use metrics::{
    action_gap, aggregate_curves, CsvTable, gap_table, mean_and_std, mean_leading_gap, median,
    reward_leading_trace, write_csv, write_csv_file, CurvePoint, DecisionPoint, EpisodeRecord,
    GapRow, LeadingPoint, MetricsRow, SMOOTHING_WINDOW,
};
pub use oracle::{
    smdp_value_iteration, value_iteration, ExplicitModel, ModelEntry, OracleSolution,
    DEFAULT_TOLERANCE, MAX_SWEEPS,
};
