//! Welfare baselines, run metrics and the theoretical guarantees they are checked against.

mod baselines;
mod bounds;
mod ledger;
pub mod simplex;

pub use baselines::{
    s_dagger, s_star_dual_saa, s_star_exact, BaselineValues, SStarMethod, SaaEstimate,
    EXACT_VARIABLE_LIMIT,
};
pub use bounds::{delta_grid, theorem_bounds, xi, TheoremBounds, DELTA_GRID_POINTS};
pub use ledger::{finalize_metrics, MetricLedger, Metrics};
