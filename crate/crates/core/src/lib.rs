//! Incentivized online learning.
//!
//! A principal learns which arms pay off with an upper-confidence index while
//! buying every pull from selfish agents through a per-slot VCG auction on a
//! Lagrangian-adjusted matching. Per-agent dual prices keep long-run
//! utilization near each agent's share.
//!
//! The numeric core is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which the harness uses throughout.

pub mod agents;
pub mod env;
pub mod error;
pub mod harness;
pub mod matching;
pub mod mechanism;
pub mod oracle;
pub mod scalar;

pub use agents::{decide_participation, form_bids, AgentPolicy, Bidder, ParticipationDecision};
pub use env::{load_price_series, ArmSpec, CostModel, EnvRealization, Environment, PriceSeries};
pub use error::{Error, Result};
pub use harness::{preset_large_scale, preset_small_scale, replay, run, RunConfig, RunOutput};
pub use matching::{brute_force_matching, max_weight_matching, Assignment, WeightMatrix};
pub use mechanism::{
    compute_assignment, compute_payments, dual_update, step, theorem2_step_size, ucb_estimate,
    ArmStats, BidMatrix, MechanismState, Proposal, SlotRecord,
};
pub use oracle::{
    finalize_metrics, s_dagger, s_star_dual_saa, s_star_exact, theorem_bounds, BaselineValues,
    MetricLedger, Metrics, TheoremBounds,
};
pub use scalar::Scalar;

pub type WeightMatrix64 = WeightMatrix<f64>;
pub type BidMatrix64 = BidMatrix<f64>;
pub type MechanismState64 = MechanismState<f64>;
pub type SlotRecord64 = SlotRecord<f64>;
pub type EnvRealization64 = EnvRealization<f64>;
pub type MetricLedger64 = MetricLedger<f64>;
pub type Metrics64 = Metrics<f64>;
pub type BaselineValues64 = BaselineValues<f64>;
pub type TheoremBounds64 = TheoremBounds<f64>;
