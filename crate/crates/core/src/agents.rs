//! Agent behavior: how bids are formed and whether a proposal is followed.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::mechanism::{BidMatrix, Proposal};
use crate::scalar::{clamp, Scalar};

/// Bidding strategy of one agent. Every resulting bid is clamped into `[c_min, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AgentPolicy {
    #[default]
    Truthful,
    FixedOverbid {
        delta: f64,
    },
    FixedUnderbid {
        delta: f64,
    },
    /// Ignores the true cost and bids uniformly on `[c_min, 1]` from its own stream.
    RandomMisreport {
        seed: u64,
    },
}

/// A policy plus whatever state it carries between slots.
#[derive(Debug, Clone)]
pub struct Bidder {
    policy: AgentPolicy,
    rng: Option<ChaCha8Rng>,
}

impl Bidder {
    pub fn new(policy: AgentPolicy) -> Self {
        let rng = match policy {
            AgentPolicy::RandomMisreport { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Self { policy, rng }
    }

    pub fn policy(&self) -> AgentPolicy {
        self.policy
    }

    pub fn bid<T: Scalar>(&mut self, true_cost: T, c_min: T) -> T {
        let raw = match self.policy {
            AgentPolicy::Truthful => return true_cost,
            AgentPolicy::FixedOverbid { delta } => true_cost + T::lit(delta),
            AgentPolicy::FixedUnderbid { delta } => true_cost - T::lit(delta),
            AgentPolicy::RandomMisreport { .. } => {
                let u: f64 = self.rng.as_mut().expect("seeded").random();
                c_min + (T::one() - c_min) * T::lit(u)
            }
        };
        clamp(raw, c_min, T::one())
    }
}

/// Bids of all agents, row `n` formed by `bidders[n]`.
pub fn form_bids<T: Scalar>(
    bidders: &mut [Bidder],
    true_costs: &Array2<T>,
    c_min: T,
) -> Result<BidMatrix<T>> {
    assert_eq!(bidders.len(), true_costs.nrows(), "one bidder per agent");
    let mut bids = true_costs.clone();
    for (bidder, mut row) in bidders.iter_mut().zip(bids.rows_mut()) {
        for b in row.iter_mut() {
            *b = bidder.bid(*b, c_min);
        }
    }
    BidMatrix::new(bids, c_min)
}

/// Follow/decline decisions and the resulting payoffs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticipationDecision<T> {
    pub accept: Vec<bool>,
    /// `(y_n - sum_k c_{n,k} x_{n,k}) a_n`.
    pub payoffs: Vec<T>,
}

/// Rounding slack below zero that still counts as a break-even payoff.
pub fn participation_slack<T: Scalar>() -> T {
    T::epsilon() * T::lit(64.0)
}

/// Each agent follows iff its payoff from following is non-negative.
pub fn decide_participation<T: Scalar>(
    proposal: &Proposal<T>,
    true_costs: &Array2<T>,
) -> ParticipationDecision<T> {
    let agents = proposal.assignment.agents();
    let mut accept = Vec::with_capacity(agents);
    let mut payoffs = Vec::with_capacity(agents);
    for n in 0..agents {
        let cost = proposal
            .assignment
            .arm_of(n)
            .map_or(T::zero(), |k| true_costs[[n, k]]);
        let payoff = proposal.payments[n] - cost;
        let follow = payoff >= -participation_slack::<T>();
        accept.push(follow);
        payoffs.push(if follow { payoff } else { T::zero() });
    }
    ParticipationDecision { accept, payoffs }
}
