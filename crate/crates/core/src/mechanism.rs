//! The principal's per-slot mechanism.
//!
//! Each slot the principal
//! 1. forms optimistic reward estimates (UCB, capped at the maximal reward 1),
//! 2. picks the assignment maximizing the Lagrangian
//!    `sum_{n,k} (r_hat_k - c_hat_{n,k} - lambda_n) x_{n,k} + sum_n lambda_n phi_n`,
//! 3. pays each assigned agent its Lagrangian contribution minus the
//!    externality it imposes on the others (a Clarke pivot on the Lagrangian),
//! 4. observes rewards only from arms actually pulled, and
//! 5. moves the fairness multipliers by projected ascent on over-utilization.
//!
//! The constant `sum_n lambda_n phi_n` never changes an argmax and cancels in the
//! externality term, so weights carry only the per-edge part.

use ndarray::Array2;

use crate::agents::ParticipationDecision;
use crate::env::EnvRealization;
use crate::error::{Error, Result};
use crate::matching::{max_weight_matching, Assignment, WeightMatrix};
use crate::scalar::Scalar;

/// Pull counter and running mean of one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmStats<T> {
    pub pulls: u64,
    /// Meaningless while `pulls == 0`.
    pub empirical_mean: T,
}

impl<T: Scalar> Default for ArmStats<T> {
    fn default() -> Self {
        Self {
            pulls: 0,
            empirical_mean: T::zero(),
        }
    }
}

/// Optimistic reward estimate used at `slot`. Unplayed arms get the maximal reward 1.
pub fn ucb_estimate<T: Scalar>(stats: &ArmStats<T>, slot: u64) -> T {
    if stats.pulls == 0 {
        return T::one();
    }
    let t = T::from_u64(slot.max(1)).expect("slot fits scalar");
    let h = T::from_u64(stats.pulls).expect("pulls fit scalar");
    let bonus = (T::lit(3.0) * t.ln() / (T::lit(2.0) * h)).sqrt();
    (stats.empirical_mean + bonus).min(T::one())
}

/// Submitted cost bids, agents x arms, each within `[c_min, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BidMatrix<T> {
    bids: Array2<T>,
}

impl<T: Scalar> BidMatrix<T> {
    pub fn new(bids: Array2<T>, c_min: T) -> Result<Self> {
        for ((row, col), &b) in bids.indexed_iter() {
            if !b.is_finite() {
                return Err(Error::NonFinite { row, col });
            }
            if b < c_min || b > T::one() {
                return Err(Error::InvalidArgument(format!(
                    "bid {b} of agent {row} on arm {col} outside [{c_min}, 1]"
                )));
            }
        }
        Ok(Self { bids })
    }

    pub fn agents(&self) -> usize {
        self.bids.nrows()
    }

    pub fn arms(&self) -> usize {
        self.bids.ncols()
    }

    pub fn get(&self, agent: usize, arm: usize) -> T {
        self.bids[[agent, arm]]
    }

    pub fn as_array(&self) -> &Array2<T> {
        &self.bids
    }

    pub fn into_array(self) -> Array2<T> {
        self.bids
    }
}

/// Everything the principal knows between slots.
#[derive(Debug, Clone, PartialEq)]
pub struct MechanismState<T> {
    pub arm_stats: Vec<ArmStats<T>>,
    /// Fairness multipliers, one per agent, never negative.
    pub lambda: Vec<T>,
    pub eta: T,
    /// The next slot to play, starting at 1.
    pub slot: u64,
    /// Maximal long-run utilization ratio per agent.
    pub phi: Vec<T>,
    pub horizon: u64,
}

impl<T: Scalar> MechanismState<T> {
    pub fn new(arms: usize, phi: Vec<T>, eta: T, horizon: u64) -> Result<Self> {
        if arms == 0 || phi.is_empty() {
            return Err(Error::InvalidArgument(
                "need at least one arm and one agent".into(),
            ));
        }
        if !(eta > T::zero() && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "step size must be positive, got {eta}"
            )));
        }
        if let Some(p) = phi.iter().find(|p| !(**p >= T::zero() && **p <= T::one())) {
            return Err(Error::InvalidArgument(format!(
                "utilization ratio {p} outside [0, 1]"
            )));
        }
        Ok(Self {
            arm_stats: vec![ArmStats::default(); arms],
            lambda: vec![T::zero(); phi.len()],
            eta,
            slot: 1,
            phi,
            horizon,
        })
    }

    pub fn agents(&self) -> usize {
        self.phi.len()
    }

    pub fn arms(&self) -> usize {
        self.arm_stats.len()
    }

    /// Expected number of pulled arms per slot the ratios allow.
    pub fn big_phi(&self) -> T {
        self.phi.iter().copied().sum()
    }

    pub fn theta(&self) -> T {
        theta(self.arms(), &self.phi)
    }

    /// UCB estimates for the current slot.
    pub fn reward_estimates(&self) -> Vec<T> {
        self.arm_stats
            .iter()
            .map(|s| ucb_estimate(s, self.slot))
            .collect()
    }
}

/// `min(K + Phi, N)`.
pub fn theta<T: Scalar>(arms: usize, phi: &[T]) -> T {
    let big_phi: T = phi.iter().copied().sum();
    let k = T::from_usize(arms).expect("arms fit scalar");
    let n = T::from_usize(phi.len()).expect("agents fit scalar");
    (k + big_phi).min(n)
}

/// Per-edge Lagrangian weights `r_hat_k - c_hat_{n,k} - lambda_n`.
pub fn assemble_lagrangian_weights<T: Scalar>(
    r_hat: &[T],
    bids: &BidMatrix<T>,
    lambda: &[T],
) -> Result<WeightMatrix<T>> {
    let (n, k) = (bids.agents(), bids.arms());
    if r_hat.len() != k || lambda.len() != n {
        return Err(Error::DimensionMismatch {
            what: "lagrangian weights",
            expected: (n, k),
            found: (lambda.len(), r_hat.len()),
        });
    }
    let w = Array2::from_shape_fn((n, k), |(i, j)| r_hat[j] - bids.get(i, j) - lambda[i]);
    WeightMatrix::new(w)
}

fn check_state_dims<T: Scalar>(
    state: &MechanismState<T>,
    r_hat: &[T],
    bids: &BidMatrix<T>,
) -> Result<()> {
    let expected = (state.agents(), state.arms());
    if (bids.agents(), bids.arms()) != expected {
        return Err(Error::DimensionMismatch {
            what: "bids",
            expected,
            found: (bids.agents(), bids.arms()),
        });
    }
    if r_hat.len() != state.arms() {
        return Err(Error::DimensionMismatch {
            what: "reward estimates",
            expected: (1, state.arms()),
            found: (1, r_hat.len()),
        });
    }
    Ok(())
}

/// The Lagrangian-maximizing assignment for this slot.
pub fn compute_assignment<T: Scalar>(
    state: &MechanismState<T>,
    r_hat: &[T],
    bids: &BidMatrix<T>,
) -> Result<Assignment> {
    check_state_dims(state, r_hat, bids)?;
    let w = assemble_lagrangian_weights(r_hat, bids, &state.lambda)?;
    Ok(max_weight_matching(&w).0)
}

/// Payments for `x_hat`, which must be the assignment [`compute_assignment`]
/// returns for the same inputs. Unassigned agents get exactly zero.
pub fn compute_payments<T: Scalar>(
    state: &MechanismState<T>,
    r_hat: &[T],
    bids: &BidMatrix<T>,
    x_hat: &Assignment,
) -> Result<Vec<T>> {
    check_state_dims(state, r_hat, bids)?;
    let w = assemble_lagrangian_weights(r_hat, bids, &state.lambda)?;
    payments_from_weights(&w, r_hat, &state.lambda, x_hat)
}

fn payments_from_weights<T: Scalar>(
    w: &WeightMatrix<T>,
    r_hat: &[T],
    lambda: &[T],
    x_hat: &Assignment,
) -> Result<Vec<T>> {
    if (x_hat.agents(), x_hat.arms()) != (w.agents(), w.arms()) {
        return Err(Error::DimensionMismatch {
            what: "assignment",
            expected: (w.agents(), w.arms()),
            found: (x_hat.agents(), x_hat.arms()),
        });
    }
    let mut payments = vec![T::zero(); w.agents()];
    for (n, k) in x_hat.edges() {
        // welfare of the others under x_hat, and the best they could do without n
        let others = x_hat
            .edges()
            .filter(|&(i, _)| i != n)
            .fold(T::zero(), |acc, (i, j)| acc + w.get(i, j));
        let (_, without_n) = max_weight_matching(&w.without_agent(n));
        let externality = without_n - others;
        payments[n] = (r_hat[k] - lambda[n]) - externality;
    }
    Ok(payments)
}

/// Utilization indicator `f_n = sum_k x_{n,k} a_n`.
pub fn utilization(x_hat: &Assignment, accepted: &[bool]) -> Vec<bool> {
    (0..x_hat.agents())
        .map(|n| x_hat.is_assigned(n) && accepted[n])
        .collect()
}

/// Projected multiplier step `max(0, lambda_n + eta (f_n - phi_n))`.
pub fn dual_update<T: Scalar>(
    state: &MechanismState<T>,
    x_hat: &Assignment,
    accepted: &[bool],
) -> Vec<T> {
    utilization(x_hat, accepted)
        .into_iter()
        .zip(state.lambda.iter().zip(&state.phi))
        .map(|(used, (&lambda, &phi))| {
            let f = if used { T::one() } else { T::zero() };
            (lambda + state.eta * (f - phi)).max(T::zero())
        })
        .collect()
}

/// Step size `(4K + 2 sqrt(6 K T Phi ln T)) / (T Theta)`.
pub fn theorem2_step_size<T: Scalar>(arms: usize, horizon: u64, phi: &[T]) -> Result<T> {
    if horizon < 2 {
        return Err(Error::InvalidArgument(format!(
            "horizon must be at least 2, got {horizon}"
        )));
    }
    let big_phi: T = phi.iter().copied().sum();
    let theta = theta(arms, phi);
    if big_phi.is_nan() || big_phi <= T::zero() || theta.is_nan() || theta <= T::zero() {
        return Err(Error::InvalidArgument(
            "need positive total utilization ratio".into(),
        ));
    }
    let k = T::from_usize(arms).expect("arms fit scalar");
    let t = T::from_u64(horizon).expect("horizon fits scalar");
    let root = (T::lit(6.0) * k * t * big_phi * t.ln()).sqrt();
    Ok((T::lit(4.0) * k + T::lit(2.0) * root) / (t * theta))
}

/// Counter and running-mean update from the arms actually pulled.
pub fn update_arm_stats<T: Scalar>(
    state: &MechanismState<T>,
    x_hat: &Assignment,
    accepted: &[bool],
    realized_rewards: &[T],
) -> Vec<ArmStats<T>> {
    let mut stats = state.arm_stats.clone();
    for (n, k) in x_hat.edges() {
        if !accepted[n] {
            continue;
        }
        let s = &mut stats[k];
        let h = T::from_u64(s.pulls).expect("pulls fit scalar");
        let total = s.empirical_mean * h + realized_rewards[k];
        s.pulls += 1;
        s.empirical_mean = total / T::from_u64(s.pulls).expect("pulls fit scalar");
    }
    stats
}

/// The announced proposal.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal<T> {
    pub assignment: Assignment,
    pub payments: Vec<T>,
}

/// Settled outcome of one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotRecord<T> {
    pub slot: u64,
    pub reward_estimates: Vec<T>,
    pub bids: Array2<T>,
    /// Multipliers in force during the slot.
    pub lambda: Vec<T>,
    pub assignment: Assignment,
    pub payments: Vec<T>,
    pub participation: Vec<bool>,
    /// Per-agent payoff `(y_n - sum_k c_{n,k} x_{n,k}) a_n` with true costs.
    pub agent_payoffs: Vec<T>,
    /// Reward revealed by each arm; `None` for arms nobody pulled.
    pub observed_rewards: Vec<Option<T>>,
    pub reward: T,
    pub cost: T,
    pub welfare: T,
    /// Total paid to participating agents.
    pub payment: T,
    /// `reward - payment`.
    pub profit: T,
    pub lambda_next: Vec<T>,
}

impl<T: Scalar> SlotRecord<T> {
    pub fn utilization(&self) -> Vec<bool> {
        utilization(&self.assignment, &self.participation)
    }
}

/// Plays one full slot. `decide` sees the proposal and returns the agents'
/// follow/decline decisions.
pub fn step<T, F>(
    state: &MechanismState<T>,
    bids: &BidMatrix<T>,
    realization: &EnvRealization<T>,
    decide: F,
) -> Result<(Proposal<T>, SlotRecord<T>, MechanismState<T>)>
where
    T: Scalar,
    F: FnOnce(&Proposal<T>) -> ParticipationDecision<T>,
{
    if state.slot > state.horizon {
        return Err(Error::InvalidArgument(format!(
            "slot {} beyond horizon {}",
            state.slot, state.horizon
        )));
    }
    let (n_agents, n_arms) = (state.agents(), state.arms());
    if realization.rewards.len() != n_arms || realization.costs.dim() != (n_agents, n_arms) {
        return Err(Error::DimensionMismatch {
            what: "environment realization",
            expected: (n_agents, n_arms),
            found: realization.costs.dim(),
        });
    }

    let r_hat = state.reward_estimates();
    check_state_dims(state, &r_hat, bids)?;
    let w = assemble_lagrangian_weights(&r_hat, bids, &state.lambda)?;
    let (assignment, _) = max_weight_matching(&w);
    let payments = payments_from_weights(&w, &r_hat, &state.lambda, &assignment)?;
    let proposal = Proposal {
        assignment,
        payments,
    };

    let decision = decide(&proposal);
    if decision.accept.len() != n_agents {
        return Err(Error::DimensionMismatch {
            what: "participation",
            expected: (n_agents, 1),
            found: (decision.accept.len(), 1),
        });
    }
    let accepted = decision.accept;
    let x_hat = &proposal.assignment;

    let mut observed = vec![None; n_arms];
    let mut payoffs = vec![T::zero(); n_agents];
    let (mut reward, mut cost, mut payment) = (T::zero(), T::zero(), T::zero());
    for n in 0..n_agents {
        if !accepted[n] {
            continue;
        }
        let own_cost = match x_hat.arm_of(n) {
            Some(k) => {
                observed[k] = Some(realization.rewards[k]);
                reward += realization.rewards[k];
                realization.costs[[n, k]]
            }
            None => T::zero(),
        };
        cost += own_cost;
        payment += proposal.payments[n];
        payoffs[n] = proposal.payments[n] - own_cost;
    }

    let lambda_next = dual_update(state, x_hat, &accepted);
    let arm_stats = update_arm_stats(state, x_hat, &accepted, &realization.rewards);
    let next = MechanismState {
        arm_stats,
        lambda: lambda_next.clone(),
        eta: state.eta,
        slot: state.slot + 1,
        phi: state.phi.clone(),
        horizon: state.horizon,
    };

    let record = SlotRecord {
        slot: state.slot,
        reward_estimates: r_hat,
        bids: bids.as_array().clone(),
        lambda: state.lambda.clone(),
        assignment: proposal.assignment.clone(),
        payments: proposal.payments.clone(),
        participation: accepted,
        agent_payoffs: payoffs,
        observed_rewards: observed,
        reward,
        cost,
        welfare: reward - cost,
        payment,
        profit: reward - payment,
        lambda_next,
    };
    Ok((proposal, record, next))
}
