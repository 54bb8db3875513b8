//! Cumulative accounting of a run and the four headline metrics.

use serde::{Deserialize, Serialize};

use super::baselines::BaselineValues;
use crate::error::{Error, Result};
use crate::mechanism::SlotRecord;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricLedger<T> {
    pub cum_welfare: T,
    pub cum_reward: T,
    pub cum_cost: T,
    pub cum_payment: T,
    pub per_agent_utilization: Vec<u64>,
    pub per_agent_payoff: Vec<T>,
    pub declines: u64,
    /// Smallest payoff any participating agent received in any slot.
    pub min_payoff: T,
    pub slots: u64,
    phi: Vec<T>,
}

impl<T: Scalar> MetricLedger<T> {
    pub fn new(phi: Vec<T>) -> Self {
        let agents = phi.len();
        Self {
            cum_welfare: T::zero(),
            cum_reward: T::zero(),
            cum_cost: T::zero(),
            cum_payment: T::zero(),
            per_agent_utilization: vec![0; agents],
            per_agent_payoff: vec![T::zero(); agents],
            declines: 0,
            min_payoff: T::infinity(),
            slots: 0,
            phi,
        }
    }

    pub fn phi(&self) -> &[T] {
        &self.phi
    }

    pub fn record_slot(&mut self, record: &SlotRecord<T>) -> Result<()> {
        let agents = self.phi.len();
        if record.participation.len() != agents || record.agent_payoffs.len() != agents {
            return Err(Error::DimensionMismatch {
                what: "slot record agents",
                expected: (agents, 1),
                found: (record.participation.len(), record.agent_payoffs.len()),
            });
        }
        self.cum_reward += record.reward;
        self.cum_cost += record.cost;
        self.cum_welfare += record.reward - record.cost;
        self.cum_payment += record.payment;
        for (n, used) in record.utilization().into_iter().enumerate() {
            if used {
                self.per_agent_utilization[n] += 1;
            }
        }
        for n in 0..agents {
            if record.participation[n] {
                self.per_agent_payoff[n] += record.agent_payoffs[n];
                self.min_payoff = self.min_payoff.min(record.agent_payoffs[n]);
            } else {
                self.declines += 1;
            }
        }
        self.slots += 1;
        Ok(())
    }

    pub fn profit(&self) -> T {
        self.cum_reward - self.cum_payment
    }

    /// `Σ_n (util_n - φ_n T)^+` over the slots recorded so far.
    pub fn violation(&self) -> T {
        let t = T::lit(self.slots as f64);
        self.per_agent_utilization
            .iter()
            .zip(&self.phi)
            .map(|(&u, &p)| (T::lit(u as f64) - p * t).max(T::zero()))
            .sum()
    }

    pub fn mean_agent_payoff(&self) -> T {
        if self.phi.is_empty() {
            return T::zero();
        }
        self.per_agent_payoff.iter().copied().sum::<T>() / T::lit(self.phi.len() as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics<T> {
    pub regret: T,
    pub violation: T,
    pub profit: T,
    pub degradation: T,
}

pub fn finalize_metrics<T: Scalar>(
    ledger: &MetricLedger<T>,
    baselines: Option<&BaselineValues<T>>,
) -> Result<Metrics<T>> {
    let b = baselines.ok_or_else(|| Error::InvalidArgument("baselines missing".into()))?;
    let t = T::lit(ledger.slots as f64);
    Ok(Metrics {
        regret: t * b.s_star - ledger.cum_welfare,
        violation: ledger.violation(),
        profit: ledger.profit(),
        degradation: t * b.s_dagger - ledger.cum_welfare,
    })
}
