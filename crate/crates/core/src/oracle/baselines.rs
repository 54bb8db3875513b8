//! Welfare baselines: the informed optimum `S*` and the cost-floor bound `S†`.

use std::collections::HashMap;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::simplex;
use crate::error::{Error, Result};
use crate::matching::{matching_count, max_weight_matching, WeightMatrix};
use crate::scalar::Scalar;

/// Largest LP (variables over all realizations) `s_star_exact` accepts.
pub const EXACT_VARIABLE_LIMIT: usize = 20_000;

/// How `S*` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum SStarMethod {
    ExactFiniteSupport,
    DualSaa { samples: usize },
}

impl std::fmt::Display for SStarMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::ExactFiniteSupport => write!(f, "exact-finite-support"),
            Self::DualSaa { samples } => write!(f, "dual-saa({samples})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineValues<T> {
    pub s_star: T,
    pub s_dagger: T,
    pub s_star_method: SStarMethod,
}

/// Per-slot welfare when every cost sits at `c_min`: a fractional knapsack of
/// arms with total mass `Φ` and at most one unit per arm.
pub fn s_dagger<T: Scalar>(mean_rewards: &[T], c_min: T, phi: &[T]) -> T {
    let mut budget: T = phi.iter().copied().sum();
    let mut net: Vec<T> = mean_rewards
        .iter()
        .map(|&r| r - c_min)
        .filter(|&v| v > T::zero())
        .collect();
    net.sort_by(|a, b| b.partial_cmp(a).expect("finite rewards"));
    let mut total = T::zero();
    for v in net {
        if budget <= T::zero() {
            break;
        }
        let p = budget.min(T::one());
        total += p * v;
        budget -= p;
    }
    total
}

/// Enumerates every non-empty matching whose edges all carry positive weight.
fn positive_matchings<T: Scalar>(w: &Array2<T>) -> Vec<Vec<(usize, usize)>> {
    fn rec<T: Scalar>(
        w: &Array2<T>,
        agent: usize,
        used: &mut Vec<bool>,
        current: &mut Vec<(usize, usize)>,
        out: &mut Vec<Vec<(usize, usize)>>,
    ) {
        if agent == w.nrows() {
            if !current.is_empty() {
                out.push(current.clone());
            }
            return;
        }
        rec(w, agent + 1, used, current, out);
        for k in 0..w.ncols() {
            if !used[k] && w[[agent, k]] > T::zero() {
                used[k] = true;
                current.push((agent, k));
                rec(w, agent + 1, used, current, out);
                current.pop();
                used[k] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(w, 0, &mut vec![false; w.ncols()], &mut Vec::new(), &mut out);
    out
}

/// Exact `S*` over a finite cost distribution.
///
/// Solves the LP over per-realization randomized matchings. Matchings with a
/// non-positive edge are dominated by the same matching without it and are
/// left out.
pub fn s_star_exact<T: Scalar>(
    mean_rewards: &[T],
    cost_support: &[(Array2<T>, T)],
    phi: &[T],
) -> Result<T> {
    let arms = mean_rewards.len();
    let agents = phi.len();
    if cost_support.is_empty() {
        return Err(Error::InvalidArgument("empty cost support".into()));
    }
    let mut mass = T::zero();
    for (c, q) in cost_support {
        if c.dim() != (agents, arms) {
            return Err(Error::DimensionMismatch {
                what: "cost realization",
                expected: (agents, arms),
                found: c.dim(),
            });
        }
        if q.is_nan() || *q < T::zero() {
            return Err(Error::InvalidArgument(
                "negative realization probability".into(),
            ));
        }
        mass += *q;
    }
    if (mass - T::one()).abs() > T::tolerance() * T::lit(1e3) {
        return Err(Error::InvalidArgument(format!(
            "realization probabilities sum to {mass}"
        )));
    }
    let per_realization = matching_count(agents, arms);
    let bound = per_realization.saturating_mul(cost_support.len() as u128);
    if bound > EXACT_VARIABLE_LIMIT as u128 {
        return Err(Error::SupportTooLarge(format!(
            "{} realizations x {per_realization} matchings exceeds {EXACT_VARIABLE_LIMIT} variables",
            cost_support.len()
        )));
    }

    let mut objective = Vec::new();
    let mut columns: Vec<(usize, Vec<usize>)> = Vec::new();
    for (j, (c, q)) in cost_support.iter().enumerate() {
        let net = Array2::from_shape_fn((agents, arms), |(n, k)| mean_rewards[k] - c[[n, k]]);
        for m in positive_matchings(&net) {
            let welfare: T = m.iter().map(|&(n, k)| net[[n, k]]).sum();
            objective.push(*q * welfare);
            columns.push((j, m.iter().map(|&(n, _)| n).collect()));
        }
    }
    if objective.is_empty() {
        return Ok(T::zero());
    }

    let rows = cost_support.len() + agents;
    let mut a = vec![vec![T::zero(); objective.len()]; rows];
    for (v, (j, used)) in columns.iter().enumerate() {
        a[*j][v] = T::one();
        for &n in used {
            a[cost_support.len() + n][v] = cost_support[*j].1;
        }
    }
    let mut b = vec![T::one(); cost_support.len()];
    b.extend(phi.iter().map(|&p| p.max(T::zero())));
    Ok(simplex::maximize(&objective, &a, &b)?.value)
}

/// Result of the sample-average dual method.
#[derive(Debug, Clone, PartialEq)]
pub struct SaaEstimate<T> {
    /// Best dual value found: an upper bound on the sample LP optimum.
    pub value: T,
    /// Welfare of the step-averaged primal iterate.
    pub primal_welfare: T,
    /// Largest per-agent excess of the averaged primal utilization over `φ_n`.
    pub primal_violation: T,
    /// `value - primal_welfare`; negative while the averaged primal still
    /// over-uses some agent (see `primal_violation`).
    pub gap: T,
    pub lambda: Vec<T>,
    pub samples: usize,
    pub distinct_samples: usize,
    pub iterations: usize,
}

/// `S*` for a cost distribution known only through a sampler.
///
/// Draws `samples` cost matrices, then runs projected subgradient descent on
/// the Lagrangian dual of the sample LP, one max-weight matching per distinct
/// sample per iteration.
pub fn s_star_dual_saa<T, F>(
    mean_rewards: &[T],
    mut cost_sampler: F,
    phi: &[T],
    samples: usize,
    iterations: usize,
) -> Result<SaaEstimate<T>>
where
    T: Scalar,
    F: FnMut() -> Array2<T>,
{
    if samples == 0 {
        return Err(Error::InvalidArgument(
            "at least one sample required".into(),
        ));
    }
    let arms = mean_rewards.len();
    let agents = phi.len();

    let mut index: HashMap<Vec<u64>, usize> = HashMap::new();
    let mut support: Vec<(Array2<T>, T)> = Vec::new();
    for _ in 0..samples {
        let c = cost_sampler();
        if c.dim() != (agents, arms) {
            return Err(Error::DimensionMismatch {
                what: "sampled cost matrix",
                expected: (agents, arms),
                found: c.dim(),
            });
        }
        let key: Vec<u64> = c.iter().map(|v| v.as_f64().to_bits()).collect();
        match index.get(&key) {
            Some(&i) => support[i].1 += T::one(),
            None => {
                index.insert(key, support.len());
                let net =
                    Array2::from_shape_fn((agents, arms), |(n, k)| mean_rewards[k] - c[[n, k]]);
                support.push((net, T::one()));
            }
        }
    }
    let inv_m = T::one() / T::lit(samples as f64);
    for s in &mut support {
        s.1 *= inv_m;
    }

    let iterations = iterations.max(1);
    let scale = mean_rewards
        .iter()
        .fold(T::zero(), |m, &r| m.max(r))
        .max(T::lit(1e-3));
    let mut lambda = vec![T::zero(); agents];
    let mut best = T::infinity();
    let mut best_lambda = lambda.clone();
    let mut weight_sum = T::zero();
    let mut avg_welfare = T::zero();
    let mut avg_util = vec![T::zero(); agents];

    for it in 1..=iterations {
        let mut value = T::zero();
        let mut welfare = T::zero();
        let mut util = vec![T::zero(); agents];
        for (net, q) in &support {
            let w = Array2::from_shape_fn((agents, arms), |(n, k)| net[[n, k]] - lambda[n]);
            let (x, v) = max_weight_matching(&WeightMatrix::new(w)?);
            value += *q * v;
            for (n, k) in x.edges() {
                welfare += *q * net[[n, k]];
                util[n] += *q;
            }
        }
        let dual = value + lambda.iter().zip(phi).map(|(&l, &p)| l * p).sum::<T>();
        if dual < best {
            best = dual;
            best_lambda = lambda.clone();
        }

        let step = scale / T::lit((it as f64).sqrt());
        weight_sum += step;
        let mix = step / weight_sum;
        avg_welfare += (welfare - avg_welfare) * mix;
        for n in 0..agents {
            let drift = (util[n] - avg_util[n]) * mix;
            avg_util[n] += drift;
            lambda[n] = (lambda[n] - step * (phi[n] - util[n])).max(T::zero());
        }
    }

    let primal_violation = avg_util
        .iter()
        .zip(phi)
        .fold(T::zero(), |m, (&u, &p)| m.max(u - p));
    Ok(SaaEstimate {
        value: best,
        primal_welfare: avg_welfare,
        primal_violation,
        gap: best - avg_welfare,
        lambda: best_lambda,
        samples,
        distinct_samples: support.len(),
        iterations,
    })
}
