//! Evaluation of the finite-horizon performance guarantees.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanism::theta;
use crate::scalar::Scalar;

/// Number of log-spaced δ values searched for the violation bound.
pub const DELTA_GRID_POINTS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremBounds<T> {
    /// Upper bound on expected regret.
    pub reg_bound: T,
    /// Upper bound on expected violation, minimized over δ.
    pub vio_bound: T,
    /// The minimizing δ.
    pub vio_delta: T,
    /// Lower bound on expected profit.
    pub pro_bound: T,
}

/// `DELTA_GRID_POINTS` log-spaced values from `1e-3 φ_min` to `0.999 φ_min`.
pub fn delta_grid<T: Scalar>(phi_min: T) -> Vec<T> {
    if phi_min.is_nan() || phi_min <= T::zero() {
        return Vec::new();
    }
    let lo = (T::lit(1e-3) * phi_min).ln();
    let hi = (T::lit(0.999) * phi_min).ln();
    let last = T::lit((DELTA_GRID_POINTS - 1) as f64);
    (0..DELTA_GRID_POINTS)
        .map(|i| (lo + (hi - lo) * T::lit(i as f64) / last).exp())
        .collect()
}

/// `Ξ(δ) = 3√N Θ² ln(2Θ/(φ_min-δ)) / (φ_min-δ) + 3√N Θ / (2δ)`.
pub fn xi<T: Scalar>(delta: T, agents: usize, theta: T, phi_min: T) -> T {
    let sqrt_n = T::lit(agents as f64).sqrt();
    let three = T::lit(3.0);
    let two = T::lit(2.0);
    let gap = phi_min - delta;
    three * sqrt_n * theta * theta / gap * (two * theta / gap).ln()
        + three * sqrt_n * theta / (two * delta)
}

/// `√(6 K T [Φ + Vio/T] ln T)`, shared by the regret and profit bounds.
fn exploration_term<T: Scalar>(arms: usize, horizon: T, big_phi: T, vio: T) -> T {
    (T::lit(6.0 * arms as f64) * horizon * (big_phi + vio / horizon) * horizon.ln()).sqrt()
}

pub fn theorem_bounds<T: Scalar>(
    arms: usize,
    horizon: T,
    phi: &[T],
    vio: T,
) -> Result<TheoremBounds<T>> {
    if horizon.is_nan() || horizon < T::lit(2.0) {
        return Err(Error::InvalidArgument(format!("horizon {horizon} below 2")));
    }
    let agents = phi.len();
    let big_phi: T = phi.iter().copied().sum();
    let phi_min = phi.iter().copied().fold(T::infinity(), T::min);
    let th = theta(arms, phi);
    let k = T::lit(arms as f64);
    let root = exploration_term(arms, horizon, big_phi, vio);

    let grid = delta_grid(phi_min);
    if grid.is_empty() {
        return Err(Error::EmptyDeltaGrid);
    }
    let tail = (T::lit(agents as f64) * horizon / (k * big_phi)).sqrt();
    let (vio_delta, vio_bound) = grid
        .into_iter()
        .map(|d| {
            (
                d,
                xi(d, agents, th, phi_min) + th * th / (T::lit(4.0) * d) * tail,
            )
        })
        .fold((T::nan(), T::infinity()), |best, cand| {
            if cand.1 < best.1 {
                cand
            } else {
                best
            }
        });

    Ok(TheoremBounds {
        reg_bound: T::lit(6.0) * k + T::lit(3.0) * root,
        vio_bound,
        vio_delta,
        pro_bound: -(T::lit(2.5) * k + T::lit(2.0) * root),
    })
}
