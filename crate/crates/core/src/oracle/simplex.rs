//! Dense primal simplex for `max c.x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The slack basis is feasible from the start, so a single phase suffices.
//! Bland's rule keeps degenerate pivots from cycling.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct LpSolution<T> {
    pub value: T,
    pub x: Vec<T>,
}

pub fn maximize<T: Scalar>(c: &[T], a: &[Vec<T>], b: &[T]) -> Result<LpSolution<T>> {
    let n = c.len();
    let m = b.len();
    if a.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::InvalidArgument(
            "constraint matrix shape mismatch".into(),
        ));
    }
    if b.iter().any(|&v| v < T::zero()) {
        return Err(Error::InvalidArgument(
            "right-hand side must be non-negative".into(),
        ));
    }

    let eps = T::epsilon() * T::lit(1024.0);
    let width = n + m + 1;
    // rows 0..m constraints, row m objective (reduced costs, negated)
    let mut tab = vec![T::zero(); (m + 1) * width];
    for i in 0..m {
        for j in 0..n {
            tab[i * width + j] = a[i][j];
        }
        tab[i * width + n + i] = T::one();
        tab[i * width + width - 1] = b[i];
    }
    for j in 0..n {
        tab[m * width + j] = -c[j];
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let max_pivots = 50 * (n + m).max(1) * (n + m).max(1);
    for _ in 0..max_pivots {
        let Some(enter) = (0..n + m).find(|&j| tab[m * width + j] < -eps) else {
            let mut x = vec![T::zero(); n];
            for (i, &var) in basis.iter().enumerate() {
                if var < n {
                    x[var] = tab[i * width + width - 1];
                }
            }
            return Ok(LpSolution {
                value: tab[m * width + width - 1],
                x,
            });
        };

        let mut leave: Option<(usize, T)> = None;
        for i in 0..m {
            let coef = tab[i * width + enter];
            if coef > eps {
                let ratio = tab[i * width + width - 1] / coef;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) if ratio < best || (ratio == best && basis[i] < basis[r]) => {
                        Some((i, ratio))
                    }
                    keep => keep,
                };
            }
        }
        let Some((row, _)) = leave else {
            return Err(Error::InvalidArgument("linear program is unbounded".into()));
        };

        let pivot = tab[row * width + enter];
        for j in 0..width {
            tab[row * width + j] = tab[row * width + j] / pivot;
        }
        for i in 0..=m {
            if i == row {
                continue;
            }
            let factor = tab[i * width + enter];
            if factor == T::zero() {
                continue;
            }
            for j in 0..width {
                let delta = factor * tab[row * width + j];
                tab[i * width + j] -= delta;
            }
        }
        basis[row] = enter;
    }
    Err(Error::InvalidArgument("simplex pivot limit reached".into()))
}
