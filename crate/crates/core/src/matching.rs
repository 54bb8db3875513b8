//! Per-slot assignment: maximum-weight partial bipartite matching between
//! agents (rows) and arms (columns), each side with unit capacity.
//!
//! The main solver reduces to a square assignment problem over the
//! positive-weight edges and runs the O(n^3) Hungarian method. Ties between
//! optimal matchings are broken toward the lexicographically smallest sorted
//! edge list, which is the same as preferring the set that contains the
//! smallest `(agent, arm)` edge of the symmetric difference. That preference
//! is additive, so it rides along as a secondary integer key.

use std::cmp::Ordering;
use std::ops::{Add, Neg, Sub};

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Upper bound on the number of partial matchings the brute-force oracle enumerates.
pub const BRUTE_FORCE_LIMIT: u128 = 1_000_000;

/// Largest `N * K` for which exact lexicographic tie-breaking is encoded.
const RANKED_EDGE_LIMIT: usize = 96;

/// N x K matrix of finite edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix<T> {
    w: Array2<T>,
}

impl<T: Scalar> WeightMatrix<T> {
    pub fn new(w: Array2<T>) -> Result<Self> {
        if let Some(((row, col), _)) = w.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite { row, col });
        }
        Ok(Self { w })
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        let k = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::DimensionMismatch {
                what: "weight rows",
                expected: (n, k),
                found: (n, bad.len()),
            });
        }
        let flat: Vec<T> = rows.iter().flatten().copied().collect();
        let w = Array2::from_shape_vec((n, k), flat).expect("shape checked");
        Self::new(w)
    }

    pub fn agents(&self) -> usize {
        self.w.nrows()
    }

    pub fn arms(&self) -> usize {
        self.w.ncols()
    }

    pub fn get(&self, agent: usize, arm: usize) -> T {
        self.w[[agent, arm]]
    }

    pub fn as_array(&self) -> &Array2<T> {
        &self.w
    }

    /// The same instance with one agent's row deleted.
    pub fn without_agent(&self, agent: usize) -> Self {
        let keep: Vec<usize> = (0..self.agents()).filter(|&i| i != agent).collect();
        Self {
            w: self.w.select(ndarray::Axis(0), &keep),
        }
    }

    /// Total weight of `assignment`, summed over its edges in agent order.
    pub fn weight_of(&self, assignment: &Assignment) -> T {
        assignment
            .edges()
            .fold(T::zero(), |acc, (n, k)| acc + self.w[[n, k]])
    }
}

/// A partial matching: every agent pulls at most one arm and every arm is
/// pulled by at most one agent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment {
    arms: usize,
    arm_of: Vec<Option<usize>>,
}

impl Assignment {
    pub fn empty(agents: usize, arms: usize) -> Self {
        Self {
            arms,
            arm_of: vec![None; agents],
        }
    }

    /// Builds an assignment from `(agent, arm)` pairs, rejecting anything outside the polytope.
    pub fn from_edges(agents: usize, arms: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut out = Self::empty(agents, arms);
        let mut taken = vec![false; arms];
        for &(n, k) in edges {
            if n >= agents || k >= arms {
                return Err(Error::InfeasibleAssignment(format!(
                    "edge ({n}, {k}) outside {agents}x{arms}"
                )));
            }
            if out.arm_of[n].is_some() {
                return Err(Error::InfeasibleAssignment(format!(
                    "agent {n} assigned twice"
                )));
            }
            if taken[k] {
                return Err(Error::InfeasibleAssignment(format!(
                    "arm {k} assigned twice"
                )));
            }
            out.arm_of[n] = Some(k);
            taken[k] = true;
        }
        Ok(out)
    }

    /// Reads a 0/1 matrix, rejecting rows or columns that sum above one.
    pub fn from_matrix(x: &Array2<u8>) -> Result<Self> {
        let mut edges = Vec::new();
        for ((n, k), &v) in x.indexed_iter() {
            match v {
                0 => {}
                1 => edges.push((n, k)),
                other => {
                    return Err(Error::InfeasibleAssignment(format!(
                        "entry ({n}, {k}) = {other} is not binary"
                    )))
                }
            }
        }
        Self::from_edges(x.nrows(), x.ncols(), &edges)
    }

    pub fn agents(&self) -> usize {
        self.arm_of.len()
    }

    pub fn arms(&self) -> usize {
        self.arms
    }

    pub fn arm_of(&self, agent: usize) -> Option<usize> {
        self.arm_of[agent]
    }

    pub fn is_assigned(&self, agent: usize) -> bool {
        self.arm_of[agent].is_some()
    }

    pub fn contains(&self, agent: usize, arm: usize) -> bool {
        self.arm_of[agent] == Some(arm)
    }

    pub fn is_empty(&self) -> bool {
        self.arm_of.iter().all(Option::is_none)
    }

    pub fn len(&self) -> usize {
        self.arm_of.iter().flatten().count()
    }

    /// Selected edges in ascending `(agent, arm)` order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.arm_of
            .iter()
            .enumerate()
            .filter_map(|(n, k)| k.map(|k| (n, k)))
    }

    pub fn to_matrix(&self) -> Array2<u8> {
        let mut x = Array2::zeros((self.agents(), self.arms));
        for (n, k) in self.edges() {
            x[[n, k]] = 1;
        }
        x
    }
}

/// Lexicographic key: weight first, then the tie-break rank.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key<T> {
    weight: T,
    rank: i128,
}

impl<T: Scalar> Key<T> {
    fn zero() -> Self {
        Self {
            weight: T::zero(),
            rank: 0,
        }
    }

    fn infinity() -> Self {
        Self {
            weight: T::infinity(),
            rank: 0,
        }
    }
}

impl<T: Scalar> Add for Key<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            weight: self.weight + o.weight,
            rank: self.rank + o.rank,
        }
    }
}

impl<T: Scalar> Sub for Key<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            weight: self.weight - o.weight,
            rank: self.rank - o.rank,
        }
    }
}

impl<T: Scalar> Neg for Key<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            weight: -self.weight,
            rank: -self.rank,
        }
    }
}

impl<T: Scalar> PartialOrd for Key<T> {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        match self.weight.partial_cmp(&o.weight)? {
            Ordering::Equal => Some(self.rank.cmp(&o.rank)),
            ord => Some(ord),
        }
    }
}

/// Maximizes `sum w[n,k] x[n,k]` over partial matchings. Non-positive edges
/// are never selected.
pub fn max_weight_matching<T: Scalar>(w: &WeightMatrix<T>) -> (Assignment, T) {
    let (n_agents, n_arms) = (w.agents(), w.arms());
    let mut assignment = Assignment::empty(n_agents, n_arms);
    if n_agents == 0 || n_arms == 0 {
        return (assignment, T::zero());
    }

    let ranked = n_agents * n_arms <= RANKED_EDGE_LIMIT;
    let top = n_agents * n_arms;
    let size = n_agents.max(n_arms);
    // Minimization form: cost = -(weight, rank) on positive edges, zero elsewhere.
    let mut cost = vec![Key::<T>::zero(); size * size];
    let mut any_positive = false;
    for n in 0..n_agents {
        for k in 0..n_arms {
            let v = w.get(n, k);
            if v > T::zero() {
                any_positive = true;
                let rank = if ranked {
                    1i128 << (top - 1 - (n * n_arms + k))
                } else {
                    0
                };
                cost[n * size + k] = -Key { weight: v, rank };
            }
        }
    }
    if !any_positive {
        return (assignment, T::zero());
    }

    let col_owner = hungarian_min(&cost, size);
    for (k, owner) in col_owner.iter().enumerate().take(n_arms) {
        if let Some(n) = *owner {
            if n < n_agents && w.get(n, k) > T::zero() {
                assignment.arm_of[n] = Some(k);
            }
        }
    }
    let total = w.weight_of(&assignment);
    (assignment, total)
}

/// Square min-cost assignment (shortest augmenting path with potentials).
/// Returns the row assigned to each column.
fn hungarian_min<T: Scalar>(cost: &[Key<T>], size: usize) -> Vec<Option<usize>> {
    let inf = Key::<T>::infinity();
    // 1-indexed; index 0 is the virtual source column.
    let mut u = vec![Key::zero(); size + 1];
    let mut v = vec![Key::zero(); size + 1];
    let mut p = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];
    let mut minv = vec![inf; size + 1];
    let mut used = vec![false; size + 1];

    for i in 1..=size {
        p[0] = i;
        let mut j0 = 0usize;
        minv.iter_mut().for_each(|m| *m = inf);
        used.iter_mut().for_each(|b| *b = false);
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = inf;
            let mut j1 = 0usize;
            for j in 1..=size {
                if used[j] {
                    continue;
                }
                let cur = cost[(i0 - 1) * size + (j - 1)] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[p[j]] = u[p[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    (1..=size)
        .map(|j| if p[j] > 0 { Some(p[j] - 1) } else { None })
        .collect()
}

/// Number of partial matchings of the complete N x K bipartite graph.
pub fn matching_count(agents: usize, arms: usize) -> u128 {
    // sum_j C(N,j) C(K,j) j!
    let m = agents.min(arms);
    let mut total: u128 = 0;
    let mut term: u128 = 1;
    for j in 0..=m {
        if j > 0 {
            let j128 = j as u128;
            term = term
                .saturating_mul((agents - j + 1) as u128)
                .saturating_mul((arms - j + 1) as u128)
                / j128;
        }
        total = total.saturating_add(term);
    }
    total
}

/// Exhaustive oracle with the same selection rule as [`max_weight_matching`].
pub fn brute_force_matching<T: Scalar>(w: &WeightMatrix<T>) -> Result<(Assignment, T)> {
    let count = matching_count(w.agents(), w.arms());
    if count > BRUTE_FORCE_LIMIT {
        return Err(Error::InstanceTooLarge {
            count,
            limit: BRUTE_FORCE_LIMIT,
        });
    }

    struct Search<'a, T> {
        w: &'a WeightMatrix<T>,
        taken: Vec<bool>,
        current: Vec<(usize, usize)>,
        best: Vec<(usize, usize)>,
        best_weight: T,
    }

    impl<T: Scalar> Search<'_, T> {
        fn visit(&mut self, agent: usize, acc: T) {
            if agent == self.w.agents() {
                let better =
                    acc > self.best_weight || (acc == self.best_weight && self.current < self.best);
                if better {
                    self.best_weight = acc;
                    self.best.clone_from(&self.current);
                }
                return;
            }
            self.visit(agent + 1, acc);
            for k in 0..self.w.arms() {
                let v = self.w.get(agent, k);
                if self.taken[k] || v <= T::zero() {
                    continue;
                }
                self.taken[k] = true;
                self.current.push((agent, k));
                self.visit(agent + 1, acc + v);
                self.current.pop();
                self.taken[k] = false;
            }
        }
    }

    let mut search = Search {
        w,
        taken: vec![false; w.arms()],
        current: Vec::new(),
        best: Vec::new(),
        best_weight: T::zero(),
    };
    search.visit(0, T::zero());
    let assignment = Assignment::from_edges(w.agents(), w.arms(), &search.best)?;
    Ok((assignment, search.best_weight))
}
