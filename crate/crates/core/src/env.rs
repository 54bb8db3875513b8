//! The hidden environment: stochastic arm rewards and private agent costs.
//!
//! Every slot draws from its own ChaCha stream keyed by `(seed, slot)`, so a
//! realization depends only on the seed and the slot index. Replays never
//! need to fast-forward a shared generator and no draw is reused across slots.

use std::io::Read;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Identifier of the bundled synthetic price trace.
pub const SYNTHETIC_PRICES: &str = "synthetic";

const SYNTHETIC_PRICES_CSV: &str = include_str!("../data/synthetic_prices.csv");

const MAX_REJECTIONS: usize = 100_000;

/// Reward distribution of one arm, supported on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "distribution", rename_all = "kebab-case")]
pub enum ArmSpec {
    Bernoulli { mean: f64 },
    Uniform { lo: f64, hi: f64 },
}

impl ArmSpec {
    pub fn mean_reward(&self) -> f64 {
        match *self {
            ArmSpec::Bernoulli { mean } => mean,
            ArmSpec::Uniform { lo, hi } => 0.5 * (lo + hi),
        }
    }

    pub fn std_dev(&self) -> f64 {
        match *self {
            ArmSpec::Bernoulli { mean } => (mean * (1.0 - mean)).sqrt(),
            ArmSpec::Uniform { lo, hi } => (hi - lo) / 12f64.sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            ArmSpec::Bernoulli { mean } if !(0.0..=1.0).contains(&mean) => Err(Error::InvalidSpec(
                format!("bernoulli mean {mean} outside [0, 1]"),
            )),
            ArmSpec::Uniform { lo, hi } if !(0.0 <= lo && lo <= hi && hi <= 1.0) => Err(
                Error::InvalidSpec(format!("uniform support [{lo}, {hi}] not inside [0, 1]")),
            ),
            _ => Ok(()),
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match *self {
            ArmSpec::Bernoulli { mean } => {
                if rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            ArmSpec::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
        }
    }
}

/// Distribution of the private per-(agent, arm) cost. Samples always lie in `[c_min, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CostModel {
    /// IID normal(mu, sigma) truncated to `[c_min, 1]`.
    IidTruncatedNormal { mu: f64, sigma: f64, c_min: f64 },
    /// `price(t) * energy`, energy ~ normal(energy_mu, energy_sigma) truncated
    /// to `[0, energy_max]`, clamped into `[c_min, 1]`.
    EdgeComputing {
        price_series: String,
        energy_mu: f64,
        energy_sigma: f64,
        energy_max: f64,
        c_min: f64,
    },
}

impl CostModel {
    pub fn c_min(&self) -> f64 {
        match *self {
            CostModel::IidTruncatedNormal { c_min, .. }
            | CostModel::EdgeComputing { c_min, .. } => c_min,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c_min = self.c_min();
        if !(0.0..=1.0).contains(&c_min) {
            return Err(Error::InvalidSpec(format!("c_min {c_min} outside [0, 1]")));
        }
        match *self {
            CostModel::IidTruncatedNormal { mu, sigma, .. } => {
                if !mu.is_finite() || !(sigma.is_finite() && sigma >= 0.0) {
                    return Err(Error::InvalidSpec(format!(
                        "truncated normal needs finite mu and sigma >= 0, got ({mu}, {sigma})"
                    )));
                }
            }
            CostModel::EdgeComputing {
                energy_mu,
                energy_sigma,
                energy_max,
                ..
            } => {
                if !energy_mu.is_finite()
                    || !(energy_sigma.is_finite() && energy_sigma >= 0.0)
                    || !(energy_max.is_finite() && energy_max >= 0.0)
                {
                    return Err(Error::InvalidSpec(format!(
                        "bad energy parameters ({energy_mu}, {energy_sigma}, {energy_max})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// True when every cost sample is the same constant.
    pub fn is_degenerate(&self) -> bool {
        match *self {
            CostModel::IidTruncatedNormal { sigma, c_min, .. } => sigma == 0.0 || c_min == 1.0,
            CostModel::EdgeComputing { c_min, .. } => c_min == 1.0,
        }
    }
}

/// Normal(mu, sigma) truncated to `[lo, hi]` by rejection.
fn truncated_normal<R: Rng>(rng: &mut R, mu: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    if lo >= hi || sigma == 0.0 {
        return mu.clamp(lo, hi);
    }
    let normal = Normal::new(mu, sigma).expect("validated parameters");
    let mut last = mu;
    for _ in 0..MAX_REJECTIONS {
        last = normal.sample(rng);
        if (lo..=hi).contains(&last) {
            return last;
        }
    }
    // support carries negligible mass; fall back to the nearest endpoint
    last.clamp(lo, hi)
}

/// Ordered `(slot, price)` trace; lookups past the end wrap around.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries {
    entries: Vec<(u64, f64)>,
}

impl PriceSeries {
    pub fn new(entries: Vec<(u64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptySeries);
        }
        for (row, w) in entries.windows(2).enumerate() {
            if w[1].0 <= w[0].0 {
                return Err(Error::PriceParse {
                    row: row + 2,
                    message: format!("slot {} does not increase past {}", w[1].0, w[0].0),
                });
            }
        }
        if let Some((row, &(_, price))) = entries.iter().enumerate().find(|(_, e)| e.1 < 0.0) {
            return Err(Error::NegativePrice {
                row: row + 1,
                price,
            });
        }
        Ok(Self { entries })
    }

    pub fn synthetic() -> Self {
        load_price_series(SYNTHETIC_PRICES_CSV.as_bytes()).expect("bundled price series is valid")
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(u64, f64)] {
        &self.entries
    }

    fn period(&self) -> u64 {
        let first = self.entries[0].0;
        let last = self.entries[self.entries.len() - 1].0;
        last - first + 1
    }

    /// Price in force at `slot`: the latest entry at or before it, after
    /// folding the slot into the series' span.
    pub fn price_at(&self, slot: u64) -> f64 {
        let first = self.entries[0].0 as i128;
        let offset = (slot as i128 - first).rem_euclid(self.period() as i128);
        let folded = (first + offset) as u64;
        let idx = self.entries.partition_point(|&(s, _)| s <= folded);
        self.entries[idx.saturating_sub(1)].1
    }
}

/// Parses a `slot,price` CSV stream. Row numbers in errors count the header as row 1.
pub fn load_price_series<R: Read>(source: R) -> Result<PriceSeries> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    if headers.len() != 2 || &headers[0] != "slot" || &headers[1] != "price" {
        return Err(Error::PriceParse {
            row: 1,
            message: format!(
                "expected header `slot,price`, found `{}`",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        });
    }
    let mut entries = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 2;
        let record = record.map_err(|e| Error::PriceParse {
            row,
            message: e.to_string(),
        })?;
        if record.len() != 2 {
            return Err(Error::PriceParse {
                row,
                message: format!("expected 2 fields, found {}", record.len()),
            });
        }
        let slot: u64 = record[0].parse().map_err(|e| Error::PriceParse {
            row,
            message: format!("bad slot `{}`: {e}", &record[0]),
        })?;
        let price: f64 = record[1].parse().map_err(|e| Error::PriceParse {
            row,
            message: format!("bad price `{}`: {e}", &record[1]),
        })?;
        if !price.is_finite() {
            return Err(Error::PriceParse {
                row,
                message: format!("non-finite price `{}`", &record[1]),
            });
        }
        if price < 0.0 {
            return Err(Error::NegativePrice { row, price });
        }
        if let Some(&(prev, _)) = entries.last() {
            if slot <= prev {
                return Err(Error::PriceParse {
                    row,
                    message: format!("slot {slot} does not increase past {prev}"),
                });
            }
        }
        entries.push((slot, price));
    }
    if entries.is_empty() {
        return Err(Error::EmptySeries);
    }
    PriceSeries::new(entries)
}

/// One slot's ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvRealization<T> {
    pub slot: u64,
    /// `r^t`, one entry per arm.
    pub rewards: Vec<T>,
    /// `c^t`, agents x arms.
    pub costs: Array2<T>,
}

#[derive(Debug, Clone)]
enum CostSampler {
    TruncatedNormal {
        mu: f64,
        sigma: f64,
        c_min: f64,
    },
    Edge {
        prices: PriceSeries,
        energy_mu: f64,
        energy_sigma: f64,
        energy_max: f64,
        c_min: f64,
    },
}

impl CostSampler {
    fn c_min(&self) -> f64 {
        match *self {
            CostSampler::TruncatedNormal { c_min, .. } | CostSampler::Edge { c_min, .. } => c_min,
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R, price: f64) -> f64 {
        match *self {
            CostSampler::TruncatedNormal { mu, sigma, c_min } => {
                truncated_normal(rng, mu, sigma, c_min, 1.0)
            }
            CostSampler::Edge {
                energy_mu,
                energy_sigma,
                energy_max,
                c_min,
                ..
            } => {
                let energy = truncated_normal(rng, energy_mu, energy_sigma, 0.0, energy_max);
                (price * energy).clamp(c_min, 1.0)
            }
        }
    }

    fn price_at(&self, slot: u64) -> f64 {
        match self {
            CostSampler::TruncatedNormal { .. } => 1.0,
            CostSampler::Edge { prices, .. } => prices.price_at(slot),
        }
    }
}

/// Seeded environment for `agents` agents over the configured arms.
#[derive(Debug, Clone)]
pub struct Environment {
    arms: Vec<ArmSpec>,
    agents: usize,
    costs: CostSampler,
    seed: u64,
}

impl Environment {
    /// `prices` is required for the edge-computing model and ignored otherwise.
    pub fn new(
        arms: Vec<ArmSpec>,
        cost_model: &CostModel,
        agents: usize,
        seed: u64,
        prices: Option<PriceSeries>,
    ) -> Result<Self> {
        if arms.is_empty() || agents == 0 {
            return Err(Error::InvalidSpec(
                "need at least one arm and one agent".into(),
            ));
        }
        for arm in &arms {
            arm.validate()?;
        }
        cost_model.validate()?;
        let costs = match *cost_model {
            CostModel::IidTruncatedNormal { mu, sigma, c_min } => {
                CostSampler::TruncatedNormal { mu, sigma, c_min }
            }
            CostModel::EdgeComputing {
                ref price_series,
                energy_mu,
                energy_sigma,
                energy_max,
                c_min,
            } => {
                let prices = match prices {
                    Some(p) => p,
                    None if price_series == SYNTHETIC_PRICES => PriceSeries::synthetic(),
                    None => {
                        return Err(Error::InvalidSpec(format!(
                            "price series `{price_series}` was not supplied"
                        )))
                    }
                };
                CostSampler::Edge {
                    prices,
                    energy_mu,
                    energy_sigma,
                    energy_max,
                    c_min,
                }
            }
        };
        Ok(Self {
            arms,
            agents,
            costs,
            seed,
        })
    }

    pub fn arms(&self) -> &[ArmSpec] {
        &self.arms
    }

    pub fn n_arms(&self) -> usize {
        self.arms.len()
    }

    pub fn n_agents(&self) -> usize {
        self.agents
    }

    pub fn c_min(&self) -> f64 {
        self.costs.c_min()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn mean_rewards(&self) -> Vec<f64> {
        self.arms.iter().map(ArmSpec::mean_reward).collect()
    }

    fn slot_rng(&self, slot: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(slot);
        rng
    }

    /// Draws slot `slot` (1-based). Pure in `(seed, slot)`.
    pub fn sample_slot<T: Scalar>(&self, slot: u64) -> EnvRealization<T> {
        assert!(slot >= 1, "slots are 1-based");
        let mut rng = self.slot_rng(slot);
        let rewards = self
            .arms
            .iter()
            .map(|a| T::lit(a.sample(&mut rng)))
            .collect();
        let price = self.costs.price_at(slot);
        let costs = self.cost_matrix_with(&mut rng, price);
        EnvRealization {
            slot,
            rewards,
            costs,
        }
    }

    fn cost_matrix_with<T: Scalar, R: Rng>(&self, rng: &mut R, price: f64) -> Array2<T> {
        let k = self.arms.len();
        Array2::from_shape_fn((self.agents, k), |_| T::lit(self.costs.sample(rng, price)))
    }

    /// An IID draw of the cost matrix from its stationary marginal; for a
    /// price trace the slot is drawn uniformly over one period.
    pub fn sample_cost_matrix<T: Scalar, R: Rng>(&self, rng: &mut R) -> Array2<T> {
        let price = match &self.costs {
            CostSampler::TruncatedNormal { .. } => 1.0,
            CostSampler::Edge { prices, .. } => {
                let first = prices.entries()[0].0;
                let slot = first + rng.random_range(0..prices.period());
                prices.price_at(slot)
            }
        };
        self.cost_matrix_with(rng, price)
    }
}
