//! The two experiment suites: a two-agent edge-computing setting and a
//! homogeneous crowd sweep.

use crate::env::{ArmSpec, CostModel, SYNTHETIC_PRICES};
use crate::error::{Error, Result};

use super::config::{OracleSettings, PhiSpec, RunConfig, StepSize};

pub const PRESET_MEANS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const SMALL_SCALE_T: u64 = 20_000;
pub const LARGE_SCALE_T: u64 = 100_000;
pub const DEFAULT_RUNS: usize = 20;

fn preset_arms() -> Vec<ArmSpec> {
    PRESET_MEANS
        .iter()
        .map(|&mean| ArmSpec::Bernoulli { mean })
        .collect()
}

/// Five Bernoulli arms, two servers with shares 0.7 and 0.3, costs from
/// electricity price times a truncated-normal energy draw.
pub fn preset_small_scale() -> RunConfig {
    RunConfig {
        k: 5,
        n: 2,
        t: SMALL_SCALE_T,
        r: DEFAULT_RUNS,
        seed: 1,
        phi: PhiSpec::Explicit(vec![0.7, 0.3]),
        eta: StepSize::Theorem2,
        output_dir: None,
        arms: preset_arms(),
        cost_model: CostModel::EdgeComputing {
            price_series: SYNTHETIC_PRICES.into(),
            energy_mu: 0.05,
            energy_sigma: 0.02,
            energy_max: 0.1,
            c_min: 0.0,
        },
        agent_policies: Vec::new(),
        oracle: OracleSettings::default(),
    }
}

/// Crowd size cap `⌊α^{1/3} T^β⌋`.
pub fn large_scale_max_agents(alpha: f64, beta: f64, horizon: u64) -> Result<usize> {
    if !(beta > 0.0 && beta < 1.0 / 3.0) {
        return Err(Error::InvalidArgument(format!(
            "beta {beta} outside (0, 1/3)"
        )));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} must be positive"
        )));
    }
    let raw = alpha.cbrt() * (horizon as f64).powf(beta);
    // powf may land one ulp below an exact integer
    let n_max = (raw + 1e-9).floor() as usize;
    if n_max == 0 {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha}, beta {beta}, T {horizon} admit no agents"
        )));
    }
    Ok(n_max)
}

/// One config per crowd size `N = 1..=⌊α^{1/3} T^β⌋`, with `φ_n = α/N`
/// and IID truncated-normal costs.
pub fn preset_large_scale(alpha: f64, beta: f64, horizon: u64) -> Result<Vec<RunConfig>> {
    let n_max = large_scale_max_agents(alpha, beta, horizon)?;
    let configs = (1..=n_max)
        .map(|n| RunConfig {
            k: PRESET_MEANS.len(),
            n,
            t: horizon,
            r: DEFAULT_RUNS,
            seed: 1000 * n as u64,
            phi: PhiSpec::Homogeneous { homogeneous: alpha },
            eta: StepSize::Theorem2,
            output_dir: None,
            arms: preset_arms(),
            cost_model: CostModel::IidTruncatedNormal {
                mu: 0.25,
                sigma: 0.1,
                c_min: 0.0,
            },
            agent_policies: Vec::new(),
            oracle: OracleSettings::default(),
        })
        .collect::<Vec<_>>();
    for c in &configs {
        c.validate()?;
    }
    Ok(configs)
}
