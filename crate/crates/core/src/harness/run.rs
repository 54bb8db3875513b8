//! Seeded end-to-end simulation and result files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::RunConfig;
use crate::agents::{decide_participation, form_bids, AgentPolicy, Bidder};
use crate::error::Result;
use crate::mechanism::{step, MechanismState, SlotRecord};
use crate::oracle::{
    finalize_metrics, s_dagger, s_star_dual_saa, s_star_exact, theorem_bounds, BaselineValues,
    MetricLedger, Metrics, SStarMethod, SaaEstimate, TheoremBounds,
};

pub const SLOTS_FILE: &str = "slots.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const CONFIG_FILE: &str = "config.toml";
pub const METADATA_FILE: &str = "metadata.json";

/// Numeric summary columns, in file order.
pub const SUMMARY_COLUMNS: [&str; 11] = [
    "regret",
    "violation",
    "profit",
    "degradation",
    "reward",
    "cost",
    "welfare",
    "payment",
    "mean_agent_payoff",
    "min_payoff",
    "declines",
];

/// Baselines plus, for sampled cost models, the dual estimate behind `S*`.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub baselines: BaselineValues<f64>,
    pub saa: Option<SaaEstimate<f64>>,
}

/// Computes `S†` and `S*` for a config. `S*` is exact when the cost model is
/// degenerate and a sample-average estimate otherwise.
pub fn compute_baselines(config: &RunConfig) -> Result<OracleReport> {
    let means = config.mean_rewards();
    let phi = config.phi();
    let c_min = config.cost_model.c_min();
    let dagger = s_dagger(&means, c_min, &phi);
    let env = config.environment(0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x0AC1_E5EE_D000_0000);
    if config.cost_model.is_degenerate() {
        let costs = env.sample_cost_matrix::<f64, _>(&mut rng);
        let s_star = s_star_exact(&means, &[(costs, 1.0)], &phi)?;
        return Ok(OracleReport {
            baselines: BaselineValues {
                s_star,
                s_dagger: dagger,
                s_star_method: SStarMethod::ExactFiniteSupport,
            },
            saa: None,
        });
    }
    let est = s_star_dual_saa(
        &means,
        || env.sample_cost_matrix(&mut rng),
        &phi,
        config.oracle.samples,
        config.oracle.iterations,
    )?;
    Ok(OracleReport {
        baselines: BaselineValues {
            s_star: est.value,
            s_dagger: dagger,
            s_star_method: SStarMethod::DualSaa {
                samples: est.samples,
            },
        },
        saa: Some(est),
    })
}

fn run_policy(policy: AgentPolicy, run: usize) -> AgentPolicy {
    match policy {
        AgentPolicy::RandomMisreport { seed } => AgentPolicy::RandomMisreport {
            seed: seed.wrapping_add(run as u64),
        },
        other => other,
    }
}

/// Plays run `run` slot by slot, handing every settled slot and the ledger
/// after it to `observe`. Stops early once `observe` returns `false`.
pub fn simulate_run<F>(config: &RunConfig, run: usize, mut observe: F) -> Result<MetricLedger<f64>>
where
    F: FnMut(&SlotRecord<f64>, &MetricLedger<f64>) -> Result<bool>,
{
    let env = config.environment(run)?;
    let c_min = config.cost_model.c_min();
    let mut bidders: Vec<Bidder> = config
        .policies()
        .into_iter()
        .map(|p| Bidder::new(run_policy(p, run)))
        .collect();
    let mut state = MechanismState::new(config.k, config.phi(), config.step_size()?, config.t)?;
    let mut ledger = MetricLedger::new(config.phi());
    for slot in 1..=config.t {
        let realization = env.sample_slot::<f64>(slot);
        let bids = form_bids(&mut bidders, &realization.costs, c_min)?;
        let (_, record, next) = step(&state, &bids, &realization, |p| {
            decide_participation(p, &realization.costs)
        })?;
        ledger.record_slot(&record)?;
        if !observe(&record, &ledger)? {
            break;
        }
        state = next;
    }
    Ok(ledger)
}

pub fn slots_header(arms: usize, agents: usize) -> String {
    let mut h = String::from("run,slot");
    for k in 1..=arms {
        write!(h, ",r_hat_{k}").unwrap();
    }
    h.push_str(",assignment");
    for n in 1..=agents {
        write!(h, ",payment_{n}").unwrap();
    }
    for n in 1..=agents {
        write!(h, ",lambda_{n}").unwrap();
    }
    h.push_str(",reward,cost,welfare,profit");
    h
}

/// One per-slot CSV row. Edges print as 1-based `agent:arm`, joined by `;`,
/// with a trailing `!` when the agent declined; `-` for an empty assignment.
pub fn format_slot_row(run: usize, r: &SlotRecord<f64>) -> String {
    let mut row = format!("{run},{}", r.slot);
    for v in &r.reward_estimates {
        write!(row, ",{v}").unwrap();
    }
    let edges: Vec<String> = r
        .assignment
        .edges()
        .map(|(n, k)| {
            format!(
                "{}:{}{}",
                n + 1,
                k + 1,
                if r.participation[n] { "" } else { "!" }
            )
        })
        .collect();
    row.push(',');
    row.push_str(if edges.is_empty() { "-" } else { "" });
    row.push_str(&edges.join(";"));
    for v in &r.payments {
        write!(row, ",{v}").unwrap();
    }
    for v in &r.lambda {
        write!(row, ",{v}").unwrap();
    }
    write!(row, ",{},{},{},{}", r.reward, r.cost, r.welfare, r.profit).unwrap();
    row
}

/// Outcome of one seeded run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub ledger: MetricLedger<f64>,
    pub metrics: Metrics<f64>,
    pub bounds: TheoremBounds<f64>,
}

impl RunSummary {
    /// Values in `SUMMARY_COLUMNS` order.
    pub fn values(&self) -> [f64; 11] {
        let l = &self.ledger;
        [
            self.metrics.regret,
            self.metrics.violation,
            self.metrics.profit,
            self.metrics.degradation,
            l.cum_reward,
            l.cum_cost,
            l.cum_welfare,
            l.cum_payment,
            l.mean_agent_payoff(),
            l.min_payoff,
            l.declines as f64,
        ]
    }
}

/// Running per-slot averages of one run: reward, cost, welfare, profit.
pub type Trajectory = Vec<[f64; 4]>;

#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Keep formatted per-slot rows in memory.
    pub keep_rows: bool,
    pub keep_trajectories: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            keep_rows: true,
            keep_trajectories: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub config: RunConfig,
    pub oracle: OracleReport,
    pub runs: Vec<RunSummary>,
    /// Across-run mean and sample standard deviation of each summary column.
    pub mean: [f64; 11],
    pub std: [f64; 11],
    /// Bounds evaluated at the mean violation.
    pub bounds: TheoremBounds<f64>,
    pub rows: Vec<Vec<String>>,
    pub trajectories: Vec<Trajectory>,
    pub wall_time: Duration,
}

impl RunOutput {
    pub fn mean_of(&self, column: &str) -> f64 {
        self.mean[column_index(column)]
    }

    pub fn std_of(&self, column: &str) -> f64 {
        self.std[column_index(column)]
    }
}

fn column_index(column: &str) -> usize {
    SUMMARY_COLUMNS
        .iter()
        .position(|c| *c == column)
        .unwrap_or_else(|| panic!("unknown summary column `{column}`"))
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs every seed, writing files when `config.output_dir` is set.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    run_with(config, &RunOptions::default())
}

pub fn run_with(config: &RunConfig, options: &RunOptions) -> Result<RunOutput> {
    config.validate()?;
    let started = Instant::now();
    let oracle = compute_baselines(config)?;
    let horizon = config.t as f64;
    let phi = config.phi();

    let per_run: Vec<(RunSummary, Vec<String>, Trajectory)> = (0..config.r)
        .into_par_iter()
        .map(|run| -> Result<_> {
            let mut rows = Vec::new();
            let mut trajectory = Vec::new();
            let ledger = simulate_run(config, run, |record, ledger| {
                if options.keep_rows {
                    rows.push(format_slot_row(run, record));
                }
                if options.keep_trajectories {
                    let t = ledger.slots as f64;
                    trajectory.push([
                        ledger.cum_reward / t,
                        ledger.cum_cost / t,
                        ledger.cum_welfare / t,
                        ledger.profit() / t,
                    ]);
                }
                Ok(true)
            })?;
            let metrics = finalize_metrics(&ledger, Some(&oracle.baselines))?;
            let bounds = bounds_for(config, horizon, &phi, metrics.violation)?;
            let summary = RunSummary {
                run,
                seed: config.run_seed(run),
                ledger,
                metrics,
                bounds,
            };
            Ok((summary, rows, trajectory))
        })
        .collect::<Result<_>>()?;

    let mut runs = Vec::with_capacity(per_run.len());
    let mut rows = Vec::new();
    let mut trajectories = Vec::new();
    for (summary, r, t) in per_run {
        runs.push(summary);
        rows.push(r);
        trajectories.push(t);
    }

    let mut mean = [0.0; 11];
    let mut std = [0.0; 11];
    for c in 0..SUMMARY_COLUMNS.len() {
        let column: Vec<f64> = runs.iter().map(|s| s.values()[c]).collect();
        (mean[c], std[c]) = mean_std(&column);
    }
    let bounds = bounds_for(config, horizon, &phi, mean[column_index("violation")])?;

    let output = RunOutput {
        config: config.clone(),
        oracle,
        runs,
        mean,
        std,
        bounds,
        rows,
        trajectories,
        wall_time: started.elapsed(),
    };
    if let Some(dir) = &config.output_dir {
        write_output(&output, dir)?;
    }
    Ok(output)
}

/// Bounds need `T >= 2` and every share positive; otherwise they are NaN.
fn bounds_for(
    config: &RunConfig,
    horizon: f64,
    phi: &[f64],
    vio: f64,
) -> Result<TheoremBounds<f64>> {
    if config.t < 2 || phi.iter().any(|&p| p <= 0.0) {
        return Ok(TheoremBounds {
            reg_bound: f64::NAN,
            vio_bound: f64::NAN,
            vio_delta: f64::NAN,
            pro_bound: f64::NAN,
        });
    }
    theorem_bounds(config.k, horizon, phi, vio)
}

pub fn summary_header() -> String {
    format!(
        "scope,seed,{},reg_bound,vio_bound,pro_bound,s_star,s_dagger",
        SUMMARY_COLUMNS.join(",")
    )
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(f64::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

pub fn summary_csv(output: &RunOutput) -> String {
    let b = &output.oracle.baselines;
    let mut text = summary_header();
    text.push('\n');
    for s in &output.runs {
        writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            s.run,
            s.seed,
            join(&s.values()),
            s.bounds.reg_bound,
            s.bounds.vio_bound,
            s.bounds.pro_bound,
            b.s_star,
            b.s_dagger
        )
        .unwrap();
    }
    writeln!(
        text,
        "mean,,{},{},{},{},{},{}",
        join(&output.mean),
        output.bounds.reg_bound,
        output.bounds.vio_bound,
        output.bounds.pro_bound,
        b.s_star,
        b.s_dagger
    )
    .unwrap();
    writeln!(text, "std,,{},,,,,", join(&output.std)).unwrap();
    text
}

/// Across-run mean and mean ± 3σ of each running average, plus the best arm mean.
pub fn trajectory_csv(output: &RunOutput) -> String {
    let best = output
        .config
        .mean_rewards()
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut text = String::from("slot");
    for name in ["avg_reward", "avg_cost", "avg_welfare", "avg_profit"] {
        write!(text, ",{name}_mean,{name}_lo,{name}_hi").unwrap();
    }
    text.push_str(",best_arm_mean\n");
    let slots = output.trajectories.iter().map(Vec::len).min().unwrap_or(0);
    let mut column = vec![0.0; output.trajectories.len()];
    for t in 0..slots {
        write!(text, "{}", t + 1).unwrap();
        for q in 0..4 {
            for (v, traj) in column.iter_mut().zip(&output.trajectories) {
                *v = traj[t][q];
            }
            let (m, s) = mean_std(&column);
            write!(text, ",{m},{},{}", m - 3.0 * s, m + 3.0 * s).unwrap();
        }
        writeln!(text, ",{best}").unwrap();
    }
    text
}

#[derive(Serialize)]
struct Metadata<'a> {
    config_hash: String,
    s_star_method: String,
    s_star: f64,
    s_dagger: f64,
    saa_primal_welfare: Option<f64>,
    saa_gap: Option<f64>,
    saa_iterations: Option<usize>,
    policy_class: &'a str,
    runs: usize,
    horizon: u64,
    wall_time_seconds: f64,
    version: &'a str,
}

pub fn write_output(output: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let stored = RunConfig {
        output_dir: None,
        ..output.config.clone()
    };
    fs::write(dir.join(CONFIG_FILE), stored.to_toml_string()?)?;

    let mut slots = slots_header(output.config.k, output.config.n);
    slots.push('\n');
    for row in output.rows.iter().flatten() {
        slots.push_str(row);
        slots.push('\n');
    }
    fs::write(dir.join(SLOTS_FILE), slots)?;
    fs::write(dir.join(SUMMARY_FILE), summary_csv(output))?;
    if !output.trajectories.is_empty() {
        fs::write(dir.join(TRAJECTORY_FILE), trajectory_csv(output))?;
    }

    let b = &output.oracle.baselines;
    let saa = output.oracle.saa.as_ref();
    let meta = Metadata {
        config_hash: stored.hash()?,
        s_star_method: b.s_star_method.to_string(),
        s_star: b.s_star,
        s_dagger: b.s_dagger,
        saa_primal_welfare: saa.map(|e| e.primal_welfare),
        saa_gap: saa.map(|e| e.gap),
        saa_iterations: saa.map(|e| e.iterations),
        policy_class: "randomized per-realization matchings",
        runs: output.config.r,
        horizon: output.config.t,
        wall_time_seconds: output.wall_time.as_secs_f64(),
        version: env!("CARGO_PKG_VERSION"),
    };
    fs::write(
        dir.join(METADATA_FILE),
        serde_json::to_string_pretty(&meta)?,
    )?;
    Ok(())
}
