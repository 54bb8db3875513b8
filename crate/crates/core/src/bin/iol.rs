use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use iol::harness::{
    compute_baselines, preset_large_scale, preset_small_scale, replay, replay_all, run, RunConfig,
    RunOutput, LARGE_SCALE_T, SMALL_SCALE_T,
};
use iol::oracle::theorem_bounds;

#[derive(Parser)]
#[command(
    name = "iol",
    version,
    about = "Incentivized online learning simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Overrides {
    /// Base seed; run r uses seed + r.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of independent runs.
    #[arg(long)]
    runs: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(&self, config: &mut RunConfig) {
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(runs) = self.runs {
            config.r = runs;
        }
        if let Some(out) = &self.out {
            config.output_dir = Some(out.clone());
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Small,
    Large,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run (or print with --print) one of the built-in experiment suites.
    Preset {
        which: Preset,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
        #[arg(long, default_value_t = 0.2)]
        beta: f64,
        /// Horizon; defaults to 20000 (small) or 100000 (large).
        #[arg(long = "T")]
        horizon: Option<u64>,
        /// Print the config(s) as TOML instead of running.
        #[arg(long)]
        print: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the welfare baselines and the guarantees for a config.
    Oracle { config: PathBuf },
    /// Check stored slots against a fresh re-simulation.
    Replay {
        dir: PathBuf,
        #[arg(long, required_unless_present = "all")]
        slot: Option<u64>,
        #[arg(long, default_value_t = 0)]
        run: usize,
        /// Check every slot of the run.
        #[arg(long)]
        all: bool,
    },
}

fn print_summary(label: &str, out: &RunOutput) {
    println!(
        "{label}: R = {}, T = {}, {:.1}s",
        out.config.r,
        out.config.t,
        out.wall_time.as_secs_f64()
    );
    let b = &out.oracle.baselines;
    println!(
        "  S* = {:.6} ({}), S† = {:.6}",
        b.s_star, b.s_star_method, b.s_dagger
    );
    for (name, col) in [
        ("Reg", "regret"),
        ("Vio", "violation"),
        ("Pro", "profit"),
        ("Deg", "degradation"),
        ("reward", "reward"),
        ("cost", "cost"),
        ("payoff", "mean_agent_payoff"),
        ("declines", "declines"),
    ] {
        println!(
            "  {name:<8} {:>14.4} ± {:.4}",
            out.mean_of(col),
            out.std_of(col)
        );
    }
    println!(
        "  bounds: Reg <= {:.2}, Vio <= {:.2}, Pro >= {:.2}",
        out.bounds.reg_bound, out.bounds.vio_bound, out.bounds.pro_bound
    );
    if let Some(dir) = &out.config.output_dir {
        println!("  written to {}", dir.display());
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("loading {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, overrides } => {
            let mut config = load(&config)?;
            overrides.apply(&mut config);
            let out = run(&config)?;
            print_summary("run", &out);
        }
        Command::Preset {
            which,
            alpha,
            beta,
            horizon,
            print,
            overrides,
        } => match which {
            Preset::Small => {
                let mut config = preset_small_scale();
                config.t = horizon.unwrap_or(SMALL_SCALE_T);
                overrides.apply(&mut config);
                if print {
                    print!("{}", config.to_toml_string()?);
                } else {
                    print_summary("small-scale", &run(&config)?);
                }
            }
            Preset::Large => {
                let sweep = preset_large_scale(alpha, beta, horizon.unwrap_or(LARGE_SCALE_T))?;
                for mut config in sweep {
                    let n = config.n;
                    overrides.apply(&mut config);
                    if let Some(out) = &overrides.out {
                        config.output_dir = Some(out.join(format!("N{n}")));
                    }
                    if print {
                        println!("# N = {n}");
                        println!("{}", config.to_toml_string()?);
                    } else {
                        print_summary(&format!("large-scale N = {n}"), &run(&config)?);
                    }
                }
            }
        },
        Command::Oracle { config } => {
            let config = load(&config)?;
            let report = compute_baselines(&config)?;
            let b = report.baselines;
            println!("S* = {} ({})", b.s_star, b.s_star_method);
            if let Some(est) = &report.saa {
                println!(
                    "   primal welfare {}, primal violation {}, gap {}, {} distinct of {} samples, {} iterations",
                    est.primal_welfare, est.primal_violation, est.gap, est.distinct_samples, est.samples, est.iterations
                );
            }
            println!("S† = {}", b.s_dagger);
            match theorem_bounds(config.k, config.t as f64, &config.phi(), 0.0) {
                Ok(bounds) => println!(
                    "bounds at Vio = 0: Reg <= {}, Vio <= {} (delta = {}), Pro >= {}",
                    bounds.reg_bound, bounds.vio_bound, bounds.vio_delta, bounds.pro_bound
                ),
                Err(e) => println!("bounds unavailable: {e}"),
            }
        }
        Command::Replay {
            dir,
            slot,
            run,
            all,
        } => {
            if all {
                let n = replay_all(&dir, run)?;
                println!("run {run}: {n} slots match");
            } else {
                let Some(slot) = slot else {
                    bail!("--slot required")
                };
                let report = replay(&dir, run, slot)?;
                println!("run {run}, slot {slot} matches:\n{}", report.row);
                if let Some(m) = report.metrics {
                    println!(
                        "final metrics match summary: Reg {}, Vio {}, Pro {}, Deg {}",
                        m.regret, m.violation, m.profit, m.degradation
                    );
                }
            }
        }
    }
    Ok(())
}
