use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use semapair_core::harness::{aggregate, run_monte_carlo, write_outputs, RunConfig};
use semapair_core::orchestrator::{run_scheme, Scheme};
use semapair_core::profiles::{fit_rho, save_profiles, synth_profiles, RhoSampleGrid};
use semapair_core::scenario::{watts_to_dbm, Scenario};

#[derive(Parser)]
#[command(name = "semapair", version, about = "Monte Carlo harness for paired semantic downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed list with a single seed (or a base seed for `run`).
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated scheme names.
    #[arg(long, value_delimiter = ',')]
    scheme: Vec<Scheme>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured sweep and write row, aggregate and plot files.
    Run {
        #[command(flatten)]
        common: Common,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads; overrides `threads`.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Solve one draw and print the per-iteration trace.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Write the full result as JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit synthetic profiles for one draw, or fit a surface to a sample grid.
    Profile {
        #[command(flatten)]
        common: Common,
        /// Output JSON file.
        #[arg(long)]
        out: PathBuf,
        /// Sample grid JSON to fit instead of emitting synthetic profiles.
        #[arg(long)]
        fit: Option<PathBuf>,
    },
    /// Check a configuration and print it with defaults filled in.
    Validate {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.scenario.base_seed = seed;
        cfg.scenario.seeds = None;
    }
    if !common.scheme.is_empty() {
        cfg.schemes = common.scheme.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// The single draw addressed by `solve` and `profile`: the first seed and
/// the first sweep point.
fn single_draw(cfg: &RunConfig) -> Result<(Scenario, u64)> {
    let seed = cfg.seeds()[0];
    let point = cfg.sweep_points()[0];
    let (params, budgets) = cfg.point(point);
    Ok((Scenario::generate(&params, budgets, seed)?, seed))
}

fn cmd_run(common: Common, out: Option<PathBuf>, threads: Option<usize>) -> Result<()> {
    let mut cfg = load_config(&common)?;
    if let Some(t) = threads {
        cfg.threads = t;
    }
    if let Some(dir) = out {
        cfg.output.dir = dir;
    }
    let rows = run_monte_carlo(&cfg)?;
    let files = write_outputs(&cfg, &rows, &cfg.output.dir)?;
    println!("{:<18} {:>14} {:>12} {:>10} {:>10}", "sweep", "scheme", "mean Mb/s", "std", "infeasible");
    for a in aggregate(&rows, cfg.output.infeasible_as_zero) {
        let point = if a.sweep_value.is_nan() {
            "-".to_string()
        } else {
            format!("{}={}", a.sweep_var, a.sweep_value)
        };
        println!(
            "{:<18} {:>14} {:>12.3} {:>10.3} {:>10}",
            point,
            a.scheme,
            a.mean_sum_rate_bps / 1e6,
            a.std_sum_rate_bps / 1e6,
            a.infeasible_draws
        );
    }
    println!("rows: {}", files.rows.display());
    println!("aggregate: {}", files.aggregate.display());
    println!("plot script: {}", files.plot_script.display());
    Ok(())
}

fn cmd_solve(common: Common, out: Option<PathBuf>) -> Result<()> {
    let cfg = load_config(&common)?;
    let (scenario, seed) = single_draw(&cfg)?;
    let profiles = synth_profiles(&scenario, &cfg.profiles, seed)?;
    let schemes = if common.scheme.is_empty() { vec![Scheme::Proposed] } else { cfg.schemes.clone() };
    let mut results = Vec::new();
    for scheme in schemes {
        let r = run_scheme(scheme, &scenario, &profiles, cfg.family_multiplier, &cfg.algorithm);
        println!("scheme {scheme}, seed {seed}, N = {}", scenario.num_users);
        if let Some(note) = &r.note {
            println!("  note: {note}");
        }
        if let Some(trace) = &r.trace {
            println!("  initial {:.6} Mb/s", trace.initial / 1e6);
            println!("  {:>4} {:>12} {:>12} {:>12} {:>9} {:>12}", "iter", "after ratio", "after p,b", "candidate", "accepted", "objective");
            for (i, it) in trace.iterations.iter().enumerate() {
                let cand = it.candidate.map_or("-".to_string(), |c| format!("{:.6}", c / 1e6));
                println!(
                    "  {:>4} {:>12.6} {:>12.6} {:>12} {:>9} {:>12.6}",
                    i + 1,
                    it.after_delta / 1e6,
                    it.after_power_bandwidth / 1e6,
                    cand,
                    it.candidate_accepted,
                    it.accepted / 1e6
                );
            }
            println!("  termination: {:?}", trace.termination);
        }
        if let Some(state) = &r.state {
            for (g, m) in state.groups().iter().zip(state.metrics()) {
                println!(
                    "  {}  p {:.2} dBm  b {:.3} MHz  ratio {:.4}  rate {:.3} Mb/s",
                    g.pair,
                    watts_to_dbm(g.power),
                    g.bandwidth / 1e6,
                    g.delta,
                    m.sum_rate / 1e6
                );
            }
        }
        println!("  sum rate {:.6} Mb/s, feasible {}", r.sum_rate / 1e6, r.feasible);
        results.push(r);
    }
    if let Some(path) = out {
        write_json(&path, &results)?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn cmd_profile(common: Common, out: PathBuf, fit: Option<PathBuf>) -> Result<()> {
    if let Some(grid_path) = fit {
        let text = std::fs::read_to_string(&grid_path)
            .with_context(|| format!("reading {}", grid_path.display()))?;
        let grid: RhoSampleGrid = serde_json::from_str(&text)?;
        let result = fit_rho(&grid)?;
        write_json(&out, &result)?;
        println!("fitted surface written to {} (rss {:e})", out.display(), result.rss);
        return Ok(());
    }
    let cfg = load_config(&common)?;
    let (scenario, seed) = single_draw(&cfg)?;
    let profiles = synth_profiles(&scenario, &cfg.profiles, seed)?;
    save_profiles(&profiles, &out)?;
    println!("{} pair profiles written to {}", profiles.iter().count(), out.display());
    Ok(())
}

fn cmd_validate(common: Common) -> Result<()> {
    let cfg = load_config(&common)?;
    print!("{}", cfg.to_toml_string()?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { common, out, threads } => cmd_run(common, out, threads),
        Command::Solve { common, out } => cmd_solve(common, out),
        Command::Profile { common, out, fit } => {
            if fit.is_some() && (common.config.is_some() || common.seed.is_some()) {
                Err(anyhow::anyhow!("--fit does not take --config or --seed"))
            } else {
                cmd_profile(common, out, fit)
            }
        }
        Command::Validate { common } => cmd_validate(common),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
