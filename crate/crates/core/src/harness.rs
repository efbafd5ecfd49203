//! Run configuration, Monte Carlo sweeps and result files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::orchestrator::{run_scheme, Scheme, SolveOptions};
use crate::profiles::{synth_profiles, ProfileGenParams};
use crate::scenario::{dbm_to_watts, Scenario, ScenarioParams, SystemBudgets};

fn config_error(path: impl Into<String>, reason: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub num_users: usize,
    pub cell_radius_m: f64,
    pub shadow_sigma_db: f64,
    pub min_distance_km: f64,
    /// Draws per sweep point.
    pub draws: usize,
    /// Draw `d` uses seed `base_seed + d` unless `seeds` is given.
    pub base_seed: u64,
    pub seeds: Option<Vec<u64>>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        let p = ScenarioParams::default();
        ScenarioConfig {
            num_users: p.num_users,
            cell_radius_m: p.cell_radius_m,
            shadow_sigma_db: p.shadow_sigma_db,
            min_distance_km: p.min_distance_km,
            draws: 100,
            base_seed: 1,
            seeds: None,
        }
    }
}

/// Budgets as written in a config file; power and noise are in dBm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BudgetConfig {
    pub total_power_dbm: f64,
    pub total_bandwidth_hz: f64,
    pub max_latency_s: f64,
    pub energy_budget_j: f64,
    pub noise_psd_dbm_per_hz: f64,
    pub distortion_max: f64,
    pub delta_min: f64,
    pub comp_energy_coeff_j: f64,
    pub bs_cpu_hz: f64,
    pub user_cpu_hz: f64,
    pub bs_cycles: f64,
    pub dec_cycles: f64,
    pub source_bits: f64,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        let b = SystemBudgets::defaults(2);
        BudgetConfig {
            total_power_dbm: 30.0,
            total_bandwidth_hz: b.total_bandwidth_hz,
            max_latency_s: b.max_latency_s,
            energy_budget_j: b.energy_budget_j,
            noise_psd_dbm_per_hz: -174.0,
            distortion_max: b.distortion_max[0],
            delta_min: b.delta_min,
            comp_energy_coeff_j: b.comp_energy_coeff_j,
            bs_cpu_hz: b.bs_cpu_hz,
            user_cpu_hz: b.user_cpu_hz,
            bs_cycles: b.bs_cycles,
            dec_cycles: b.dec_cycles,
            source_bits: b.source_bits[0],
        }
    }
}

impl BudgetConfig {
    /// Linear-unit budgets for `n` users.
    pub fn to_budgets(&self, n: usize) -> SystemBudgets {
        SystemBudgets {
            total_power_watts: dbm_to_watts(self.total_power_dbm),
            total_bandwidth_hz: self.total_bandwidth_hz,
            max_latency_s: self.max_latency_s,
            energy_budget_j: self.energy_budget_j,
            noise_psd_w_per_hz: dbm_to_watts(self.noise_psd_dbm_per_hz),
            distortion_max: vec![self.distortion_max; n],
            delta_min: self.delta_min,
            comp_energy_coeff_j: self.comp_energy_coeff_j,
            bs_cpu_hz: self.bs_cpu_hz,
            user_cpu_hz: self.user_cpu_hz,
            bs_cycles: self.bs_cycles,
            dec_cycles: self.dec_cycles,
            source_bits: vec![self.source_bits; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    /// A single point at the configured values.
    None,
    PowerDbm,
    NumUsers,
    BandwidthHz,
}

impl SweepVariable {
    pub fn name(self) -> &'static str {
        match self {
            SweepVariable::None => "none",
            SweepVariable::PowerDbm => "power_dbm",
            SweepVariable::NumUsers => "num_users",
            SweepVariable::BandwidthHz => "bandwidth_hz",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub variable: SweepVariable,
    pub values: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            variable: SweepVariable::None,
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub rows_csv: String,
    pub aggregate_csv: String,
    pub plot_script: String,
    /// Count infeasible draws as zero in the means instead of skipping them.
    pub infeasible_as_zero: bool,
    /// Write measured wall times; off keeps the files byte-identical across runs.
    pub record_timing: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("results"),
            rows_csv: "rows.csv".into(),
            aggregate_csv: "aggregate.csv".into(),
            plot_script: "plot.py".into(),
            infeasible_as_zero: false,
            record_timing: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub budgets: BudgetConfig,
    pub profiles: ProfileGenParams,
    pub algorithm: SolveOptions,
    pub sweep: SweepConfig,
    pub schemes: Vec<Scheme>,
    /// Interference inflation of the profile-family scheme.
    pub family_multiplier: f64,
    /// Worker threads; 0 picks the rayon default.
    pub threads: usize,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioConfig::default(),
            budgets: BudgetConfig::default(),
            profiles: ProfileGenParams::default(),
            algorithm: SolveOptions::default(),
            sweep: SweepConfig::default(),
            schemes: Scheme::ALL.to_vec(),
            family_multiplier: 1.5,
            threads: 0,
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let line_of = |e: &toml::de::Error| {
            e.span()
                .map(|s| format!(" (line {})", text[..s.start].matches('\n').count() + 1))
                .unwrap_or_default()
        };
        let de = toml::Deserializer::parse(text)
            .map_err(|e| config_error("<root>", format!("{}{}", e.message(), line_of(&e))))?;
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let path = if path == "." { "<root>".to_string() } else { path };
            config_error(path, format!("{}{}", inner.message(), line_of(&inner)))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serde(e.to_string()))
    }

    /// Draw seeds in order.
    pub fn seeds(&self) -> Vec<u64> {
        match &self.scenario.seeds {
            Some(s) => s.clone(),
            None => (0..self.scenario.draws as u64).map(|d| self.scenario.base_seed + d).collect(),
        }
    }

    /// Sweep points; a config without a sweep has one point.
    pub fn sweep_points(&self) -> Vec<f64> {
        match self.sweep.variable {
            SweepVariable::None => vec![f64::NAN],
            _ => self.sweep.values.clone(),
        }
    }

    /// Scenario parameters and budgets at one sweep point.
    pub fn point(&self, value: f64) -> (ScenarioParams, SystemBudgets) {
        let mut sc = self.scenario.clone();
        let mut bud = self.budgets.clone();
        match self.sweep.variable {
            SweepVariable::None => {}
            SweepVariable::PowerDbm => bud.total_power_dbm = value,
            SweepVariable::NumUsers => sc.num_users = value as usize,
            SweepVariable::BandwidthHz => bud.total_bandwidth_hz = value,
        }
        (
            ScenarioParams {
                num_users: sc.num_users,
                cell_radius_m: sc.cell_radius_m,
                shadow_sigma_db: sc.shadow_sigma_db,
                min_distance_km: sc.min_distance_km,
            },
            bud.to_budgets(sc.num_users),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.scenario;
        if s.num_users < 2 || s.num_users % 2 != 0 {
            return Err(config_error("scenario.num_users", "must be even and at least 2"));
        }
        if !(s.cell_radius_m > 0.0) {
            return Err(config_error("scenario.cell_radius_m", "must be positive"));
        }
        if !(s.shadow_sigma_db >= 0.0) {
            return Err(config_error("scenario.shadow_sigma_db", "must be nonnegative"));
        }
        if !(s.min_distance_km > 0.0) {
            return Err(config_error("scenario.min_distance_km", "must be positive"));
        }
        match &s.seeds {
            Some(v) if v.is_empty() => return Err(config_error("scenario.seeds", "must not be empty")),
            None if s.draws == 0 => return Err(config_error("scenario.draws", "must be at least 1")),
            _ => {}
        }
        if self.schemes.is_empty() {
            return Err(config_error("schemes", "must list at least one scheme"));
        }
        if !(self.family_multiplier > 0.0) {
            return Err(config_error("family_multiplier", "must be positive"));
        }
        if self.sweep.variable != SweepVariable::None && self.sweep.values.is_empty() {
            return Err(config_error("sweep.values", "a sweep needs at least one value"));
        }
        for (i, &v) in self.sweep.values.iter().enumerate() {
            let bad = match self.sweep.variable {
                SweepVariable::None => false,
                SweepVariable::PowerDbm => !v.is_finite(),
                SweepVariable::NumUsers => !(v >= 2.0 && v.fract() == 0.0 && (v as usize) % 2 == 0),
                SweepVariable::BandwidthHz => !(v > 0.0 && v.is_finite()),
            };
            if bad {
                return Err(config_error(format!("sweep.values[{i}]"), format!("invalid value {v}")));
            }
        }
        self.profiles
            .validate()
            .map_err(|e| config_error("profiles", e.to_string()))?;
        for v in self.sweep_points() {
            let (params, budgets) = self.point(v);
            budgets
                .validate(params.num_users)
                .map_err(|e| config_error("budgets", e.to_string()))?;
        }
        Ok(())
    }
}

/// One scheme on one draw at one sweep point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep_var: String,
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub draw: usize,
    pub seed: u64,
    pub sum_rate_bps: f64,
    pub feasible: bool,
    pub iters: usize,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub sweep_var: String,
    pub sweep_value: f64,
    pub scheme: Scheme,
    pub feasible_draws: usize,
    pub infeasible_draws: usize,
    pub mean_sum_rate_bps: f64,
    pub std_sum_rate_bps: f64,
}

/// Rows of one draw across every configured scheme.
fn run_draw(cfg: &RunConfig, value: f64, draw: usize, seed: u64) -> Vec<ResultRow> {
    let (params, budgets) = cfg.point(value);
    let sweep_var = cfg.sweep.variable.name().to_string();
    let setup = Scenario::generate(&params, budgets, seed)
        .and_then(|sc| synth_profiles(&sc, &cfg.profiles, seed).map(|p| (sc, p)));
    cfg.schemes
        .iter()
        .map(|&scheme| {
            let t = Instant::now();
            let (sum_rate_bps, feasible, iters) = match &setup {
                Ok((sc, prof)) => {
                    let r = run_scheme(scheme, sc, prof, cfg.family_multiplier, &cfg.algorithm);
                    (r.sum_rate, r.feasible, r.outer_iterations)
                }
                Err(_) => (0.0, false, 0),
            };
            ResultRow {
                sweep_var: sweep_var.clone(),
                sweep_value: value,
                scheme,
                draw,
                seed,
                sum_rate_bps,
                feasible,
                iters,
                wall_ms: if cfg.output.record_timing {
                    t.elapsed().as_secs_f64() * 1e3
                } else {
                    0.0
                },
            }
        })
        .collect()
}

/// Runs every sweep point, draw and scheme. Rows come back ordered by
/// (sweep point, scheme, draw) whatever the worker count.
pub fn run_monte_carlo(cfg: &RunConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let seeds = cfg.seeds();
    let points = cfg.sweep_points();
    let jobs: Vec<(f64, usize, u64)> = points
        .iter()
        .flat_map(|&v| seeds.iter().enumerate().map(move |(d, &s)| (v, d, s)))
        .collect();
    let work = || -> Vec<Vec<ResultRow>> {
        jobs.par_iter().map(|&(v, d, s)| run_draw(cfg, v, d, s)).collect()
    };
    let per_draw = if cfg.threads == 0 {
        work()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build()
            .map_err(|e| config_error("threads", e.to_string()))?
            .install(work)
    };
    // per_draw is indexed by point * draws + draw, each holding one row per scheme.
    let draws = seeds.len();
    let mut rows = Vec::with_capacity(per_draw.len() * cfg.schemes.len());
    for p in 0..points.len() {
        for k in 0..cfg.schemes.len() {
            for d in 0..draws {
                rows.push(per_draw[p * draws + d][k].clone());
            }
        }
    }
    Ok(rows)
}

fn same_value(a: f64, b: f64) -> bool {
    a == b || (a.is_nan() && b.is_nan())
}

/// Mean and sample standard deviation per (sweep point, scheme), in first
/// appearance order.
pub fn aggregate(rows: &[ResultRow], infeasible_as_zero: bool) -> Vec<AggregateRow> {
    let mut keys: Vec<(String, f64, Scheme)> = Vec::new();
    for r in rows {
        if !keys
            .iter()
            .any(|(v, x, s)| *v == r.sweep_var && same_value(*x, r.sweep_value) && *s == r.scheme)
        {
            keys.push((r.sweep_var.clone(), r.sweep_value, r.scheme));
        }
    }
    keys.into_iter()
        .map(|(var, value, scheme)| {
            let cell: Vec<&ResultRow> = rows
                .iter()
                .filter(|r| r.sweep_var == var && same_value(r.sweep_value, value) && r.scheme == scheme)
                .collect();
            let feasible = cell.iter().filter(|r| r.feasible).count();
            let xs: Vec<f64> = cell
                .iter()
                .filter(|r| r.feasible || infeasible_as_zero)
                .map(|r| if r.feasible { r.sum_rate_bps } else { 0.0 })
                .collect();
            let (mean, std) = mean_std(&xs);
            AggregateRow {
                sweep_var: var,
                sweep_value: value,
                scheme,
                feasible_draws: feasible,
                infeasible_draws: cell.len() - feasible,
                mean_sum_rate_bps: mean,
                std_sum_rate_bps: std,
            }
        })
        .collect()
}

/// Mean and sample standard deviation; `NaN` mean for an empty slice and
/// zero spread below two samples.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn sci(x: f64) -> String {
    format!("{x:e}")
}

pub const ROW_HEADER: [&str; 9] = [
    "sweep_var",
    "sweep_value",
    "scheme",
    "draw",
    "seed",
    "sum_rate_bps",
    "feasible",
    "iters",
    "wall_ms",
];

pub const AGGREGATE_HEADER: [&str; 7] = [
    "sweep_var",
    "sweep_value",
    "scheme",
    "feasible_draws",
    "infeasible_draws",
    "mean_sum_rate_bps",
    "std_sum_rate_bps",
];

pub fn emit_csv(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(ROW_HEADER)?;
    for r in rows {
        w.write_record([
            r.sweep_var.clone(),
            sci(r.sweep_value),
            r.scheme.to_string(),
            r.draw.to_string(),
            r.seed.to_string(),
            sci(r.sum_rate_bps),
            r.feasible.to_string(),
            r.iters.to_string(),
            sci(r.wall_ms),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn emit_aggregate_csv(rows: &[AggregateRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(AGGREGATE_HEADER)?;
    for r in rows {
        w.write_record([
            r.sweep_var.clone(),
            sci(r.sweep_value),
            r.scheme.to_string(),
            r.feasible_draws.to_string(),
            r.infeasible_draws.to_string(),
            sci(r.mean_sum_rate_bps),
            sci(r.std_sum_rate_bps),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn parse_f64(field: &str) -> Result<f64> {
    field
        .parse()
        .map_err(|_| Error::Serde(format!("not a number: `{field}`")))
}

/// Reads a row file written by [`emit_csv`].
pub fn read_rows_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        if rec.len() != ROW_HEADER.len() {
            return Err(Error::Serde(format!("expected {} fields, got {}", ROW_HEADER.len(), rec.len())));
        }
        let int = |s: &str| s.parse::<u64>().map_err(|_| Error::Serde(format!("not an integer: `{s}`")));
        rows.push(ResultRow {
            sweep_var: rec[0].to_string(),
            sweep_value: parse_f64(&rec[1])?,
            scheme: rec[2].parse()?,
            draw: int(&rec[3])? as usize,
            seed: int(&rec[4])?,
            sum_rate_bps: parse_f64(&rec[5])?,
            feasible: rec[6]
                .parse()
                .map_err(|_| Error::Serde(format!("not a bool: `{}`", &rec[6])))?,
            iters: int(&rec[7])? as usize,
            wall_ms: parse_f64(&rec[8])?,
        });
    }
    Ok(rows)
}

/// Axis extent with a small margin, from finite values only.
pub fn axis_range(values: impl IntoIterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .into_iter()
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return None;
    }
    let pad = if hi > lo { 0.05 * (hi - lo) } else { 0.05 * lo.abs().max(1.0) };
    Some((lo - pad, hi + pad))
}

/// Writes a matplotlib script that reads the aggregate file and draws one
/// curve per scheme, or a bar chart when there is no sweep.
pub fn emit_plot_script(aggregate: &[AggregateRow], aggregate_csv: &str, path: &Path) -> Result<()> {
    let var = aggregate.first().map_or("none", |r| r.sweep_var.as_str());
    let xs = aggregate.iter().map(|r| r.sweep_value);
    let ys = aggregate.iter().flat_map(|r| {
        [
            (r.mean_sum_rate_bps - r.std_sum_rate_bps) / 1e6,
            (r.mean_sum_rate_bps + r.std_sum_rate_bps) / 1e6,
        ]
    });
    let (x_lo, x_hi) = axis_range(xs).unwrap_or((0.0, 1.0));
    let (y_lo, y_hi) = axis_range(ys).unwrap_or((0.0, 1.0));
    let (xlabel, out) = match var {
        "power_dbm" => ("Total power (dBm)", "rate_vs_power.png"),
        "num_users" => ("Number of users", "rate_vs_users.png"),
        "bandwidth_hz" => ("Total bandwidth (Hz)", "rate_vs_bandwidth.png"),
        _ => ("Scheme", "scheme_comparison.png"),
    };
    let mut s = String::new();
    let _ = writeln!(s, "import csv");
    let _ = writeln!(s, "import os");
    let _ = writeln!(s, "from collections import defaultdict");
    let _ = writeln!(s, "import matplotlib");
    let _ = writeln!(s, "matplotlib.use(\"Agg\")");
    let _ = writeln!(s, "import matplotlib.pyplot as plt");
    let _ = writeln!(s);
    let _ = writeln!(s, "HERE = os.path.dirname(os.path.abspath(__file__))");
    let _ = writeln!(s, "SOURCE = os.path.join(HERE, {aggregate_csv:?})");
    let _ = writeln!(s, "SWEEP = {var:?}");
    let _ = writeln!(s, "XLIM = ({x_lo:e}, {x_hi:e})");
    let _ = writeln!(s, "YLIM = ({y_lo:e}, {y_hi:e})");
    let _ = writeln!(s);
    let _ = writeln!(s, "series = defaultdict(list)");
    let _ = writeln!(s, "with open(SOURCE, newline=\"\") as f:");
    let _ = writeln!(s, "    for row in csv.DictReader(f):");
    let _ = writeln!(s, "        series[row[\"scheme\"]].append((");
    let _ = writeln!(s, "            float(row[\"sweep_value\"]),");
    let _ = writeln!(s, "            float(row[\"mean_sum_rate_bps\"]) / 1e6,");
    let _ = writeln!(s, "            float(row[\"std_sum_rate_bps\"]) / 1e6,");
    let _ = writeln!(s, "        ))");
    let _ = writeln!(s);
    let _ = writeln!(s, "fig, ax = plt.subplots(figsize=(6, 4))");
    let _ = writeln!(s, "if SWEEP == \"none\":");
    let _ = writeln!(s, "    names = list(series)");
    let _ = writeln!(s, "    means = [series[n][0][1] for n in names]");
    let _ = writeln!(s, "    stds = [series[n][0][2] for n in names]");
    let _ = writeln!(s, "    ax.bar(names, means, yerr=stds, capsize=4)");
    let _ = writeln!(s, "    ax.set_ylim(0, YLIM[1])");
    let _ = writeln!(s, "    plt.setp(ax.get_xticklabels(), rotation=20, ha=\"right\")");
    let _ = writeln!(s, "else:");
    let _ = writeln!(s, "    for name, pts in series.items():");
    let _ = writeln!(s, "        pts.sort()");
    let _ = writeln!(s, "        x, y, e = zip(*pts)");
    let _ = writeln!(s, "        ax.errorbar(x, y, yerr=e, marker=\"o\", capsize=3, label=name)");
    let _ = writeln!(s, "    ax.set_xlim(*XLIM)");
    let _ = writeln!(s, "    ax.set_ylim(*YLIM)");
    let _ = writeln!(s, "    ax.legend()");
    let _ = writeln!(s, "ax.set_xlabel({xlabel:?})");
    let _ = writeln!(s, "ax.set_ylabel(\"Sum rate (Mbit/s)\")");
    let _ = writeln!(s, "ax.grid(alpha=0.3)");
    let _ = writeln!(s, "fig.tight_layout()");
    let _ = writeln!(s, "fig.savefig(os.path.join(HERE, {out:?}), dpi=150)");
    std::fs::write(path, s)?;
    Ok(())
}

/// Paths written by [`write_outputs`].
#[derive(Debug, Clone, PartialEq)]
pub struct OutputFiles {
    pub rows: PathBuf,
    pub aggregate: PathBuf,
    pub plot_script: PathBuf,
}

/// Writes the row file, the aggregate file and the plot script under `dir`.
pub fn write_outputs(cfg: &RunConfig, rows: &[ResultRow], dir: &Path) -> Result<OutputFiles> {
    std::fs::create_dir_all(dir)?;
    let files = OutputFiles {
        rows: dir.join(&cfg.output.rows_csv),
        aggregate: dir.join(&cfg.output.aggregate_csv),
        plot_script: dir.join(&cfg.output.plot_script),
    };
    emit_csv(rows, &files.rows)?;
    let agg = aggregate(rows, cfg.output.infeasible_as_zero);
    emit_aggregate_csv(&agg, &files.aggregate)?;
    emit_plot_script(&agg, &cfg.output.aggregate_csv, &files.plot_script)?;
    Ok(files)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let err = RunConfig::from_toml_str("[scenario]\nnum_user = 10\n").unwrap_err();
        assert!(matches!(err, Error::Config { .. }), "{err}");
    }

    #[test]
    fn type_errors_name_the_field() {
        let err = RunConfig::from_toml_str("[budgets]\ntotal_power_dbm = \"high\"\n").unwrap_err();
        match err {
            Error::Config { path, reason } => {
                assert_eq!(path, "budgets.total_power_dbm");
                assert!(reason.contains("line 2"), "{reason}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let err = RunConfig::from_toml_str("[scenario]\nnum_users = 7\n").unwrap_err();
        match err {
            Error::Config { path, .. } => assert_eq!(path, "scenario.num_users"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn dbm_fields_convert_once() {
        let cfg = RunConfig::from_toml_str("[budgets]\ntotal_power_dbm = 20.0\n").unwrap();
        let (_, b) = cfg.point(f64::NAN);
        assert!((b.total_power_watts - 0.1).abs() < 1e-15);
        assert!((b.noise_psd_w_per_hz - 3.981071705534969e-21).abs() < 1e-30);
    }

    #[test]
    fn mean_std_small_cases() {
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
        assert!(mean_std(&[]).0.is_nan());
    }

    #[test]
    fn axis_range_pads() {
        assert_eq!(axis_range([1.0, 3.0]), Some((0.9, 3.1)));
        assert_eq!(axis_range([f64::NAN]), None);
    }
}
