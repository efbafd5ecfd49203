//! Synthetic downlink scenarios: user drops, large-scale path loss, log-normal
//! shadowing and the system budgets.
//!
//! Everything inside is linear SI (W, Hz, s, J, bits). dB and dBm only appear
//! in the conversion helpers and the run configuration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Default minimum BS-user distance in km.
pub const MIN_DISTANCE_KM: f64 = 0.01;

/// RNG stream used for user drops and shadowing.
const SCENARIO_STREAM: u64 = 0;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// `128.1 + 37.6 log10(d)` with `d` in km, clamped below at `d_min_km`.
pub fn path_loss_db(distance_km: f64, d_min_km: f64) -> Result<f64> {
    let d = distance_km.max(d_min_km);
    if !(d > 0.0) {
        return Err(Error::NonPositiveDistance(d));
    }
    Ok(128.1 + 37.6 * d.log10())
}

/// Linear power gain `10^(-(PL + X)/10)`.
pub fn channel_gain_sq(path_loss_db: f64, shadow_db: f64) -> f64 {
    10f64.powf(-(path_loss_db + shadow_db) / 10.0)
}

/// Area-uniform drop of `n` users in a disk of radius `cell_radius_m`.
pub fn drop_users(n: usize, cell_radius_m: f64, seed: u64) -> Result<Vec<(f64, f64)>> {
    let mut rng = scenario_rng(seed);
    drop_users_with(n, cell_radius_m, &mut rng)
}

fn drop_users_with<R: Rng>(n: usize, cell_radius_m: f64, rng: &mut R) -> Result<Vec<(f64, f64)>> {
    if n == 0 || n % 2 != 0 {
        return Err(Error::OddUserCount(n));
    }
    if !(cell_radius_m > 0.0) {
        return Err(invalid("cell_radius_m", "must be positive"));
    }
    Ok((0..n)
        .map(|_| {
            // sqrt of a uniform gives density proportional to r
            let r = cell_radius_m * rng.random::<f64>().sqrt();
            let theta = 2.0 * std::f64::consts::PI * rng.random::<f64>();
            (r * theta.cos(), r * theta.sin())
        })
        .collect())
}

pub(crate) fn scenario_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SCENARIO_STREAM);
    rng
}

/// Global budgets and per-user requirements of one draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemBudgets {
    pub total_power_watts: f64,
    pub total_bandwidth_hz: f64,
    pub max_latency_s: f64,
    pub energy_budget_j: f64,
    pub noise_psd_w_per_hz: f64,
    /// Per-user distortion threshold.
    pub distortion_max: Vec<f64>,
    pub delta_min: f64,
    pub comp_energy_coeff_j: f64,
    pub bs_cpu_hz: f64,
    pub user_cpu_hz: f64,
    pub bs_cycles: f64,
    pub dec_cycles: f64,
    /// Per-user source size in bits.
    pub source_bits: Vec<f64>,
}

impl SystemBudgets {
    /// Defaults for `n` users: 30 dBm, 10 MHz, 100 ms,
    /// -174 dBm/Hz, delta_min = 1/16, D_max = 0.005, 10 GHz / 1 GHz CPUs.
    pub fn defaults(n: usize) -> Self {
        SystemBudgets {
            total_power_watts: dbm_to_watts(30.0),
            total_bandwidth_hz: 10e6,
            max_latency_s: 0.1,
            energy_budget_j: 0.3,
            noise_psd_w_per_hz: dbm_to_watts(-174.0),
            distortion_max: vec![0.005; n],
            delta_min: 0.0625,
            comp_energy_coeff_j: 5e-3,
            bs_cpu_hz: 10e9,
            user_cpu_hz: 1e9,
            bs_cycles: 1e8,
            dec_cycles: 1e7,
            source_bits: vec![256.0 * 256.0 * 3.0 * 8.0; n],
        }
    }

    /// BS-side encoding latency `C_BS / f_BS`.
    pub fn tau_bs(&self) -> f64 {
        self.bs_cycles / self.bs_cpu_hz
    }

    /// User-side decoding latency `C_dec / f_u`.
    pub fn tau_dec(&self, _user: usize) -> f64 {
        self.dec_cycles / self.user_cpu_hz
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let positive = [
            ("total_power_watts", self.total_power_watts),
            ("total_bandwidth_hz", self.total_bandwidth_hz),
            ("max_latency_s", self.max_latency_s),
            ("energy_budget_j", self.energy_budget_j),
            ("noise_psd_w_per_hz", self.noise_psd_w_per_hz),
            ("delta_min", self.delta_min),
            ("comp_energy_coeff_j", self.comp_energy_coeff_j),
            ("bs_cpu_hz", self.bs_cpu_hz),
            ("user_cpu_hz", self.user_cpu_hz),
            ("bs_cycles", self.bs_cycles),
            ("dec_cycles", self.dec_cycles),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid(name, format!("must be positive and finite, got {v}")));
            }
        }
        if self.delta_min > 1.0 {
            return Err(invalid("delta_min", "must lie in (0, 1]"));
        }
        if self.distortion_max.len() != n || self.source_bits.len() != n {
            return Err(invalid("budgets", format!("per-user vectors must have length {n}")));
        }
        if self.distortion_max.iter().chain(&self.source_bits).any(|v| !(*v > 0.0)) {
            return Err(invalid("budgets", "per-user values must be positive"));
        }
        let worst_dec = (0..n).map(|u| self.tau_dec(u)).fold(0.0, f64::max);
        if self.max_latency_s <= self.tau_bs() + worst_dec {
            return Err(invalid(
                "max_latency_s",
                "leaves no residual transmission time for any user",
            ));
        }
        Ok(())
    }
}

/// Geometry and shadowing knobs for scenario generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub num_users: usize,
    pub cell_radius_m: f64,
    pub shadow_sigma_db: f64,
    pub min_distance_km: f64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            num_users: 10,
            cell_radius_m: 250.0,
            shadow_sigma_db: 4.0,
            min_distance_km: MIN_DISTANCE_KM,
        }
    }
}

/// One Monte Carlo draw. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub num_users: usize,
    pub positions: Vec<(f64, f64)>,
    pub channel_gain_sq: Vec<f64>,
    pub rng_seed: u64,
    pub budgets: SystemBudgets,
}

impl Scenario {
    pub fn generate(params: &ScenarioParams, budgets: SystemBudgets, seed: u64) -> Result<Self> {
        let n = params.num_users;
        budgets.validate(n)?;
        if params.shadow_sigma_db < 0.0 {
            return Err(invalid("shadow_sigma_db", "must be nonnegative"));
        }
        let mut rng = scenario_rng(seed);
        let positions = drop_users_with(n, params.cell_radius_m, &mut rng)?;
        let shadow = Normal::new(0.0, params.shadow_sigma_db)
            .map_err(|e| invalid("shadow_sigma_db", e.to_string()))?;
        let mut gains = Vec::with_capacity(n);
        for &(x, y) in &positions {
            let d_km = x.hypot(y) / 1000.0;
            let pl = path_loss_db(d_km, params.min_distance_km)?;
            let xs = if params.shadow_sigma_db > 0.0 {
                shadow.sample(&mut rng)
            } else {
                0.0
            };
            gains.push(channel_gain_sq(pl, xs));
        }
        Ok(Scenario {
            num_users: n,
            positions,
            channel_gain_sq: gains,
            rng_seed: seed,
            budgets,
        })
    }

    /// Builds a scenario from explicit gains, mostly for tests and tooling.
    pub fn from_gains(gains: Vec<f64>, budgets: SystemBudgets) -> Result<Self> {
        let n = gains.len();
        if n == 0 || n % 2 != 0 {
            return Err(Error::OddUserCount(n));
        }
        if gains.iter().any(|g| !(*g > 0.0)) {
            return Err(invalid("channel_gain_sq", "gains must be positive"));
        }
        budgets.validate(n)?;
        Ok(Scenario {
            num_users: n,
            positions: vec![(0.0, 0.0); n],
            channel_gain_sq: gains,
            rng_seed: 0,
            budgets,
        })
    }

    pub fn num_groups(&self) -> usize {
        self.num_users / 2
    }

    /// Residual transmission-time budget `T_max - tau_BS - tau_dec(u)`.
    pub fn residual_time_budget(&self, user: usize) -> f64 {
        let b = &self.budgets;
        b.max_latency_s - b.tau_bs() - b.tau_dec(user)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn path_loss_values() {
        assert!((path_loss_db(1.0, MIN_DISTANCE_KM).unwrap() - 128.1).abs() < 1e-12);
        assert!((path_loss_db(0.1, MIN_DISTANCE_KM).unwrap() - 90.5).abs() < 1e-12);
        assert!((path_loss_db(0.25, MIN_DISTANCE_KM).unwrap() - 105.463).abs() < 1e-3);
        // clamped at 10 m
        assert_eq!(
            path_loss_db(0.0, MIN_DISTANCE_KM).unwrap(),
            path_loss_db(0.01, MIN_DISTANCE_KM).unwrap()
        );
        assert!(path_loss_db(0.0, 0.0).is_err());
    }

    #[test]
    fn gain_conversion() {
        assert!((channel_gain_sq(100.0, 0.0) - 1e-10).abs() < 1e-24);
        assert_eq!(channel_gain_sq(0.0, 0.0), 1.0);
    }

    #[test]
    fn dbm_anchors() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(0.0) - 1e-3).abs() < 1e-18);
        assert!((dbm_to_watts(-174.0) / 3.981e-21 - 1.0).abs() < 1e-3);
        assert!((watts_to_dbm(dbm_to_watts(17.3)) - 17.3).abs() < 1e-12);
    }

    #[test]
    fn drops_stay_in_cell_and_are_deterministic() {
        let a = drop_users(10, 250.0, 7).unwrap();
        assert_eq!(a.len(), 10);
        assert!(a.iter().all(|(x, y)| x.hypot(*y) <= 250.0));
        assert_eq!(a, drop_users(10, 250.0, 7).unwrap());
        assert_ne!(a, drop_users(10, 250.0, 8).unwrap());
        let tiny = drop_users(2, 1e-9, 1).unwrap();
        assert!(tiny.iter().all(|(x, y)| x.hypot(*y) <= 1e-9));
        assert_eq!(drop_users(3, 250.0, 1), Err(Error::OddUserCount(3)));
    }

    #[test]
    fn disk_uniformity() {
        let pts = drop_users(200_000, 1.0, 3).unwrap();
        let mean_r2 = pts.iter().map(|(x, y)| x * x + y * y).sum::<f64>() / pts.len() as f64;
        assert!((mean_r2 - 0.5).abs() < 0.005, "mean r^2 = {mean_r2}");
    }

    #[test]
    fn zero_shadowing_depends_only_on_distance() {
        let params = ScenarioParams {
            shadow_sigma_db: 0.0,
            ..Default::default()
        };
        let s = Scenario::generate(&params, SystemBudgets::defaults(10), 11).unwrap();
        for (u, &(x, y)) in s.positions.iter().enumerate() {
            let pl = path_loss_db(x.hypot(y) / 1000.0, MIN_DISTANCE_KM).unwrap();
            assert!((s.channel_gain_sq[u] / channel_gain_sq(pl, 0.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_same_scenario() {
        let p = ScenarioParams::default();
        let a = Scenario::generate(&p, SystemBudgets::defaults(10), 5).unwrap();
        let b = Scenario::generate(&p, SystemBudgets::defaults(10), 5).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn residual_budget_defaults() {
        let s = Scenario::from_gains(vec![1e-10; 2], SystemBudgets::defaults(2)).unwrap();
        assert!((s.residual_time_budget(0) - 0.08).abs() < 1e-15);
    }

    #[test]
    fn budgets_reject_impossible_latency() {
        let mut b = SystemBudgets::defaults(4);
        b.max_latency_s = 0.02;
        assert!(b.validate(4).is_err());
    }
}
