//! Per-group physical layer: SINR, rates, delays, latency and energy.
//!
//! A transmission delay is `None` when the rate is zero; latency and energy
//! inherit that marker instead of carrying infinities.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pair::{is_perfect_matching, Pair};
use crate::profiles::{PairProfileSet, RhoSurface};
use crate::scenario::{Scenario, SystemBudgets};

/// Absolute tolerance on budget-normalised constraints.
pub const FEAS_TOL: f64 = 1e-9;

/// `(p/2)|h|^2 / (rho (p/2)|h|^2 + b N0)`.
pub fn sinr(power: f64, bandwidth: f64, gain_sq: f64, rho: f64, noise_psd: f64) -> Result<f64> {
    if !(bandwidth > 0.0) {
        return Err(Error::NonPositiveBandwidth(bandwidth));
    }
    let s = 0.5 * power * gain_sq;
    Ok(s / (rho * s + bandwidth * noise_psd))
}

/// Shannon rate `b log2(1 + sinr)`.
pub fn rate_from_sinr(bandwidth: f64, sinr: f64) -> f64 {
    bandwidth * sinr.ln_1p() / LN_2
}

pub fn user_rate(
    power: f64,
    bandwidth: f64,
    delta: f64,
    surface: &RhoSurface,
    gain_sq: f64,
    noise_psd: f64,
) -> Result<f64> {
    let rho = surface.eval(power, delta);
    Ok(rate_from_sinr(bandwidth, sinr(power, bandwidth, gain_sq, rho, noise_psd)?))
}

/// `Q delta / R`, or `None` for a zero rate.
pub fn tx_delay(bits: f64, delta: f64, rate: f64) -> Option<f64> {
    (rate > 0.0).then(|| bits * delta / rate)
}

/// `tau_BS + max_u (t_u + tau_dec_u)`.
pub fn e2e_latency(tau_bs: f64, delays: [Option<f64>; 2], tau_dec: [f64; 2]) -> Option<f64> {
    Some(tau_bs + (delays[0]? + tau_dec[0]).max(delays[1]? + tau_dec[1]))
}

/// `p max(t_i, t_j) + zeta ln(1/delta)`.
pub fn group_energy(power: f64, delta: f64, max_delay: f64, zeta: f64) -> Result<f64> {
    if !(delta > 0.0) {
        return Err(Error::InvalidCompressionRatio(delta));
    }
    Ok(power * max_delay + computation_energy(delta, zeta))
}

pub fn computation_energy(delta: f64, zeta: f64) -> f64 {
    -zeta * delta.ln()
}

/// Energy with the transmission time replaced by the larger residual budget,
/// as used inside the power/bandwidth block.
pub fn group_energy_upper_bound(power: f64, delta: f64, residual: [f64; 2], zeta: f64) -> f64 {
    power * residual[0].max(residual[1]) + computation_energy(delta, zeta)
}

pub fn residual_time_budget(budgets: &SystemBudgets, user: usize) -> f64 {
    budgets.max_latency_s - budgets.tau_bs() - budgets.tau_dec(user)
}

/// Which energy expression a block enforces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyForm {
    /// `p max(t_i, t_j)`.
    Exact,
    /// `p max(Tbar_i, Tbar_j)`.
    ResidualBound,
}

/// Resources of one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupAllocation {
    pub pair: Pair,
    pub power: f64,
    pub bandwidth: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMetrics {
    pub rho: f64,
    pub sinr: [f64; 2],
    pub rate: [f64; 2],
    pub sum_rate: f64,
    pub tx_delay: [Option<f64>; 2],
    pub latency: Option<f64>,
    pub energy: Option<f64>,
}

/// Channel, profile and budget data a single pair needs for evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupContext {
    pub pair: Pair,
    pub surface: RhoSurface,
    pub gains: [f64; 2],
    pub bits: [f64; 2],
    pub tau_bs: f64,
    pub tau_dec: [f64; 2],
    pub residual: [f64; 2],
    pub max_latency: f64,
    pub noise_psd: f64,
    pub zeta: f64,
}

impl GroupContext {
    pub fn new(scenario: &Scenario, profiles: &PairProfileSet, pair: Pair) -> Self {
        let b = &scenario.budgets;
        let [i, j] = pair.members();
        GroupContext {
            pair,
            surface: profiles.get(pair).surface,
            gains: [scenario.channel_gain_sq[i], scenario.channel_gain_sq[j]],
            bits: [b.source_bits[i], b.source_bits[j]],
            tau_bs: b.tau_bs(),
            tau_dec: [b.tau_dec(i), b.tau_dec(j)],
            residual: [scenario.residual_time_budget(i), scenario.residual_time_budget(j)],
            max_latency: b.max_latency_s,
            noise_psd: b.noise_psd_w_per_hz,
            zeta: b.comp_energy_coeff_j,
        }
    }

    pub fn rho(&self, p: f64, delta: f64) -> f64 {
        self.surface.eval(p, delta)
    }

    /// Per-user rates; zero when `b <= 0`.
    pub fn rates(&self, p: f64, b: f64, delta: f64) -> [f64; 2] {
        self.rates_with_rho(p, b, self.rho(p, delta))
    }

    pub fn rates_with_rho(&self, p: f64, b: f64, rho: f64) -> [f64; 2] {
        if !(b > 0.0) {
            return [0.0; 2];
        }
        let n = b * self.noise_psd;
        self.gains.map(|g| {
            let s = 0.5 * p * g;
            rate_from_sinr(b, s / (rho * s + n))
        })
    }

    pub fn sum_rate(&self, p: f64, b: f64, delta: f64) -> f64 {
        let r = self.rates(p, b, delta);
        r[0] + r[1]
    }

    /// `dR_u / d delta` through the interference factor.
    pub fn rate_ddelta(&self, p: f64, b: f64, delta: f64) -> [f64; 2] {
        let rho = self.rho(p, delta);
        let drho = self.surface.drho_ddelta(p, delta);
        let n = b * self.noise_psd;
        self.gains.map(|g| {
            let s = 0.5 * p * g;
            let x = rho * s + n;
            -b * s * s / (LN_2 * x * (x + s)) * drho
        })
    }

    pub fn delays(&self, p: f64, b: f64, delta: f64) -> [Option<f64>; 2] {
        let r = self.rates(p, b, delta);
        [tx_delay(self.bits[0], delta, r[0]), tx_delay(self.bits[1], delta, r[1])]
    }

    pub fn latency(&self, p: f64, b: f64, delta: f64) -> Option<f64> {
        e2e_latency(self.tau_bs, self.delays(p, b, delta), self.tau_dec)
    }

    /// Latency slack in seconds, `None` for a zero rate.
    pub fn latency_slack(&self, p: f64, b: f64, delta: f64) -> Option<f64> {
        self.latency(p, b, delta).map(|t| self.max_latency - t)
    }

    pub fn energy(&self, p: f64, b: f64, delta: f64) -> Option<f64> {
        let d = self.delays(p, b, delta);
        let t = d[0]?.max(d[1]?);
        Some(p * t + computation_energy(delta, self.zeta))
    }

    /// Latency-induced rate floors `Q_u delta / Tbar_u`.
    pub fn rate_floors(&self, delta: f64) -> [f64; 2] {
        [0, 1].map(|u| self.bits[u] * delta / self.residual[u])
    }

    pub fn metrics(&self, p: f64, b: f64, delta: f64) -> PairMetrics {
        let rho = self.rho(p, delta);
        let n = b * self.noise_psd;
        let sinr = self.gains.map(|g| {
            let s = 0.5 * p * g;
            if b > 0.0 {
                s / (rho * s + n)
            } else {
                0.0
            }
        });
        let rate = sinr.map(|g| if b > 0.0 { rate_from_sinr(b, g) } else { 0.0 });
        let tx = [tx_delay(self.bits[0], delta, rate[0]), tx_delay(self.bits[1], delta, rate[1])];
        let latency = e2e_latency(self.tau_bs, tx, self.tau_dec);
        let energy = match tx {
            [Some(a), Some(c)] => Some(p * a.max(c) + computation_energy(delta, self.zeta)),
            _ => None,
        };
        PairMetrics {
            rho,
            sinr,
            rate,
            sum_rate: rate[0] + rate[1],
            tx_delay: tx,
            latency,
            energy,
        }
    }
}

/// Pairing plus continuous resources, with cached metrics and objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationState {
    groups: Vec<GroupAllocation>,
    metrics: Vec<PairMetrics>,
    objective: f64,
}

impl AllocationState {
    pub fn new(
        scenario: &Scenario,
        profiles: &PairProfileSet,
        groups: Vec<GroupAllocation>,
    ) -> Result<Self> {
        for g in &groups {
            check_group_inputs(g)?;
        }
        let metrics: Vec<PairMetrics> = groups
            .iter()
            .map(|g| GroupContext::new(scenario, profiles, g.pair).metrics(g.power, g.bandwidth, g.delta))
            .collect();
        let objective = metrics.iter().map(|m| m.sum_rate).sum();
        Ok(AllocationState {
            groups,
            metrics,
            objective,
        })
    }

    /// Builds a state from parallel vectors.
    pub fn from_parts(
        scenario: &Scenario,
        profiles: &PairProfileSet,
        pairs: &[Pair],
        powers: &[f64],
        bandwidths: &[f64],
        deltas: &[f64],
    ) -> Result<Self> {
        let k = pairs.len();
        if powers.len() != k || bandwidths.len() != k || deltas.len() != k {
            return Err(Error::AssignmentSizeMismatch {
                pairs: k,
                groups: powers.len(),
            });
        }
        let groups = (0..k)
            .map(|g| GroupAllocation {
                pair: pairs[g],
                power: powers[g],
                bandwidth: bandwidths[g],
                delta: deltas[g],
            })
            .collect();
        Self::new(scenario, profiles, groups)
    }

    pub fn groups(&self) -> &[GroupAllocation] {
        &self.groups
    }

    pub fn metrics(&self) -> &[PairMetrics] {
        &self.metrics
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn pairs(&self) -> Vec<Pair> {
        self.groups.iter().map(|g| g.pair).collect()
    }

    pub fn powers(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.power).collect()
    }

    pub fn bandwidths(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.bandwidth).collect()
    }

    pub fn deltas(&self) -> Vec<f64> {
        self.groups.iter().map(|g| g.delta).collect()
    }

    /// Cached sum rate.
    pub fn objective(&self) -> f64 {
        self.objective
    }

    /// Total energy, `None` if some group has a zero rate.
    pub fn total_energy(&self) -> Option<f64> {
        self.metrics.iter().map(|m| m.energy).sum()
    }

    /// Replaces one group and updates the cached objective incrementally.
    pub fn set_group(
        &mut self,
        k: usize,
        group: GroupAllocation,
        scenario: &Scenario,
        profiles: &PairProfileSet,
    ) -> Result<()> {
        check_group_inputs(&group)?;
        let m = GroupContext::new(scenario, profiles, group.pair).metrics(
            group.power,
            group.bandwidth,
            group.delta,
        );
        self.objective += m.sum_rate - self.metrics[k].sum_rate;
        self.metrics[k] = m;
        self.groups[k] = group;
        Ok(())
    }
}

fn check_group_inputs(g: &GroupAllocation) -> Result<()> {
    if !(g.bandwidth > 0.0) {
        return Err(Error::NonPositiveBandwidth(g.bandwidth));
    }
    if !(g.delta > 0.0 && g.delta <= 1.0) {
        return Err(Error::InvalidCompressionRatio(g.delta));
    }
    if !(g.power >= 0.0) || !g.power.is_finite() {
        return Err(crate::error::invalid("power", format!("must be nonnegative, got {}", g.power)));
    }
    Ok(())
}

/// `sum_k Rbar_k` recomputed from scratch.
pub fn objective(state: &AllocationState, scenario: &Scenario, profiles: &PairProfileSet) -> f64 {
    state
        .groups()
        .iter()
        .map(|g| GroupContext::new(scenario, profiles, g.pair).sum_rate(g.power, g.bandwidth, g.delta))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    Distortion { user: usize },
    Latency { group: usize },
    Energy,
    TotalPower,
    TotalBandwidth,
    PowerNonnegative { group: usize },
    DeltaRange { group: usize },
    GroupCount,
    UserExclusivity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub kind: ConstraintKind,
    /// Raw slack in the constraint's own unit; negative means violated.
    pub slack: f64,
    /// Slack divided by the constraint's budget.
    pub normalised: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub checks: Vec<ConstraintCheck>,
    pub energy_form: EnergyForm,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn violations(&self) -> impl Iterator<Item = &ConstraintCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn get(&self, kind: ConstraintKind) -> Option<&ConstraintCheck> {
        self.checks.iter().find(|c| c.kind == kind)
    }
}

fn check(kind: ConstraintKind, slack: f64, scale: f64) -> ConstraintCheck {
    let normalised = slack / scale;
    ConstraintCheck {
        kind,
        slack,
        normalised,
        pass: normalised >= -FEAS_TOL,
    }
}

/// Evaluates every constraint of the joint problem with the exact models.
pub fn check_feasible(
    state: &AllocationState,
    scenario: &Scenario,
    profiles: &PairProfileSet,
) -> FeasibilityReport {
    let b = &scenario.budgets;
    let n = scenario.num_users;
    let mut checks = Vec::new();

    let pairs = state.pairs();
    let k_expected = scenario.num_groups();
    checks.push(check(
        ConstraintKind::GroupCount,
        -(pairs.len() as f64 - k_expected as f64).abs(),
        1.0,
    ));
    let mut count = vec![0usize; n];
    for p in &pairs {
        for u in p.members() {
            if u < n {
                count[u] += 1;
            }
        }
    }
    let bad_users = count.iter().filter(|&&c| c != 1).count()
        + pairs.iter().filter(|p| p.j >= n).count();
    let structural_ok = bad_users == 0 && is_perfect_matching(&pairs, n);
    checks.push(check(
        ConstraintKind::UserExclusivity,
        if structural_ok { 0.0 } else { -(bad_users.max(1) as f64) },
        1.0,
    ));

    let mut energy = 0.0;
    for (k, (g, m)) in state.groups().iter().zip(state.metrics()).enumerate() {
        checks.push(check(
            ConstraintKind::DeltaRange { group: k },
            (g.delta - b.delta_min).min(1.0 - g.delta),
            1.0,
        ));
        checks.push(check(
            ConstraintKind::PowerNonnegative { group: k },
            g.power,
            b.total_power_watts,
        ));
        let lat_slack = m.latency.map_or(f64::NEG_INFINITY, |t| b.max_latency_s - t);
        checks.push(check(ConstraintKind::Latency { group: k }, lat_slack, b.max_latency_s));
        energy += m.energy.unwrap_or(f64::INFINITY);
        if g.pair.j < n {
            let prof = profiles.get(g.pair);
            for u in g.pair.members() {
                let d = prof.envelope_of(u).eval(g.delta);
                let dmax = b.distortion_max[u];
                checks.push(check(ConstraintKind::Distortion { user: u }, dmax - d, dmax));
            }
        }
    }
    checks.push(check(
        ConstraintKind::Energy,
        b.energy_budget_j - energy,
        b.energy_budget_j,
    ));
    let p_sum: f64 = state.groups().iter().map(|g| g.power).sum();
    let b_sum: f64 = state.groups().iter().map(|g| g.bandwidth).sum();
    checks.push(check(
        ConstraintKind::TotalPower,
        b.total_power_watts - p_sum,
        b.total_power_watts,
    ));
    checks.push(check(
        ConstraintKind::TotalBandwidth,
        b.total_bandwidth_hz - b_sum,
        b.total_bandwidth_hz,
    ));
    FeasibilityReport {
        checks,
        energy_form: EnergyForm::Exact,
    }
}
