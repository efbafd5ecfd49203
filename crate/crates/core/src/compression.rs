//! Compression-ratio block: dual decomposition over the energy budget with a
//! per-group one-dimensional search.
//!
//! For a fixed multiplier every group maximises `Rbar(delta) - lambda E(delta)`
//! over its feasible ratios. The transmission delay `Q delta / R(delta)` is
//! not monotone in general, so the latency-feasible ratios form a union of
//! intervals; each interval is further split where the latency-dominant user
//! changes, which is where the energy term has a kink.

use serde::{Deserialize, Serialize};

use crate::link::{computation_energy, GroupContext};
use crate::pair::Pair;
use crate::profiles::{pair_delta_lower_bound, PairProfileSet};
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DeltaOptions {
    /// Seeds per group for the Newton refinement.
    pub grid_points: usize,
    /// Newton step tolerance in ratio units.
    pub delta_tol: f64,
    /// Stop once `|sum E - E_max| < energy_gap_rel * E_max`.
    pub energy_gap_rel: f64,
    pub max_iters: usize,
    /// Base subgradient step, relative to `sum Rbar / E_max^2`.
    pub step0: f64,
    /// Resolution of the latency-boundary scan.
    pub scan_points: usize,
}

impl Default for DeltaOptions {
    fn default() -> Self {
        DeltaOptions {
            grid_points: 32,
            delta_tol: 1e-6,
            energy_gap_rel: 1e-3,
            max_iters: 200,
            step0: 0.5,
            scan_points: 256,
        }
    }
}

/// Union of disjoint closed intervals, ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleDeltaSet {
    pub intervals: Vec<(f64, f64)>,
}

impl FeasibleDeltaSet {
    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn lower(&self) -> Option<f64> {
        self.intervals.first().map(|iv| iv.0)
    }

    pub fn upper(&self) -> Option<f64> {
        self.intervals.last().map(|iv| iv.1)
    }

    pub fn contains(&self, delta: f64) -> bool {
        self.intervals.iter().any(|&(a, b)| a <= delta && delta <= b)
    }
}

/// Latency slack `T_max - T(delta)`; negative infinity for a zero rate.
fn latency_slack(ctx: &GroupContext, p: f64, b: f64, delta: f64) -> f64 {
    ctx.latency_slack(p, b, delta).unwrap_or(f64::NEG_INFINITY)
}

/// Bisection between a point where `ok` holds and one where it does not;
/// returns the last point known to satisfy `ok`.
fn bisect_boundary(mut good: f64, mut bad: f64, ok: impl Fn(f64) -> bool) -> f64 {
    for _ in 0..100 {
        let mid = 0.5 * (good + bad);
        if mid == good || mid == bad {
            break;
        }
        if ok(mid) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    good
}

fn linspace(a: f64, b: f64, n: usize) -> impl Iterator<Item = f64> {
    let n = n.max(2);
    (0..n).map(move |k| {
        if k + 1 == n {
            b
        } else {
            a + (b - a) * k as f64 / (n - 1) as f64
        }
    })
}

/// Ratios in `[delta_lower, 1]` that meet the latency budget at `(p, b)`.
pub fn feasible_delta_interval(
    ctx: &GroupContext,
    delta_lower: f64,
    p: f64,
    b: f64,
    scan_points: usize,
) -> FeasibleDeltaSet {
    let mut intervals = Vec::new();
    if !(delta_lower <= 1.0) || !(delta_lower > 0.0) {
        return FeasibleDeltaSet { intervals };
    }
    let ok = |d: f64| latency_slack(ctx, p, b, d) >= 0.0;
    if delta_lower == 1.0 {
        if ok(1.0) {
            intervals.push((1.0, 1.0));
        }
        return FeasibleDeltaSet { intervals };
    }
    let xs: Vec<f64> = linspace(delta_lower, 1.0, scan_points).collect();
    let mut start: Option<f64> = None;
    let mut prev_ok = false;
    for (k, &x) in xs.iter().enumerate() {
        let cur_ok = ok(x);
        match (k, prev_ok, cur_ok) {
            (0, _, true) => start = Some(x),
            (_, false, true) if k > 0 => start = Some(bisect_boundary(x, xs[k - 1], ok)),
            (_, true, false) => {
                let end = bisect_boundary(xs[k - 1], x, ok);
                intervals.push((start.take().unwrap(), end));
            }
            _ => {}
        }
        prev_ok = cur_ok;
    }
    if let Some(s) = start {
        intervals.push((s, 1.0));
    }
    FeasibleDeltaSet { intervals }
}

/// `Rbar - lambda E` at one ratio; `None` when a rate vanishes.
pub fn group_delta_objective(ctx: &GroupContext, p: f64, b: f64, delta: f64, lambda: f64) -> Option<f64> {
    let m = ctx.metrics(p, b, delta);
    Some(m.sum_rate - lambda * m.energy?)
}

/// Derivative of [`group_delta_objective`] in the ratio, using the
/// latency-dominant user's delay for the energy term.
pub fn group_delta_derivative(ctx: &GroupContext, p: f64, b: f64, delta: f64, lambda: f64) -> Option<f64> {
    let r = ctx.rates(p, b, delta);
    if !(r[0] > 0.0 && r[1] > 0.0) {
        return None;
    }
    let dr = ctx.rate_ddelta(p, b, delta);
    let t = [ctx.bits[0] * delta / r[0], ctx.bits[1] * delta / r[1]];
    let u = if t[0] >= t[1] { 0 } else { 1 };
    let dt = ctx.bits[u] * (r[u] - delta * dr[u]) / (r[u] * r[u]);
    Some(dr[0] + dr[1] - lambda * (p * dt - ctx.zeta / delta))
}

fn dominant_gap(ctx: &GroupContext, p: f64, b: f64, delta: f64) -> f64 {
    let r = ctx.rates(p, b, delta);
    ctx.bits[0] / r[0] - ctx.bits[1] / r[1]
}

/// Splits feasible intervals where the latency-dominant user switches.
fn smooth_pieces(ctx: &GroupContext, p: f64, b: f64, set: &FeasibleDeltaSet, scan: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for &(lo, hi) in &set.intervals {
        if hi <= lo {
            out.push((lo, hi));
            continue;
        }
        let xs: Vec<f64> = linspace(lo, hi, scan).collect();
        let mut a = lo;
        let mut prev = dominant_gap(ctx, p, b, xs[0]) >= 0.0;
        for k in 1..xs.len() {
            let cur = dominant_gap(ctx, p, b, xs[k]) >= 0.0;
            if cur != prev {
                let side = |d: f64| (dominant_gap(ctx, p, b, d) >= 0.0) == prev;
                let cut = bisect_boundary(xs[k - 1], xs[k], side);
                if cut > a {
                    out.push((a, cut));
                    a = cut;
                }
            }
            prev = cur;
        }
        out.push((a, hi));
    }
    out
}

/// One group's data for the compression block.
#[derive(Debug, Clone)]
pub struct DeltaGroup {
    pub ctx: GroupContext,
    pub power: f64,
    pub bandwidth: f64,
    pub delta_lower: f64,
    pub feasible: FeasibleDeltaSet,
    pieces: Vec<(f64, f64)>,
    seeds: Vec<f64>,
}

impl DeltaGroup {
    pub fn new(ctx: GroupContext, delta_lower: f64, power: f64, bandwidth: f64, opts: &DeltaOptions) -> Self {
        let feasible = feasible_delta_interval(&ctx, delta_lower, power, bandwidth, opts.scan_points);
        let pieces = smooth_pieces(&ctx, power, bandwidth, &feasible, opts.scan_points / 4 + 2);
        let seeds = match (feasible.lower(), feasible.upper()) {
            (Some(lo), Some(hi)) => linspace(lo, hi, opts.grid_points).collect(),
            _ => Vec::new(),
        };
        DeltaGroup {
            ctx,
            power,
            bandwidth,
            delta_lower,
            feasible,
            pieces,
            seeds,
        }
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    pub fn objective(&self, delta: f64, lambda: f64) -> f64 {
        group_delta_objective(&self.ctx, self.power, self.bandwidth, delta, lambda)
            .unwrap_or(f64::NEG_INFINITY)
    }

    fn derivative(&self, delta: f64, lambda: f64) -> f64 {
        group_delta_derivative(&self.ctx, self.power, self.bandwidth, delta, lambda).unwrap_or(f64::NAN)
    }

    pub fn energy(&self, delta: f64) -> f64 {
        self.ctx
            .energy(self.power, self.bandwidth, delta)
            .unwrap_or(f64::INFINITY)
    }

    pub fn sum_rate(&self, delta: f64) -> f64 {
        self.ctx.sum_rate(self.power, self.bandwidth, delta)
    }

    /// Best ratio for a fixed multiplier: seeds, piece endpoints and
    /// safeguarded Newton refinements of every bracketed local maximum.
    pub fn maximise(&self, lambda: f64, tol: f64) -> Option<(f64, f64)> {
        let mut best: Option<(f64, f64)> = None;
        let mut offer = |d: f64, v: f64| {
            if v.is_finite() && best.is_none_or(|(_, bv)| v > bv) {
                best = Some((d, v));
            }
        };
        for &(a, b) in &self.pieces {
            let mut xs = vec![a];
            xs.extend(self.seeds.iter().copied().filter(|&s| s > a && s < b));
            if b > a {
                if xs.len() < 3 {
                    xs.push(0.5 * (a + b));
                }
                xs.push(b);
            }
            let fs: Vec<f64> = xs.iter().map(|&x| self.objective(x, lambda)).collect();
            for (&x, &f) in xs.iter().zip(&fs) {
                offer(x, f);
            }
            for i in 0..xs.len() {
                let left_ok = i == 0 || fs[i] >= fs[i - 1];
                let right_ok = i + 1 == xs.len() || fs[i] >= fs[i + 1];
                if !(left_ok && right_ok) {
                    continue;
                }
                let lo = if i == 0 { xs[0] } else { xs[i - 1] };
                let hi = if i + 1 == xs.len() { xs[i] } else { xs[i + 1] };
                if hi <= lo {
                    continue;
                }
                if let Some(x) = self.newton(xs[i], lo, hi, lambda, tol) {
                    let f = self.objective(x, lambda);
                    if f >= fs[i] {
                        offer(x, f);
                    }
                }
            }
        }
        best
    }

    /// Safeguarded Newton on the stationarity condition inside `[lo, hi]`,
    /// falling back to bisection when the step leaves the bracket.
    fn newton(&self, x0: f64, lo: f64, hi: f64, lambda: f64, tol: f64) -> Option<f64> {
        let (mut lo, mut hi) = (lo, hi);
        let g_lo = self.derivative(lo, lambda);
        let g_hi = self.derivative(hi, lambda);
        if !(g_lo > 0.0 && g_hi < 0.0) {
            return None;
        }
        let mut x = x0.clamp(lo, hi);
        for _ in 0..100 {
            let g = self.derivative(x, lambda);
            if !g.is_finite() {
                return None;
            }
            if g > 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let h = 1e-7 * x.max(1e-3);
            let (xa, xb) = ((x - h).max(lo.min(x)), (x + h).min(hi.max(x)));
            let curv = if xb > xa {
                (self.derivative(xb, lambda) - self.derivative(xa, lambda)) / (xb - xa)
            } else {
                f64::NAN
            };
            let mut next = if curv < 0.0 { x - g / curv } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            let step = (next - x).abs();
            x = next;
            if step < tol * 1e-3 || hi - lo < tol * 1e-3 {
                break;
            }
        }
        Some(x)
    }

    /// Energy-minimising ratio on the smooth piece containing `delta`.
    pub fn energy_minimiser_near(&self, delta: f64) -> f64 {
        let &(a, b) = self
            .pieces
            .iter()
            .find(|&&(a, b)| a <= delta && delta <= b)
            .unwrap_or(&(delta, delta));
        if b <= a {
            return a;
        }
        let xs: Vec<f64> = linspace(a, b, 64).collect();
        let (k, _) = xs
            .iter()
            .map(|&x| self.energy(x))
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (k, e)| if e < acc.1 { (k, e) } else { acc });
        // golden-section polish inside the neighbouring cells
        let (mut l, mut r) = (xs[k.saturating_sub(1)], xs[(k + 1).min(xs.len() - 1)]);
        let phi = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..60 {
            let m1 = r - phi * (r - l);
            let m2 = l + phi * (r - l);
            if self.energy(m1) <= self.energy(m2) {
                r = m2;
            } else {
                l = m1;
            }
        }
        let polished = 0.5 * (l + r);
        if self.energy(polished) <= self.energy(xs[k]) {
            polished
        } else {
            xs[k]
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaStop {
    /// Multiplier at zero with the budget slack.
    Slack,
    EnergyGap,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaOutcome {
    pub deltas: Vec<f64>,
    pub lambda: f64,
    pub lambda_history: Vec<f64>,
    pub iterations: usize,
    pub total_energy: f64,
    pub sum_rate: f64,
    pub stop: DeltaStop,
    /// The final iterate overshot the budget and was pulled back.
    pub projected: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaInfeasible {
    /// No ratio meets both the distortion bound and the latency budget.
    EmptyInterval { group: usize },
    /// Even the energy-minimising ratios exceed the budget.
    EnergyBudget,
}

/// `max(0, lambda + step * (sum E - E_max))`.
pub fn dual_energy_update(lambda: f64, step: f64, total_energy: f64, energy_budget: f64) -> f64 {
    (lambda + step * (total_energy - energy_budget)).max(0.0)
}

/// Builds the per-group problems for a fixed pairing and radio allocation.
pub fn delta_groups(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    pairs: &[Pair],
    powers: &[f64],
    bandwidths: &[f64],
    opts: &DeltaOptions,
) -> Result<Vec<DeltaGroup>, DeltaInfeasible> {
    let b = &scenario.budgets;
    pairs
        .iter()
        .enumerate()
        .map(|(k, &pair)| {
            let lower = pair_delta_lower_bound(profiles.get(pair), &b.distortion_max, b.delta_min)
                .ok_or(DeltaInfeasible::EmptyInterval { group: k })?;
            let ctx = GroupContext::new(scenario, profiles, pair);
            let g = DeltaGroup::new(ctx, lower, powers[k], bandwidths[k], opts);
            if g.feasible.is_empty() {
                return Err(DeltaInfeasible::EmptyInterval { group: k });
            }
            Ok(g)
        })
        .collect()
}

/// Dual loop over the energy multiplier.
pub fn optimize_delta(
    groups: &[DeltaGroup],
    energy_budget: f64,
    lambda0: f64,
    opts: &DeltaOptions,
) -> Result<DeltaOutcome, DeltaInfeasible> {
    if let Some(k) = groups.iter().position(|g| g.feasible.is_empty()) {
        return Err(DeltaInfeasible::EmptyInterval { group: k });
    }
    let solve_all = |lambda: f64| -> Result<Vec<f64>, DeltaInfeasible> {
        groups
            .iter()
            .enumerate()
            .map(|(k, g)| {
                g.maximise(lambda, opts.delta_tol)
                    .map(|(d, _)| d)
                    .ok_or(DeltaInfeasible::EmptyInterval { group: k })
            })
            .collect()
    };
    let energy_of = |d: &[f64]| groups.iter().zip(d).map(|(g, &x)| g.energy(x)).sum::<f64>();
    let rate_of = |d: &[f64]| groups.iter().zip(d).map(|(g, &x)| g.sum_rate(x)).sum::<f64>();

    let mut lambda = lambda0.max(0.0);
    let mut history = vec![lambda];
    let mut deltas = solve_all(lambda)?;
    let mut step_scale = None;
    let mut stop = DeltaStop::IterationCap;
    let mut iterations = 0;
    for s in 0..opts.max_iters {
        iterations = s + 1;
        let e = energy_of(&deltas);
        if lambda == 0.0 && e <= energy_budget {
            stop = DeltaStop::Slack;
            break;
        }
        if (e - energy_budget).abs() < opts.energy_gap_rel * energy_budget {
            stop = DeltaStop::EnergyGap;
            break;
        }
        let scale = *step_scale.get_or_insert_with(|| {
            let r = rate_of(&solve_all(0.0).unwrap_or_else(|_| deltas.clone()));
            opts.step0 * r.max(1.0) / (energy_budget * energy_budget)
        });
        let step = scale / ((s + 1) as f64).sqrt();
        lambda = dual_energy_update(lambda, step, e, energy_budget);
        history.push(lambda);
        deltas = solve_all(lambda)?;
    }

    let mut projected = false;
    if energy_of(&deltas) > energy_budget {
        projected = true;
        let targets: Vec<f64> = groups
            .iter()
            .zip(&deltas)
            .map(|(g, &d)| g.energy_minimiser_near(d))
            .collect();
        let mix = |theta: f64| -> Vec<f64> {
            deltas
                .iter()
                .zip(&targets)
                .map(|(&d, &t)| d + theta * (t - d))
                .collect()
        };
        if energy_of(&mix(1.0)) > energy_budget {
            return Err(DeltaInfeasible::EnergyBudget);
        }
        let theta = bisect_boundary(1.0, 0.0, |th| energy_of(&mix(th)) <= energy_budget);
        deltas = mix(theta);
    }
    Ok(DeltaOutcome {
        total_energy: energy_of(&deltas),
        sum_rate: rate_of(&deltas),
        deltas,
        lambda,
        lambda_history: history,
        iterations,
        stop,
        projected,
    })
}

/// Smallest feasible ratio of a group, if any.
pub fn lowest_feasible_delta(group: &DeltaGroup) -> Option<f64> {
    group.feasible.lower()
}

/// Computation energy is independent of the radio resources; exposed for
/// budget bookkeeping in other blocks.
pub fn computation_energy_total(deltas: &[f64], zeta: f64) -> f64 {
    deltas.iter().map(|&d| computation_energy(d, zeta)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dual_update_by_substitution() {
        assert_eq!(dual_energy_update(0.7, 0.3, 2.0, 2.0), 0.7);
        assert_eq!(dual_energy_update(0.0, 0.3, 1.0, 2.0), 0.0);
        assert!((dual_energy_update(1.0, 0.1, 5.0, 3.0) - 1.2).abs() < 1e-15);
    }

    #[test]
    fn linspace_hits_both_ends() {
        let v: Vec<f64> = linspace(0.2, 1.0, 5).collect();
        assert_eq!(v.first(), Some(&0.2));
        assert_eq!(v.last(), Some(&1.0));
        assert_eq!(v.len(), 5);
    }
}
