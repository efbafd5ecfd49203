//! Power and bandwidth block: trust-region successive convex approximation.
//!
//! Each iteration builds the concave rate model around the current iterate,
//! maximises it under the coupled budgets with an interior-point solve, and
//! accepts the candidate on the ratio of true to predicted improvement. The
//! trust region bounds the power of every group.

mod barrier;
mod surrogate;

pub use barrier::{barrier_maximize, phase_one, BarrierOptions, BarrierProblem, BarrierSolution};
pub use surrogate::{qhat, GroupSurrogate, QLine};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::link::{computation_energy, GroupContext, FEAS_TOL};
use crate::pair::Pair;
use crate::profiles::PairProfileSet;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PbOptions {
    pub eta1: f64,
    pub eta2: f64,
    pub shrink: f64,
    pub expand: f64,
    /// Initial radius as a fraction of each group's starting power.
    pub radius0_frac: f64,
    /// Stop on relative improvement below this.
    pub tol: f64,
    pub max_iters: usize,
    /// Radius floor as a fraction of the power budget.
    pub radius_floor_frac: f64,
    pub bandwidth_floor_hz: f64,
    /// Re-solves with raised rate floors when a candidate misses the exact
    /// latency budget.
    pub floor_restorations: usize,
    pub barrier: BarrierOptions,
}

impl Default for PbOptions {
    fn default() -> Self {
        PbOptions {
            eta1: 0.1,
            eta2: 0.75,
            shrink: 0.5,
            expand: 2.0,
            radius0_frac: 0.25,
            tol: 1e-4,
            max_iters: 50,
            radius_floor_frac: 1e-6,
            bandwidth_floor_hz: 1e3,
            floor_restorations: 4,
            barrier: BarrierOptions::default(),
        }
    }
}

/// Convex subproblem data around one anchor.
#[derive(Debug, Clone)]
pub struct SurrogateModel {
    pub groups: Vec<GroupSurrogate>,
    /// Latency-induced rate floors per group and member.
    pub floors: Vec<[f64; 2]>,
    /// `max(Tbar_i, Tbar_j)` per group.
    pub residual_max: Vec<f64>,
    pub total_power: f64,
    pub total_bandwidth: f64,
    pub energy_budget: f64,
    /// Computation energy of the fixed ratios.
    pub computation_energy: f64,
    pub bandwidth_floor: f64,
}

impl SurrogateModel {
    pub fn new(
        ctxs: &[GroupContext],
        deltas: &[f64],
        anchor_p: &[f64],
        anchor_b: &[f64],
        scenario: &Scenario,
        bandwidth_floor: f64,
    ) -> Self {
        let b = &scenario.budgets;
        SurrogateModel {
            groups: (0..ctxs.len())
                .map(|k| GroupSurrogate::new(&ctxs[k], deltas[k], anchor_p[k], anchor_b[k]))
                .collect(),
            floors: (0..ctxs.len()).map(|k| ctxs[k].rate_floors(deltas[k])).collect(),
            residual_max: ctxs.iter().map(|c| c.residual[0].max(c.residual[1])).collect(),
            total_power: b.total_power_watts,
            total_bandwidth: b.total_bandwidth_hz,
            energy_budget: b.energy_budget_j,
            computation_energy: deltas
                .iter()
                .map(|&d| computation_energy(d, b.comp_energy_coeff_j))
                .sum(),
            bandwidth_floor,
        }
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    /// Surrogate total `sum_k sum_u Rlow`.
    pub fn value(&self, p: &[f64], b: &[f64]) -> f64 {
        self.groups
            .iter()
            .enumerate()
            .map(|(k, g)| g.sum_bound(p[k], b[k]))
            .sum()
    }

    pub fn anchor(&self) -> (Vec<f64>, Vec<f64>) {
        (
            self.groups.iter().map(|g| g.p_anchor).collect(),
            self.groups.iter().map(|g| g.b_anchor).collect(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Con {
    Floor { k: usize, u: usize },
    PowerSum,
    BandwidthSum,
    Energy,
    QNonneg { k: usize },
    PowerLow { k: usize, bound: f64 },
    PowerHigh { k: usize, bound: f64 },
    BandwidthLow { k: usize },
}

/// The subproblem in scaled variables `p / P_max` and `b / B_max`, with the
/// objective divided by `B_max`.
struct Scaled<'a> {
    model: &'a SurrogateModel,
    /// Groups whose power is pinned at the anchor.
    pinned: Vec<bool>,
    cons: Vec<Con>,
}

impl<'a> Scaled<'a> {
    fn new(model: &'a SurrogateModel, radii: &[f64]) -> Self {
        let k = model.num_groups();
        let pinned: Vec<bool> = radii.iter().map(|&r| !(r > 0.0)).collect();
        let mut cons = Vec::new();
        for g in 0..k {
            cons.push(Con::Floor { k: g, u: 0 });
            cons.push(Con::Floor { k: g, u: 1 });
        }
        cons.push(Con::PowerSum);
        cons.push(Con::BandwidthSum);
        cons.push(Con::Energy);
        for g in 0..k {
            if !pinned[g] {
                let q = model.groups[g].q;
                if q.slope < 0.0 {
                    cons.push(Con::QNonneg { k: g });
                }
                let pa = model.groups[g].p_anchor;
                cons.push(Con::PowerLow {
                    k: g,
                    bound: (pa - radii[g]).max(0.0),
                });
                cons.push(Con::PowerHigh {
                    k: g,
                    bound: pa + radii[g],
                });
            }
            cons.push(Con::BandwidthLow { k: g });
        }
        Scaled { model, pinned, cons }
    }

    fn k(&self) -> usize {
        self.model.num_groups()
    }

    fn power(&self, x: &[f64], g: usize) -> f64 {
        if self.pinned[g] {
            self.model.groups[g].p_anchor
        } else {
            x[g] * self.model.total_power
        }
    }

    fn bandwidth(&self, x: &[f64], g: usize) -> f64 {
        x[self.k() + g] * self.model.total_bandwidth
    }

    fn unscale(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.k();
        ((0..k).map(|g| self.power(x, g)).collect(), (0..k).map(|g| self.bandwidth(x, g)).collect())
    }

    fn scale(&self, p: &[f64], b: &[f64]) -> DVector<f64> {
        let k = self.k();
        let mut x = DVector::zeros(2 * k);
        for g in 0..k {
            x[g] = p[g] / self.model.total_power;
            x[k + g] = b[g] / self.model.total_bandwidth;
        }
        x
    }

    /// Chain rule from `(p, b)` to the scaled variables of group `g`; the
    /// gradient is scaled by `w` and the Hessian by `w * hw`.
    #[allow(clippy::too_many_arguments)]
    fn scatter(
        &self,
        g: usize,
        grad_pb: nalgebra::Vector2<f64>,
        hess_pb: nalgebra::Matrix2<f64>,
        w: f64,
        hw: f64,
        grad: &mut [f64],
        hess: &mut DMatrix<f64>,
    ) {
        let k = self.k();
        let sp = if self.pinned[g] { 0.0 } else { self.model.total_power };
        let sb = self.model.total_bandwidth;
        let idx = [g, k + g];
        let s = [sp, sb];
        for a in 0..2 {
            grad[idx[a]] += w * s[a] * grad_pb[a];
            for c in 0..2 {
                hess[(idx[a], idx[c])] += w * hw * s[a] * s[c] * hess_pb[(a, c)];
            }
        }
    }
}

impl BarrierProblem for Scaled<'_> {
    fn dim(&self) -> usize {
        2 * self.k()
    }

    fn num_constraints(&self) -> usize {
        self.cons.len()
    }

    fn is_soft(&self, i: usize) -> bool {
        matches!(
            self.cons[i],
            Con::Floor { .. } | Con::PowerSum | Con::BandwidthSum | Con::Energy
        )
    }

    fn objective(&self, x: &[f64]) -> f64 {
        (0..self.k())
            .map(|g| self.model.groups[g].sum_bound(self.power(x, g), self.bandwidth(x, g)))
            .sum::<f64>()
            / self.model.total_bandwidth
    }

    fn objective_derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>, weight: f64) {
        let w = 1.0 / self.model.total_bandwidth;
        for g in 0..self.k() {
            let (p, b) = (self.power(x, g), self.bandwidth(x, g));
            for u in 0..2 {
                let (_, gr, h) = self.model.groups[g].rate_bound_derivatives(u, p, b);
                self.scatter(g, gr, h, w, weight, grad, hess);
            }
        }
    }

    fn constraint(&self, i: usize, x: &[f64]) -> f64 {
        let m = self.model;
        match self.cons[i] {
            Con::Floor { k, u } => {
                let f = m.floors[k][u];
                (m.groups[k].rate_bound(u, self.power(x, k), self.bandwidth(x, k)) - f) / f
            }
            Con::PowerSum => 1.0 - (0..self.k()).map(|g| self.power(x, g)).sum::<f64>() / m.total_power,
            Con::BandwidthSum => 1.0 - (0..self.k()).map(|g| x[self.k() + g]).sum::<f64>(),
            Con::Energy => {
                let e: f64 = (0..self.k()).map(|g| self.power(x, g) * m.residual_max[g]).sum();
                (m.energy_budget - m.computation_energy - e) / m.energy_budget
            }
            Con::QNonneg { k } => m.groups[k].q.eval(self.power(x, k)) / m.total_power,
            Con::PowerLow { k, bound } => (self.power(x, k) - bound) / m.total_power,
            Con::PowerHigh { k, bound } => (bound - self.power(x, k)) / m.total_power,
            Con::BandwidthLow { k } => (self.bandwidth(x, k) - m.bandwidth_floor) / m.total_bandwidth,
        }
    }

    fn constraint_derivatives(&self, i: usize, x: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>, weight: f64) {
        let m = self.model;
        let k_all = self.k();
        let pscale = |g: usize| if self.pinned[g] { 0.0 } else { 1.0 };
        match self.cons[i] {
            Con::Floor { k, u } => {
                let f = m.floors[k][u];
                let (_, gr, h) = m.groups[k].rate_bound_derivatives(u, self.power(x, k), self.bandwidth(x, k));
                self.scatter(k, gr, h, 1.0 / f, weight, grad, hess);
            }
            Con::PowerSum => {
                for g in 0..k_all {
                    grad[g] = -pscale(g);
                }
            }
            Con::BandwidthSum => {
                for g in 0..k_all {
                    grad[k_all + g] = -1.0;
                }
            }
            Con::Energy => {
                for g in 0..k_all {
                    grad[g] = -pscale(g) * m.residual_max[g] * m.total_power / m.energy_budget;
                }
            }
            Con::QNonneg { k } => grad[k] = m.groups[k].q.slope,
            Con::PowerLow { k, .. } => grad[k] = 1.0,
            Con::PowerHigh { k, .. } => grad[k] = -1.0,
            Con::BandwidthLow { k } => grad[k_all + k] = 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubproblemStatus {
    Solved,
    /// No strictly feasible point of the surrogate constraints; the anchor is
    /// returned.
    NoInterior,
    /// All radii are zero; the anchor is returned.
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub powers: Vec<f64>,
    pub bandwidths: Vec<f64>,
    /// Surrogate value at the solution.
    pub value: f64,
    pub residual: f64,
    pub status: SubproblemStatus,
}

/// Maximises the surrogate total under the rate floors, the residual-bound
/// energy budget, the power and bandwidth budgets and the trust region.
pub fn solve_convex_subproblem(model: &SurrogateModel, radii: &[f64], opts: &BarrierOptions) -> SubproblemSolution {
    let (pa, ba) = model.anchor();
    let anchor_value = model.value(&pa, &ba);
    let anchor = |status| SubproblemSolution {
        powers: pa.clone(),
        bandwidths: ba.clone(),
        value: anchor_value,
        residual: f64::NAN,
        status,
    };
    if radii.iter().all(|&r| !(r > 0.0)) {
        return anchor(SubproblemStatus::Degenerate);
    }
    let problem = Scaled::new(model, radii);
    let x0 = problem.scale(&pa, &ba);
    let Some(start) = phase_one(&problem, &x0, 1e-3, opts) else {
        return anchor(SubproblemStatus::NoInterior);
    };
    let Some(sol) = barrier_maximize(&problem, start, opts, None) else {
        return anchor(SubproblemStatus::NoInterior);
    };
    let (powers, bandwidths) = problem.unscale(sol.x.as_slice());
    SubproblemSolution {
        value: model.value(&powers, &bandwidths),
        powers,
        bandwidths,
        residual: sol.residual,
        status: SubproblemStatus::Solved,
    }
}

/// Actual over predicted improvement; `None` when the prediction is not
/// positive.
pub fn trust_ratio(true_new: f64, true_old: f64, model_new: f64, model_old: f64) -> Option<f64> {
    let predicted = model_new - model_old;
    (predicted > 0.0).then(|| (true_new - true_old) / predicted)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PbStop {
    Converged,
    NonpositivePrediction,
    RadiusFloor,
    IterationCap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PbStep {
    pub objective: f64,
    pub predicted: f64,
    pub actual: f64,
    pub ratio: Option<f64>,
    pub accepted: bool,
    pub max_radius: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PbOutcome {
    pub powers: Vec<f64>,
    pub bandwidths: Vec<f64>,
    pub objective: f64,
    pub initial_objective: f64,
    pub steps: Vec<PbStep>,
    pub stop: PbStop,
}

/// Exact check of the continuous constraints at fixed ratios.
pub fn continuous_feasible(ctxs: &[GroupContext], deltas: &[f64], p: &[f64], b: &[f64], scenario: &Scenario) -> bool {
    let bud = &scenario.budgets;
    let p_sum: f64 = p.iter().sum();
    let b_sum: f64 = b.iter().sum();
    if (bud.total_power_watts - p_sum) / bud.total_power_watts < -FEAS_TOL
        || (bud.total_bandwidth_hz - b_sum) / bud.total_bandwidth_hz < -FEAS_TOL
        || p.iter().any(|&x| !(x >= 0.0))
        || b.iter().any(|&x| !(x > 0.0))
    {
        return false;
    }
    let mut energy = 0.0;
    for (k, ctx) in ctxs.iter().enumerate() {
        let m = ctx.metrics(p[k], b[k], deltas[k]);
        match (m.latency, m.energy) {
            (Some(t), Some(e)) if (bud.max_latency_s - t) / bud.max_latency_s >= -FEAS_TOL => energy += e,
            _ => return false,
        }
    }
    (bud.energy_budget_j - energy) / bud.energy_budget_j >= -FEAS_TOL
}

fn total_rate(ctxs: &[GroupContext], deltas: &[f64], p: &[f64], b: &[f64]) -> f64 {
    ctxs.iter()
        .enumerate()
        .map(|(k, c)| c.sum_rate(p[k], b[k], deltas[k]))
        .sum()
}

/// Lifts each floor whose exact rate falls short at the candidate by twice
/// the model overshoot there. Returns whether anything changed.
fn raise_floors(model: &mut SurrogateModel, ctxs: &[GroupContext], deltas: &[f64], cand: &SubproblemSolution) -> bool {
    let mut changed = false;
    for (k, ctx) in ctxs.iter().enumerate() {
        let (p, b) = (cand.powers[k], cand.bandwidths[k]);
        let exact = ctx.rates(p, b, deltas[k]);
        let floors = ctx.rate_floors(deltas[k]);
        for u in 0..2 {
            if exact[u] < floors[u] {
                let over = (model.groups[k].rate_bound(u, p, b) - exact[u]).max(floors[u] - exact[u]);
                model.floors[k][u] += 2.0 * over;
                changed = true;
            }
        }
    }
    changed
}

/// Trust-region loop. `None` when the starting point is infeasible.
pub fn optimize_power_bandwidth(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    pairs: &[Pair],
    deltas: &[f64],
    p0: &[f64],
    b0: &[f64],
    opts: &PbOptions,
) -> Option<PbOutcome> {
    let ctxs: Vec<GroupContext> = pairs
        .iter()
        .map(|&pair| GroupContext::new(scenario, profiles, pair))
        .collect();
    if !continuous_feasible(&ctxs, deltas, p0, b0, scenario) {
        return None;
    }
    let pmax = scenario.budgets.total_power_watts;
    let k = pairs.len();
    let mut p = p0.to_vec();
    let mut b = b0.to_vec();
    let mut obj = total_rate(&ctxs, deltas, &p, &b);
    let initial_objective = obj;
    let mut radii: Vec<f64> = p
        .iter()
        .map(|&x| opts.radius0_frac * if x > 0.0 { x } else { pmax / k as f64 })
        .collect();
    let floor = opts.radius_floor_frac * pmax;
    let mut steps = Vec::new();
    let mut stop = PbStop::IterationCap;
    for _ in 0..opts.max_iters {
        let mut model = SurrogateModel::new(&ctxs, deltas, &p, &b, scenario, opts.bandwidth_floor_hz);
        let model_old = model.value(&p, &b);
        let mut cand = solve_convex_subproblem(&model, &radii, &opts.barrier);
        // The tangent of p rho(p) is not an upper bound where that product is
        // convex, so the bound can overshoot the true rate. Raise the floors
        // by the observed overshoot and solve again.
        for _ in 0..opts.floor_restorations {
            if cand.status != SubproblemStatus::Solved
                || continuous_feasible(&ctxs, deltas, &cand.powers, &cand.bandwidths, scenario)
                || !raise_floors(&mut model, &ctxs, deltas, &cand)
            {
                break;
            }
            cand = solve_convex_subproblem(&model, &radii, &opts.barrier);
        }
        let max_radius = radii.iter().copied().fold(0.0, f64::max);
        let predicted = cand.value - model_old;
        if !(predicted > 1e-12 * obj.abs().max(1.0)) {
            steps.push(PbStep {
                objective: obj,
                predicted,
                actual: 0.0,
                ratio: None,
                accepted: false,
                max_radius,
            });
            stop = PbStop::NonpositivePrediction;
            break;
        }
        let new_obj = total_rate(&ctxs, deltas, &cand.powers, &cand.bandwidths);
        let ratio = trust_ratio(new_obj, obj, cand.value, model_old);
        let feasible = continuous_feasible(&ctxs, deltas, &cand.powers, &cand.bandwidths, scenario);
        let eta = ratio.unwrap_or(f64::NEG_INFINITY);
        let accepted = feasible && eta >= opts.eta1 && new_obj > obj;
        steps.push(PbStep {
            objective: if accepted { new_obj } else { obj },
            predicted,
            actual: new_obj - obj,
            ratio,
            accepted,
            max_radius,
        });
        if accepted {
            let rel = (new_obj - obj) / obj.abs().max(1e-300);
            p = cand.powers;
            b = cand.bandwidths;
            obj = new_obj;
            if eta >= opts.eta2 {
                radii.iter_mut().for_each(|r| *r *= opts.expand);
            }
            if rel < opts.tol {
                stop = PbStop::Converged;
                break;
            }
        } else {
            radii.iter_mut().for_each(|r| *r *= opts.shrink);
        }
        if radii.iter().all(|&r| r < floor) {
            stop = PbStop::RadiusFloor;
            break;
        }
    }
    Some(PbOutcome {
        powers: p,
        bandwidths: b,
        objective: obj,
        initial_objective,
        steps,
        stop,
    })
}
