//! Pairing block: Lagrangian pricing of pair-to-group assignments followed by
//! a two-stage repair into a one-to-one pairing and a local swap search.

mod matching;

pub use matching::{
    max_value_assignment, max_weight_perfect_matching, repair_assignment, Matching, WeightMatrix, MAX_EXACT_NODES,
};

use serde::{Deserialize, Serialize};

use crate::feasibility::{edge_feasible_at, FeasibleEdgeSet};
use crate::link::{GroupAllocation, GroupContext};
use crate::pair::{is_perfect_matching, Pair};
use crate::profiles::PairProfileSet;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairingOptions {
    pub max_dual_iters: usize,
    /// Normalised L-infinity change of the multipliers that ends the loop.
    pub dual_tol: f64,
    /// Base step of every multiplier relative to its natural scale.
    pub step_frac: f64,
    /// Also try exchanging members between two groups' pairs.
    pub member_swaps: bool,
}

impl Default for PairingOptions {
    fn default() -> Self {
        PairingOptions {
            max_dual_iters: 100,
            dual_tol: 1e-4,
            step_frac: 0.1,
            member_swaps: true,
        }
    }
}

/// Multipliers of the relaxed pairing problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingDuals {
    /// Exclusivity price per user.
    pub nu: Vec<f64>,
    /// Energy price.
    pub theta: f64,
    /// Distortion price per user.
    pub lambda_d: Vec<f64>,
}

impl PairingDuals {
    pub fn zeros(n: usize) -> Self {
        PairingDuals {
            nu: vec![0.0; n],
            theta: 0.0,
            lambda_d: vec![0.0; n],
        }
    }

    pub fn is_nonnegative(&self) -> bool {
        self.theta >= 0.0 && self.nu.iter().chain(&self.lambda_d).all(|&v| v >= 0.0)
    }
}

/// Quantities of one pair hosted by one group's resources.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeGroupData {
    pub sum_rate: f64,
    pub energy: f64,
    /// Envelope distortion of `(pair.i, pair.j)` at the group's ratio.
    pub distortion: [f64; 2],
}

/// Candidate pairs and their per-group data; `None` marks a pair that is not
/// dynamically feasible on that group.
#[derive(Debug, Clone, PartialEq)]
pub struct PairingInstance {
    pub num_users: usize,
    pub edges: Vec<Pair>,
    /// `data[k][e]` for group `k` and edge `e`.
    pub data: Vec<Vec<Option<EdgeGroupData>>>,
    pub energy_budget: f64,
    pub distortion_max: Vec<f64>,
}

impl PairingInstance {
    /// Prices every static edge under each group's current resources.
    pub fn build(
        scenario: &Scenario,
        profiles: &PairProfileSet,
        edges: &FeasibleEdgeSet,
        groups: &[GroupAllocation],
    ) -> Self {
        let ctxs: Vec<GroupContext> = edges
            .edges()
            .iter()
            .map(|e| GroupContext::new(scenario, profiles, e.pair))
            .collect();
        let data = groups
            .iter()
            .map(|g| {
                edges
                    .edges()
                    .iter()
                    .zip(&ctxs)
                    .map(|(e, ctx)| {
                        if !edge_feasible_at(e, ctx, g.power, g.bandwidth, g.delta) {
                            return None;
                        }
                        let m = ctx.metrics(g.power, g.bandwidth, g.delta);
                        let prof = profiles.get(e.pair);
                        Some(EdgeGroupData {
                            sum_rate: m.sum_rate,
                            energy: m.energy?,
                            distortion: [prof.envelope_i.eval(g.delta), prof.envelope_j.eval(g.delta)],
                        })
                    })
                    .collect()
            })
            .collect();
        PairingInstance {
            num_users: scenario.num_users,
            edges: edges.edges().iter().map(|e| e.pair).collect(),
            data,
            energy_budget: scenario.budgets.energy_budget_j,
            distortion_max: scenario.budgets.distortion_max.clone(),
        }
    }

    pub fn num_groups(&self) -> usize {
        self.data.len()
    }

    fn edge_index(&self, pair: Pair) -> Option<usize> {
        self.edges.binary_search(&pair).ok()
    }

    pub fn get(&self, pair: Pair, group: usize) -> Option<&EdgeGroupData> {
        self.data[group][self.edge_index(pair)?].as_ref()
    }
}

/// `Rbar - theta E - lambda_i D_i - lambda_j D_j`.
pub fn dual_price(pair: Pair, data: &EdgeGroupData, duals: &PairingDuals) -> f64 {
    data.sum_rate
        - duals.theta * data.energy
        - duals.lambda_d[pair.i] * data.distortion[0]
        - duals.lambda_d[pair.j] * data.distortion[1]
}

/// Utility `Phi` and reduced cost `Phi - nu_i - nu_j` per group and edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedCostTable {
    pub utility: Vec<Vec<f64>>,
    pub reduced: Vec<Vec<f64>>,
}

impl ReducedCostTable {
    pub fn new(inst: &PairingInstance, duals: &PairingDuals) -> Self {
        let mut utility = Vec::with_capacity(inst.num_groups());
        let mut reduced = Vec::with_capacity(inst.num_groups());
        for row in &inst.data {
            let u: Vec<f64> = row
                .iter()
                .zip(&inst.edges)
                .map(|(d, &pair)| d.as_ref().map_or(f64::NEG_INFINITY, |d| dual_price(pair, d, duals)))
                .collect();
            let r = u
                .iter()
                .zip(&inst.edges)
                .map(|(&v, p)| v - duals.nu[p.i] - duals.nu[p.j])
                .collect();
            utility.push(u);
            reduced.push(r);
        }
        ReducedCostTable { utility, reduced }
    }
}

/// Best edge of one group by reduced cost; ties go to the smaller pair.
pub fn onehot_select(inst: &PairingInstance, table: &ReducedCostTable, group: usize) -> Option<Pair> {
    let mut best: Option<(usize, f64)> = None;
    for (e, &v) in table.reduced[group].iter().enumerate() {
        if v == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|(_, bv)| v > bv) {
            best = Some((e, v));
        }
    }
    best.map(|(e, _)| inst.edges[e])
}

/// Step sizes of one dual iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DualSteps {
    pub mu: f64,
    pub beta_e: f64,
    pub beta_d: f64,
}

/// Projected subgradient step on all multipliers.
pub fn dual_update(
    duals: &PairingDuals,
    selections: &[Option<Pair>],
    inst: &PairingInstance,
    steps: DualSteps,
) -> PairingDuals {
    let n = inst.num_users;
    let mut count = vec![0.0; n];
    let mut dist = vec![0.0; n];
    let mut energy = 0.0;
    for (k, sel) in selections.iter().enumerate() {
        let Some(pair) = sel else { continue };
        let d = inst.get(*pair, k).expect("selected edges are feasible");
        energy += d.energy;
        for (slot, u) in pair.members().into_iter().enumerate() {
            count[u] += 1.0;
            dist[u] += d.distortion[slot];
        }
    }
    PairingDuals {
        nu: (0..n)
            .map(|u| (duals.nu[u] + steps.mu * (count[u] - 1.0)).max(0.0))
            .collect(),
        theta: (duals.theta + steps.beta_e * (energy - inst.energy_budget)).max(0.0),
        lambda_d: (0..n)
            .map(|u| {
                if count[u] == 0.0 {
                    // no selected pair contains u, so its distortion term is zero
                    (duals.lambda_d[u] - steps.beta_d * inst.distortion_max[u]).max(0.0)
                } else {
                    (duals.lambda_d[u] + steps.beta_d * (dist[u] - inst.distortion_max[u])).max(0.0)
                }
            })
            .collect(),
    }
}

/// Outcome of conflict resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Stage1 {
    /// Pair kept per group.
    pub kept: Vec<Option<Pair>>,
    pub free_users: Vec<usize>,
    pub free_groups: Vec<usize>,
}

/// Greedy conflict removal in decreasing reduced cost (ties by group index).
pub fn resolve_conflicts(
    selections: &[Option<Pair>],
    inst: &PairingInstance,
    table: &ReducedCostTable,
) -> Stage1 {
    let mut order: Vec<(usize, Pair, f64)> = selections
        .iter()
        .enumerate()
        .filter_map(|(k, s)| s.map(|p| (k, p, table.reduced[k][inst.edge_index(p).unwrap()])))
        .collect();
    order.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    let mut used = vec![false; inst.num_users];
    let mut kept = vec![None; selections.len()];
    for (k, p, _) in order {
        if !used[p.i] && !used[p.j] {
            used[p.i] = true;
            used[p.j] = true;
            kept[k] = Some(p);
        }
    }
    Stage1 {
        free_users: (0..inst.num_users).filter(|&u| !used[u]).collect(),
        free_groups: (0..selections.len()).filter(|&k| kept[k].is_none()).collect(),
        kept,
    }
}

/// Residual matching over `max_k` reduced cost followed by an exact
/// assignment of the matched pairs to the free groups.
pub fn residual_match_and_assign(
    stage1: &Stage1,
    inst: &PairingInstance,
    table: &ReducedCostTable,
) -> crate::Result<Option<Vec<(usize, Pair)>>> {
    let users = &stage1.free_users;
    let groups = &stage1.free_groups;
    let value = |p: Pair, k: usize| inst.edge_index(p).map_or(f64::NEG_INFINITY, |e| table.reduced[k][e]);
    let mut w = WeightMatrix::empty(users.len());
    for a in 0..users.len() {
        for b in (a + 1)..users.len() {
            let p = Pair::new(users[a], users[b]);
            let best = groups.iter().map(|&k| value(p, k)).fold(f64::NEG_INFINITY, f64::max);
            w.set(a, b, best);
        }
    }
    let Some(m) = max_weight_perfect_matching(&w)? else {
        return Ok(None);
    };
    let pairs: Vec<Pair> = m.pairs.iter().map(|p| Pair::new(users[p.i], users[p.j])).collect();
    let values: Vec<Vec<f64>> = pairs
        .iter()
        .map(|&p| groups.iter().map(|&k| value(p, k)).collect())
        .collect();
    let Some((assign, _)) = max_value_assignment(&values)? else {
        return Ok(None);
    };
    Ok(Some(
        pairs.iter().zip(assign).map(|(&p, c)| (groups[c], p)).collect(),
    ))
}

/// Exact joint pair-and-group selection over the residual sets.
pub fn fallback_repair(
    stage1: &Stage1,
    inst: &PairingInstance,
    table: &ReducedCostTable,
) -> crate::Result<Option<Vec<(usize, Pair)>>> {
    let groups = &stage1.free_groups;
    let value = |p: Pair, k: usize| {
        inst.edge_index(p)
            .map_or(f64::NEG_INFINITY, |e| table.reduced[groups[k]][e])
    };
    let Some((pairs, _)) = repair_assignment(&stage1.free_users, groups.len(), value)? else {
        return Ok(None);
    };
    Ok(Some(pairs.into_iter().enumerate().map(|(k, p)| (groups[k], p)).collect()))
}

fn total_utility(pairs: &[Pair], inst: &PairingInstance, table: &ReducedCostTable) -> f64 {
    pairs
        .iter()
        .enumerate()
        .map(|(k, &p)| inst.edge_index(p).map_or(f64::NEG_INFINITY, |e| table.utility[k][e]))
        .sum()
}

fn total_energy(pairs: &[Pair], inst: &PairingInstance) -> f64 {
    pairs
        .iter()
        .enumerate()
        .map(|(k, &p)| inst.get(p, k).map_or(f64::INFINITY, |d| d.energy))
        .sum()
}

/// Whether every group's pair is feasible on it and the energy budget holds.
pub fn pairing_admissible(pairs: &[Pair], inst: &PairingInstance) -> bool {
    pairs.iter().enumerate().all(|(k, &p)| inst.get(p, k).is_some())
        && total_energy(pairs, inst) <= inst.energy_budget * (1.0 + 1e-9)
}

/// Local search over group-hosting exchanges and, optionally, member
/// exchanges between two groups. Only strictly improving admissible moves
/// are taken.
pub fn pair_swap_refine(
    pairs: &[Pair],
    inst: &PairingInstance,
    table: &ReducedCostTable,
    member_swaps: bool,
) -> (Vec<Pair>, usize) {
    let mut cur = pairs.to_vec();
    let mut util = total_utility(&cur, inst, table);
    let mut applied = 0;
    let k = cur.len();
    loop {
        let mut improved = false;
        'scan: for a in 0..k {
            for b in (a + 1)..k {
                let (pa, pb) = (cur[a], cur[b]);
                let mut moves = vec![(pb, pa)];
                if member_swaps {
                    let [w, x] = pa.members();
                    let [y, z] = pb.members();
                    for (m1, m2) in [(Pair::new(w, y), Pair::new(x, z)), (Pair::new(w, z), Pair::new(x, y))] {
                        moves.push((m1, m2));
                        moves.push((m2, m1));
                    }
                }
                for (na, nb) in moves {
                    let mut trial = cur.clone();
                    trial[a] = na;
                    trial[b] = nb;
                    if !pairing_admissible(&trial, inst) {
                        continue;
                    }
                    let u = total_utility(&trial, inst, table);
                    if u > util + 1e-12 * util.abs().max(1.0) {
                        cur = trial;
                        util = u;
                        applied += 1;
                        improved = true;
                        break 'scan;
                    }
                }
            }
        }
        if !improved {
            break;
        }
    }
    (cur, applied)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairPath {
    /// Conflict resolution alone produced a full pairing.
    Direct,
    MatchingAssignment,
    Fallback,
    /// No feasible one-to-one pairing; the incoming pairing was kept.
    KeptIncoming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingReport {
    pub dual_iterations: usize,
    pub path: RepairPath,
    pub swaps: usize,
    /// Pairing before the swap search.
    pub before_swaps: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingOutcome {
    pub pairs: Vec<Pair>,
    pub duals: PairingDuals,
    pub report: PairingReport,
}

fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return 1.0;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// The complete pairing block on a prepared instance.
pub fn solve_pairing(
    inst: &PairingInstance,
    duals_in: &PairingDuals,
    incoming: &[Pair],
    opts: &PairingOptions,
) -> crate::Result<PairingOutcome> {
    let n = inst.num_users;
    let scale = median(
        inst.data
            .iter()
            .flatten()
            .flatten()
            .map(|d| d.sum_rate.abs())
            .collect(),
    )
    .max(1e-12);
    let dmax = inst.distortion_max.iter().sum::<f64>() / n.max(1) as f64;
    let base = DualSteps {
        mu: opts.step_frac * scale,
        beta_e: opts.step_frac * scale / (inst.energy_budget * inst.energy_budget),
        beta_d: opts.step_frac * scale / (dmax * dmax),
    };
    let norm = [scale, scale / inst.energy_budget, scale / dmax];

    let mut duals = duals_in.clone();
    let mut table = ReducedCostTable::new(inst, &duals);
    let mut selections: Vec<Option<Pair>> = (0..inst.num_groups()).map(|k| onehot_select(inst, &table, k)).collect();
    let mut iters = 0;
    for t in 0..opts.max_dual_iters {
        iters = t + 1;
        let f = 1.0 / ((t + 1) as f64).sqrt();
        let steps = DualSteps {
            mu: base.mu * f,
            beta_e: base.beta_e * f,
            beta_d: base.beta_d * f,
        };
        let next = dual_update(&duals, &selections, inst, steps);
        let change = next
            .nu
            .iter()
            .zip(&duals.nu)
            .map(|(a, b)| (a - b).abs() / norm[0])
            .chain(std::iter::once((next.theta - duals.theta).abs() / norm[1]))
            .chain(next.lambda_d.iter().zip(&duals.lambda_d).map(|(a, b)| (a - b).abs() / norm[2]))
            .fold(0.0, f64::max);
        duals = next;
        table = ReducedCostTable::new(inst, &duals);
        selections = (0..inst.num_groups()).map(|k| onehot_select(inst, &table, k)).collect();
        if change < opts.dual_tol {
            break;
        }
    }

    let stage1 = resolve_conflicts(&selections, inst, &table);
    let mut pairs = stage1.kept.clone();
    let path = if stage1.free_groups.is_empty() {
        RepairPath::Direct
    } else if let Some(extra) = residual_match_and_assign(&stage1, inst, &table)? {
        for (k, p) in extra {
            pairs[k] = Some(p);
        }
        RepairPath::MatchingAssignment
    } else if let Some(extra) = fallback_repair(&stage1, inst, &table)? {
        for (k, p) in extra {
            pairs[k] = Some(p);
        }
        RepairPath::Fallback
    } else {
        RepairPath::KeptIncoming
    };

    let chosen: Vec<Pair> = match path {
        RepairPath::KeptIncoming => incoming.to_vec(),
        _ => pairs.into_iter().map(|p| p.expect("every group filled")).collect(),
    };
    debug_assert!(path == RepairPath::KeptIncoming || is_perfect_matching(&chosen, n));
    let (refined, swaps) = if path != RepairPath::KeptIncoming && pairing_admissible(&chosen, inst) {
        pair_swap_refine(&chosen, inst, &table, opts.member_swaps)
    } else {
        (chosen.clone(), 0)
    };
    Ok(PairingOutcome {
        pairs: refined,
        duals,
        report: PairingReport {
            dual_iterations: iters,
            path,
            swaps,
            before_swaps: chosen,
        },
    })
}

/// Builds the instance from the current allocation and runs the block.
pub fn optimize_pairing(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    edges: &FeasibleEdgeSet,
    groups: &[GroupAllocation],
    duals_in: &PairingDuals,
    opts: &PairingOptions,
) -> crate::Result<PairingOutcome> {
    let inst = PairingInstance::build(scenario, profiles, edges, groups);
    let incoming: Vec<Pair> = groups.iter().map(|g| g.pair).collect();
    solve_pairing(&inst, duals_in, &incoming, opts)
}
