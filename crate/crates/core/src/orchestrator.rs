//! Outer alternating loop over the three blocks, the initial feasible
//! tuple, and the comparison schemes.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::compression::{delta_groups, optimize_delta, DeltaGroup, DeltaOptions};
use crate::error::{Error, Result};
use crate::feasibility::{static_prune, FeasibleEdgeSet};
use crate::link::{check_feasible, AllocationState, GroupContext};
use crate::pair::Pair;
use crate::pairing::{max_weight_perfect_matching, optimize_pairing, PairingDuals, PairingOptions, RepairPath, WeightMatrix};
use crate::power_bandwidth::{optimize_power_bandwidth, PbOptions};
use crate::profiles::PairProfileSet;
use crate::scenario::Scenario;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveOptions {
    pub max_outer: usize,
    /// Relative change of the objective that ends the loop.
    pub outer_tol: f64,
    pub enable_pairing: bool,
    pub enable_power_bandwidth: bool,
    pub delta: DeltaOptions,
    pub power_bandwidth: PbOptions,
    pub pairing: PairingOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            max_outer: 20,
            outer_tol: 1e-3,
            enable_pairing: true,
            enable_power_bandwidth: true,
            delta: DeltaOptions::default(),
            power_bandwidth: PbOptions::default(),
            pairing: PairingOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockTimings {
    pub delta_ms: f64,
    pub power_bandwidth_ms: f64,
    pub pairing_ms: f64,
    pub refine_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterIteration {
    /// Objective after the ratio block.
    pub after_delta: f64,
    /// Objective after the power/bandwidth block.
    pub after_power_bandwidth: f64,
    /// Objective of the refined candidate pairing, if one was evaluated.
    pub candidate: Option<f64>,
    pub candidate_accepted: bool,
    /// The candidate could not start from the current radio allocation and
    /// was restarted from an equal split.
    pub candidate_restarted: bool,
    pub pairing_path: Option<RepairPath>,
    pub accepted: f64,
    pub energy_multiplier: f64,
    pub pairing_energy_price: f64,
    pub max_exclusivity_price: f64,
    pub timings: BlockTimings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Converged,
    IterationCap,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub initial: f64,
    pub iterations: Vec<OuterIteration>,
    pub termination: Termination,
}

impl SolveTrace {
    /// Initial objective followed by every accepted value.
    pub fn accepted_sequence(&self) -> Vec<f64> {
        std::iter::once(self.initial)
            .chain(self.iterations.iter().map(|it| it.accepted))
            .collect()
    }

    /// Whether the accepted sequence never drops by more than `rel`.
    pub fn is_monotone(&self, rel: f64) -> bool {
        self.accepted_sequence()
            .windows(2)
            .all(|w| w[1] >= w[0] - rel * w[0].abs().max(1.0))
    }
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

fn equal_split(scenario: &Scenario) -> (Vec<f64>, Vec<f64>) {
    let k = scenario.num_groups();
    let b = &scenario.budgets;
    (
        vec![b.total_power_watts / k as f64; k],
        vec![b.total_bandwidth_hz / k as f64; k],
    )
}

/// Lowest feasible ratios, or energy-minimising ones when those overrun the
/// energy budget.
fn starting_deltas(groups: &[DeltaGroup], energy_budget: f64) -> Option<Vec<f64>> {
    let lowest: Vec<f64> = groups.iter().map(|g| g.feasible.lower()).collect::<Option<_>>()?;
    let energy = |d: &[f64]| groups.iter().zip(d).map(|(g, &x)| g.energy(x)).sum::<f64>();
    if energy(&lowest) <= energy_budget {
        return Some(lowest);
    }
    let frugal: Vec<f64> = groups.iter().zip(&lowest).map(|(g, &d)| g.energy_minimiser_near(d)).collect();
    (energy(&frugal) <= energy_budget).then_some(frugal)
}

/// Feasible state for a fixed pairing at the equal split, if one exists.
pub fn equal_split_state(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    pairs: &[Pair],
    opts: &DeltaOptions,
) -> Option<AllocationState> {
    let (p, b) = equal_split(scenario);
    let groups = delta_groups(scenario, profiles, pairs, &p, &b, opts).ok()?;
    let deltas = starting_deltas(&groups, scenario.budgets.energy_budget_j)?;
    let state = AllocationState::from_parts(scenario, profiles, pairs, &p, &b, &deltas).ok()?;
    check_feasible(&state, scenario, profiles).feasible().then_some(state)
}

/// Edges that admit a nonempty ratio interval at the equal split.
fn equal_split_edges(scenario: &Scenario, profiles: &PairProfileSet, edges: &FeasibleEdgeSet, opts: &DeltaOptions) -> Vec<(Pair, bool)> {
    let (p, b) = equal_split(scenario);
    edges
        .edges()
        .iter()
        .map(|e| {
            let ctx = GroupContext::new(scenario, profiles, e.pair);
            let g = DeltaGroup::new(ctx, e.delta_lower, p[0], b[0], opts);
            (e.pair, !g.feasible.is_empty())
        })
        .collect()
}

/// Starting point: the most similar perfect matching among pairs that can
/// host an equal share, equal power and bandwidth, lowest feasible ratios.
pub fn initial_feasible_tuple(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    edges: &FeasibleEdgeSet,
    opts: &DeltaOptions,
) -> Result<AllocationState> {
    let mut w = WeightMatrix::empty(scenario.num_users);
    for (pair, ok) in equal_split_edges(scenario, profiles, edges, opts) {
        if ok {
            // unit weight keeps every edge admissible, similarity breaks ties
            w.set(pair.i, pair.j, 1.0 + profiles.get(pair).similarity);
        }
    }
    let m = max_weight_perfect_matching(&w)?
        .ok_or_else(|| Error::InfeasibleDraw("no pairing can host an equal share of the resources".into()))?;
    equal_split_state(scenario, profiles, &m.pairs, opts)
        .ok_or_else(|| Error::InfeasibleDraw("equal split violates the energy budget".into()))
}

/// Ratio block at fixed pairing and radio resources. Keeps the incoming
/// ratios when the block cannot improve on them.
fn delta_block(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    state: &AllocationState,
    lambda0: f64,
    opts: &DeltaOptions,
) -> (AllocationState, f64) {
    let pairs = state.pairs();
    let (p, b) = (state.powers(), state.bandwidths());
    let attempt = || -> Option<(AllocationState, f64)> {
        let groups = delta_groups(scenario, profiles, &pairs, &p, &b, opts).ok()?;
        let out = optimize_delta(&groups, scenario.budgets.energy_budget_j, lambda0, opts).ok()?;
        let next = AllocationState::from_parts(scenario, profiles, &pairs, &p, &b, &out.deltas).ok()?;
        check_feasible(&next, scenario, profiles)
            .feasible()
            .then_some((next, out.lambda))
    };
    match attempt() {
        Some((next, lambda)) if next.objective() >= state.objective() => (next, lambda),
        Some((_, lambda)) => (state.clone(), lambda),
        None => (state.clone(), lambda0),
    }
}

/// Power/bandwidth block at fixed pairing and ratios.
fn pb_block(scenario: &Scenario, profiles: &PairProfileSet, state: &AllocationState, opts: &PbOptions) -> AllocationState {
    let pairs = state.pairs();
    let deltas = state.deltas();
    let Some(out) = optimize_power_bandwidth(scenario, profiles, &pairs, &deltas, &state.powers(), &state.bandwidths(), opts)
    else {
        return state.clone();
    };
    match AllocationState::from_parts(scenario, profiles, &pairs, &out.powers, &out.bandwidths, &deltas) {
        Ok(next) if next.objective() >= state.objective() && check_feasible(&next, scenario, profiles).feasible() => next,
        _ => state.clone(),
    }
}

/// Ratio block followed by the power/bandwidth block.
fn continuous_blocks(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    state: &AllocationState,
    lambda0: f64,
    opts: &SolveOptions,
    timings: Option<&mut BlockTimings>,
) -> (AllocationState, AllocationState, f64) {
    let t = Instant::now();
    let (after_delta, lambda) = delta_block(scenario, profiles, state, lambda0, &opts.delta);
    let t_delta = ms_since(t);
    let t = Instant::now();
    let after_pb = if opts.enable_power_bandwidth {
        pb_block(scenario, profiles, &after_delta, &opts.power_bandwidth)
    } else {
        after_delta.clone()
    };
    if let Some(tm) = timings {
        tm.delta_ms += t_delta;
        tm.power_bandwidth_ms += ms_since(t);
    }
    (after_delta, after_pb, lambda)
}

/// Alternating optimisation from a feasible state. Every accepted state is
/// feasible and the accepted objective never decreases.
pub fn run_alternating_from(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    edges: &FeasibleEdgeSet,
    start: AllocationState,
    opts: &SolveOptions,
) -> (AllocationState, SolveTrace) {
    let mut state = start;
    let mut lambda = 0.0;
    let mut duals = PairingDuals::zeros(scenario.num_users);
    let mut trace = SolveTrace {
        initial: state.objective(),
        iterations: Vec::new(),
        termination: Termination::IterationCap,
    };
    for _ in 0..opts.max_outer {
        let prev = state.objective();
        let mut timings = BlockTimings::default();
        let (after_delta, current, lam) =
            continuous_blocks(scenario, profiles, &state, lambda, opts, Some(&mut timings));
        lambda = lam;
        let xi_c = current.objective();

        let mut candidate = None;
        let mut accepted_candidate = false;
        let mut restarted = false;
        let mut path = None;
        let mut next = current.clone();
        if opts.enable_pairing {
            let t = Instant::now();
            let outcome = optimize_pairing(scenario, profiles, edges, current.groups(), &duals, &opts.pairing);
            timings.pairing_ms = ms_since(t);
            if let Ok(out) = outcome {
                duals = out.duals.clone();
                path = Some(out.report.path);
                if out.pairs != current.pairs() {
                    let t = Instant::now();
                    if let Some((refined, r)) =
                        refine_candidate(scenario, profiles, &current, &out.pairs, lambda, opts)
                    {
                        restarted = r;
                        candidate = Some(refined.objective());
                        if refined.objective() >= xi_c && check_feasible(&refined, scenario, profiles).feasible() {
                            next = refined;
                            accepted_candidate = true;
                        }
                    }
                    timings.refine_ms = ms_since(t);
                }
            }
        }

        state = next;
        trace.iterations.push(OuterIteration {
            after_delta: after_delta.objective(),
            after_power_bandwidth: xi_c,
            candidate,
            candidate_accepted: accepted_candidate,
            candidate_restarted: restarted,
            pairing_path: path,
            accepted: state.objective(),
            energy_multiplier: lambda,
            pairing_energy_price: duals.theta,
            max_exclusivity_price: duals.nu.iter().copied().fold(0.0, f64::max),
            timings,
        });
        if (state.objective() - prev).abs() < opts.outer_tol * prev.abs().max(1e-300) {
            trace.termination = Termination::Converged;
            break;
        }
    }
    (state, trace)
}

/// Runs both continuous blocks under a new pairing, first from the current
/// radio allocation and, if that is infeasible for the new pairs, from an
/// equal split. The flag reports the restart.
fn refine_candidate(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    current: &AllocationState,
    pairs: &[Pair],
    lambda: f64,
    opts: &SolveOptions,
) -> Option<(AllocationState, bool)> {
    let (p, b) = (current.powers(), current.bandwidths());
    let warm = delta_groups(scenario, profiles, pairs, &p, &b, &opts.delta)
        .ok()
        .and_then(|groups| starting_deltas(&groups, scenario.budgets.energy_budget_j))
        .and_then(|d| AllocationState::from_parts(scenario, profiles, pairs, &p, &b, &d).ok())
        .filter(|s| check_feasible(s, scenario, profiles).feasible());
    let (start, restarted) = match warm {
        Some(s) => (s, false),
        None => (equal_split_state(scenario, profiles, pairs, &opts.delta)?, true),
    };
    let (_, refined, _) = continuous_blocks(scenario, profiles, &start, lambda, opts, None);
    Some((refined, restarted))
}

/// Static pruning, initial tuple and the alternating loop.
pub fn run_alternating(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    opts: &SolveOptions,
) -> Result<(AllocationState, SolveTrace)> {
    let edges = static_prune(scenario, profiles)?;
    let start = initial_feasible_tuple(scenario, profiles, &edges, &opts.delta)?;
    Ok(run_alternating_from(scenario, profiles, &edges, start, opts))
}

/// Comparison schemes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Proposed,
    EqualAllocation,
    ChannelPairing,
    Fdma,
    /// The proposed pipeline on profiles with inflated interference.
    ProfileFamily,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [
        Scheme::Proposed,
        Scheme::EqualAllocation,
        Scheme::ChannelPairing,
        Scheme::Fdma,
        Scheme::ProfileFamily,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Proposed => "proposed",
            Scheme::EqualAllocation => "equal_allocation",
            Scheme::ChannelPairing => "channel_pairing",
            Scheme::Fdma => "fdma",
            Scheme::ProfileFamily => "profile_family",
        }
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.pad(self.name())
    }
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|x| x.name() == s)
            .ok_or_else(|| crate::error::invalid("scheme", format!("unknown scheme `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeResult {
    pub scheme: Scheme,
    pub sum_rate: f64,
    pub feasible: bool,
    pub outer_iterations: usize,
    pub state: Option<AllocationState>,
    pub trace: Option<SolveTrace>,
    /// Why the draw was infeasible for this scheme.
    pub note: Option<String>,
}

impl SchemeResult {
    fn infeasible(scheme: Scheme, reason: impl ToString) -> Self {
        SchemeResult {
            scheme,
            sum_rate: 0.0,
            feasible: false,
            outer_iterations: 0,
            state: None,
            trace: None,
            note: Some(reason.to_string()),
        }
    }

    fn solved(scheme: Scheme, state: AllocationState, trace: SolveTrace) -> Self {
        SchemeResult {
            scheme,
            sum_rate: state.objective(),
            feasible: true,
            outer_iterations: trace.iterations.len(),
            state: Some(state),
            trace: Some(trace),
            note: None,
        }
    }
}

/// Pairing and ratios optimised with power and bandwidth held at an equal split.
pub fn baseline_equal_allocation(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    opts: &SolveOptions,
) -> Result<(AllocationState, SolveTrace)> {
    let fixed = SolveOptions {
        enable_power_bandwidth: false,
        ..opts.clone()
    };
    run_alternating(scenario, profiles, &fixed)
}

/// Full optimisation warm-started from the equal-allocation solution, so it
/// never does worse than that baseline.
pub fn solve_proposed(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    opts: &SolveOptions,
) -> Result<(AllocationState, SolveTrace)> {
    let edges = static_prune(scenario, profiles)?;
    let start = initial_feasible_tuple(scenario, profiles, &edges, &opts.delta)?;
    let fixed = SolveOptions {
        enable_power_bandwidth: false,
        ..opts.clone()
    };
    let (warm, warm_trace) = run_alternating_from(scenario, profiles, &edges, start, &fixed);
    let (state, mut trace) = run_alternating_from(scenario, profiles, &edges, warm, opts);
    let mut iterations = warm_trace.iterations;
    iterations.append(&mut trace.iterations);
    trace.initial = warm_trace.initial;
    trace.iterations = iterations;
    Ok((state, trace))
}

/// Strongest user with weakest, second strongest with second weakest, and so on.
pub fn channel_order_pairing(gains: &[f64]) -> Vec<Pair> {
    let mut order: Vec<usize> = (0..gains.len()).collect();
    order.sort_by(|&a, &b| gains[b].total_cmp(&gains[a]).then(a.cmp(&b)));
    let n = order.len();
    let mut pairs: Vec<Pair> = (0..n / 2).map(|k| Pair::new(order[k], order[n - 1 - k])).collect();
    pairs.sort();
    pairs
}

/// Channel-ordered pairing with ratios and radio resources optimised. When
/// some channel pair cannot host an equal share, the admissible perfect
/// matching that keeps the most channel pairs is used instead.
pub fn baseline_channel_pairing(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    opts: &SolveOptions,
) -> Result<(AllocationState, SolveTrace, bool)> {
    let edges = static_prune(scenario, profiles)?;
    let wanted = channel_order_pairing(&scenario.channel_gain_sq);
    let mut perturbed = false;
    let start = match equal_split_state(scenario, profiles, &wanted, &opts.delta) {
        Some(s) if wanted.iter().all(|&p| edges.contains(p)) => s,
        _ => {
            perturbed = true;
            let mut w = WeightMatrix::empty(scenario.num_users);
            for (pair, ok) in equal_split_edges(scenario, profiles, &edges, &opts.delta) {
                if ok {
                    w.set(pair.i, pair.j, if wanted.contains(&pair) { 1.0 } else { 0.0 });
                }
            }
            let m = max_weight_perfect_matching(&w)?
                .ok_or_else(|| Error::InfeasibleDraw("no pairing can host an equal share".into()))?;
            equal_split_state(scenario, profiles, &m.pairs, &opts.delta)
                .ok_or_else(|| Error::InfeasibleDraw("equal split violates the energy budget".into()))?
        }
    };
    let fixed = SolveOptions {
        enable_pairing: false,
        ..opts.clone()
    };
    let (state, trace) = run_alternating_from(scenario, profiles, &edges, start, &fixed);
    Ok((state, trace, perturbed))
}

/// Orthogonal sub-bands of `B/N` with power `P/N` per user and no pairing.
pub fn baseline_fdma(scenario: &Scenario) -> f64 {
    let b = &scenario.budgets;
    let n = scenario.num_users as f64;
    let (p, bw) = (b.total_power_watts / n, b.total_bandwidth_hz / n);
    scenario
        .channel_gain_sq
        .iter()
        .map(|&g| bw * (p * g / (bw * b.noise_psd_w_per_hz)).ln_1p() / std::f64::consts::LN_2)
        .sum()
}

/// Proposed pipeline on a profile set whose interference bounds are scaled.
pub fn baseline_profile_family(
    scenario: &Scenario,
    profiles: &PairProfileSet,
    multiplier: f64,
    opts: &SolveOptions,
) -> Result<(AllocationState, SolveTrace)> {
    solve_proposed(scenario, &profiles.with_family_multiplier(multiplier), opts)
}

/// Runs one scheme on one draw; infeasible draws become a zero-rate result
/// with a note.
pub fn run_scheme(
    scheme: Scheme,
    scenario: &Scenario,
    profiles: &PairProfileSet,
    family_multiplier: f64,
    opts: &SolveOptions,
) -> SchemeResult {
    let solved = match scheme {
        Scheme::Fdma => {
            return SchemeResult {
                scheme,
                sum_rate: baseline_fdma(scenario),
                feasible: true,
                outer_iterations: 0,
                state: None,
                trace: None,
                note: None,
            }
        }
        Scheme::Proposed => solve_proposed(scenario, profiles, opts),
        Scheme::EqualAllocation => baseline_equal_allocation(scenario, profiles, opts),
        Scheme::ChannelPairing => baseline_channel_pairing(scenario, profiles, opts).map(|(s, t, _)| (s, t)),
        Scheme::ProfileFamily => baseline_profile_family(scenario, profiles, family_multiplier, opts),
    };
    match solved {
        Ok((state, trace)) => SchemeResult::solved(scheme, state, trace),
        Err(e) => SchemeResult::infeasible(scheme, e),
    }
}
