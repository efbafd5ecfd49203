//! Properties of the ratio block and the power/bandwidth block on random draws.

use proptest::prelude::*;
use semapair_core::compression::{delta_groups, optimize_delta, DeltaOptions, DeltaStop};
use semapair_core::feasibility::static_prune;
use semapair_core::link::check_feasible;
use semapair_core::orchestrator::initial_feasible_tuple;
use semapair_core::power_bandwidth::{continuous_feasible, optimize_power_bandwidth, PbOptions};
use semapair_core::{
    synth_profiles, AllocationState, GroupContext, PairProfileSet, ProfileGenParams, Scenario, ScenarioParams,
    SystemBudgets,
};

fn start(n: usize, seed: u64, energy_scale: f64) -> Option<(Scenario, PairProfileSet, AllocationState)> {
    let params = ScenarioParams {
        num_users: n,
        ..ScenarioParams::default()
    };
    let mut budgets = SystemBudgets::defaults(n);
    budgets.energy_budget_j *= energy_scale;
    let sc = Scenario::generate(&params, budgets, seed).ok()?;
    let prof = synth_profiles(&sc, &ProfileGenParams::default(), seed).ok()?;
    let edges = static_prune(&sc, &prof).ok()?;
    let state = initial_feasible_tuple(&sc, &prof, &edges, &DeltaOptions::default()).ok()?;
    Some((sc, prof, state))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ratio_block_respects_intervals_and_budget(seed in any::<u64>(), energy_scale in 0.05f64..2.0) {
        let Some((sc, prof, state)) = start(8, seed, 1.0) else { return Ok(()) };
        let opts = DeltaOptions::default();
        let groups = delta_groups(&sc, &prof, &state.pairs(), &state.powers(), &state.bandwidths(), &opts).unwrap();
        let budget = sc.budgets.energy_budget_j * energy_scale;
        let Ok(out) = optimize_delta(&groups, budget, 0.0, &opts) else { return Ok(()) };
        prop_assert!(out.lambda_history.iter().all(|&l| l >= 0.0));
        for (g, &d) in groups.iter().zip(&out.deltas) {
            prop_assert!(g.feasible.contains(d), "{} outside {:?}", d, g.feasible.intervals);
        }
        prop_assert!(out.total_energy <= budget * (1.0 + 1e-9));
        if out.stop == DeltaStop::EnergyGap {
            prop_assert!(out.lambda > 0.0);
            prop_assert!((out.total_energy - budget).abs() < opts.energy_gap_rel * budget);
        }
        if out.stop == DeltaStop::Slack {
            prop_assert_eq!(out.lambda, 0.0);
        }
    }

    #[test]
    fn power_bandwidth_block_only_accepts_feasible_gains(seed in any::<u64>()) {
        let Some((sc, prof, state)) = start(8, seed, 1.0) else { return Ok(()) };
        let opts = PbOptions::default();
        let out = optimize_power_bandwidth(
            &sc, &prof, &state.pairs(), &state.deltas(), &state.powers(), &state.bandwidths(), &opts,
        ).expect("feasible start");
        prop_assert!(out.objective >= out.initial_objective);
        let mut last = out.initial_objective;
        for step in &out.steps {
            prop_assert!(step.max_radius > 0.0);
            prop_assert!(step.objective >= last);
            last = step.objective;
        }
        let ctxs: Vec<GroupContext> = state.pairs().iter().map(|&p| GroupContext::new(&sc, &prof, p)).collect();
        prop_assert!(continuous_feasible(&ctxs, &state.deltas(), &out.powers, &out.bandwidths, &sc));
        let next = AllocationState::from_parts(&sc, &prof, &state.pairs(), &out.powers, &out.bandwidths, &state.deltas()).unwrap();
        prop_assert!(check_feasible(&next, &sc, &prof).feasible());
    }
}

#[test]
fn infeasible_start_is_refused() {
    let (sc, prof, state) = (0..50).find_map(|s| start(6, s, 1.0)).unwrap();
    let total = sc.budgets.total_power_watts;
    let too_much = vec![total; state.num_groups()];
    let out = optimize_power_bandwidth(
        &sc,
        &prof,
        &state.pairs(),
        &state.deltas(),
        &too_much,
        &state.bandwidths(),
        &PbOptions::default(),
    );
    assert!(out.is_none());
}
