//! Pairing block and full-pipeline properties on random draws.

use proptest::prelude::*;
use semapair_core::compression::DeltaOptions;
use semapair_core::feasibility::static_prune;
use semapair_core::link::check_feasible;
use semapair_core::orchestrator::{baseline_equal_allocation, initial_feasible_tuple, run_scheme};
use semapair_core::pair::is_perfect_matching;
use semapair_core::pairing::{
    dual_update, onehot_select, solve_pairing, DualSteps, PairingDuals, PairingInstance, PairingOptions,
    ReducedCostTable,
};
use semapair_core::{synth_profiles, solve_proposed, PairProfileSet, ProfileGenParams, Scenario, ScenarioParams, Scheme, SolveOptions, SystemBudgets};

fn draw(n: usize, seed: u64) -> (Scenario, PairProfileSet) {
    let params = ScenarioParams {
        num_users: n,
        ..ScenarioParams::default()
    };
    let sc = Scenario::generate(&params, SystemBudgets::defaults(n), seed).unwrap();
    let prof = synth_profiles(&sc, &ProfileGenParams::default(), seed).unwrap();
    (sc, prof)
}

fn instance(n: usize, seed: u64) -> Option<(PairingInstance, Vec<semapair_core::Pair>)> {
    let (sc, prof) = draw(n, seed);
    let edges = static_prune(&sc, &prof).ok()?;
    let state = initial_feasible_tuple(&sc, &prof, &edges, &DeltaOptions::default()).ok()?;
    Some((PairingInstance::build(&sc, &prof, &edges, state.groups()), state.pairs()))
}

fn duals(n: usize) -> impl Strategy<Value = PairingDuals> {
    (
        prop::collection::vec(0.0f64..1e7, n),
        0.0f64..1e8,
        prop::collection::vec(0.0f64..1e9, n),
    )
        .prop_map(|(nu, theta, lambda_d)| PairingDuals { nu, theta, lambda_d })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn selection_is_the_best_reduced_cost(seed in any::<u64>(), d in duals(8)) {
        let Some((inst, _)) = instance(8, seed) else { return Ok(()) };
        let table = ReducedCostTable::new(&inst, &d);
        for k in 0..inst.num_groups() {
            let best = (0..inst.edges.len())
                .filter(|&e| inst.data[k][e].is_some())
                .map(|e| table.reduced[k][e])
                .fold(f64::NEG_INFINITY, f64::max);
            match onehot_select(&inst, &table, k) {
                Some(pair) => {
                    let e = inst.edges.iter().position(|&p| p == pair).unwrap();
                    prop_assert_eq!(table.reduced[k][e], best);
                }
                None => prop_assert_eq!(best, f64::NEG_INFINITY),
            }
        }
    }

    #[test]
    fn multipliers_stay_nonnegative(seed in any::<u64>(), d in duals(8), mu in 0.0f64..1e8, be in 0.0f64..1e9, bd in 0.0f64..1e12) {
        let Some((inst, _)) = instance(8, seed) else { return Ok(()) };
        let table = ReducedCostTable::new(&inst, &d);
        let sel: Vec<_> = (0..inst.num_groups()).map(|k| onehot_select(&inst, &table, k)).collect();
        let next = dual_update(&d, &sel, &inst, DualSteps { mu, beta_e: be, beta_d: bd });
        prop_assert!(next.is_nonnegative());
    }

    #[test]
    fn pairing_block_returns_one_pair_per_group(seed in any::<u64>(), iters in 0usize..60) {
        let Some((inst, incoming)) = instance(10, seed) else { return Ok(()) };
        let opts = PairingOptions { max_dual_iters: iters, ..PairingOptions::default() };
        let out = solve_pairing(&inst, &PairingDuals::zeros(10), &incoming, &opts).unwrap();
        prop_assert!(out.duals.is_nonnegative());
        prop_assert!(is_perfect_matching(&out.pairs, 10));
        prop_assert_eq!(out.pairs.len(), inst.num_groups());
        prop_assert!(out.pairs.iter().all(|p| inst.edges.contains(p)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn accepted_objective_never_drops(seed in any::<u64>()) {
        let (sc, prof) = draw(8, seed);
        let Ok((state, trace)) = solve_proposed(&sc, &prof, &SolveOptions::default()) else { return Ok(()) };
        prop_assert!(trace.is_monotone(1e-9));
        let mut prev = trace.initial;
        for it in &trace.iterations {
            let tol = 1e-9 * prev.abs().max(1.0);
            prop_assert!(it.after_delta >= prev - tol);
            prop_assert!(it.after_power_bandwidth >= it.after_delta - tol);
            prop_assert!(it.accepted >= it.after_power_bandwidth - tol);
            prev = it.accepted;
        }
        prop_assert!(check_feasible(&state, &sc, &prof).feasible());
    }

    #[test]
    fn proposed_dominates_equal_split(seed in any::<u64>()) {
        let (sc, prof) = draw(8, seed);
        let opts = SolveOptions::default();
        let Ok((eq, _)) = baseline_equal_allocation(&sc, &prof, &opts) else { return Ok(()) };
        let (best, _) = solve_proposed(&sc, &prof, &opts).unwrap();
        prop_assert!(best.objective() >= eq.objective() * (1.0 - 1e-9));
    }
}

#[test]
fn solving_twice_gives_the_same_answer() {
    let (sc, prof) = draw(10, 42);
    let opts = SolveOptions::default();
    for scheme in Scheme::ALL {
        let a = run_scheme(scheme, &sc, &prof, 1.5, &opts);
        let b = run_scheme(scheme, &sc, &prof, 1.5, &opts);
        assert_eq!(a.sum_rate.to_bits(), b.sum_rate.to_bits(), "{scheme}");
        assert_eq!(a.state, b.state);
    }
}
