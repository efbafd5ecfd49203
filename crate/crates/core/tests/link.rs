mod support;

use proptest::prelude::*;
use semapair_core::feasibility::{dynamic_edges, prune_edges};
use semapair_core::link::{computation_energy, objective, rate_from_sinr, sinr, GroupAllocation};
use semapair_core::pair::Pair;
use semapair_core::{synth_profiles, AllocationState, GroupContext, ProfileGenParams, Scenario, ScenarioParams, SystemBudgets};

fn draw(n: usize, seed: u64) -> (Scenario, semapair_core::PairProfileSet) {
    let params = ScenarioParams {
        num_users: n,
        ..ScenarioParams::default()
    };
    let sc = Scenario::generate(&params, SystemBudgets::defaults(n), seed).unwrap();
    let prof = synth_profiles(&sc, &ProfileGenParams::default(), seed).unwrap();
    (sc, prof)
}

proptest! {
    #[test]
    fn sinr_stays_below_the_interference_ceiling(
        p in 1e-6f64..10.0, b in 1e3f64..1e8, g in 1e-16f64..1e-6, rho in 1e-3f64..1.0,
    ) {
        let s = sinr(p, b, g, rho, 4e-21).unwrap();
        prop_assert!(s >= 0.0 && s < 1.0 / rho);
    }

    #[test]
    fn rate_grows_with_power(seed in any::<u64>(), p in 1e-4f64..0.5, dp in 1e-4f64..0.5, b in 1e5f64..5e6, delta in 0.07f64..1.0) {
        let (sc, prof) = draw(4, seed);
        let ctx = GroupContext::new(&sc, &prof, Pair::new(0, 1));
        // at a fixed interference factor
        let rho = ctx.rho(p, delta);
        let lo = ctx.rates_with_rho(p, b, rho);
        let hi = ctx.rates_with_rho(p + dp, b, rho);
        prop_assert!(hi[0] > lo[0] && hi[1] > lo[1]);
    }

    #[test]
    fn bandwidth_term_is_increasing(c in 1e-3f64..1e9, b in 1.0f64..1e8, db in 1e-3f64..1.0) {
        let b2 = b * (1.0 + db);
        prop_assert!(rate_from_sinr(b2, c / b2) > rate_from_sinr(b, c / b));
    }

    #[test]
    fn energy_splits_into_nonnegative_parts(seed in any::<u64>(), p in 1e-3f64..0.5, b in 1e5f64..5e6, delta in 0.07f64..1.0) {
        let (sc, prof) = draw(4, seed);
        let ctx = GroupContext::new(&sc, &prof, Pair::new(1, 3));
        let m = ctx.metrics(p, b, delta);
        let t = m.tx_delay[0].unwrap().max(m.tx_delay[1].unwrap());
        let comm = p * t;
        let comp = computation_energy(delta, ctx.zeta);
        prop_assert!(comm >= 0.0 && comp >= 0.0);
        prop_assert!(support::rel_err(m.energy.unwrap(), comm + comp) < 1e-12);
        prop_assert!(support::rel_err(m.energy.unwrap(), support::energy(&ctx, p, b, delta)) < 1e-12);
    }

    #[test]
    fn cached_objective_matches_recompute(seed in any::<u64>(), edits in prop::collection::vec((0usize..3, 0.01f64..0.3, 1e5f64..4e6, 0.07f64..1.0), 1..20)) {
        let (sc, prof) = draw(6, seed);
        let pairs = [Pair::new(0, 1), Pair::new(2, 3), Pair::new(4, 5)];
        let mut state = AllocationState::from_parts(&sc, &prof, &pairs, &[0.3; 3], &[3e6; 3], &[0.5; 3]).unwrap();
        for (k, p, b, d) in edits {
            let g = GroupAllocation { pair: pairs[k], power: p, bandwidth: b, delta: d };
            state.set_group(k, g, &sc, &prof).unwrap();
        }
        prop_assert!(support::rel_err(state.objective(), objective(&state, &sc, &prof)) < 1e-12);
    }

    #[test]
    fn more_power_or_bandwidth_keeps_every_edge(
        seed in any::<u64>(), p in 1e-3f64..0.3, b in 1e5f64..3e6, delta in 0.07f64..1.0,
        sp in 1.0f64..3.0, sb in 1.0f64..3.0,
    ) {
        let (sc, prof) = draw(8, seed);
        let set = prune_edges(&sc, &prof);
        let small = dynamic_edges(&set, p, b, delta, &sc, &prof);
        let large = dynamic_edges(&set, p * sp, b * sb, delta, &sc, &prof);
        for e in small {
            prop_assert!(large.contains(&e), "{} dropped", e);
        }
    }
}

#[test]
fn kept_edges_have_room_to_meet_both_budgets() {
    for seed in 0..20 {
        let (sc, prof) = draw(10, seed);
        for e in prune_edges(&sc, &prof).edges() {
            assert!(e.delta_lower <= 1.0);
            assert!(e.residual.iter().all(|&t| t > 0.0));
        }
    }
}

#[test]
fn invalid_group_inputs_are_rejected() {
    let (sc, prof) = draw(4, 3);
    let pairs = [Pair::new(0, 1), Pair::new(2, 3)];
    assert!(AllocationState::from_parts(&sc, &prof, &pairs, &[0.1; 2], &[0.0, 1e6], &[0.5; 2]).is_err());
    assert!(AllocationState::from_parts(&sc, &prof, &pairs, &[0.1; 2], &[1e6; 2], &[0.5, 1.5]).is_err());
    assert!(AllocationState::from_parts(&sc, &prof, &pairs, &[0.1; 2], &[1e6; 2], &[0.5]).is_err());
}
