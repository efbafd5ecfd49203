//! Fixed draws shared by the benchmarks.

use semapair_core::{synth_profiles, PairProfileSet, ProfileGenParams, Scenario, ScenarioParams, SystemBudgets};

/// One deterministic draw with `n` users.
pub fn fixture(n: usize, seed: u64) -> (Scenario, PairProfileSet) {
    let params = ScenarioParams {
        num_users: n,
        ..ScenarioParams::default()
    };
    let scenario = Scenario::generate(&params, SystemBudgets::defaults(n), seed).expect("scenario");
    let profiles = synth_profiles(&scenario, &ProfileGenParams::default(), seed).expect("profiles");
    (scenario, profiles)
}
