//! Static and per-group dynamic feasible edge sets.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::link::GroupContext;
use crate::pair::Pair;
use crate::pairing::{max_weight_perfect_matching, WeightMatrix};
use crate::profiles::{pair_delta_lower_bound, PairProfileSet};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeInfo {
    pub pair: Pair,
    /// Pair-level distortion lower bound on the compression ratio.
    pub delta_lower: f64,
    /// Residual transmission-time budgets of both members.
    pub residual: [f64; 2],
}

/// Pairs that can ever be feasible, independent of the radio resources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleEdgeSet {
    num_users: usize,
    edges: Vec<EdgeInfo>,
    slot: Vec<Option<usize>>,
}

impl FeasibleEdgeSet {
    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn edges(&self) -> &[EdgeInfo] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn get(&self, pair: Pair) -> Option<&EdgeInfo> {
        if pair.j >= self.num_users {
            return None;
        }
        self.slot[pair.index(self.num_users)].map(|k| &self.edges[k])
    }

    pub fn contains(&self, pair: Pair) -> bool {
        self.get(pair).is_some()
    }

    /// Unit-weight adjacency for matching queries.
    pub fn unit_weights(&self) -> WeightMatrix {
        let mut w = WeightMatrix::empty(self.num_users);
        for e in &self.edges {
            w.set(e.pair.i, e.pair.j, 1.0);
        }
        w
    }

    /// Whether some perfect matching uses only edges of this set.
    pub fn admits_perfect_matching(&self) -> Result<bool> {
        Ok(max_weight_perfect_matching(&self.unit_weights())?.is_some())
    }
}

/// Edge set without the matching-existence check.
pub fn prune_edges(scenario: &Scenario, profiles: &PairProfileSet) -> FeasibleEdgeSet {
    let n = scenario.num_users;
    let b = &scenario.budgets;
    let mut edges = Vec::new();
    let mut slot = vec![None; n * n.saturating_sub(1) / 2];
    for pair in Pair::all(n) {
        let residual = [
            scenario.residual_time_budget(pair.i),
            scenario.residual_time_budget(pair.j),
        ];
        if !(residual[0] > 0.0 && residual[1] > 0.0) {
            continue;
        }
        let Some(delta_lower) = pair_delta_lower_bound(profiles.get(pair), &b.distortion_max, b.delta_min)
        else {
            continue;
        };
        slot[pair.index(n)] = Some(edges.len());
        edges.push(EdgeInfo {
            pair,
            delta_lower,
            residual,
        });
    }
    FeasibleEdgeSet {
        num_users: n,
        edges,
        slot,
    }
}

/// Offline pruning. Fails with [`Error::NoFeasibleMatching`] when the
/// surviving edges cannot cover every user.
pub fn static_prune(scenario: &Scenario, profiles: &PairProfileSet) -> Result<FeasibleEdgeSet> {
    let set = prune_edges(scenario, profiles);
    if !set.admits_perfect_matching()? {
        return Err(Error::NoFeasibleMatching);
    }
    Ok(set)
}

/// Whether `pair` may host group resources `(p, b, delta)`: the ratio meets
/// the distortion bound and both rates meet their latency floors.
pub fn edge_feasible_at(
    edge: &EdgeInfo,
    ctx: &GroupContext,
    power: f64,
    bandwidth: f64,
    delta: f64,
) -> bool {
    if delta < edge.delta_lower || delta > 1.0 {
        return false;
    }
    let rates = ctx.rates(power, bandwidth, delta);
    (0..2).all(|u| rates[u] >= ctx.bits[u] * delta / edge.residual[u])
}

/// Edges of `set` that are feasible under one group's resources.
pub fn dynamic_edges(
    set: &FeasibleEdgeSet,
    power: f64,
    bandwidth: f64,
    delta: f64,
    scenario: &Scenario,
    profiles: &PairProfileSet,
) -> Vec<Pair> {
    set.edges()
        .iter()
        .filter(|e| {
            let ctx = GroupContext::new(scenario, profiles, e.pair);
            edge_feasible_at(e, &ctx, power, bandwidth, delta)
        })
        .map(|e| e.pair)
        .collect()
}
