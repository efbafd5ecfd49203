//! Exact combinatorial kernels: maximum-weight perfect matching on a general
//! graph, square assignment, and the joint pair-and-group repair.
//!
//! Missing edges carry `f64::NEG_INFINITY`.

use crate::error::{Error, Result};
use crate::pair::Pair;

/// Largest node count accepted by the subset dynamic programmes.
pub const MAX_EXACT_NODES: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    pub pairs: Vec<Pair>,
    pub weight: f64,
}

/// Dense symmetric weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    n: usize,
    w: Vec<f64>,
}

impl WeightMatrix {
    /// All entries missing.
    pub fn empty(n: usize) -> Self {
        WeightMatrix {
            n,
            w: vec![f64::NEG_INFINITY; n * n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Self {
        let mut m = Self::empty(n);
        for &(a, b, w) in edges {
            m.set(a, b, w);
        }
        m
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn set(&mut self, a: usize, b: usize, w: f64) {
        self.w[a * self.n + b] = w;
        self.w[b * self.n + a] = w;
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.w[a * self.n + b]
    }
}

/// Maximum-weight perfect matching by memoised search over the set of
/// still-unmatched nodes, always matching the lowest one first.
///
/// Returns `Ok(None)` when no perfect matching exists. Ties prefer the
/// lexicographically smaller partner.
pub fn max_weight_perfect_matching(weights: &WeightMatrix) -> Result<Option<Matching>> {
    let n = weights.len();
    if n % 2 != 0 {
        return Err(Error::OddNodeCount(n));
    }
    if n > MAX_EXACT_NODES {
        return Err(Error::MatchingTooLarge(n));
    }
    if n == 0 {
        return Ok(Some(Matching {
            pairs: Vec::new(),
            weight: 0.0,
        }));
    }
    let full = (1usize << n) - 1;
    let mut memo = vec![f64::NAN; 1 << n];
    memo[0] = 0.0;
    let best = solve(weights, full, &mut memo);
    if best == f64::NEG_INFINITY {
        return Ok(None);
    }
    let mut pairs = Vec::with_capacity(n / 2);
    let mut mask = full;
    while mask != 0 {
        let a = mask.trailing_zeros() as usize;
        let rest = mask & !(1 << a);
        let target = memo[mask];
        let mut chosen = None;
        let mut bits = rest;
        while bits != 0 {
            let b = bits.trailing_zeros() as usize;
            bits &= bits - 1;
            let w = weights.get(a, b);
            if w == f64::NEG_INFINITY {
                continue;
            }
            let sub = memo[rest & !(1 << b)];
            if w + sub == target {
                chosen = Some(b);
                break;
            }
        }
        let b = chosen.expect("memoised optimum is reachable");
        pairs.push(Pair::new(a, b));
        mask = rest & !(1 << b);
    }
    Ok(Some(Matching {
        pairs,
        weight: best,
    }))
}

fn solve(weights: &WeightMatrix, mask: usize, memo: &mut [f64]) -> f64 {
    if !memo[mask].is_nan() {
        return memo[mask];
    }
    let a = mask.trailing_zeros() as usize;
    let rest = mask & !(1 << a);
    let mut best = f64::NEG_INFINITY;
    let mut bits = rest;
    while bits != 0 {
        let b = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let w = weights.get(a, b);
        if w == f64::NEG_INFINITY {
            continue;
        }
        let v = w + solve(weights, rest & !(1 << b), memo);
        if v > best {
            best = v;
        }
    }
    memo[mask] = best;
    best
}

/// Square maximum-value assignment (rows to columns) by the shortest
/// augmenting path Hungarian method. `Ok(None)` if every complete assignment
/// uses a missing entry.
pub fn max_value_assignment(values: &[Vec<f64>]) -> Result<Option<(Vec<usize>, f64)>> {
    let n = values.len();
    if let Some(row) = values.iter().find(|r| r.len() != n) {
        return Err(Error::AssignmentSizeMismatch {
            pairs: n,
            groups: row.len(),
        });
    }
    if n == 0 {
        return Ok(Some((Vec::new(), 0.0)));
    }
    let finite_span = values
        .iter()
        .flatten()
        .filter(|v| v.is_finite())
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    // any assignment using a forbidden cell costs more than every finite one
    let forbidden = (finite_span + 1.0) * (2 * n + 1) as f64;
    let cost = |r: usize, c: usize| {
        let v = values[r][c];
        if v.is_finite() {
            -v
        } else {
            forbidden
        }
    };

    // 1-based potentials formulation
    let inf = f64::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut col_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        col_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = col_of[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[col_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if col_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            col_of[j0] = col_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0usize; n];
    for j in 1..=n {
        assign[col_of[j] - 1] = j - 1;
    }
    if assign.iter().enumerate().any(|(r, &c)| !values[r][c].is_finite()) {
        return Ok(None);
    }
    let total = assign.iter().enumerate().map(|(r, &c)| values[r][c]).sum();
    Ok(Some((assign, total)))
}

/// Joint choice of one pair per group over `users`, each user used once,
/// maximising `value(pair, group)`.
///
/// Groups are filled in the given order; the state is the set of users still
/// free, so the search is exact. Returns the pair hosted by each group.
pub fn repair_assignment<F>(users: &[usize], groups: usize, value: F) -> Result<Option<(Vec<Pair>, f64)>>
where
    F: Fn(Pair, usize) -> f64,
{
    let m = users.len();
    if m != 2 * groups {
        return Err(Error::AssignmentSizeMismatch {
            pairs: m / 2,
            groups,
        });
    }
    if m > MAX_EXACT_NODES {
        return Err(Error::MatchingTooLarge(m));
    }
    if m == 0 {
        return Ok(Some((Vec::new(), 0.0)));
    }
    let mut sorted = users.to_vec();
    sorted.sort_unstable();
    let full = (1usize << m) - 1;
    let mut memo = vec![f64::NAN; 1 << m];
    memo[0] = 0.0;

    fn go<F: Fn(Pair, usize) -> f64>(
        users: &[usize],
        mask: usize,
        groups: usize,
        memo: &mut [f64],
        value: &F,
    ) -> f64 {
        if !memo[mask].is_nan() {
            return memo[mask];
        }
        let m = users.len();
        let k = groups - mask.count_ones() as usize / 2;
        let mut best = f64::NEG_INFINITY;
        for a in 0..m {
            if mask & (1 << a) == 0 {
                continue;
            }
            for b in (a + 1)..m {
                if mask & (1 << b) == 0 {
                    continue;
                }
                let w = value(Pair::new(users[a], users[b]), k);
                if w == f64::NEG_INFINITY {
                    continue;
                }
                let v = w + go(users, mask & !(1 << a) & !(1 << b), groups, memo, value);
                if v > best {
                    best = v;
                }
            }
        }
        memo[mask] = best;
        best
    }

    let best = go(&sorted, full, groups, &mut memo, &value);
    if best == f64::NEG_INFINITY {
        return Ok(None);
    }
    let mut out = Vec::with_capacity(groups);
    let mut mask = full;
    for k in 0..groups {
        let target = memo[mask];
        let mut found = None;
        'outer: for a in 0..m {
            if mask & (1 << a) == 0 {
                continue;
            }
            for b in (a + 1)..m {
                if mask & (1 << b) == 0 {
                    continue;
                }
                let pair = Pair::new(sorted[a], sorted[b]);
                let w = value(pair, k);
                if w == f64::NEG_INFINITY {
                    continue;
                }
                let rest = mask & !(1 << a) & !(1 << b);
                if w + memo[rest] == target {
                    found = Some((pair, rest));
                    break 'outer;
                }
            }
        }
        let (pair, rest) = found.expect("memoised optimum is reachable");
        out.push(pair);
        mask = rest;
    }
    Ok(Some((out, best)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_node_example() {
        // 1-based labels from the hand enumeration, shifted to 0-based
        let w = WeightMatrix::from_edges(
            4,
            &[(0, 1, 3.0), (2, 3, 4.0), (0, 2, 2.0), (1, 3, 2.0), (0, 3, 5.0), (1, 2, 1.0)],
        );
        let m = max_weight_perfect_matching(&w).unwrap().unwrap();
        assert_eq!(m.pairs, vec![Pair::new(0, 1), Pair::new(2, 3)]);
        assert_eq!(m.weight, 7.0);
    }

    #[test]
    fn forced_and_impossible() {
        let w = WeightMatrix::from_edges(2, &[(0, 1, -3.0)]);
        assert_eq!(max_weight_perfect_matching(&w).unwrap().unwrap().pairs, vec![Pair::new(0, 1)]);
        let w = WeightMatrix::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)]);
        assert_eq!(max_weight_perfect_matching(&w).unwrap(), None);
        assert_eq!(
            max_weight_perfect_matching(&WeightMatrix::empty(3)),
            Err(Error::OddNodeCount(3))
        );
    }

    #[test]
    fn assignment_examples() {
        let (a, v) = max_value_assignment(&[vec![5.0]]).unwrap().unwrap();
        assert_eq!((a, v), (vec![0], 5.0));
        let (a, v) = max_value_assignment(&[vec![5.0, 1.0], vec![2.0, 4.0]]).unwrap().unwrap();
        assert_eq!((a, v), (vec![0, 1], 9.0));
        let ninf = f64::NEG_INFINITY;
        assert_eq!(
            max_value_assignment(&[vec![ninf, ninf], vec![2.0, 4.0]]).unwrap(),
            None
        );
        let (a, _) = max_value_assignment(&[vec![ninf, 1.0], vec![2.0, ninf]]).unwrap().unwrap();
        assert_eq!(a, vec![1, 0]);
        assert!(max_value_assignment(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn repair_respects_group_feasibility() {
        // unconstrained best is {(0,1),(2,3)}, but only group 0 can host
        // either of them; the weaker {(0,2),(1,3)} fits
        let value = |p: Pair, k: usize| match (p.i, p.j, k) {
            (0, 1, 0) | (2, 3, 0) => 10.0,
            (0, 1, _) | (2, 3, _) => f64::NEG_INFINITY,
            (0, 2, _) | (1, 3, _) => 1.0,
            _ => f64::NEG_INFINITY,
        };
        let (pairs, v) = repair_assignment(&[0, 1, 2, 3], 2, value).unwrap().unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(pairs.len(), 2);
        assert!(crate::pair::is_perfect_matching(&pairs, 4));
        assert_eq!(repair_assignment(&[], 0, value).unwrap(), Some((vec![], 0.0)));
        assert_eq!(
            repair_assignment(&[4, 9], 1, |_, _| 2.5).unwrap(),
            Some((vec![Pair::new(4, 9)], 2.5))
        );
    }
}
