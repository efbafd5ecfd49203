use serde::{Deserialize, Serialize};
use std::fmt;

/// An unordered user pair stored with `i < j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Pair {
    pub i: usize,
    pub j: usize,
}

impl Pair {
    /// Builds a pair, swapping the members if needed. Panics when `a == b`.
    pub fn new(a: usize, b: usize) -> Self {
        assert!(a != b, "a pair needs two distinct users");
        if a < b {
            Pair { i: a, j: b }
        } else {
            Pair { i: b, j: a }
        }
    }

    pub fn contains(&self, u: usize) -> bool {
        self.i == u || self.j == u
    }

    pub fn members(&self) -> [usize; 2] {
        [self.i, self.j]
    }

    /// Position of the pair in the lexicographic enumeration of all
    /// `n * (n - 1) / 2` pairs of `n` users.
    pub fn index(&self, n: usize) -> usize {
        debug_assert!(self.j < n);
        self.i * (2 * n - self.i - 1) / 2 + (self.j - self.i - 1)
    }

    /// All candidate pairs of `n` users in lexicographic order.
    pub fn all(n: usize) -> impl Iterator<Item = Pair> {
        (0..n).flat_map(move |i| ((i + 1)..n).map(move |j| Pair { i, j }))
    }
}

impl fmt::Display for Pair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

/// Checks that `pairs` is a perfect matching of `0..n`.
pub fn is_perfect_matching(pairs: &[Pair], n: usize) -> bool {
    if pairs.len() * 2 != n {
        return false;
    }
    let mut seen = vec![false; n];
    for p in pairs {
        for u in p.members() {
            if u >= n || seen[u] {
                return false;
            }
            seen[u] = true;
        }
    }
    seen.into_iter().all(|s| s)
}
