//! Pair-level interference surfaces, distortion envelopes and the synthetic
//! profiler that produces them.

mod envelope;
mod fit;
mod io;
mod rho;
mod synth;

pub use envelope::DistortionEnvelope;
pub use fit::{fit_rho, RhoFit, RhoSampleGrid};
pub use io::{load_profiles, save_profiles};
pub use rho::RhoSurface;
pub use synth::{power_grid, synth_profiles, ProfileGenParams, SimilarityMode};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pair::Pair;

/// Everything profiled offline for one candidate pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProfile {
    pub pair: Pair,
    pub similarity: f64,
    pub surface: RhoSurface,
    /// Envelope of the lower-indexed user.
    pub envelope_i: DistortionEnvelope,
    /// Envelope of the higher-indexed user.
    pub envelope_j: DistortionEnvelope,
}

impl PairProfile {
    pub fn envelope_of(&self, user: usize) -> &DistortionEnvelope {
        if user == self.pair.i {
            &self.envelope_i
        } else {
            assert_eq!(user, self.pair.j, "user {user} is not in {}", self.pair);
            &self.envelope_j
        }
    }
}

/// One profile per candidate pair, stored in lexicographic pair order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairProfileSet {
    num_users: usize,
    profiles: Vec<PairProfile>,
}

impl PairProfileSet {
    /// Checks that `profiles` holds exactly one entry per pair and sorts it.
    pub fn new(num_users: usize, mut profiles: Vec<PairProfile>) -> Result<Self> {
        let expected = num_users * num_users.saturating_sub(1) / 2;
        profiles.sort_by_key(|p| p.pair);
        let complete = profiles.len() == expected
            && profiles.iter().zip(Pair::all(num_users)).all(|(p, q)| p.pair == q);
        if !complete {
            return Err(Error::ProfileCount {
                found: profiles.len(),
                expected,
            });
        }
        for p in &profiles {
            let ok = p.surface.is_valid()
                && (0.0..=1.0).contains(&p.similarity)
                && p.envelope_i.is_valid()
                && p.envelope_j.is_valid();
            if !ok {
                return Err(crate::error::invalid(
                    "profiles",
                    format!("invalid surface or similarity for {}", p.pair),
                ));
            }
        }
        Ok(PairProfileSet {
            num_users,
            profiles,
        })
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn get(&self, pair: Pair) -> &PairProfile {
        &self.profiles[pair.index(self.num_users)]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PairProfile> {
        self.profiles.iter()
    }

    /// Copy with every surface's saturation levels scaled by `m`.
    pub fn with_family_multiplier(&self, m: f64) -> Self {
        let profiles = self
            .profiles
            .iter()
            .map(|p| PairProfile {
                surface: p.surface.inflated(m),
                ..p.clone()
            })
            .collect();
        PairProfileSet {
            num_users: self.num_users,
            profiles,
        }
    }
}

/// Pair-level distortion lower bound: the largest per-user minimum ratio,
/// floored at `delta_min`. `None` when either user cannot meet its threshold.
pub fn pair_delta_lower_bound(
    profile: &PairProfile,
    distortion_max: &[f64],
    delta_min: f64,
) -> Option<f64> {
    let di = profile
        .envelope_i
        .min_delta_for_distortion(distortion_max[profile.pair.i], delta_min)?;
    let dj = profile
        .envelope_j
        .min_delta_for_distortion(distortion_max[profile.pair.j], delta_min)?;
    let d = delta_min.max(di).max(dj);
    (d <= 1.0).then_some(d)
}
