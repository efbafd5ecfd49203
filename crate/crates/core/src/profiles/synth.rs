//! Synthetic offline profiler.
//!
//! Stands in for profiling a trained transceiver: each candidate pair gets a
//! content-similarity score, an interference surface whose saturation levels
//! degrade with dissimilarity, and per-user distortion curves that are turned
//! into upper envelopes. With `refit` enabled the surface is sampled on the
//! profiling grid (optionally with noise) and recovered by least squares, as
//! the online stage would see it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::envelope::DistortionEnvelope;
use super::fit::{fit_rho, RhoSampleGrid};
use super::rho::RhoSurface;
use super::{PairProfile, PairProfileSet};
use crate::error::{invalid, Result};
use crate::pair::Pair;
use crate::scenario::Scenario;

const PROFILE_STREAM: u64 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityMode {
    /// `s_ij ~ U(0, 1)` independently per pair.
    Uniform,
    /// Users fall into latent content clusters; intra-cluster pairs are
    /// highly similar, inter-cluster pairs are not.
    Cluster,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileGenParams {
    pub similarity: SimilarityMode,
    pub num_clusters: usize,
    pub intra_similarity: [f64; 2],
    pub inter_similarity: [f64; 2],

    pub rho_lo: f64,
    pub rho_lo_spread: f64,
    pub rho_hi_base: f64,
    pub rho_hi_spread: f64,
    /// Log-uniform range of the power slope `a` (1/W).
    pub a_range: [f64; 2],
    /// Log-uniform range of the compression slope `b`.
    pub b_range: [f64; 2],
    /// The sigmoid midpoint sits at `(p_mid_w, delta_mid)`.
    pub p_mid_w: f64,
    pub delta_mid: f64,

    pub distortion_floor: f64,
    pub distortion_peak: f64,
    pub distortion_decay: f64,
    /// Relative distortion increase for a fully dissimilar partner.
    pub similarity_penalty: f64,
    pub distortion_noise: f64,
    /// Per-user content difficulty multiplier range.
    pub user_difficulty: [f64; 2],

    /// Compression-ratio profiling grid.
    pub delta_grid: Vec<f64>,
    /// Number of log-spaced profiling powers in `[P_max / (5K), P_max]`.
    pub power_grid_points: usize,
    /// Re-estimate each surface from (noisy) grid samples.
    pub refit: bool,
    /// Uniform noise amplitude added to interference samples before refit.
    pub rho_noise: f64,
    /// Inflates `(rho_min, rho_max)` to emulate a weaker transceiver family.
    pub family_multiplier: f64,
}

impl Default for ProfileGenParams {
    fn default() -> Self {
        ProfileGenParams {
            similarity: SimilarityMode::Uniform,
            num_clusters: 2,
            intra_similarity: [0.8, 1.0],
            inter_similarity: [0.2, 0.5],
            rho_lo: 0.002,
            rho_lo_spread: 0.12,
            rho_hi_base: 0.3,
            rho_hi_spread: 0.5,
            a_range: [10.0, 40.0],
            b_range: [4.0, 12.0],
            p_mid_w: 0.08,
            delta_mid: 0.1,
            distortion_floor: 0.0015,
            distortion_peak: 0.010,
            distortion_decay: 8.0,
            similarity_penalty: 0.3,
            distortion_noise: 2e-4,
            user_difficulty: [0.9, 1.1],
            delta_grid: vec![0.0625, 0.125, 0.25, 0.375, 0.5, 0.75, 1.0],
            power_grid_points: 8,
            refit: true,
            rho_noise: 0.005,
            family_multiplier: 1.0,
        }
    }
}

impl ProfileGenParams {
    pub fn cluster() -> Self {
        ProfileGenParams {
            similarity: SimilarityMode::Cluster,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let range_ok = |r: [f64; 2]| r[0] <= r[1];
        let unit = |r: [f64; 2]| range_ok(r) && r[0] >= 0.0 && r[1] <= 1.0;
        if !unit(self.intra_similarity) || !unit(self.inter_similarity) {
            return Err(invalid("similarity", "ranges must be ordered subsets of [0, 1]"));
        }
        if self.num_clusters == 0 {
            return Err(invalid("num_clusters", "must be at least one"));
        }
        if !(range_ok(self.a_range) && self.a_range[0] > 0.0)
            || !(range_ok(self.b_range) && self.b_range[0] > 0.0)
        {
            return Err(invalid("slope_range", "slopes must be positive ordered ranges"));
        }
        for (name, v) in [
            ("rho_lo", self.rho_lo),
            ("rho_lo_spread", self.rho_lo_spread),
            ("rho_hi_base", self.rho_hi_base),
            ("rho_hi_spread", self.rho_hi_spread),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(invalid(name, "must lie in [0, 1]"));
            }
        }
        if !(self.distortion_peak >= self.distortion_floor && self.distortion_floor >= 0.0) {
            return Err(invalid("distortion", "need 0 <= floor <= peak"));
        }
        if self.distortion_decay < 0.0 || self.distortion_noise < 0.0 || self.rho_noise < 0.0 {
            return Err(invalid("noise", "decay and noise amplitudes must be nonnegative"));
        }
        if !(range_ok(self.user_difficulty) && self.user_difficulty[0] > 0.0) {
            return Err(invalid("user_difficulty", "must be a positive ordered range"));
        }
        if self.delta_grid.len() < 2
            || !self.delta_grid.windows(2).all(|w| w[0] < w[1])
            || self.delta_grid[0] <= 0.0
            || *self.delta_grid.last().unwrap() > 1.0
        {
            return Err(invalid("delta_grid", "need >= 2 ascending ratios in (0, 1]"));
        }
        if self.power_grid_points < 2 {
            return Err(invalid("power_grid_points", "need at least two powers"));
        }
        if !(self.family_multiplier > 0.0) {
            return Err(invalid("family_multiplier", "must be positive"));
        }
        if !(self.p_mid_w >= 0.0) {
            return Err(invalid("p_mid_w", "must be nonnegative"));
        }
        Ok(())
    }
}

/// Profiling power grid: log-spaced over `[P_max / (5K), P_max]`.
pub fn power_grid(total_power: f64, num_groups: usize, points: usize) -> Vec<f64> {
    let lo = total_power / (5.0 * num_groups as f64);
    let ratio = total_power / lo;
    (0..points)
        .map(|k| lo * ratio.powf(k as f64 / (points - 1) as f64))
        .collect()
}

fn log_uniform<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    let (lo, hi) = (r[0].ln(), r[1].ln());
    (lo + (hi - lo) * rng.random::<f64>()).exp()
}

fn uniform<R: Rng>(rng: &mut R, r: [f64; 2]) -> f64 {
    r[0] + (r[1] - r[0]) * rng.random::<f64>()
}

pub fn synth_profiles(
    scenario: &Scenario,
    params: &ProfileGenParams,
    seed: u64,
) -> Result<PairProfileSet> {
    params.validate()?;
    let n = scenario.num_users;
    let budgets = &scenario.budgets;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(PROFILE_STREAM);

    let clusters: Vec<usize> = (0..n)
        .map(|_| rng.random_range(0..params.num_clusters))
        .collect();
    let difficulty: Vec<f64> = (0..n)
        .map(|_| uniform(&mut rng, params.user_difficulty))
        .collect();

    let powers = power_grid(
        budgets.total_power_watts,
        scenario.num_groups(),
        params.power_grid_points,
    );
    let deltas: Vec<f64> = params
        .delta_grid
        .iter()
        .map(|&d| d.max(budgets.delta_min))
        .fold(Vec::new(), |mut acc, d| {
            if acc.last().is_none_or(|&l| d > l) {
                acc.push(d);
            }
            acc
        });

    let mut profiles = Vec::with_capacity(n * (n - 1) / 2);
    for pair in Pair::all(n) {
        let similarity = match params.similarity {
            SimilarityMode::Uniform => rng.random::<f64>(),
            SimilarityMode::Cluster if clusters[pair.i] == clusters[pair.j] => {
                uniform(&mut rng, params.intra_similarity)
            }
            SimilarityMode::Cluster => uniform(&mut rng, params.inter_similarity),
        };
        let dissim = 1.0 - similarity;
        let rho_min = (params.rho_lo + dissim * params.rho_lo_spread).clamp(0.0, 1.0);
        let rho_max = (params.rho_hi_base + dissim * params.rho_hi_spread).clamp(rho_min, 1.0);
        let a = log_uniform(&mut rng, params.a_range);
        let b = log_uniform(&mut rng, params.b_range);
        let truth = RhoSurface {
            a,
            b,
            d: -(a * params.p_mid_w + b * params.delta_mid),
            rho_min,
            rho_max,
        };

        let surface = if params.refit {
            let mut grid = RhoSampleGrid::from_surface(&truth, &powers, &deltas);
            for row in grid.samples.iter_mut() {
                for v in row.iter_mut() {
                    let noise = params.rho_noise * (2.0 * rng.random::<f64>() - 1.0);
                    *v = (*v + noise).clamp(0.0, 1.0);
                }
            }
            fit_rho(&grid)?.surface
        } else {
            truth
        };

        let mut envelope = |user: usize| -> Result<DistortionEnvelope> {
            let scale = difficulty[user] * (1.0 + params.similarity_penalty * dissim);
            let samples: Vec<(f64, f64)> = deltas
                .iter()
                .map(|&d| {
                    let shape = params.distortion_floor
                        + (params.distortion_peak - params.distortion_floor)
                            * (-params.distortion_decay * (d - deltas[0])).exp();
                    let noise = params.distortion_noise * (2.0 * rng.random::<f64>() - 1.0);
                    (d, (scale * shape + noise).max(0.0))
                })
                .collect();
            DistortionEnvelope::build(&samples)
        };
        let envelope_i = envelope(pair.i)?;
        let envelope_j = envelope(pair.j)?;

        profiles.push(PairProfile {
            pair,
            similarity,
            surface: surface.inflated(params.family_multiplier),
            envelope_i,
            envelope_j,
        });
    }
    PairProfileSet::new(n, profiles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ScenarioParams, SystemBudgets};

    fn scenario() -> Scenario {
        Scenario::generate(&ScenarioParams::default(), SystemBudgets::defaults(10), 3).unwrap()
    }

    #[test]
    fn deterministic_for_a_seed() {
        let s = scenario();
        let p = ProfileGenParams::default();
        assert_eq!(synth_profiles(&s, &p, 9).unwrap(), synth_profiles(&s, &p, 9).unwrap());
        assert_ne!(synth_profiles(&s, &p, 9).unwrap(), synth_profiles(&s, &p, 10).unwrap());
    }

    #[test]
    fn full_similarity_hits_the_floor() {
        let s = scenario();
        let p = ProfileGenParams {
            similarity: SimilarityMode::Cluster,
            num_clusters: 1,
            intra_similarity: [1.0, 1.0],
            refit: false,
            ..Default::default()
        };
        let set = synth_profiles(&s, &p, 1).unwrap();
        for prof in set.iter() {
            assert_eq!(prof.similarity, 1.0);
            assert_eq!(prof.surface.rho_min, p.rho_lo);
        }
    }

    #[test]
    fn family_multiplier_dominates_pointwise() {
        let s = scenario();
        let base = synth_profiles(&s, &ProfileGenParams::default(), 4).unwrap();
        let p15 = ProfileGenParams {
            family_multiplier: 1.5,
            ..Default::default()
        };
        let inflated = synth_profiles(&s, &p15, 4).unwrap();
        for (x, y) in base.iter().zip(inflated.iter()) {
            for k in 0..10 {
                let p = 0.1 * k as f64;
                for d in [0.0625, 0.3, 1.0] {
                    assert!(y.surface.eval(p, d) >= x.surface.eval(p, d));
                }
            }
        }
    }

    #[test]
    fn invalid_ranges_are_rejected() {
        let s = scenario();
        let p = ProfileGenParams {
            a_range: [5.0, 1.0],
            ..Default::default()
        };
        assert!(synth_profiles(&s, &p, 1).is_err());
        let p = ProfileGenParams {
            intra_similarity: [0.5, 1.5],
            ..Default::default()
        };
        assert!(synth_profiles(&s, &p, 1).is_err());
    }

    #[test]
    fn power_grid_spans_budget() {
        let g = power_grid(1.0, 5, 8);
        assert_eq!(g.len(), 8);
        assert!((g[0] - 0.04).abs() < 1e-15);
        assert!((g[7] - 1.0).abs() < 1e-12);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }
}
