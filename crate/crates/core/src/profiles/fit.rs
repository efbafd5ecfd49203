//! Least-squares fit of the logistic interference surface.
//!
//! Damped Gauss-Newton (Levenberg style) over `(ln a, ln b, d, rho_min,
//! rho_max)`, restarted from a fixed schedule of eight starting points so the
//! result only depends on the sample grid.

use nalgebra::{Matrix5, Vector5};
use serde::{Deserialize, Serialize};

use super::rho::{reverse_logistic, RhoSurface};
use crate::error::{invalid, Result};

/// Profiled interference samples on a power x compression-ratio grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoSampleGrid {
    /// Ascending transmit powers in watts.
    pub powers: Vec<f64>,
    /// Ascending compression ratios.
    pub deltas: Vec<f64>,
    /// `samples[n][l]` is the measured factor at `(powers[n], deltas[l])`.
    pub samples: Vec<Vec<f64>>,
}

impl RhoSampleGrid {
    pub fn validate(&self) -> Result<()> {
        let ascending = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if !ascending(&self.powers) || !ascending(&self.deltas) {
            return Err(invalid("grid", "axes must be strictly ascending"));
        }
        if self.samples.len() != self.powers.len()
            || self.samples.iter().any(|row| row.len() != self.deltas.len())
        {
            return Err(invalid("grid", "sample matrix shape does not match the axes"));
        }
        if self.samples.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(invalid("grid", "samples must lie in [0, 1]"));
        }
        if self.powers.len() * self.deltas.len() < 5 {
            return Err(invalid("grid", "need at least five samples"));
        }
        Ok(())
    }

    /// Samples `surface` on the given axes.
    pub fn from_surface(surface: &RhoSurface, powers: &[f64], deltas: &[f64]) -> Self {
        let samples = powers
            .iter()
            .map(|&p| deltas.iter().map(|&d| surface.eval(p, d)).collect())
            .collect();
        RhoSampleGrid {
            powers: powers.to_vec(),
            deltas: deltas.to_vec(),
            samples,
        }
    }

    fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.powers.iter().enumerate().flat_map(move |(n, &p)| {
            self.deltas
                .iter()
                .enumerate()
                .map(move |(l, &d)| (p, d, self.samples[n][l]))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoFit {
    pub surface: RhoSurface,
    /// Residual sum of squares over the grid.
    pub rss: f64,
    /// Set when the grid carried no variation and a flat surface was returned.
    pub degenerate: bool,
}

const MAX_ITERS: usize = 400;
const LN_SLOPE_LIMIT: f64 = 25.0;

#[derive(Clone, Copy)]
struct Params(Vector5<f64>);

impl Params {
    fn surface(&self) -> RhoSurface {
        RhoSurface {
            a: self.0[0].exp(),
            b: self.0[1].exp(),
            d: self.0[2],
            rho_min: self.0[3],
            rho_max: self.0[4],
        }
    }

    fn project(mut self) -> Self {
        self.0[0] = self.0[0].clamp(-LN_SLOPE_LIMIT, LN_SLOPE_LIMIT);
        self.0[1] = self.0[1].clamp(-LN_SLOPE_LIMIT, LN_SLOPE_LIMIT);
        self.0[3] = self.0[3].clamp(0.0, 1.0);
        self.0[4] = self.0[4].clamp(0.0, 1.0);
        if self.0[3] > self.0[4] {
            let m = 0.5 * (self.0[3] + self.0[4]);
            self.0[3] = m;
            self.0[4] = m;
        }
        self
    }
}

fn rss(grid: &RhoSampleGrid, s: &RhoSurface) -> f64 {
    grid.points().map(|(p, d, y)| (s.eval(p, d) - y).powi(2)).sum()
}

/// Normal equations `J^T J` and `J^T r` at `params`.
fn normal_equations(grid: &RhoSampleGrid, params: &Params) -> (Matrix5<f64>, Vector5<f64>, f64) {
    let s = params.surface();
    let mut jtj = Matrix5::zeros();
    let mut jtr = Vector5::zeros();
    let mut cost = 0.0;
    for (p, d, y) in grid.points() {
        let sig = reverse_logistic(s.exponent(p, d));
        let r = s.rho_min + (s.rho_max - s.rho_min) * sig - y;
        let dx = -(s.rho_max - s.rho_min) * sig * (1.0 - sig);
        let j = Vector5::new(dx * s.a * p, dx * s.b * d, dx, 1.0 - sig, sig);
        jtj += j * j.transpose();
        jtr += j * r;
        cost += r * r;
    }
    (jtj, jtr, cost)
}

fn levenberg(grid: &RhoSampleGrid, start: Params) -> (Params, f64) {
    let mut x = start.project();
    let mut mu = 1e-3;
    let (mut jtj, mut jtr, mut cost) = normal_equations(grid, &x);
    for _ in 0..MAX_ITERS {
        if cost < 1e-30 {
            break;
        }
        let mut damped = jtj;
        for k in 0..5 {
            damped[(k, k)] += mu * jtj[(k, k)].max(1e-12);
        }
        let Some(chol) = damped.cholesky() else {
            mu *= 10.0;
            if mu > 1e12 {
                break;
            }
            continue;
        };
        let step = chol.solve(&(-jtr));
        let trial = Params(x.0 + step).project();
        let trial_cost = rss(grid, &trial.surface());
        if trial_cost < cost {
            let rel = (cost - trial_cost) / cost.max(1e-300);
            x = trial;
            (jtj, jtr, cost) = normal_equations(grid, &x);
            mu = (mu / 3.0).max(1e-12);
            if rel < 1e-14 && step.norm() < 1e-12 {
                break;
            }
        } else {
            mu *= 4.0;
            if mu > 1e12 {
                break;
            }
        }
    }
    (x, cost)
}

/// Fits the logistic surface to `grid`, returning the lowest-RSS restart.
pub fn fit_rho(grid: &RhoSampleGrid) -> Result<RhoFit> {
    grid.validate()?;
    let (lo, hi) = grid
        .samples
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    if hi - lo < 1e-12 {
        return Ok(RhoFit {
            surface: RhoSurface::flat(lo),
            rss: 0.0,
            degenerate: true,
        });
    }

    let p_lo = grid.powers[0];
    let p_hi = *grid.powers.last().unwrap();
    let d_lo = grid.deltas[0];
    let d_hi = *grid.deltas.last().unwrap();
    let p_c = 0.5 * (p_lo + p_hi);
    let d_c = 0.5 * (d_lo + d_hi);
    let a0 = 6.0 / (p_hi - p_lo).max(1e-12);
    let b0 = 6.0 / (d_hi - d_lo).max(1e-12);
    let spread = hi - lo;
    let wide = ((lo - 0.1 * spread).max(0.0), (hi + 0.1 * spread).min(1.0));

    let mut starts = Vec::with_capacity(8);
    for &shift in &[0.0, -2.0, 2.0] {
        for &(rmin, rmax) in &[(lo, hi), wide] {
            starts.push((a0, b0, -(a0 * p_c + b0 * d_c) + shift, rmin, rmax));
        }
    }
    for &scale in &[0.25, 4.0] {
        let (a, b) = (a0 * scale, b0 * scale);
        starts.push((a, b, -(a * p_c + b * d_c), lo, hi));
    }

    let mut best: Option<(Params, f64)> = None;
    for (a, b, d, rmin, rmax) in starts {
        let start = Params(Vector5::new(a.ln(), b.ln(), d, rmin, rmax));
        let (x, cost) = levenberg(grid, start);
        if best.as_ref().is_none_or(|(_, c)| cost < *c) {
            best = Some((x, cost));
        }
    }
    let (x, cost) = best.expect("at least one start");
    Ok(RhoFit {
        surface: x.surface(),
        rss: cost,
        degenerate: false,
    })
}
