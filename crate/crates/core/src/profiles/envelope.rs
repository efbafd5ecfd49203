use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Monotone nonincreasing piecewise-linear upper envelope of empirical
/// distortion samples over the compression ratio.
///
/// Outside the breakpoint range the envelope is extended flat.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionEnvelope {
    breakpoints: Vec<(f64, f64)>,
}

impl DistortionEnvelope {
    /// Suffix-maximum transform of the samples followed by linear
    /// interpolation. Duplicate ratios keep their largest sample.
    pub fn build(samples: &[(f64, f64)]) -> Result<Self> {
        let mut pts: Vec<(f64, f64)> = samples.to_vec();
        pts.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut dedup: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
        for (d, v) in pts {
            match dedup.last_mut() {
                Some(last) if last.0 == d => last.1 = last.1.max(v),
                _ => dedup.push((d, v)),
            }
        }
        if dedup.len() < 2 {
            return Err(Error::DegenerateEnvelope);
        }
        let mut running = f64::NEG_INFINITY;
        for pt in dedup.iter_mut().rev() {
            running = running.max(pt.1);
            pt.1 = running;
        }
        Ok(DistortionEnvelope { breakpoints: dedup })
    }

    /// Wraps breakpoints that are already sorted and nonincreasing.
    pub fn from_breakpoints(breakpoints: Vec<(f64, f64)>) -> Result<Self> {
        let env = DistortionEnvelope { breakpoints };
        if !env.is_valid() {
            return Err(Error::DegenerateEnvelope);
        }
        Ok(env)
    }

    pub fn is_valid(&self) -> bool {
        let bp = &self.breakpoints;
        bp.len() >= 2
            && bp.iter().all(|(d, v)| d.is_finite() && v.is_finite())
            && bp.windows(2).all(|w| w[0].0 < w[1].0 && w[0].1 >= w[1].1)
    }

    pub fn breakpoints(&self) -> &[(f64, f64)] {
        &self.breakpoints
    }

    pub fn eval(&self, delta: f64) -> f64 {
        let bp = &self.breakpoints;
        if delta <= bp[0].0 {
            return bp[0].1;
        }
        let last = bp[bp.len() - 1];
        if delta >= last.0 {
            return last.1;
        }
        let k = bp.partition_point(|&(d, _)| d <= delta);
        let (d0, v0) = bp[k - 1];
        let (d1, v1) = bp[k];
        v0 + (v1 - v0) * (delta - d0) / (d1 - d0)
    }

    /// Smallest ratio in `[delta_min, 1]` whose envelope value does not exceed
    /// `d_max`, or `None` when even `delta = 1` is too lossy.
    pub fn min_delta_for_distortion(&self, d_max: f64, delta_min: f64) -> Option<f64> {
        if self.eval(1.0) > d_max {
            return None;
        }
        if self.eval(delta_min) <= d_max {
            return Some(delta_min);
        }
        let bp = &self.breakpoints;
        for w in bp.windows(2) {
            let ((d0, v0), (d1, v1)) = (w[0], w[1]);
            if d1 <= delta_min {
                continue;
            }
            if v1 <= d_max {
                // v0 > d_max here because earlier segments were rejected
                let t = if v0 > v1 { (v0 - d_max) / (v0 - v1) } else { 0.0 };
                let d = (d0 + t * (d1 - d0)).max(delta_min);
                return Some(d.min(1.0));
            }
        }
        // flat extension beyond the last breakpoint already satisfies d_max
        Some(bp[bp.len() - 1].0.clamp(delta_min, 1.0))
    }
}
