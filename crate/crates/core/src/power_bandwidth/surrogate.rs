//! Concave lower-bound model of the group rates around an anchor.
//!
//! The product `p rho(p, delta)` is replaced by its tangent `qhat(p)` at the
//! anchor power. Each rate is then a difference of two concave functions
//! `r+(p, b) - r-(p, b)` of the form `(b / ln 2) ln(N0 + c L(p) / b)` with
//! affine `L`, and the subtracted term is linearised at the anchor.
//!
//! The evaluation below drops the `b ln N0` part that appears in both terms
//! and cancels exactly after linearisation; [`GroupSurrogate::r_plus`] and
//! friends expose the full expressions.

use std::f64::consts::LN_2;

use nalgebra::{Matrix2, Vector2};

use crate::link::GroupContext;
use crate::profiles::RhoSurface;

/// Tangent line of `p rho(p, delta)` at `p_anchor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QLine {
    pub intercept: f64,
    pub slope: f64,
}

impl QLine {
    pub fn at(surface: &RhoSurface, delta: f64, p_anchor: f64) -> Self {
        let rho = surface.eval(p_anchor, delta);
        let drho = surface.drho_dp(p_anchor, delta);
        QLine {
            intercept: -p_anchor * p_anchor * drho,
            slope: rho + p_anchor * drho,
        }
    }

    pub fn eval(&self, p: f64) -> f64 {
        self.intercept + self.slope * p
    }
}

/// First-order expansion of `p rho(p, delta)` around `p_anchor`.
pub fn qhat(surface: &RhoSurface, delta: f64, p_anchor: f64, p: f64) -> f64 {
    QLine::at(surface, delta, p_anchor).eval(p)
}

/// `(b / ln 2) ln(1 + c L / (b N0))` and its derivatives in `(p, b)` for
/// `L = alpha p + beta`.
#[derive(Debug, Clone, Copy)]
struct LogTerm {
    value: f64,
    grad: Vector2<f64>,
    hess: Matrix2<f64>,
}

fn log_term(c_over_n0: f64, alpha: f64, beta: f64, p: f64, b: f64) -> LogTerm {
    let l = alpha * p + beta;
    let w = c_over_n0 * l / b;
    let z = 1.0 + w;
    let value = b * w.ln_1p() / LN_2;
    let grad = Vector2::new(c_over_n0 * alpha / (LN_2 * z), (w.ln_1p() - w / z) / LN_2);
    let v = Vector2::new(alpha, -l / b);
    let hess = v * v.transpose() * (-(c_over_n0 * c_over_n0) / (LN_2 * b * z * z));
    LogTerm { value, grad, hess }
}

fn log_value(c_over_n0: f64, alpha: f64, beta: f64, p: f64, b: f64) -> f64 {
    let w = c_over_n0 * (alpha * p + beta) / b;
    if w <= -1.0 {
        return f64::NAN;
    }
    b * w.ln_1p() / LN_2
}

/// Surrogate of one group around `(p_anchor, b_anchor)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupSurrogate {
    pub q: QLine,
    pub p_anchor: f64,
    pub b_anchor: f64,
    /// `|h_u|^2 / 2` for both members.
    pub half_gain: [f64; 2],
    pub noise_psd: f64,
    /// Reduced `r-` at the anchor and its gradient.
    minus_anchor: [f64; 2],
    minus_grad: [Vector2<f64>; 2],
}

impl GroupSurrogate {
    pub fn new(ctx: &GroupContext, delta: f64, p_anchor: f64, b_anchor: f64) -> Self {
        let q = QLine::at(&ctx.surface, delta, p_anchor);
        let half_gain = ctx.gains.map(|g| 0.5 * g);
        let mut minus_anchor = [0.0; 2];
        let mut minus_grad = [Vector2::zeros(); 2];
        for u in 0..2 {
            let t = log_term(half_gain[u] / ctx.noise_psd, q.slope, q.intercept, p_anchor, b_anchor);
            minus_anchor[u] = t.value;
            minus_grad[u] = t.grad;
        }
        GroupSurrogate {
            q,
            p_anchor,
            b_anchor,
            half_gain,
            noise_psd: ctx.noise_psd,
            minus_anchor,
            minus_grad,
        }
    }

    fn ratio(&self, u: usize) -> f64 {
        self.half_gain[u] / self.noise_psd
    }

    /// Reduced-form lower bound of user `u`'s rate.
    pub fn rate_bound(&self, u: usize, p: f64, b: f64) -> f64 {
        let plus = log_value(self.ratio(u), 1.0 + self.q.slope, self.q.intercept, p, b);
        let d = Vector2::new(p - self.p_anchor, b - self.b_anchor);
        plus - self.minus_anchor[u] - self.minus_grad[u].dot(&d)
    }

    /// Rate bound with gradient and Hessian in `(p, b)`.
    pub fn rate_bound_derivatives(&self, u: usize, p: f64, b: f64) -> (f64, Vector2<f64>, Matrix2<f64>) {
        let plus = log_term(self.ratio(u), 1.0 + self.q.slope, self.q.intercept, p, b);
        let d = Vector2::new(p - self.p_anchor, b - self.b_anchor);
        (
            plus.value - self.minus_anchor[u] - self.minus_grad[u].dot(&d),
            plus.grad - self.minus_grad[u],
            plus.hess,
        )
    }

    pub fn sum_bound(&self, p: f64, b: f64) -> f64 {
        self.rate_bound(0, p, b) + self.rate_bound(1, p, b)
    }

    /// Full `r+ = (b / ln 2) ln(N0 + c (p + qhat(p)) / b)`.
    pub fn r_plus(&self, u: usize, p: f64, b: f64) -> f64 {
        let l = p + self.q.eval(p);
        b * (self.noise_psd + self.half_gain[u] * l / b).ln() / LN_2
    }

    /// Full `r- = (b / ln 2) ln(N0 + c qhat(p) / b)`.
    pub fn r_minus(&self, u: usize, p: f64, b: f64) -> f64 {
        let l = self.q.eval(p);
        b * (self.noise_psd + self.half_gain[u] * l / b).ln() / LN_2
    }

    /// Gradient of the full `r-` in `(p, b)`.
    pub fn r_minus_grad(&self, u: usize, p: f64, b: f64) -> [f64; 2] {
        let t = log_term(self.ratio(u), self.q.slope, self.q.intercept, p, b);
        [t.grad[0], t.grad[1] + self.noise_psd.ln() / LN_2]
    }

    /// Gradient of the full `r+` in `(p, b)`.
    pub fn r_plus_grad(&self, u: usize, p: f64, b: f64) -> [f64; 2] {
        let t = log_term(self.ratio(u), 1.0 + self.q.slope, self.q.intercept, p, b);
        [t.grad[0], t.grad[1] + self.noise_psd.ln() / LN_2]
    }

    /// Lower bound written with the full expressions, for cross-checks.
    pub fn rate_bound_full(&self, u: usize, p: f64, b: f64) -> f64 {
        let g = self.r_minus_grad(u, self.p_anchor, self.b_anchor);
        self.r_plus(u, p, b)
            - self.r_minus(u, self.p_anchor, self.b_anchor)
            - g[0] * (p - self.p_anchor)
            - g[1] * (b - self.b_anchor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_surface_is_linear() {
        let s = RhoSurface::flat(0.3);
        for p in [0.0, 0.1, 0.7] {
            assert!((qhat(&s, 0.5, 0.2, p) - 0.3 * p).abs() < 1e-15);
        }
    }

    #[test]
    fn tangent_touches_at_anchor() {
        let s = RhoSurface {
            a: 20.0,
            b: 6.0,
            d: -3.0,
            rho_min: 0.05,
            rho_max: 0.7,
        };
        let p0 = 0.13;
        assert!((qhat(&s, 0.4, p0, p0) - p0 * s.eval(p0, 0.4)).abs() < 1e-15);
    }
}
