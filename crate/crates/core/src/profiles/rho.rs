use serde::{Deserialize, Serialize};

/// Pair-level semantic interference surface
///
/// `rho(p, delta) = rho_min + (rho_max - rho_min) / (1 + exp(a p + b delta + d))`
///
/// With `a, b > 0` the surface is a reverse sigmoid that is nonincreasing in
/// both transmit power and compression ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoSurface {
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub rho_min: f64,
    pub rho_max: f64,
}

/// `1 / (1 + exp(x))` without overflow.
#[inline]
pub(crate) fn reverse_logistic(x: f64) -> f64 {
    if x > 0.0 {
        let e = (-x).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + x.exp())
    }
}

impl RhoSurface {
    /// Constant surface `rho == c`.
    pub fn flat(c: f64) -> Self {
        RhoSurface {
            a: 1.0,
            b: 1.0,
            d: 0.0,
            rho_min: c,
            rho_max: c,
        }
    }

    pub fn is_valid(&self) -> bool {
        self.a > 0.0
            && self.b > 0.0
            && self.d.is_finite()
            && 0.0 <= self.rho_min
            && self.rho_min <= self.rho_max
            && self.rho_max <= 1.0
    }

    #[inline]
    pub fn exponent(&self, p: f64, delta: f64) -> f64 {
        self.a * p + self.b * delta + self.d
    }

    pub fn eval(&self, p: f64, delta: f64) -> f64 {
        let s = reverse_logistic(self.exponent(p, delta));
        self.rho_min + (self.rho_max - self.rho_min) * s
    }

    /// `phi / (1 + phi)^2` at the current exponent, computed as `s (1 - s)`.
    #[inline]
    fn bell(&self, p: f64, delta: f64) -> f64 {
        let s = reverse_logistic(self.exponent(p, delta));
        s * (1.0 - s)
    }

    pub fn drho_dp(&self, p: f64, delta: f64) -> f64 {
        -self.a * (self.rho_max - self.rho_min) * self.bell(p, delta)
    }

    pub fn drho_ddelta(&self, p: f64, delta: f64) -> f64 {
        -self.b * (self.rho_max - self.rho_min) * self.bell(p, delta)
    }

    /// Second derivative in `p`, used by the surrogate tests.
    pub fn d2rho_dp2(&self, p: f64, delta: f64) -> f64 {
        let s = reverse_logistic(self.exponent(p, delta));
        // d/dx [s(1-s)] = -s(1-s)(1-2s)
        self.a * self.a * (self.rho_max - self.rho_min) * s * (1.0 - s) * (1.0 - 2.0 * s)
    }

    /// Scales both saturation levels by `m`, clipped to `[0, 1]`.
    pub fn inflated(&self, m: f64) -> Self {
        let rho_min = (self.rho_min * m).clamp(0.0, 1.0);
        let rho_max = (self.rho_max * m).clamp(rho_min, 1.0);
        RhoSurface {
            rho_min,
            rho_max,
            ..*self
        }
    }
}
