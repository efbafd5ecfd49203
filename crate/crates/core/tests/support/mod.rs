//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the solver code paths it is used to check.

#![allow(dead_code)]

use rand::Rng;
use semapair_core::link::GroupContext;
use semapair_core::pair::Pair;
use semapair_core::profiles::RhoSurface;

pub fn rho(s: &RhoSurface, p: f64, delta: f64) -> f64 {
    s.rho_min + (s.rho_max - s.rho_min) / (1.0 + (s.a * p + s.b * delta + s.d).exp())
}

/// Exact member rates of a pair sharing power `p` and bandwidth `b`.
pub fn rates(ctx: &GroupContext, p: f64, b: f64, delta: f64) -> [f64; 2] {
    let r = rho(&ctx.surface, p, delta);
    ctx.gains.map(|g| {
        let signal = p / 2.0 * g;
        let sinr = signal / (r * signal + b * ctx.noise_psd);
        b * (1.0 + sinr).log2()
    })
}

pub fn latency(ctx: &GroupContext, p: f64, b: f64, delta: f64) -> f64 {
    let r = rates(ctx, p, b, delta);
    let t0 = ctx.bits[0] * delta / r[0] + ctx.tau_dec[0];
    let t1 = ctx.bits[1] * delta / r[1] + ctx.tau_dec[1];
    ctx.tau_bs + t0.max(t1)
}

pub fn energy(ctx: &GroupContext, p: f64, b: f64, delta: f64) -> f64 {
    let r = rates(ctx, p, b, delta);
    let t = (ctx.bits[0] * delta / r[0]).max(ctx.bits[1] * delta / r[1]);
    p * t + ctx.zeta * (1.0 / delta).ln()
}

/// Piecewise-linear interpolation with flat extension.
pub fn interp(bp: &[(f64, f64)], x: f64) -> f64 {
    if x <= bp[0].0 {
        return bp[0].1;
    }
    for w in bp.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x <= x1 {
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    bp[bp.len() - 1].1
}

/// Every perfect matching of `0..n` over the edges accepted by `ok`.
pub fn perfect_matchings(n: usize, ok: &dyn Fn(usize, usize) -> bool) -> Vec<Vec<Pair>> {
    fn go(free: &mut Vec<usize>, cur: &mut Vec<Pair>, ok: &dyn Fn(usize, usize) -> bool, out: &mut Vec<Vec<Pair>>) {
        if free.is_empty() {
            out.push(cur.clone());
            return;
        }
        let a = free.remove(0);
        for idx in 0..free.len() {
            let b = free[idx];
            if !ok(a, b) {
                continue;
            }
            free.remove(idx);
            cur.push(Pair::new(a, b));
            go(free, cur, ok, out);
            cur.pop();
            free.insert(idx, b);
        }
        free.insert(0, a);
    }
    let mut out = Vec::new();
    go(&mut (0..n).collect(), &mut Vec::new(), ok, &mut out);
    out
}

/// All permutations of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(k: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in 0..k {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                go(k, cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(n, &mut Vec::new(), &mut vec![false; n], &mut out);
    out
}

/// Richardson-extrapolated central difference.
pub fn derivative(f: &dyn Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    let d = |h: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    (4.0 * d(h / 2.0) - d(h)) / 3.0
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

pub fn random_surface<R: Rng>(rng: &mut R) -> RhoSurface {
    let rho_min = rng.random_range(0.0..0.3);
    RhoSurface {
        a: rng.random_range(5.0..50.0),
        b: rng.random_range(2.0..15.0),
        d: rng.random_range(-6.0..2.0),
        rho_min,
        rho_max: rng.random_range(rho_min..1.0),
    }
}

/// Linear channel power gain of a user between 10 m and 250 m with 4 dB
/// log-normal shadowing.
pub fn random_gain<R: Rng>(rng: &mut R) -> f64 {
    let d_km: f64 = rng.random_range(0.01..0.25);
    let shadow = 4.0 * (rng.random::<f64>() - 0.5) * 2.0;
    10f64.powf(-(128.1 + 37.6 * d_km.log10() + shadow) / 10.0)
}
