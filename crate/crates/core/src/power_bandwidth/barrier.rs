//! Small dense log-barrier interior-point method for concave maximisation
//! under concave inequality constraints `g_i(x) > 0`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// A smooth concave programme. Gradient buffers arrive zeroed; Hessians are
/// accumulated into `hess` scaled by `weight`.
pub trait BarrierProblem {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    /// Soft constraints may be violated by the phase-one start point.
    fn is_soft(&self, i: usize) -> bool;
    fn objective(&self, x: &[f64]) -> f64;
    fn objective_derivatives(&self, x: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>, weight: f64);
    fn constraint(&self, i: usize, x: &[f64]) -> f64;
    fn constraint_derivatives(&self, i: usize, x: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>, weight: f64);
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BarrierOptions {
    /// Barrier weight growth per centering round.
    pub mu: f64,
    /// Stop once `m / t` falls below this times `max(|objective|, 1)`.
    pub gap_tol: f64,
    pub max_newton: usize,
    pub max_rounds: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions {
            mu: 10.0,
            gap_tol: 1e-8,
            max_newton: 80,
            max_rounds: 60,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSolution {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Final `m / t`.
    pub gap: f64,
    /// Normalised first-order residual of the Lagrangian with the implied
    /// multipliers `1 / (t g_i)`, combined with the gap.
    pub residual: f64,
    pub newton_steps: usize,
}

fn strictly_feasible<P: BarrierProblem + ?Sized>(problem: &P, x: &[f64]) -> bool {
    (0..problem.num_constraints()).all(|i| problem.constraint(i, x) > 0.0) && problem.objective(x).is_finite()
}

fn barrier_value<P: BarrierProblem + ?Sized>(problem: &P, x: &[f64], t: f64) -> f64 {
    let mut v = -t * problem.objective(x);
    for i in 0..problem.num_constraints() {
        let g = problem.constraint(i, x);
        if !(g > 0.0) {
            return f64::INFINITY;
        }
        v -= g.ln();
    }
    v
}

struct Centering {
    grad: DVector<f64>,
    f_grad: DVector<f64>,
    steps: usize,
}

/// Newton's method on `-t f - sum ln g_i`.
fn center<P: BarrierProblem + ?Sized>(
    problem: &P,
    x: &mut DVector<f64>,
    t: f64,
    opts: &BarrierOptions,
    stop_at: Option<f64>,
) -> Centering {
    let n = problem.dim();
    let m = problem.num_constraints();
    let mut gi = vec![0.0; n];
    let mut nz = Vec::with_capacity(n);
    let mut grad = DVector::zeros(n);
    let mut f_grad = DVector::zeros(n);
    let mut hess = DMatrix::zeros(n, n);
    let mut trial = DVector::zeros(n);
    let mut steps = 0;
    let mut last_decrement = f64::INFINITY;
    for _ in 0..opts.max_newton {
        hess.fill(0.0);
        f_grad.fill(0.0);
        problem.objective_derivatives(x.as_slice(), f_grad.as_mut_slice(), &mut hess, -t);
        grad.copy_from(&f_grad);
        grad *= -t;
        for i in 0..m {
            let g = problem.constraint(i, x.as_slice());
            gi.fill(0.0);
            problem.constraint_derivatives(i, x.as_slice(), &mut gi, &mut hess, -1.0 / g);
            nz.clear();
            nz.extend((0..n).filter(|&a| gi[a] != 0.0));
            let w = 1.0 / (g * g);
            for &a in &nz {
                grad[a] -= gi[a] / g;
                for &c in &nz {
                    hess[(a, c)] += w * gi[a] * gi[c];
                }
            }
        }
        let Some(dx) = solve_spd(&hess, &(-&grad)) else {
            break;
        };
        let decrement = -grad.dot(&dx);
        if !(decrement > 0.0) || decrement * 0.5 < 1e-18 || decrement > 0.5 * last_decrement && last_decrement < 1e-8 {
            break;
        }
        last_decrement = decrement;
        let phi0 = barrier_value(problem, x.as_slice(), t);
        // Once the predicted decrease drops below the rounding noise of the
        // barrier value, Armijo can no longer tell progress apart; inside
        // the quadratic region a full step only needs to stay interior.
        let below_noise = 0.5 * decrement < 1e3 * f64::EPSILON * phi0.abs().max(1.0) && decrement < 1e-2;
        let mut s = 1.0;
        let mut moved = false;
        while s > 1e-20 {
            trial.copy_from(x);
            trial.axpy(s, &dx, 1.0);
            let phi = barrier_value(problem, trial.as_slice(), t);
            if phi.is_finite() && (below_noise || phi <= phi0 - 0.25 * s * decrement) {
                x.copy_from(&trial);
                moved = true;
                break;
            }
            s *= 0.5;
        }
        steps += 1;
        if !moved {
            break;
        }
        if stop_at.is_some_and(|target| problem.objective(x.as_slice()) >= target) {
            break;
        }
    }
    Centering { grad, f_grad, steps }
}

/// Cholesky solve with growing diagonal regularisation as a fallback.
fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        let x = ch.solve(rhs);
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let scale = (0..h.nrows()).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut reg = 1e-12 * scale;
    for _ in 0..20 {
        let mut hr = h.clone();
        for i in 0..h.nrows() {
            hr[(i, i)] += reg;
        }
        if let Some(ch) = hr.cholesky() {
            let x = ch.solve(rhs);
            if x.iter().all(|v| v.is_finite()) {
                return Some(x);
            }
        }
        reg *= 100.0;
    }
    None
}

/// Barrier path following from a strictly feasible `x0`. With `stop_at`
/// the solve ends as soon as the objective reaches that value.
pub fn barrier_maximize<P: BarrierProblem + ?Sized>(
    problem: &P,
    x0: DVector<f64>,
    opts: &BarrierOptions,
    stop_at: Option<f64>,
) -> Option<BarrierSolution> {
    if !strictly_feasible(problem, x0.as_slice()) {
        return None;
    }
    let m = problem.num_constraints().max(1) as f64;
    let mut x = x0;
    let f0 = problem.objective(x.as_slice());
    let mut t = m / f0.abs().max(1e-2);
    let mut steps = 0;
    let mut last = None;
    for _ in 0..opts.max_rounds {
        let c = center(problem, &mut x, t, opts, stop_at);
        steps += c.steps;
        last = Some((c, t));
        if stop_at.is_some_and(|target| problem.objective(x.as_slice()) >= target) {
            break;
        }
        // Relative gap: pushing the weight further only amplifies the
        // cancellation error in near-active constraint values.
        if m / t < opts.gap_tol * problem.objective(x.as_slice()).abs().max(1.0) {
            break;
        }
        t *= opts.mu;
    }
    let (c, t) = last?;
    let fscale = c.f_grad.amax().max(1.0);
    let stationarity = c.grad.amax() / (t * fscale);
    let objective = problem.objective(x.as_slice());
    let gap = m / t;
    Some(BarrierSolution {
        residual: stationarity.max(gap / objective.abs().max(1.0)),
        objective,
        gap,
        x,
        newton_steps: steps,
    })
}

/// Augments a problem with a slack `s` on its soft constraints:
/// maximise `s` subject to `g_i(x) >= s` (soft) and `g_i(x) > 0` (hard).
struct PhaseOne<'a, P: BarrierProblem + ?Sized> {
    inner: &'a P,
}

impl<P: BarrierProblem + ?Sized> BarrierProblem for PhaseOne<'_, P> {
    fn dim(&self) -> usize {
        self.inner.dim() + 1
    }

    fn num_constraints(&self) -> usize {
        // the extra constraint caps the slack so the problem stays bounded
        self.inner.num_constraints() + 1
    }

    fn is_soft(&self, _i: usize) -> bool {
        false
    }

    fn objective(&self, z: &[f64]) -> f64 {
        z[self.inner.dim()]
    }

    fn objective_derivatives(&self, _z: &[f64], grad: &mut [f64], _hess: &mut DMatrix<f64>, _weight: f64) {
        grad[self.inner.dim()] = 1.0;
    }

    fn constraint(&self, i: usize, z: &[f64]) -> f64 {
        let n = self.inner.dim();
        let s = z[n];
        if i == self.inner.num_constraints() {
            return 1.0 - s;
        }
        let g = self.inner.constraint(i, &z[..n]);
        if self.inner.is_soft(i) {
            g - s
        } else {
            g
        }
    }

    fn constraint_derivatives(&self, i: usize, z: &[f64], grad: &mut [f64], hess: &mut DMatrix<f64>, weight: f64) {
        let n = self.inner.dim();
        if i == self.inner.num_constraints() {
            grad[n] = -1.0;
            return;
        }
        // the inner Hessian lands in the leading n x n block
        self.inner.constraint_derivatives(i, &z[..n], &mut grad[..n], hess, weight);
        if self.inner.is_soft(i) {
            grad[n] = -1.0;
        }
    }
}

/// Finds a point where every constraint is strictly positive, starting from
/// `x0` which must satisfy the hard constraints strictly. Returns `None`
/// when the soft constraints admit no interior point (up to `margin`).
pub fn phase_one<P: BarrierProblem + ?Sized>(
    problem: &P,
    x0: &DVector<f64>,
    margin: f64,
    opts: &BarrierOptions,
) -> Option<DVector<f64>> {
    if strictly_feasible(problem, x0.as_slice()) {
        return Some(x0.clone());
    }
    let n = problem.dim();
    let m = problem.num_constraints();
    let mut worst = f64::INFINITY;
    for i in 0..m {
        let g = problem.constraint(i, x0.as_slice());
        if problem.is_soft(i) {
            worst = worst.min(g);
        } else if !(g > 0.0) {
            return None;
        }
    }
    if !worst.is_finite() {
        return None;
    }
    let wrapper = PhaseOne { inner: problem };
    let mut z = DVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(x0);
    z[n] = worst.min(0.0) - 1.0;
    let sol = barrier_maximize(&wrapper, z, opts, Some(margin))?;
    let x = sol.x.rows(0, n).into_owned();
    let s = sol.x[n];
    (s > 0.0 && strictly_feasible(problem, x.as_slice())).then_some(x)
}
