//! Minimization of the regularized Lagrangian dual
//!
//! ```text
//! g(lambda) = sum_j lambda_j b_j
//!           + sum_i max_x [ v^i(x) - (eta/2)|x|^2 - sum_j lambda_j c_j^i(x) ]
//! ```
//!
//! over `lambda >= 0`. The inner maximizer is unique, so `g` is differentiable
//! with `dg/dlambda_j = b_j - sum_i c_j^i(x^i(lambda))`. Convergence is measured
//! by the projected-gradient residual `|lambda - max(0, lambda - grad g)|_2`.

use std::collections::VecDeque;

use log::debug;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::program::{DualVector, SeparableProgram};

/// Starting method. A run that stalls at rounding level switches once to the
/// other method from the current point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DualMethod {
    /// Projected Newton steps on the free coordinates, with spectral
    /// projected-gradient steps whenever the Newton step is rejected.
    ProjectedNewton,
    /// Spectral (Barzilai-Borwein) projected gradient with a nonmonotone
    /// backtracking line search.
    ProjectedGradient,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualSolverOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub method: DualMethod,
}

impl Default for DualSolverOptions {
    fn default() -> Self {
        DualSolverOptions {
            tol: 1e-8,
            max_iters: 100_000,
            method: DualMethod::ProjectedGradient,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub lambda: DualVector,
    pub iterations: usize,
    pub residual: f64,
    pub objective: f64,
}

struct Point {
    lambda: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
    residual: f64,
}

fn evaluate<P: SeparableProgram>(p: &P, lambda: Vec<f64>, eta: f64) -> Result<Point> {
    let k = p.constraints();
    let per_agent: Vec<Result<(f64, Vec<f64>)>> = (0..p.agents())
        .into_par_iter()
        .map(|i| {
            let x = p.best_response(i, &lambda, eta)?;
            let usage = p.usage(i, &x);
            if usage.len() != k {
                return Err(Error::input(format!(
                    "agent {i} reports {} constraint usages, expected {k}",
                    usage.len()
                )));
            }
            let sq: f64 = x.iter().map(|v| v * v).sum();
            let priced: f64 = usage.iter().zip(&lambda).map(|(c, l)| c * l).sum();
            Ok((p.value(i, &x) - 0.5 * eta * sq - priced, usage))
        })
        .collect();
    let mut value: f64 = lambda.iter().zip(p.bounds()).map(|(l, b)| l * b).sum();
    let mut grad = p.bounds().to_vec();
    // Sequential reduction keeps results independent of thread scheduling.
    for r in per_agent {
        let (v, usage) = r?;
        value += v;
        for (g, c) in grad.iter_mut().zip(&usage) {
            *g -= c;
        }
    }
    let residual = projected_residual(&lambda, &grad);
    Ok(Point {
        lambda,
        value,
        grad,
        residual,
    })
}

/// `|lambda - max(0, lambda - grad)|_2`.
pub fn projected_residual(lambda: &[f64], grad: &[f64]) -> f64 {
    lambda
        .iter()
        .zip(grad)
        .map(|(l, g)| {
            let r = l - (l - g).max(0.0);
            r * r
        })
        .sum::<f64>()
        .sqrt()
}

/// Gradient of the regularized dual at `lambda`: `b_j - sum_i c_j^i(x^i)`.
pub fn dual_gradient<P: SeparableProgram>(p: &P, lambda: &DualVector, eta: f64) -> Result<Vec<f64>> {
    Ok(evaluate(p, lambda.as_slice().to_vec(), eta)?.grad)
}

/// Value of the regularized dual at `lambda`.
pub fn dual_value<P: SeparableProgram>(p: &P, lambda: &DualVector, eta: f64) -> Result<f64> {
    Ok(evaluate(p, lambda.as_slice().to_vec(), eta)?.value)
}

fn project_step(lambda: &[f64], dir: &[f64], t: f64) -> Vec<f64> {
    lambda.iter().zip(dir).map(|(l, d)| (l - t * d).max(0.0)).collect()
}

const SIGMA_MIN: f64 = 1e-30;
const SIGMA_MAX: f64 = 1e30;
const ARMIJO: f64 = 1e-4;

/// Slack for comparing dual values that differ only by rounding.
fn roundoff(value: f64) -> f64 {
    64.0 * f64::EPSILON * (1.0 + value.abs())
}

/// `tol`, raised to the rounding error of a gradient evaluation when that is
/// larger: each response coordinate carries error about
/// `eps_mach (1 + |lambda|_inf) / eta`, summed over the agents.
fn stopping_tol<P: SeparableProgram>(p: &P, lambda: &[f64], eta: f64, tol: f64) -> f64 {
    let lam = lambda.iter().fold(0.0f64, |m, l| m.max(l.abs()));
    let b = p.bounds().iter().fold(0.0f64, |m, b| m.max(b.abs()));
    let floor = 4.0 * f64::EPSILON * (p.agents() as f64 * (1.0 + lam) / eta + b);
    tol.max(floor)
}

fn initial_sigma(grad: &[f64]) -> f64 {
    let inf_norm = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
    if inf_norm > 0.0 {
        (1.0 / inf_norm).clamp(SIGMA_MIN, SIGMA_MAX)
    } else {
        1.0
    }
}

pub fn solve_regularized_dual<P: SeparableProgram>(
    p: &P,
    eta: f64,
    opts: &DualSolverOptions,
) -> Result<DualSolution> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::param(format!("regularization eta must be > 0, got {eta}")));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::param(format!("tolerance must be > 0, got {}", opts.tol)));
    }
    let k = p.constraints();
    if p.bounds().len() != k {
        return Err(Error::input("bounds length differs from constraint count"));
    }
    let mut cur = evaluate(p, vec![0.0; k], eta)?;
    let mut best_residual = cur.residual;
    let mut sigma = initial_sigma(&cur.grad);
    let mut history: VecDeque<f64> = VecDeque::from([cur.value]);
    let mut method = opts.method;
    let mut switched = false;

    for iter in 0..opts.max_iters {
        if cur.residual <= stopping_tol(p, &cur.lambda, eta, opts.tol) {
            debug!("dual converged in {iter} iterations, residual {:e}", cur.residual);
            return Ok(DualSolution {
                lambda: DualVector::new(cur.lambda)?,
                iterations: iter,
                residual: cur.residual,
                objective: cur.value,
            });
        }
        let newton = match method {
            DualMethod::ProjectedNewton => newton_step(p, &cur, eta, sigma)?,
            DualMethod::ProjectedGradient => None,
        };
        let next = match newton {
            Some(next) => next,
            None => gradient_step(p, &cur, eta, sigma, &history)?,
        };
        let s: Vec<f64> = next.lambda.iter().zip(&cur.lambda).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next.grad.iter().zip(&cur.grad).map(|(a, b)| a - b).collect();
        let ss: f64 = s.iter().map(|v| v * v).sum();
        let sy: f64 = s.iter().zip(&y).map(|(a, b)| a * b).sum();
        sigma = if sy > 0.0 { (ss / sy).clamp(SIGMA_MIN, SIGMA_MAX) } else { SIGMA_MAX.min(sigma * 10.0) };
        if ss == 0.0 && next.residual >= cur.residual {
            if !switched {
                switched = true;
                method = match method {
                    DualMethod::ProjectedNewton => DualMethod::ProjectedGradient,
                    DualMethod::ProjectedGradient => DualMethod::ProjectedNewton,
                };
                debug!("stalled at residual {:e}; continuing with {method:?}", cur.residual);
                sigma = initial_sigma(&cur.grad);
                history = VecDeque::from([cur.value]);
                continue;
            }
            return Err(Error::NonConvergence {
                iterations: iter + 1,
                grad_norm: cur.residual,
            });
        }
        cur = next;
        best_residual = best_residual.min(cur.residual);
        history.push_back(cur.value);
        if history.len() > 10 {
            history.pop_front();
        }
    }
    if cur.residual <= stopping_tol(p, &cur.lambda, eta, opts.tol) {
        return Ok(DualSolution {
            lambda: DualVector::new(cur.lambda)?,
            iterations: opts.max_iters,
            residual: cur.residual,
            objective: cur.value,
        });
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iters,
        grad_norm: cur.residual.min(best_residual),
    })
}

fn gradient_step<P: SeparableProgram>(
    p: &P,
    cur: &Point,
    eta: f64,
    sigma: f64,
    history: &VecDeque<f64>,
) -> Result<Point> {
    let target = project_step(&cur.lambda, &cur.grad, sigma);
    let dir: Vec<f64> = target.iter().zip(&cur.lambda).map(|(t, l)| t - l).collect();
    let slope: f64 = dir.iter().zip(&cur.grad).map(|(d, g)| d * g).sum();
    let reference = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut t = 1.0;
    let mut best: Option<Point> = None;
    for _ in 0..60 {
        let lambda: Vec<f64> = cur.lambda.iter().zip(&dir).map(|(l, d)| (l + t * d).max(0.0)).collect();
        let trial = evaluate(p, lambda, eta)?;
        if trial.value <= reference + ARMIJO * t * slope + roundoff(reference) {
            return Ok(trial);
        }
        if best.as_ref().is_none_or(|b| trial.residual < b.residual) {
            best = Some(trial);
        }
        t *= 0.5;
    }
    // Line search exhausted at rounding level: keep whichever trial point
    // reduced the residual most.
    Ok(best.expect("at least one trial evaluated"))
}

/// Returns `None` when the Newton direction is not accepted by the line search.
fn newton_step<P: SeparableProgram>(p: &P, cur: &Point, eta: f64, sigma: f64) -> Result<Option<Point>> {
    let k = cur.lambda.len();
    let hess = aggregate_curvature(p, &cur.lambda, &cur.grad, eta)?;
    let band = cur.residual.min(1e-3);
    let active: Vec<bool> = (0..k).map(|j| cur.lambda[j] <= band && cur.grad[j] > 0.0).collect();
    let max_diag = (0..k).map(|j| hess[j * k + j]).fold(0.0f64, f64::max);
    if max_diag <= 0.0 {
        return Ok(None);
    }
    let flat = 1e-12 * max_diag;
    let free: Vec<usize> = (0..k).filter(|&j| !active[j] && hess[j * k + j] > flat).collect();
    let mut dir = vec![0.0; k];
    for j in 0..k {
        if !free.contains(&j) {
            // Active or curvature-free coordinate: scaled gradient step.
            let h = hess[j * k + j];
            dir[j] = if h > flat { cur.grad[j] / h } else { sigma * cur.grad[j] };
        }
    }
    if !free.is_empty() {
        let f = free.len();
        let mut a = vec![0.0; f * f];
        let mut rhs = vec![0.0; f];
        for (r, &jr) in free.iter().enumerate() {
            rhs[r] = cur.grad[jr];
            for (c, &jc) in free.iter().enumerate() {
                a[r * f + c] = hess[jr * k + jc];
            }
            a[r * f + r] += flat;
        }
        let Some(sol) = solve_spd(&mut a, &mut rhs, f) else {
            return Ok(None);
        };
        for (r, &jr) in free.iter().enumerate() {
            dir[jr] = sol[r];
        }
    }
    let mut t = 1.0;
    for _ in 0..40 {
        let lambda = project_step(&cur.lambda, &dir, t);
        let predicted: f64 = (0..k)
            .map(|j| {
                if free.contains(&j) {
                    t * cur.grad[j] * dir[j]
                } else {
                    cur.grad[j] * (cur.lambda[j] - lambda[j])
                }
            })
            .sum();
        let trial = evaluate(p, lambda, eta)?;
        let decrease = cur.value - trial.value;
        // Value changes below rounding level carry no information; such a
        // step must instead halve the residual.
        let noise = roundoff(cur.value);
        let armijo = decrease >= ARMIJO * predicted - noise;
        if (armijo && decrease > noise) || (decrease > -noise && trial.residual <= 0.5 * cur.residual) {
            return Ok(Some(trial));
        }
        t *= 0.5;
    }
    Ok(None)
}

fn aggregate_curvature<P: SeparableProgram>(p: &P, lambda: &[f64], grad: &[f64], eta: f64) -> Result<Vec<f64>> {
    let k = lambda.len();
    let analytic: Option<Vec<Vec<f64>>> = (0..p.agents())
        .into_par_iter()
        .map(|i| p.demand_curvature(i, lambda, eta))
        .collect();
    if let Some(parts) = analytic {
        let mut h = vec![0.0; k * k];
        for part in parts {
            for (a, b) in h.iter_mut().zip(&part) {
                *a += b;
            }
        }
        return Ok(h);
    }
    // Forward differences of the gradient.
    let mut h = vec![0.0; k * k];
    for b in 0..k {
        let step = 1e-7 * eta.max(1e-12) * (1.0 + lambda[b]);
        let mut shifted = lambda.to_vec();
        shifted[b] += step;
        let g = evaluate(p, shifted, eta)?.grad;
        for a in 0..k {
            h[a * k + b] = (g[a] - grad[a]) / step;
        }
    }
    // Symmetrize.
    for a in 0..k {
        for b in (a + 1)..k {
            let m = 0.5 * (h[a * k + b] + h[b * k + a]);
            h[a * k + b] = m;
            h[b * k + a] = m;
        }
    }
    Ok(h)
}

/// Cholesky solve of a dense symmetric positive definite system; `None` if a
/// pivot is not positive.
fn solve_spd(a: &mut [f64], rhs: &mut [f64], n: usize) -> Option<Vec<f64>> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for c in 0..j {
            d -= a[j * n + c] * a[j * n + c];
        }
        if !(d > 0.0) {
            return None;
        }
        let d = d.sqrt();
        a[j * n + j] = d;
        for r in (j + 1)..n {
            let mut s = a[r * n + j];
            for c in 0..j {
                s -= a[r * n + c] * a[j * n + c];
            }
            a[r * n + j] = s / d;
        }
    }
    for r in 0..n {
        let mut s = rhs[r];
        for c in 0..r {
            s -= a[r * n + c] * rhs[c];
        }
        rhs[r] = s / a[r * n + r];
    }
    for r in (0..n).rev() {
        let mut s = rhs[r];
        for c in (r + 1)..n {
            s -= a[c * n + r] * rhs[c];
        }
        rhs[r] = s / a[r * n + r];
    }
    Some(rhs.to_vec())
}
