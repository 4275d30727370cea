//! Limited-memory BFGS with a monotone Armijo backtracking line search.

use crate::error::Result;
use std::collections::VecDeque;

#[derive(Clone, Copy, Debug)]
pub struct LbfgsOptions {
    pub memory: usize,
    pub max_iter: usize,
    /// Stop once a full iteration lowers the objective by less than this
    /// fraction of its value.
    pub rel_tol: f64,
    /// Stop once the max-norm of the gradient falls below this.
    pub grad_tol: f64,
}

impl Default for LbfgsOptions {
    fn default() -> Self {
        LbfgsOptions {
            memory: 10,
            max_iter: 5000,
            rel_tol: 1e-10,
            grad_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StopReason {
    Gradient,
    RelativeDecrease,
    IterationCap,
    LineSearch,
}

#[derive(Clone, Debug)]
pub struct LbfgsReport {
    pub iterations: usize,
    /// Objective after each accepted step, starting with the initial value.
    pub history: Vec<f64>,
    pub reason: StopReason,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Minimizes `fg` (which returns the value and writes the gradient) in place.
pub fn minimize<F>(x: &mut [f64], mut fg: F, opts: &LbfgsOptions) -> Result<LbfgsReport>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<f64>,
{
    let n = x.len();
    let mut g = vec![0.0; n];
    let mut f = fg(x, &mut g)?;
    let mut history = vec![f];
    let mut mem: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut d = vec![0.0; n];
    let mut xn = vec![0.0; n];
    let mut gn = vec![0.0; n];
    let mut alpha = vec![0.0; opts.memory];
    for it in 0..opts.max_iter {
        let gmax = g.iter().fold(0.0f64, |s, v| s.max(v.abs()));
        if gmax <= opts.grad_tol {
            return Ok(LbfgsReport { iterations: it, history, reason: StopReason::Gradient });
        }
        // two-loop recursion
        d.copy_from_slice(&g);
        for (k, (s, y, rho)) in mem.iter().enumerate().rev() {
            alpha[k] = rho * dot(s, &d);
            for i in 0..n {
                d[i] -= alpha[k] * y[i];
            }
        }
        let scale = mem.back().map_or(1.0 / dot(&g, &g).sqrt(), |(s, y, _)| dot(s, y) / dot(y, y));
        d.iter_mut().for_each(|v| *v *= scale);
        for (k, (s, y, rho)) in mem.iter().enumerate() {
            let b = rho * dot(y, &d);
            for i in 0..n {
                d[i] += s[i] * (alpha[k] - b);
            }
        }
        d.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            mem.clear();
            let s = 1.0 / dot(&g, &g).sqrt();
            for i in 0..n {
                d[i] = -g[i] * s;
            }
            slope = dot(&g, &d);
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            for i in 0..n {
                xn[i] = x[i] + t * d[i];
            }
            let fnew = fg(&xn, &mut gn)?;
            if fnew.is_finite() && fnew <= f + 1e-4 * t * slope {
                accepted = Some(fnew);
                break;
            }
            t *= 0.5;
        }
        let Some(fnew) = accepted else {
            return Ok(LbfgsReport { iterations: it, history, reason: StopReason::LineSearch });
        };
        let s: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
        let y: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        let sy = dot(&s, &y);
        if sy > 1e-16 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if mem.len() == opts.memory {
                mem.pop_front();
            }
            mem.push_back((s, y, 1.0 / sy));
        }
        x.copy_from_slice(&xn);
        g.copy_from_slice(&gn);
        let decrease = f - fnew;
        f = fnew;
        history.push(f);
        if decrease <= opts.rel_tol * f.abs() {
            return Ok(LbfgsReport {
                iterations: it + 1,
                history,
                reason: StopReason::RelativeDecrease,
            });
        }
    }
    Ok(LbfgsReport {
        iterations: opts.max_iter,
        history,
        reason: StopReason::IterationCap,
    })
}
