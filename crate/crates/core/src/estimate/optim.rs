//! Limited-memory BFGS with Armijo backtracking.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

#[allow(unused_imports)]
use crate::num::Real;

#[derive(Debug, Clone, Copy)]
pub(crate) struct Options {
    pub max_iter: usize,
    /// Stop when `‖g‖∞ <= tol · max(1, |f|)`.
    pub tol: f64,
    /// Accept a stalled line search when the gradient is below this.
    pub stall_tol: f64,
    pub memory: usize,
    /// Largest allowed coordinate move per iteration.
    pub max_step: f64,
}

impl Default for Options {
    fn default() -> Self {
        Options { max_iter: 2000, tol: 1e-6, stall_tol: 1e-5, memory: 10, max_step: 2.0 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sup(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Minimizes `f`; `None` from `f` means "outside the domain" and is treated
/// as `+∞` by the line search. Returns `None` if `f(x0)` is undefined.
pub(crate) fn minimize<F>(mut f: F, x0: Vec<f64>, opts: &Options) -> Option<Outcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let (mut fx, mut g) = f(&x0)?;
    let mut x = x0;
    let mut hist: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(opts.memory);
    let small = |fx: f64, g: &[f64], tol: f64| sup(g) <= tol * fx.abs().max(1.0);
    let mut iter = 0;
    while iter < opts.max_iter {
        if small(fx, &g, opts.tol) {
            return Some(Outcome { x, f: fx, grad: g, iterations: iter, converged: true });
        }
        iter += 1;
        let mut d = two_loop(&g, &hist);
        if dot(&d, &g) >= 0.0 {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
        }
        let mut accepted = line_search(&mut f, &x, fx, &g, &d, hist.is_empty(), opts);
        if accepted.is_none() && !hist.is_empty() {
            hist.clear();
            d = g.iter().map(|v| -v).collect();
            accepted = line_search(&mut f, &x, fx, &g, &d, true, opts);
        }
        let Some((xn, fn_, gn)) = accepted else {
            let converged = small(fx, &g, opts.stall_tol);
            return Some(Outcome { x, f: fx, grad: g, iterations: iter, converged });
        };
        let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() && sy > 0.0 {
            if hist.len() == opts.memory {
                hist.pop_front();
            }
            hist.push_back((s, y, 1.0 / sy));
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    let converged = small(fx, &g, opts.tol);
    Some(Outcome { x, f: fx, grad: g, iterations: iter, converged })
}

fn two_loop(g: &[f64], hist: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
    let mut q: Vec<f64> = g.to_vec();
    let mut alpha = Vec::with_capacity(hist.len());
    for (s, y, rho) in hist.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alpha.push(a);
    }
    if let Some((s, y, _)) = hist.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for ((s, y, rho), a) in hist.iter().zip(alpha.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

type Point = (Vec<f64>, f64, Vec<f64>);

fn line_search<F>(f: &mut F, x: &[f64], fx: f64, g: &[f64], d: &[f64], fresh: bool, opts: &Options) -> Option<Point>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let slope = dot(g, d);
    let mut step = 1.0;
    if fresh {
        step = (1.0 / sup(d).max(1e-300)).min(1.0);
    }
    let dmax = sup(d) * step;
    if dmax > opts.max_step {
        step *= opts.max_step / dmax;
    }
    for _ in 0..60 {
        let xn: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + step * b).collect();
        if let Some((fv, gv)) = f(&xn) {
            if fv.is_finite() && fv <= fx + 1e-4 * step * slope {
                return Some((xn, fv, gv));
            }
            if fv.is_finite() && fv > fx {
                // quadratic interpolation on φ(step), safeguarded
                let denom = 2.0 * (fv - fx - slope * step);
                let trial = if denom > 0.0 { -slope * step * step / denom } else { step * 0.5 };
                step = trial.clamp(0.1 * step, 0.5 * step);
                continue;
            }
        }
        step *= 0.5;
    }
    None
}
