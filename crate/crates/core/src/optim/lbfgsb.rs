//! Box-constrained limited-memory BFGS.
//!
//! A projected variant: variables sitting on a bound with the gradient
//! pointing outward are frozen for the iteration, the two-loop recursion
//! runs on the remaining free variables, and a backtracking Armijo search is
//! done along the projected path. Each iteration costs `O(m D)`.

use std::collections::VecDeque;

use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct LbfgsbConfig {
    pub memory: usize,
    pub max_iterations: usize,
    /// Infinity-norm tolerance on the projected gradient.
    pub pg_tol: f64,
    /// Relative tolerance on successive function values.
    pub f_tol: f64,
}

impl Default for LbfgsbConfig {
    fn default() -> Self {
        Self { memory: 10, max_iterations: 200, pg_tol: 1e-6, f_tol: 1e-10 }
    }
}

#[derive(Clone, Debug)]
pub struct BoxMinResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*l, *u);
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn projected_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((xi, gi), (l, u))| {
            if (*xi <= *l && *gi > 0.0) || (*xi >= *u && *gi < 0.0) {
                0.0
            } else {
                *gi
            }
        })
        .collect()
}

/// Minimizes `f` over the box `[lower, upper]` starting from `x0`.
///
/// `f` returns the value and gradient. Errors from `f` at the starting point
/// are propagated; errors at trial points are treated as failed steps.
pub fn minimize_box<F>(
    mut f: F,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &LbfgsbConfig,
) -> Result<BoxMinResult>
where
    F: FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut fx, mut g) = f(&x)?;
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::with_capacity(cfg.memory);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iterations {
        let pg = projected_gradient(&x, &g, lower, upper);
        if pg.iter().all(|v| v.abs() <= cfg.pg_tol) {
            converged = true;
            break;
        }
        let free: Vec<bool> = pg.iter().map(|v| *v != 0.0).collect();

        // two-loop recursion on the free variables
        let mut q: Vec<f64> = pg.clone();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for i in 0..n {
                if free[i] {
                    q[i] -= a * y[i];
                }
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let yy = dot(y, y);
            if yy > 0.0 {
                let scale = dot(s, y) / yy;
                q.iter_mut().for_each(|v| *v *= scale);
            }
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for i in 0..n {
                if free[i] {
                    q[i] += s[i] * (a - b);
                }
            }
        }
        let mut dir: Vec<f64> = q.iter().zip(&free).map(|(v, f)| if *f { -v } else { 0.0 }).collect();
        if dot(&dir, &g) >= 0.0 {
            dir = pg.iter().map(|v| -v).collect();
            pairs.clear();
        }

        let mut step = if pairs.is_empty() {
            let norm = dot(&dir, &dir).sqrt();
            (1.0 / norm).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        for _ in 0..40 {
            let mut xt: Vec<f64> = x.iter().zip(&dir).map(|(a, b)| a + step * b).collect();
            project(&mut xt, lower, upper);
            let moved: Vec<f64> = xt.iter().zip(&x).map(|(a, b)| a - b).collect();
            let decrease = dot(&g, &moved);
            if decrease >= 0.0 {
                step *= 0.5;
                continue;
            }
            if let Ok((ft, gt)) = f(&xt) {
                if ft.is_finite() && ft <= fx + 1e-4 * decrease {
                    accepted = Some((xt, ft, gt, moved));
                    break;
                }
            }
            step *= 0.5;
        }
        iterations += 1;
        let Some((xt, ft, gt, s)) = accepted else {
            break;
        };
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-10 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if pairs.len() == cfg.memory {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        let rel = (fx - ft).abs() / fx.abs().max(ft.abs()).max(1.0);
        x = xt;
        fx = ft;
        g = gt;
        if rel <= cfg.f_tol {
            converged = true;
            break;
        }
    }
    Ok(BoxMinResult { x, value: fx, iterations, converged })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rosenbrock(x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (a, b) = (x[0], x[1]);
        let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
        let g = vec![-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)];
        Ok((v, g))
    }

    #[test]
    fn unconstrained_rosenbrock() {
        let cfg = LbfgsbConfig { max_iterations: 500, pg_tol: 1e-8, f_tol: 0.0, ..Default::default() };
        let r = minimize_box(rosenbrock, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], &cfg).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r);
    }

    #[test]
    fn active_bound() {
        // minimum of (x - 2)^2 + (y + 3)^2 on [-1, 1]^2 is at (1, -1)
        let f = |x: &[f64]| Ok(((x[0] - 2.0).powi(2) + (x[1] + 3.0).powi(2), vec![2.0 * (x[0] - 2.0), 2.0 * (x[1] + 3.0)]));
        let r = minimize_box(f, &[0.0, 0.0], &[-1.0, -1.0], &[1.0, 1.0], &LbfgsbConfig::default()).unwrap();
        assert_eq!(r.x, vec![1.0, -1.0]);
        assert!(r.converged);
    }

    #[test]
    fn start_is_projected() {
        let f = |x: &[f64]| Ok((x[0] * x[0], vec![2.0 * x[0]]));
        let r = minimize_box(f, &[7.0], &[0.5], &[1.0], &LbfgsbConfig::default()).unwrap();
        assert_eq!(r.x, vec![0.5]);
    }
}
