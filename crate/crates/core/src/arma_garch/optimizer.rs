//! BFGS with central-difference gradients and a monotone backtracking line search.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    /// Stop when no parameter moves by more than this in one iteration.
    pub param_tolerance: f64,
    /// Stop when the infinity norm of the gradient drops below this.
    pub gradient_tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { max_iterations: 2000, param_tolerance: 1e-8, gradient_tolerance: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    /// Objective after each accepted step, starting with the initial point.
    pub trace: Vec<f64>,
}

fn eval(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
    let v = f(x);
    if v.is_finite() {
        v
    } else {
        f64::INFINITY
    }
}

pub fn numerical_gradient(f: &impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1.0);
            probe[i] = x[i] + h;
            let up = eval(f, &probe);
            probe[i] = x[i] - h;
            let down = eval(f, &probe);
            probe[i] = x[i];
            let g = (up - down) / (2.0 * h);
            if g.is_finite() {
                g
            } else {
                0.0
            }
        })
        .collect()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

/// Minimize `f` from `x0`. The objective never increases between iterations.
pub fn minimize(f: impl Fn(&[f64]) -> f64, x0: Vec<f64>, config: &OptimizerConfig) -> Result<Minimum> {
    let n = x0.len();
    let mut x = x0;
    let mut fx = eval(&f, &x);
    if !fx.is_finite() {
        return Err(Error::invalid("objective is not finite at the starting point"));
    }
    let mut g = numerical_gradient(&f, &x);
    let mut h_inv = identity(n);
    let mut trace = vec![fx];
    let mut fresh = true;

    for iter in 0..config.max_iterations {
        let gnorm = inf_norm(&g);
        if gnorm < config.gradient_tolerance {
            return Ok(Minimum { x, value: fx, iterations: iter, gradient_norm: gnorm, trace });
        }
        let mut dir: Vec<f64> = (0..n).map(|i| -dot(&h_inv[i], &g)).collect();
        let mut slope = dot(&dir, &g);
        if slope >= 0.0 {
            h_inv = identity(n);
            fresh = true;
            dir = g.iter().map(|v| -v).collect();
            slope = dot(&dir, &g);
        }
        if fresh {
            // unit-length first step along steepest descent
            let scale = 1.0 / inf_norm(&dir).max(1.0);
            dir.iter_mut().for_each(|d| *d *= scale);
            slope *= scale;
        }

        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + step * di).collect();
            let ft = eval(&f, &trial);
            if ft <= fx + 1e-4 * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= 0.5;
        }
        let Some((x_new, f_new)) = accepted else {
            if fresh {
                // no descent even along the gradient: numerically stationary
                return Ok(Minimum { x, value: fx, iterations: iter, gradient_norm: gnorm, trace });
            }
            h_inv = identity(n);
            fresh = true;
            continue;
        };

        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let g_new = numerical_gradient(&f, &x_new);
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let converged = inf_norm(&s) < config.param_tolerance;
        x = x_new;
        fx = f_new;
        g = g_new;
        trace.push(fx);
        if converged {
            return Ok(Minimum { x, value: fx, iterations: iter + 1, gradient_norm: inf_norm(&g), trace });
        }

        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                h_inv.iter_mut().enumerate().for_each(|(i, row)| row[i] = scale);
            }
            bfgs_update(&mut h_inv, &s, &y, sy);
            fresh = false;
        }
    }
    Err(Error::NonConvergence { iterations: config.max_iterations, gradient_norm: inf_norm(&g) })
}

fn bfgs_update(h: &mut [Vec<f64>], s: &[f64], y: &[f64], sy: f64) {
    let n = s.len();
    let rho = 1.0 / sy;
    let hy: Vec<f64> = (0..n).map(|i| dot(&h[i], y)).collect();
    let yhy = dot(y, &hy);
    for i in 0..n {
        for j in 0..n {
            h[i][j] += (1.0 + rho * yhy) * rho * s[i] * s[j] - rho * (hy[i] * s[j] + s[i] * hy[j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(f, vec![-1.2, 1.0], &OptimizerConfig::default()).unwrap();
        assert!((m.x[0] - 1.0).abs() < 1e-4 && (m.x[1] - 1.0).abs() < 1e-4, "{:?}", m.x);
        assert!(m.trace.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn quadratic_badly_scaled() {
        let f = |x: &[f64]| 1e4 * (x[0] - 3.0).powi(2) + 1e-2 * (x[1] + 2.0).powi(2);
        let m = minimize(f, vec![0.0, 0.0], &OptimizerConfig::default()).unwrap();
        assert!((m.x[0] - 3.0).abs() < 1e-5);
        assert!((m.x[1] + 2.0).abs() < 1e-3);
    }

    #[test]
    fn iteration_cap_reports_gradient() {
        let f = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let cfg = OptimizerConfig { max_iterations: 2, ..Default::default() };
        match minimize(f, vec![-1.2, 1.0], &cfg) {
            Err(Error::NonConvergence { iterations, gradient_norm }) => {
                assert_eq!(iterations, 2);
                assert!(gradient_norm > 0.0);
            }
            other => panic!("{other:?}"),
        }
    }
}
