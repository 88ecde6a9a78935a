//! Conditional-sum-of-squares ARMA fit with Gaussian likelihood.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optimizer::{minimize, OptimizerConfig};
use crate::error::{Error, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaParams {
    pub mu: f64,
    pub ar: Vec<f64>,
    pub ma: Vec<f64>,
}

impl ArmaParams {
    pub fn p(&self) -> usize {
        self.ar.len()
    }

    pub fn q(&self) -> usize {
        self.ma.len()
    }

    fn from_vec(p: usize, theta: &[f64]) -> Self {
        Self { mu: theta[0], ar: theta[1..1 + p].to_vec(), ma: theta[1 + p..].to_vec() }
    }

    /// One-step prediction from histories ordered most recent first.
    pub fn predict(&self, recent_y: &[f64], recent_eps: &[f64]) -> f64 {
        let ar: f64 = self.ar.iter().zip(recent_y).map(|(a, y)| a * y).sum();
        let ma: f64 = self.ma.iter().zip(recent_eps).map(|(b, e)| b * e).sum();
        self.mu + ar + ma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmaFit {
    pub params: ArmaParams,
    pub sigma2: f64,
    pub log_likelihood: f64,
    pub bic: f64,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    /// Log-likelihood after each accepted optimizer step.
    pub log_likelihood_trace: Vec<f64>,
}

/// Residuals with pre-sample values fixed: y at the sample mean, innovations at zero.
pub fn arma_residuals(params: &ArmaParams, y: &[f64]) -> Vec<f64> {
    let pre = stats::mean(y);
    let mut eps = vec![0.0; y.len()];
    for t in 0..y.len() {
        let mut pred = params.mu;
        for (i, a) in params.ar.iter().enumerate() {
            pred += a * if t > i { y[t - i - 1] } else { pre };
        }
        for (j, b) in params.ma.iter().enumerate() {
            if t > j {
                pred += b * eps[t - j - 1];
            }
        }
        eps[t] = y[t] - pred;
    }
    eps
}

fn gaussian_loglik(sigma2: f64, n: usize) -> f64 {
    -0.5 * n as f64 * ((2.0 * std::f64::consts::PI * sigma2).ln() + 1.0)
}

pub fn bic(log_likelihood: f64, k: usize, n: usize) -> f64 {
    k as f64 * (n as f64).ln() - 2.0 * log_likelihood
}

/// Partial autocorrelations implied by an AR polynomial (step-down recursion).
/// The polynomial is stationary iff every magnitude is below one.
pub fn ar_reflection_coefficients(ar: &[f64]) -> Vec<f64> {
    let mut phi = ar.to_vec();
    let mut out = vec![0.0; ar.len()];
    for k in (0..ar.len()).rev() {
        let r = phi[k];
        out[k] = r;
        if r.abs() >= 1.0 {
            break;
        }
        let denom = 1.0 - r * r;
        let prev: Vec<f64> = (0..k).map(|j| (phi[j] + r * phi[k - 1 - j]) / denom).collect();
        phi.truncate(k);
        phi.copy_from_slice(&prev);
    }
    out
}

pub fn is_stationary(ar: &[f64]) -> bool {
    ar_reflection_coefficients(ar).iter().all(|r| r.abs() < 1.0)
}

pub fn fit_arma(y: &[f64], p: usize, q: usize) -> Result<ArmaFit> {
    let n = y.len();
    let k = p + q + 1;
    let needed = 50 * p.max(q).max(1);
    if n < needed {
        return Err(Error::insufficient(needed, n));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("ARMA input contains non-finite values"));
    }
    if stats::sample_variance(y) <= 0.0 {
        return Err(Error::ZeroVariance);
    }

    // mean negative log-likelihood per observation, up to constants
    let objective = |theta: &[f64]| {
        let params = ArmaParams::from_vec(p, theta);
        let eps = arma_residuals(&params, y);
        let ss = eps.iter().map(|e| e * e).sum::<f64>() / n as f64;
        0.5 * ss.ln()
    };
    let mut x0 = vec![0.0; k];
    x0[0] = stats::mean(y);
    let min = minimize(objective, x0, &OptimizerConfig::default())?;

    let params = ArmaParams::from_vec(p, &min.x);
    if !is_stationary(&params.ar) {
        return Err(Error::NonStationary(format!("AR coefficients {:?}", params.ar)));
    }
    let residuals = arma_residuals(&params, y);
    let sigma2 = residuals.iter().map(|e| e * e).sum::<f64>() / n as f64;
    let log_likelihood = gaussian_loglik(sigma2, n);
    let to_ll = |v: f64| gaussian_loglik((2.0 * v).exp(), n);
    Ok(ArmaFit {
        params,
        sigma2,
        log_likelihood,
        bic: bic(log_likelihood, k, n),
        residuals,
        iterations: min.iterations,
        log_likelihood_trace: min.trace.into_iter().map(to_ll).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderCandidate {
    pub p: usize,
    pub q: usize,
    pub bic: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderSelection {
    pub p: usize,
    pub q: usize,
    pub bic: f64,
    pub candidates: Vec<OrderCandidate>,
}

/// Grid search over ARMA(p, q) for p <= p_max, q <= q_max; lowest BIC wins.
/// Ties keep the smaller order (p first, then q).
pub fn select_order(y: &[f64], p_max: usize, q_max: usize) -> Result<OrderSelection> {
    let grid: Vec<(usize, usize)> = (0..=p_max).flat_map(|p| (0..=q_max).map(move |q| (p, q))).collect();
    let candidates: Vec<OrderCandidate> = grid
        .par_iter()
        .map(|&(p, q)| match fit_arma(y, p, q) {
            Ok(fit) => OrderCandidate { p, q, bic: Some(fit.bic), error: None },
            Err(e) => OrderCandidate { p, q, bic: None, error: Some(e.to_string()) },
        })
        .collect();
    let best = candidates
        .iter()
        .filter_map(|c| c.bic.map(|b| (c.p, c.q, b)))
        .fold(None, |acc: Option<(usize, usize, f64)>, cur| match acc {
            Some(a) if a.2 <= cur.2 => Some(a),
            _ => Some(cur),
        });
    match best {
        Some((p, q, bic)) => Ok(OrderSelection { p, q, bic, candidates }),
        None => {
            let reasons: Vec<String> = candidates
                .iter()
                .map(|c| format!("({},{}): {}", c.p, c.q, c.error.as_deref().unwrap_or("")))
                .collect();
            Err(Error::AllFailed(reasons.join("; ")))
        }
    }
}
