//! GARCH(n, m) on mean-free residuals.
//!
//! Naming: `alpha` multiplies lagged squared residuals and `beta` multiplies
//! lagged conditional variances, so a persistent fit has small alpha and large
//! beta.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::optimizer::{minimize, OptimizerConfig};
use crate::error::{Error, Result};

pub const DF_MIN: f64 = 2.05;
pub const DF_MAX: f64 = 100.0;
/// Fits with persistence at or above this are reported as boundary solutions.
pub const PERSISTENCE_BOUNDARY: f64 = 1.0 - 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InnovationKind {
    Normal,
    StudentT,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchParams {
    pub omega: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Student-t degrees of freedom; `None` for Gaussian innovations.
    pub df: Option<f64>,
}

impl GarchParams {
    pub fn persistence(&self) -> f64 {
        self.alpha.iter().sum::<f64>() + self.beta.iter().sum::<f64>()
    }

    pub fn unconditional_variance(&self) -> Option<f64> {
        let p = self.persistence();
        (p < 1.0).then(|| self.omega / (1.0 - p))
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.omega.is_finite() && self.alpha.iter().chain(&self.beta).all(|v| v.is_finite());
        if !finite || self.omega <= 0.0 {
            return Err(Error::invalid("GARCH omega must be positive and coefficients finite"));
        }
        if self.alpha.iter().chain(&self.beta).any(|&v| v < 0.0) {
            return Err(Error::invalid("GARCH coefficients must be non-negative"));
        }
        if self.persistence() >= 1.0 {
            return Err(Error::invalid("GARCH persistence must be below 1"));
        }
        if let Some(df) = self.df {
            if !(df > 2.0) {
                return Err(Error::invalid("Student-t degrees of freedom must exceed 2"));
            }
        }
        Ok(())
    }
}

/// sigma2_t = omega + sum alpha_i eps_{t-i}^2 + sum beta_j sigma2_{t-j},
/// with pre-sample eps^2 and sigma2 set to `seed`.
pub fn variance_recursion(params: &GarchParams, residuals: &[f64], seed: f64) -> Vec<f64> {
    let mut var = vec![0.0; residuals.len()];
    for t in 0..residuals.len() {
        let mut s2 = params.omega;
        for (i, a) in params.alpha.iter().enumerate() {
            s2 += a * if t > i { residuals[t - i - 1].powi(2) } else { seed };
        }
        for (j, b) in params.beta.iter().enumerate() {
            s2 += b * if t > j { var[t - j - 1] } else { seed };
        }
        var[t] = s2;
    }
    var
}

fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        0.0
    } else {
        x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
    }
}

/// Conditional variance seeded at the sample variance of the (mean-free) residuals.
pub fn conditional_variance(params: &GarchParams, residuals: &[f64]) -> Result<Vec<f64>> {
    params.validate()?;
    Ok(variance_recursion(params, residuals, mean_square(residuals)))
}

pub fn log_likelihood(params: &GarchParams, residuals: &[f64]) -> f64 {
    let var = variance_recursion(params, residuals, mean_square(residuals));
    log_likelihood_given_variance(params.df, residuals, &var)
}

fn log_likelihood_given_variance(df: Option<f64>, residuals: &[f64], var: &[f64]) -> f64 {
    match df {
        None => {
            let c = (2.0 * std::f64::consts::PI).ln();
            residuals.iter().zip(var).map(|(e, s2)| -0.5 * (c + s2.ln() + e * e / s2)).sum()
        }
        Some(nu) => {
            let c = ln_gamma((nu + 1.0) / 2.0) - ln_gamma(nu / 2.0) - 0.5 * (std::f64::consts::PI * (nu - 2.0)).ln();
            residuals
                .iter()
                .zip(var)
                .map(|(e, s2)| c - 0.5 * s2.ln() - 0.5 * (nu + 1.0) * (1.0 + e * e / ((nu - 2.0) * s2)).ln())
                .sum()
        }
    }
}

struct Transform {
    n: usize,
    m: usize,
    student: bool,
}

impl Transform {
    fn decode(&self, theta: &[f64]) -> GarchParams {
        let k = self.n + self.m;
        let exps: Vec<f64> = theta[1..1 + k].iter().map(|z| z.exp()).collect();
        let denom = 1.0 + exps.iter().sum::<f64>();
        let w: Vec<f64> = exps.iter().map(|e| e / denom).collect();
        let df = self.student.then(|| {
            let s = 1.0 / (1.0 + (-theta[1 + k]).exp());
            DF_MIN + (DF_MAX - DF_MIN) * s
        });
        GarchParams { omega: theta[0].exp(), alpha: w[..self.n].to_vec(), beta: w[self.n..].to_vec(), df }
    }

    fn encode(&self, p: &GarchParams) -> Vec<f64> {
        let slack = 1.0 - p.persistence();
        let mut theta = vec![p.omega.ln()];
        theta.extend(p.alpha.iter().chain(&p.beta).map(|w| (w / slack).ln()));
        if let Some(df) = p.df {
            let s = (df - DF_MIN) / (DF_MAX - DF_MIN);
            theta.push((s / (1.0 - s)).ln());
        }
        theta
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchEstimate {
    pub params: GarchParams,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub log_likelihood_trace: Vec<f64>,
}

pub const GARCH_MIN_LENGTH: usize = 250;

pub fn fit_garch(residuals: &[f64], n: usize, m: usize, innovation: InnovationKind) -> Result<GarchEstimate> {
    if residuals.len() < GARCH_MIN_LENGTH {
        return Err(Error::insufficient(GARCH_MIN_LENGTH, residuals.len()));
    }
    if n == 0 {
        return Err(Error::invalid("GARCH needs at least one squared-residual lag"));
    }
    if residuals.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("GARCH input contains non-finite values"));
    }
    let var = mean_square(residuals);
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let student = innovation == InnovationKind::StudentT;
    let tr = Transform { n, m, student };
    let (a0, b0) = (0.05, if m > 0 { 0.90 } else { 0.0 });
    let start = GarchParams {
        omega: var * (1.0 - a0 - b0),
        alpha: vec![a0 / n as f64; n],
        beta: vec![b0 / m.max(1) as f64; m],
        df: student.then_some(8.0),
    };
    let len = residuals.len() as f64;
    let objective = |theta: &[f64]| {
        let p = tr.decode(theta);
        let v = variance_recursion(&p, residuals, var);
        -log_likelihood_given_variance(p.df, residuals, &v) / len
    };
    let min = minimize(objective, tr.encode(&start), &OptimizerConfig::default())?;
    let params = tr.decode(&min.x);
    if params.persistence() >= PERSISTENCE_BOUNDARY {
        return Err(Error::NonStationary(format!(
            "GARCH boundary solution, persistence {:.8}",
            params.persistence()
        )));
    }
    Ok(GarchEstimate {
        log_likelihood: -min.value * len,
        iterations: min.iterations,
        log_likelihood_trace: min.trace.iter().map(|v| -v * len).collect(),
        params,
    })
}
