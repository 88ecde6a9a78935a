//! Two-stage ARMA-GARCH: ARMA by Gaussian CSS, then GARCH on the ARMA residuals.

pub mod arma;
pub mod garch;
pub mod optimizer;
pub mod simulate;

use serde::{Deserialize, Serialize};

pub use arma::{arma_residuals, fit_arma, select_order, ArmaFit, ArmaParams, OrderCandidate, OrderSelection};
pub use garch::{conditional_variance, fit_garch, GarchEstimate, GarchParams, InnovationKind};

use crate::error::Result;
use crate::market_data::{Alphabet, ReturnSeries, SignalSeries};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArmaGarchOrder {
    pub p: usize,
    pub q: usize,
    pub n: usize,
    pub m: usize,
}

impl Default for ArmaGarchOrder {
    fn default() -> Self {
        Self { p: 1, q: 1, n: 1, m: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GarchFit {
    pub arma: ArmaParams,
    pub garch: GarchParams,
    /// GARCH-stage log-likelihood of the ARMA residuals.
    pub log_likelihood: f64,
    /// BIC counting every ARMA and GARCH parameter.
    pub bic: f64,
    pub arma_log_likelihood: f64,
    pub arma_bic: f64,
    pub residuals: Vec<f64>,
    pub conditional_variance: Vec<f64>,
    pub standardized_residuals: Vec<f64>,
    /// Training returns, kept so forecasts can continue the recursions.
    pub data: Vec<f64>,
}

pub fn fit_arma_garch(returns: &[f64], order: ArmaGarchOrder, innovation: InnovationKind) -> Result<GarchFit> {
    let arma = fit_arma(returns, order.p, order.q)?;
    let est = fit_garch(&arma.residuals, order.n, order.m, innovation)?;
    let var = conditional_variance(&est.params, &arma.residuals)?;
    let standardized = arma.residuals.iter().zip(&var).map(|(e, s2)| e / s2.sqrt()).collect();
    let k = order.p + order.q + 1 + 1 + order.n + order.m + usize::from(est.params.df.is_some());
    Ok(GarchFit {
        bic: arma::bic(est.log_likelihood, k, returns.len()),
        log_likelihood: est.log_likelihood,
        arma_log_likelihood: arma.log_likelihood,
        arma_bic: arma.bic,
        arma: arma.params,
        garch: est.params,
        residuals: arma.residuals,
        conditional_variance: var,
        standardized_residuals: standardized,
        data: returns.to_vec(),
    })
}

/// One-step mean forecasts with static parameters. Element `i` is made after
/// observing `test[i]` and predicts the return that follows it. Innovations on
/// test data are realized returns minus the forecast made the step before.
pub fn one_step_predictions(params: &ArmaParams, train: &[f64], train_residuals: &[f64], test: &[f64]) -> Vec<f64> {
    let mut y = train.to_vec();
    let mut eps = train_residuals.to_vec();
    let recent = |v: &[f64], k: usize| v.iter().rev().take(k).copied().collect::<Vec<f64>>();
    let mut pending = params.predict(&recent(&y, params.p()), &recent(&eps, params.q()));
    let mut out = Vec::with_capacity(test.len());
    for &r in test {
        eps.push(r - pending);
        y.push(r);
        pending = params.predict(&recent(&y, params.p()), &recent(&eps, params.q()));
        out.push(pending);
    }
    out
}

/// Directional signals in {-1, +1}; a zero forecast maps to -1.
pub fn forecast_signal(fit: &GarchFit, test_returns: &ReturnSeries) -> Result<SignalSeries> {
    let preds = one_step_predictions(&fit.arma, &fit.data, &fit.residuals, &test_returns.values);
    let values = preds.iter().map(|&p| Alphabet::Directional.code(p > 0.0)).collect();
    SignalSeries::new(test_returns.dates.clone(), values, Alphabet::Directional)
}
