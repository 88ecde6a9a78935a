//! Descriptive statistics and time-series diagnostics.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

/// 5% critical value of chi-squared with 2 degrees of freedom.
pub const JB_CRITICAL_5PCT: f64 = 5.991;
/// 5% critical value of the constant-only Dickey-Fuller distribution.
pub const ADF_CRITICAL_5PCT: f64 = -2.86;

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample variance (n - 1 denominator).
pub fn sample_variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() as f64 - 1.0)
}

pub fn sample_std(values: &[f64]) -> f64 {
    sample_variance(values).sqrt()
}

/// Quantile of already sorted data, linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn quantile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    quantile_sorted(&s, q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DescriptiveSummary {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub q05: f64,
    pub q25: f64,
    pub q50: f64,
    pub q75: f64,
    pub q95: f64,
    pub max: f64,
    pub skewness: f64,
    pub excess_kurtosis: f64,
}

fn central_moments(values: &[f64]) -> (f64, f64, f64) {
    let m = mean(values);
    let n = values.len() as f64;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - m;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    (m2 / n, m3 / n, m4 / n)
}

/// `(skewness, excess kurtosis)` from population central moments.
pub fn shape_moments(values: &[f64]) -> (f64, f64) {
    let (m2, m3, m4) = central_moments(values);
    (m3 / m2.powf(1.5), m4 / (m2 * m2) - 3.0)
}

pub fn describe(values: &[f64]) -> Result<DescriptiveSummary> {
    if values.len() < 2 {
        return Err(Error::insufficient(2, values.len()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (skewness, excess_kurtosis) = shape_moments(values);
    Ok(DescriptiveSummary {
        count: values.len(),
        mean: mean(values),
        std: sample_std(values),
        min: sorted[0],
        q05: quantile_sorted(&sorted, 0.05),
        q25: quantile_sorted(&sorted, 0.25),
        q50: quantile_sorted(&sorted, 0.50),
        q75: quantile_sorted(&sorted, 0.75),
        q95: quantile_sorted(&sorted, 0.95),
        max: sorted[sorted.len() - 1],
        skewness,
        excess_kurtosis,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JarqueBera {
    pub statistic: f64,
    pub normality_rejected: bool,
}

pub fn jarque_bera(values: &[f64]) -> Result<JarqueBera> {
    if values.len() < 8 {
        return Err(Error::insufficient(8, values.len()));
    }
    let (s, k) = shape_moments(values);
    let statistic = values.len() as f64 / 6.0 * (s * s + k * k / 4.0);
    Ok(JarqueBera { statistic, normality_rejected: statistic > JB_CRITICAL_5PCT })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelogramPoint {
    pub lag: usize,
    pub value: f64,
    /// Half-width of the 95% band, `1.96 / sqrt(n)`.
    pub confidence_band: f64,
}

fn check_lags(values: &[f64], max_lag: usize) -> Result<()> {
    if max_lag >= values.len() {
        return Err(Error::insufficient(max_lag + 1, values.len()));
    }
    Ok(())
}

/// Sample autocorrelation at lags `0..=max_lag`.
fn autocorrelations(values: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    check_lags(values, max_lag)?;
    let m = mean(values);
    let dev: Vec<f64> = values.iter().map(|v| v - m).collect();
    let denom: f64 = dev.iter().map(|d| d * d).sum();
    if denom == 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok((0..=max_lag)
        .map(|k| dev[..dev.len() - k].iter().zip(&dev[k..]).map(|(a, b)| a * b).sum::<f64>() / denom)
        .collect())
}

/// ACF at lags `0..=max_lag` (lag 0 is always 1).
pub fn acf(values: &[f64], max_lag: usize) -> Result<Vec<CorrelogramPoint>> {
    let rho = autocorrelations(values, max_lag)?;
    let band = 1.96 / (values.len() as f64).sqrt();
    Ok(rho
        .into_iter()
        .enumerate()
        .map(|(lag, value)| CorrelogramPoint { lag, value, confidence_band: band })
        .collect())
}

/// PACF at lags `1..=max_lag` by Durbin-Levinson on the sample ACF.
pub fn pacf(values: &[f64], max_lag: usize) -> Result<Vec<CorrelogramPoint>> {
    let rho = autocorrelations(values, max_lag)?;
    let band = 1.96 / (values.len() as f64).sqrt();
    let mut out = Vec::with_capacity(max_lag);
    let mut phi: Vec<f64> = Vec::new();
    for k in 1..=max_lag {
        let num = rho[k] - (1..k).map(|j| phi[j - 1] * rho[k - j]).sum::<f64>();
        let den = 1.0 - (1..k).map(|j| phi[j - 1] * rho[j]).sum::<f64>();
        let kk = if den.abs() < f64::EPSILON { 0.0 } else { num / den };
        let next: Vec<f64> = (1..k).map(|j| phi[j - 1] - kk * phi[k - j - 1]).chain([kk]).collect();
        phi = next;
        out.push(CorrelogramPoint { lag: k, value: kk, confidence_band: band });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LjungBox {
    pub lag: usize,
    pub statistic: f64,
    pub p_value: f64,
}

pub fn chi_squared_sf(x: f64, dof: f64) -> f64 {
    // dof > 0 is guaranteed by callers
    ChiSquared::new(dof).map(|d| d.sf(x)).unwrap_or(f64::NAN)
}

pub fn ljung_box(residuals: &[f64], lags: &[usize]) -> Result<Vec<LjungBox>> {
    let max = lags.iter().copied().max().unwrap_or(0);
    if lags.iter().any(|&h| h == 0) {
        return Err(Error::invalid("Ljung-Box lags must be positive"));
    }
    let n = residuals.len() as f64;
    let rho = match autocorrelations(residuals, max) {
        Ok(r) => r,
        // a constant series is perfectly dependent
        Err(Error::ZeroVariance) => {
            return Ok(lags
                .iter()
                .map(|&lag| LjungBox { lag, statistic: f64::INFINITY, p_value: 0.0 })
                .collect())
        }
        Err(e) => return Err(e),
    };
    let mut cumulative = vec![0.0; max + 1];
    for k in 1..=max {
        cumulative[k] = cumulative[k - 1] + rho[k] * rho[k] / (n - k as f64);
    }
    Ok(lags
        .iter()
        .map(|&lag| {
            let statistic = n * (n + 2.0) * cumulative[lag];
            LjungBox { lag, statistic, p_value: chi_squared_sf(statistic, lag as f64) }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdfResult {
    pub statistic: f64,
    pub lag_order: usize,
    /// True when the unit root is rejected at 5%, i.e. the series looks stationary.
    pub stationary: bool,
}

/// `floor(12 * (n / 100)^(1/4))`.
pub fn adf_default_lag(n: usize) -> usize {
    (12.0 * (n as f64 / 100.0).powf(0.25)).floor() as usize
}

/// Augmented Dickey-Fuller regression with a constant.
pub fn adf_test(values: &[f64], lag_order: usize) -> Result<AdfResult> {
    if values.len() <= lag_order + 2 {
        return Err(Error::insufficient(lag_order + 3, values.len()));
    }
    let dy: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
    // rows t = lag_order .. dy.len(): dy[t] on 1, y[t], dy[t-1..t-lag]
    let rows = dy.len() - lag_order;
    let cols = 2 + lag_order;
    if rows <= cols {
        return Err(Error::insufficient(cols + lag_order + 2, values.len()));
    }
    let mut x = DMatrix::<f64>::zeros(rows, cols);
    let mut y = DVector::<f64>::zeros(rows);
    for (r, t) in (lag_order..dy.len()).enumerate() {
        y[r] = dy[t];
        x[(r, 0)] = 1.0;
        x[(r, 1)] = values[t];
        for j in 1..=lag_order {
            x[(r, 1 + j)] = dy[t - j];
        }
    }
    let xtx = x.transpose() * &x;
    let chol = xtx.clone().cholesky().ok_or(Error::Singular)?;
    let beta = chol.solve(&(x.transpose() * &y));
    let resid = &y - &x * &beta;
    let s2 = resid.dot(&resid) / (rows - cols) as f64;
    let inv = chol.inverse();
    let se = (s2 * inv[(1, 1)]).sqrt();
    if !(se > 0.0) || !se.is_finite() {
        return Err(Error::Singular);
    }
    let statistic = beta[1] / se;
    Ok(AdfResult { statistic, lag_order, stationary: statistic < ADF_CRITICAL_5PCT })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QqReference {
    Normal,
    StudentT { df: f64 },
}

/// `(theoretical, sample)` quantile pairs at plotting positions `(i - 0.5) / n`.
pub fn qq_points(values: &[f64], reference: QqReference) -> Result<Vec<(f64, f64)>> {
    if values.len() < 10 {
        return Err(Error::insufficient(10, values.len()));
    }
    let inv: Box<dyn Fn(f64) -> f64> = match reference {
        QqReference::Normal => {
            let d = Normal::new(0.0, 1.0).expect("standard normal");
            Box::new(move |p| d.inverse_cdf(p))
        }
        QqReference::StudentT { df } => {
            if !(df > 0.0) {
                return Err(Error::invalid(format!("unsupported degrees of freedom {df}")));
            }
            let d = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::invalid(e.to_string()))?;
            Box::new(move |p| d.inverse_cdf(p))
        }
    };
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(sorted
        .into_iter()
        .enumerate()
        .map(|(i, s)| (inv((i as f64 + 0.5) / n), s))
        .collect())
}
