//! Technical indicators and the four-column feature frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{LabelKind, LabeledFrame, PriceSeries};

pub const RSI: &str = "rsi";
pub const ROC: &str = "roc";
pub const MACD: &str = "macd";
pub const K_PERCENT: &str = "k_percent";
pub const FEATURE_COLUMNS: [&str; 4] = [RSI, ROC, MACD, K_PERCENT];

/// Indicator values aligned with the input; the first `warmup` entries are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    pub values: Vec<f64>,
    pub warmup: usize,
}

impl IndicatorSeries {
    fn with_warmup(len: usize, warmup: usize) -> Self {
        Self { values: vec![f64::NAN; len], warmup }
    }

    pub fn get(&self, t: usize) -> Option<f64> {
        (t >= self.warmup).then(|| self.values[t])
    }

    pub fn defined(&self) -> &[f64] {
        &self.values[self.warmup.min(self.values.len())..]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_window(len: usize, window: usize) -> Result<()> {
    if window == 0 {
        return Err(Error::invalid("window must be at least 1"));
    }
    if len < window {
        return Err(Error::insufficient(window, len));
    }
    Ok(())
}

pub fn sma(values: &[f64], window: usize) -> Result<IndicatorSeries> {
    check_window(values.len(), window)?;
    let mut out = IndicatorSeries::with_warmup(values.len(), window - 1);
    let mut sum: f64 = values[..window - 1].iter().sum();
    for t in window - 1..values.len() {
        sum += values[t];
        out.values[t] = sum / window as f64;
        sum -= values[t + 1 - window];
    }
    Ok(out)
}

/// EMA with `k = 2 / (n + 1)`, seeded by the SMA of the first `n` values.
pub fn ema(values: &[f64], window: usize) -> Result<IndicatorSeries> {
    check_window(values.len(), window)?;
    let k = 2.0 / (window as f64 + 1.0);
    let mut out = IndicatorSeries::with_warmup(values.len(), window - 1);
    let mut prev = values[..window].iter().sum::<f64>() / window as f64;
    out.values[window - 1] = prev;
    for t in window..values.len() {
        prev = k * values[t] + (1.0 - k) * prev;
        out.values[t] = prev;
    }
    Ok(out)
}

/// RSI over the trailing `period` price changes with simple averages.
pub fn rsi(close: &[f64], period: usize) -> Result<IndicatorSeries> {
    if period == 0 {
        return Err(Error::invalid("period must be at least 1"));
    }
    if close.len() <= period {
        return Err(Error::insufficient(period + 1, close.len()));
    }
    let mut out = IndicatorSeries::with_warmup(close.len(), period);
    let changes: Vec<f64> = close.windows(2).map(|w| w[1] - w[0]).collect();
    for t in period..close.len() {
        // changes[t - 1] is P(t) - P(t-1)
        let window = &changes[t - period..t];
        let up: f64 = window.iter().map(|d| d.max(0.0)).sum::<f64>() / period as f64;
        let down: f64 = -window.iter().map(|d| d.min(0.0)).sum::<f64>() / period as f64;
        out.values[t] = rsi_from_averages(up, down);
    }
    Ok(out)
}

fn rsi_from_averages(up: f64, down: f64) -> f64 {
    if down == 0.0 {
        100.0
    } else if up == 0.0 {
        0.0
    } else {
        100.0 - 100.0 / (1.0 + up / down)
    }
}

/// Stochastic %K over the trailing `period` bars.
///
/// The range also spans the closes so a bar whose close lies outside its own
/// high/low still yields a value in `[0, 100]`. A flat range gives 50.
pub fn stochastic_k(series: &PriceSeries, period: usize) -> Result<IndicatorSeries> {
    let bars = series.bars();
    check_window(bars.len(), period)?;
    let mut out = IndicatorSeries::with_warmup(bars.len(), period - 1);
    for t in period - 1..bars.len() {
        let window = &bars[t + 1 - period..=t];
        let hi = window.iter().map(|b| b.high.max(b.close)).fold(f64::NEG_INFINITY, f64::max);
        let lo = window.iter().map(|b| b.low.min(b.close)).fold(f64::INFINITY, f64::min);
        out.values[t] = if hi > lo { 100.0 * (bars[t].close - lo) / (hi - lo) } else { 50.0 };
    }
    Ok(out)
}

pub fn macd(close: &[f64], fast: usize, slow: usize) -> Result<IndicatorSeries> {
    if fast == 0 || fast > slow {
        return Err(Error::invalid(format!("MACD needs 1 <= fast ({fast}) <= slow ({slow})")));
    }
    if close.len() <= slow {
        return Err(Error::insufficient(slow + 1, close.len()));
    }
    let f = ema(close, fast)?;
    let s = ema(close, slow)?;
    let mut out = IndicatorSeries::with_warmup(close.len(), slow - 1);
    for t in slow - 1..close.len() {
        out.values[t] = f.values[t] - s.values[t];
    }
    Ok(out)
}

pub fn roc(close: &[f64], period: usize) -> Result<IndicatorSeries> {
    if period == 0 {
        return Err(Error::invalid("period must be at least 1"));
    }
    if close.len() <= period {
        return Err(Error::insufficient(period + 1, close.len()));
    }
    let mut out = IndicatorSeries::with_warmup(close.len(), period);
    for t in period..close.len() {
        let past = close[t - period];
        if past == 0.0 {
            return Err(Error::invalid(format!("zero close at index {}", t - period)));
        }
        out.values[t] = 100.0 * (close[t] - past) / past;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub rsi_period: usize,
    pub roc_period: usize,
    pub macd_fast: usize,
    pub macd_slow: usize,
    pub k_period: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { rsi_period: 14, roc_period: 9, macd_fast: 12, macd_slow: 26, k_period: 14 }
    }
}

impl FeatureConfig {
    /// Index of the first bar on which every indicator is defined.
    pub fn max_warmup(&self) -> usize {
        [self.rsi_period, self.roc_period, self.macd_slow - 1, self.k_period - 1]
            .into_iter()
            .max()
            .unwrap_or(0)
    }
}

/// Build the `rsi, roc, macd, k_percent` frame labelled with the next-day signal.
///
/// Row count is `len - max_warmup - 1`: warmup rows are dropped and the last
/// bar has no next day to label.
pub fn build_features(series: &PriceSeries, config: &FeatureConfig) -> Result<LabeledFrame> {
    let n = series.len();
    let warm = config.max_warmup();
    if n < warm + 2 {
        return Err(Error::insufficient(warm + 2, n));
    }
    let close = series.closes();
    let cols = [
        rsi(&close, config.rsi_period)?,
        roc(&close, config.roc_period)?,
        macd(&close, config.macd_fast, config.macd_slow)?,
        stochastic_k(series, config.k_period)?,
    ];
    let dates = series.dates();

    let range = warm..n - 1;
    let rows: Vec<Vec<f64>> = range.clone().map(|t| cols.iter().map(|c| c.values[t]).collect()).collect();
    if rows.is_empty() {
        return Err(Error::NoData);
    }
    let labels = range
        .clone()
        .map(|t| if (close[t + 1] / close[t]).ln() > 0.0 { 1.0 } else { 0.0 })
        .collect();
    Ok(LabeledFrame {
        dates: dates[range.clone()].to_vec(),
        columns: FEATURE_COLUMNS.iter().map(|s| s.to_string()).collect(),
        rows,
        label_kind: LabelKind::Signal,
        labels,
        close: close[range.clone()].to_vec(),
        next_close: close[warm + 1..n].to_vec(),
        next_dates: dates[warm + 1..n].to_vec(),
        scaling: None,
    })
}
