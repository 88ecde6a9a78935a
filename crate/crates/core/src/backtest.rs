//! Strategy simulation from signal series and performance metrics.

use std::collections::BTreeMap;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::indicators::sma;
use crate::market_data::{Alphabet, ReturnSeries, SignalSeries};

pub const TRADING_DAYS: f64 = 252.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    BuyAndHold,
    OnlyLong,
    LongShort,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::BuyAndHold, StrategyKind::OnlyLong, StrategyKind::LongShort];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::BuyAndHold => "buy_and_hold",
            StrategyKind::OnlyLong => "only_long",
            StrategyKind::LongShort => "long_short",
        }
    }

    fn position(self, signal: i8, alphabet: Alphabet) -> i8 {
        let up = signal == alphabet.high();
        match self {
            StrategyKind::BuyAndHold => 1,
            StrategyKind::OnlyLong => i8::from(up),
            StrategyKind::LongShort => {
                if up {
                    1
                } else {
                    -1
                }
            }
        }
    }
}

/// Crossover signal: 1 while SMA(fast) > SMA(slow), else the alphabet's low code.
/// Output starts at the first bar where the slow average is defined.
pub fn cross_signal(close: &[f64], dates: &[NaiveDate], fast: usize, slow: usize) -> Result<SignalSeries> {
    if close.len() != dates.len() {
        return Err(Error::invalid("close and dates differ in length"));
    }
    if fast == 0 || fast > slow {
        return Err(Error::invalid(format!("crossover needs 1 <= fast ({fast}) <= slow ({slow})")));
    }
    if close.len() <= slow {
        return Err(Error::insufficient(slow + 1, close.len()));
    }
    let f = sma(close, fast)?;
    let s = sma(close, slow)?;
    let values = (slow - 1..close.len()).map(|t| i8::from(f.values[t] > s.values[t])).collect();
    SignalSeries::new(dates[slow - 1..].to_vec(), values, Alphabet::Binary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquityCurve {
    pub kind: StrategyKind,
    /// Dates of the realized returns.
    pub dates: Vec<NaiveDate>,
    pub positions: Vec<i8>,
    /// Per-day strategy log returns.
    pub returns: Vec<f64>,
    /// exp(cumulative log return) - 1.
    pub cumulative: Vec<f64>,
}

impl EquityCurve {
    pub fn len(&self) -> usize {
        self.returns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.returns.is_empty()
    }

    pub fn total_return(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }

    /// Equity level 1 + cumulative, one value per day.
    pub fn equity(&self) -> Vec<f64> {
        self.cumulative.iter().map(|c| 1.0 + c).collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["date", "position", "daily_return", "cumulative"])?;
        for i in 0..self.len() {
            w.write_record([
                self.dates[i].to_string(),
                self.positions[i].to_string(),
                self.returns[i].to_string(),
                self.cumulative[i].to_string(),
            ])?;
        }
        w.flush().map_err(|source| Error::Io { path: "<equity csv>".into(), source })?;
        Ok(())
    }
}

/// Position from signal i earns `next_returns[i]`, which must be dated after the signal.
pub fn simulate(signals: &SignalSeries, next_returns: &ReturnSeries, kind: StrategyKind) -> Result<EquityCurve> {
    if signals.len() != next_returns.len() {
        return Err(Error::invalid(format!(
            "{} signals but {} returns",
            signals.len(),
            next_returns.len()
        )));
    }
    if let Some(i) = (0..signals.len()).find(|&i| next_returns.dates[i] <= signals.dates[i]) {
        return Err(Error::invalid(format!(
            "return dated {} does not follow signal dated {}",
            next_returns.dates[i], signals.dates[i]
        )));
    }
    let positions: Vec<i8> = signals.values.iter().map(|&s| kind.position(s, signals.alphabet)).collect();
    let returns: Vec<f64> = positions.iter().zip(&next_returns.values).map(|(&p, &r)| f64::from(p) * r).collect();
    let mut acc = 0.0;
    let cumulative = returns
        .iter()
        .map(|r| {
            acc += r;
            acc.exp() - 1.0
        })
        .collect();
    Ok(EquityCurve { kind, dates: next_returns.dates.clone(), positions, returns, cumulative })
}

pub fn sharpe(returns: &[f64]) -> Result<f64> {
    if returns.len() < 2 {
        return Err(Error::insufficient(2, returns.len()));
    }
    let n = returns.len() as f64;
    let mean = returns.iter().sum::<f64>() / n;
    let var = returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    if var <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    Ok(mean / var.sqrt() * TRADING_DAYS.sqrt())
}

/// Sum of gains over absolute sum of losses; `f64::INFINITY` when there are no losses.
/// No returns at all (or only zeros) gives 0.
pub fn profit_factor(returns: &[f64]) -> f64 {
    let gains: f64 = returns.iter().filter(|r| **r > 0.0).sum();
    let losses: f64 = returns.iter().filter(|r| **r < 0.0).map(|r| -r).sum();
    if losses > 0.0 {
        gains / losses
    } else if gains > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Drawdown series value / running max - 1 and its minimum.
pub fn max_drawdown(values: &[f64]) -> Result<(f64, Vec<f64>)> {
    if values.is_empty() {
        return Err(Error::NoData);
    }
    let mut peak = f64::NEG_INFINITY;
    let dd: Vec<f64> = values
        .iter()
        .map(|&v| {
            peak = peak.max(v);
            v / peak - 1.0
        })
        .collect();
    let mdd = dd.iter().copied().fold(0.0, f64::min);
    Ok((mdd, dd))
}

pub fn month_key(date: NaiveDate) -> String {
    format!("{:04}-{:02}", date.year(), date.month())
}

pub fn monthly_returns(curve: &EquityCurve) -> BTreeMap<String, f64> {
    let mut sums: BTreeMap<String, f64> = BTreeMap::new();
    for (d, r) in curve.dates.iter().zip(&curve.returns) {
        *sums.entry(month_key(*d)).or_insert(0.0) += r;
    }
    sums.into_iter().map(|(k, s)| (k, s.exp() - 1.0)).collect()
}

fn ser_profit_factor<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

fn de_profit_factor<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Text(t) if t == "inf" => Ok(f64::INFINITY),
        Raw::Text(t) => Err(serde::de::Error::custom(format!("bad profit factor {t}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceReport {
    pub strategy: StrategyKind,
    /// `None` when the strategy returns have zero variance.
    pub sharpe_ratio: Option<f64>,
    /// Serialized as the string "inf" when there are no losing days.
    #[serde(serialize_with = "ser_profit_factor", deserialize_with = "de_profit_factor")]
    pub profit_factor: f64,
    pub max_drawdown: f64,
    pub total_return: f64,
    pub monthly_returns: BTreeMap<String, f64>,
}

/// Drawdown is measured from the starting equity of 1 onwards.
pub fn performance(curve: &EquityCurve) -> Result<PerformanceReport> {
    let equity: Vec<f64> = std::iter::once(1.0).chain(curve.equity()).collect();
    let (mdd, _) = max_drawdown(&equity)?;
    Ok(PerformanceReport {
        strategy: curve.kind,
        sharpe_ratio: sharpe(&curve.returns).ok(),
        profit_factor: profit_factor(&curve.returns),
        max_drawdown: mdd.min(0.0),
        total_return: curve.total_return(),
        monthly_returns: monthly_returns(curve),
    })
}
