//! Daily OHLCV ingestion, cleaning, returns, labels and chronological splits.
//!
//! Everything downstream is driven by the `Close` column; `Adj Close` is
//! carried through ingestion and cleaning but never modelled.

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 7] = ["Date", "Open", "High", "Low", "Close", "Adj Close", "Volume"];

/// One trading day. Missing values are held as NaN until [`clean`] drops the row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub adj_close: f64,
    pub volume: f64,
}

impl PriceBar {
    pub fn is_complete(&self) -> bool {
        [self.open, self.high, self.low, self.close, self.adj_close, self.volume]
            .iter()
            .all(|v| v.is_finite())
    }

    /// `low <= min(open, close) <= max(open, close) <= high` and `volume >= 0`.
    ///
    /// Vendor feeds occasionally violate this on single days, so ingestion
    /// reports it rather than rejecting the row.
    pub fn is_consistent(&self) -> bool {
        let lo = self.open.min(self.close);
        let hi = self.open.max(self.close);
        self.low <= lo && hi <= self.high && self.volume >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PriceSeries {
    bars: Vec<PriceBar>,
}

impl PriceSeries {
    /// Sorts by date and rejects duplicates.
    pub fn new(mut bars: Vec<PriceBar>) -> Result<Self> {
        bars.sort_by_key(|b| b.date);
        if let Some(w) = bars.windows(2).find(|w| w[0].date == w[1].date) {
            return Err(Error::DuplicateDate(w[0].date));
        }
        Ok(Self { bars })
    }

    pub fn bars(&self) -> &[PriceBar] {
        &self.bars
    }

    pub fn len(&self) -> usize {
        self.bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bars.is_empty()
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.bars.iter().map(|b| b.date).collect()
    }

    pub fn closes(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.close).collect()
    }

    pub fn highs(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.high).collect()
    }

    pub fn lows(&self) -> Vec<f64> {
        self.bars.iter().map(|b| b.low).collect()
    }

    /// Bars dated on or before `date`.
    pub fn until(&self, date: NaiveDate) -> PriceSeries {
        let end = self.bars.partition_point(|b| b.date <= date);
        PriceSeries { bars: self.bars[..end].to_vec() }
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(CSV_HEADER)?;
        for b in &self.bars {
            w.write_record(&[
                b.date.format("%Y-%m-%d").to_string(),
                fmt_field(b.open),
                fmt_field(b.high),
                fmt_field(b.low),
                fmt_field(b.close),
                fmt_field(b.adj_close),
                fmt_field(b.volume),
            ])?;
        }
        w.flush().map_err(|source| Error::Io { path: "<csv writer>".into(), source })?;
        Ok(())
    }
}

fn fmt_field(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        "null".to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    /// Date of the later bar of each pair.
    pub dates: Vec<NaiveDate>,
    pub values: Vec<f64>,
}

impl ReturnSeries {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// The two signal encodings: `{0, 1}` for classifiers and only-long
/// positions, `{-1, +1}` for directional forecasts and long-short positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alphabet {
    Binary,
    Directional,
}

impl Alphabet {
    pub fn high(self) -> i8 {
        1
    }

    pub fn low(self) -> i8 {
        match self {
            Alphabet::Binary => 0,
            Alphabet::Directional => -1,
        }
    }

    pub fn contains(self, v: i8) -> bool {
        v == self.high() || v == self.low()
    }

    pub fn code(self, up: bool) -> i8 {
        if up {
            self.high()
        } else {
            self.low()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalSeries {
    pub dates: Vec<NaiveDate>,
    pub values: Vec<i8>,
    pub alphabet: Alphabet,
}

impl SignalSeries {
    pub fn new(dates: Vec<NaiveDate>, values: Vec<i8>, alphabet: Alphabet) -> Result<Self> {
        if dates.len() != values.len() {
            return Err(Error::invalid(format!(
                "signal dates ({}) and values ({}) differ in length",
                dates.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|&&v| !alphabet.contains(v)) {
            return Err(Error::invalid(format!("signal value {v} outside {alphabet:?} alphabet")));
        }
        Ok(Self { dates, values, alphabet })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Re-encode in the other alphabet (high stays high, low stays low).
    pub fn to_alphabet(&self, alphabet: Alphabet) -> SignalSeries {
        let values = self.values.iter().map(|&v| alphabet.code(v == 1)).collect();
        SignalSeries { dates: self.dates.clone(), values, alphabet }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelKind {
    /// `{0, 1}` next-day direction.
    Signal,
    /// Next-day close in price units.
    NextClose,
}

/// Per-column min/max fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingMeta {
    pub columns: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl ScalingMeta {
    fn index_of(&self, column: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == column)
    }

    pub fn scale_value(&self, column: &str, x: f64) -> Option<f64> {
        let i = self.index_of(column)?;
        Some((x - self.min[i]) / (self.max[i] - self.min[i]))
    }

    pub fn invert_value(&self, column: &str, x: f64) -> Option<f64> {
        let i = self.index_of(column)?;
        Some(x * (self.max[i] - self.min[i]) + self.min[i])
    }
}

/// A 1-D min-max scaler, used for the close series fed to the LSTM.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxScaler {
    pub min: f64,
    pub max: f64,
}

impl MinMaxScaler {
    pub fn fit(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::NoData);
        }
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(max > min) {
            return Err(Error::invalid("constant column cannot be min-max scaled"));
        }
        Ok(Self { min, max })
    }

    pub fn transform(&self, x: f64) -> f64 {
        (x - self.min) / (self.max - self.min)
    }

    pub fn inverse(&self, x: f64) -> f64 {
        x * (self.max - self.min) + self.min
    }
}

/// Feature matrix with a one-step-ahead label.
///
/// Row `t` holds features observed at the close of `dates[t]`; the label and
/// `next_close` refer to the following trading day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledFrame {
    pub dates: Vec<NaiveDate>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub label_kind: LabelKind,
    pub labels: Vec<f64>,
    /// Close on `dates[t]`.
    pub close: Vec<f64>,
    /// Close on the trading day after `dates[t]`.
    pub next_close: Vec<f64>,
    /// Date of `next_close`.
    pub next_dates: Vec<NaiveDate>,
    pub scaling: Option<ScalingMeta>,
}

impl LabeledFrame {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    /// Log return realized over the label horizon of each row.
    pub fn next_returns(&self) -> Vec<f64> {
        self.close.iter().zip(&self.next_close).map(|(c, n)| (n / c).ln()).collect()
    }

    pub fn next_return_series(&self) -> ReturnSeries {
        ReturnSeries { dates: self.next_dates.clone(), values: self.next_returns() }
    }

    /// `{0, 1}` direction of each row's next day, regardless of `label_kind`.
    pub fn direction_labels(&self) -> Vec<i8> {
        self.next_returns().iter().map(|&r| Alphabet::Binary.code(r > 0.0)).collect()
    }

    pub fn signal_series(&self) -> SignalSeries {
        SignalSeries {
            dates: self.dates.clone(),
            values: self.direction_labels(),
            alphabet: Alphabet::Binary,
        }
    }

    /// Same rows, labelled with the next-day close (regression target).
    pub fn with_next_close_label(&self) -> LabeledFrame {
        LabeledFrame {
            label_kind: LabelKind::NextClose,
            labels: self.next_close.clone(),
            ..self.clone()
        }
    }

    pub fn slice(&self, range: std::ops::Range<usize>) -> LabeledFrame {
        self.select(&range.collect::<Vec<_>>())
    }

    /// Rows at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> LabeledFrame {
        LabeledFrame {
            dates: indices.iter().map(|&i| self.dates[i]).collect(),
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            label_kind: self.label_kind,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            close: indices.iter().map(|&i| self.close[i]).collect(),
            next_close: indices.iter().map(|&i| self.next_close[i]).collect(),
            next_dates: indices.iter().map(|&i| self.next_dates[i]).collect(),
            scaling: self.scaling.clone(),
        }
    }
}

/// Read a daily OHLCV CSV file.
pub fn load_csv(path: impl AsRef<Path>) -> Result<PriceSeries> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut buf))
        .map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    parse_csv(&buf)
}

fn is_missing(token: &str) -> bool {
    matches!(token, "" | "null" | "NULL" | "NA" | "N/A" | "NaN" | "nan" | "-")
}

/// Parse CSV bytes with the `Date,Open,High,Low,Close,Adj Close,Volume` header.
///
/// Column order is taken from the header. Row numbers in errors are 1-based
/// and count data rows only.
pub fn parse_csv(bytes: &[u8]) -> Result<PriceSeries> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers()?.clone();
    let mut idx = [0usize; 7];
    for (k, name) in CSV_HEADER.iter().enumerate() {
        idx[k] = headers
            .iter()
            .position(|h| h.eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::invalid(format!("header is missing column `{name}`")))?;
    }

    let mut bars = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::MalformedRow { row, reason: e.to_string() })?;
        let field = |k: usize| record.get(idx[k]).unwrap_or("");
        let date = NaiveDate::parse_from_str(field(0), "%Y-%m-%d").map_err(|e| {
            Error::MalformedRow { row, reason: format!("bad date `{}`: {e}", field(0)) }
        })?;
        let mut vals = [0.0f64; 6];
        for (k, v) in vals.iter_mut().enumerate() {
            let tok = field(k + 1);
            *v = if is_missing(tok) {
                f64::NAN
            } else {
                tok.parse::<f64>().map_err(|_| Error::MalformedRow {
                    row,
                    reason: format!("non-numeric {} `{tok}`", CSV_HEADER[k + 1]),
                })?
            };
        }
        bars.push(PriceBar {
            date,
            open: vals[0],
            high: vals[1],
            low: vals[2],
            close: vals[3],
            adj_close: vals[4],
            volume: vals[5],
        });
    }
    if bars.is_empty() {
        return Err(Error::NoData);
    }

    let mut seen = HashSet::with_capacity(bars.len());
    if let Some(b) = bars.iter().find(|b| !seen.insert(b.date)) {
        return Err(Error::DuplicateDate(b.date));
    }
    PriceSeries::new(bars)
}

/// HTTP(S) GET returning the raw CSV body.
pub fn fetch_remote(url: &str) -> Result<Vec<u8>> {
    let network = |reason: String| Error::Network { url: url.to_string(), reason };
    let agent: ureq::Agent = ureq::Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(std::time::Duration::from_secs(60)))
        .build()
        .into();
    let response = agent.get(url).call().map_err(|e| network(e.to_string()))?;
    let status = response.status().as_u16();
    if status != 200 {
        return Err(Error::HttpStatus { url: url.to_string(), status });
    }
    let body = response
        .into_body()
        .with_config()
        .limit(256 * 1024 * 1024)
        .read_to_vec()
        .map_err(|e| network(e.to_string()))?;
    if !looks_like_price_csv(&body) {
        return Err(network("response is not an OHLCV CSV payload".to_string()));
    }
    Ok(body)
}

fn looks_like_price_csv(body: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(body) else { return false };
    let first = text.lines().next().unwrap_or("");
    let cols: Vec<&str> = first.split(',').map(str::trim).collect();
    CSV_HEADER.iter().all(|h| cols.iter().any(|c| c.eq_ignore_ascii_case(h)))
}

/// Drop every bar with a missing or non-finite field. Order is preserved.
pub fn clean(series: &PriceSeries) -> Result<PriceSeries> {
    let bars: Vec<PriceBar> = series.bars.iter().filter(|b| b.is_complete()).copied().collect();
    if bars.len() < 2 {
        return Err(Error::insufficient(2, bars.len()));
    }
    Ok(PriceSeries { bars })
}

fn check_positive(series: &PriceSeries) -> Result<()> {
    if series.len() < 2 {
        return Err(Error::insufficient(2, series.len()));
    }
    if let Some(b) = series.bars.iter().find(|b| !(b.close > 0.0)) {
        return Err(Error::invalid(format!("non-positive close {} on {}", b.close, b.date)));
    }
    Ok(())
}

/// `ln(close_t / close_{t-1})` as a fraction.
pub fn log_returns(series: &PriceSeries) -> Result<ReturnSeries> {
    check_positive(series)?;
    let values = series.bars.windows(2).map(|w| (w[1].close / w[0].close).ln()).collect();
    let dates = series.bars[1..].iter().map(|b| b.date).collect();
    Ok(ReturnSeries { dates, values })
}

pub fn simple_returns(series: &PriceSeries) -> Result<ReturnSeries> {
    check_positive(series)?;
    let values = series
        .bars
        .windows(2)
        .map(|w| (w[1].close - w[0].close) / w[0].close)
        .collect();
    let dates = series.bars[1..].iter().map(|b| b.date).collect();
    Ok(ReturnSeries { dates, values })
}

/// Signal at `t` is high iff the return at `t + 1` is strictly positive.
/// The final return labels nothing, so the output is one shorter.
pub fn make_signal(returns: &ReturnSeries, alphabet: Alphabet) -> Result<SignalSeries> {
    if returns.is_empty() {
        return Err(Error::NoData);
    }
    let values = returns.values[1..].iter().map(|&r| alphabet.code(r > 0.0)).collect();
    let dates = returns.dates[..returns.len() - 1].to_vec();
    Ok(SignalSeries { dates, values, alphabet })
}

/// First `floor(n * train_fraction)` rows train, the rest test.
pub fn chrono_split(frame: &LabeledFrame, train_fraction: f64) -> Result<(LabeledFrame, LabeledFrame)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::invalid(format!("train fraction {train_fraction} not in (0, 1)")));
    }
    let n = frame.len();
    let cut = split_point(n, train_fraction);
    if cut == 0 || cut == n {
        return Err(Error::invalid(format!("split of {n} rows at {train_fraction} leaves a side empty")));
    }
    Ok((frame.slice(0..cut), frame.slice(cut..n)))
}

pub fn split_point(n: usize, train_fraction: f64) -> usize {
    (n as f64 * train_fraction).floor() as usize
}

/// Min-max scale `columns` using training extrema; test rows may leave `[0, 1]`.
pub fn minmax_scale(
    train: &LabeledFrame,
    test: &LabeledFrame,
    columns: &[&str],
) -> Result<(LabeledFrame, LabeledFrame, ScalingMeta)> {
    let mut meta = ScalingMeta { columns: Vec::new(), min: Vec::new(), max: Vec::new() };
    for &name in columns {
        let values = train
            .column(name)
            .ok_or_else(|| Error::invalid(format!("unknown column `{name}`")))?;
        let scaler = MinMaxScaler::fit(&values)
            .map_err(|_| Error::invalid(format!("column `{name}` is constant on training rows")))?;
        meta.columns.push(name.to_string());
        meta.min.push(scaler.min);
        meta.max.push(scaler.max);
    }
    let train_s = apply_scaling(train, &meta)?;
    let test_s = apply_scaling(test, &meta)?;
    Ok((train_s, test_s, meta))
}

pub fn apply_scaling(frame: &LabeledFrame, meta: &ScalingMeta) -> Result<LabeledFrame> {
    let mut out = frame.clone();
    for (k, name) in meta.columns.iter().enumerate() {
        let j = frame
            .column_index(name)
            .ok_or_else(|| Error::invalid(format!("unknown column `{name}`")))?;
        let span = meta.max[k] - meta.min[k];
        for row in &mut out.rows {
            row[j] = (row[j] - meta.min[k]) / span;
        }
    }
    out.scaling = Some(meta.clone());
    Ok(out)
}

/// Undo [`apply_scaling`] on the columns named in `meta`.
pub fn invert_scaling(frame: &LabeledFrame, meta: &ScalingMeta) -> Result<LabeledFrame> {
    let mut out = frame.clone();
    for (k, name) in meta.columns.iter().enumerate() {
        let j = frame
            .column_index(name)
            .ok_or_else(|| Error::invalid(format!("unknown column `{name}`")))?;
        let span = meta.max[k] - meta.min[k];
        for row in &mut out.rows {
            row[j] = row[j] * span + meta.min[k];
        }
    }
    out.scaling = None;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn day(i: i64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2020, 1, 1).unwrap() + chrono::Duration::days(i)
    }

    fn series_from_closes(closes: &[f64]) -> PriceSeries {
        let bars = closes
            .iter()
            .enumerate()
            .map(|(i, &c)| PriceBar {
                date: day(i as i64),
                open: c,
                high: c,
                low: c,
                close: c,
                adj_close: c,
                volume: 1.0,
            })
            .collect();
        PriceSeries::new(bars).unwrap()
    }

    fn toy_frame(n: usize) -> LabeledFrame {
        LabeledFrame {
            dates: (0..n as i64).map(day).collect(),
            columns: vec!["a".into(), "b".into()],
            rows: (0..n).map(|i| vec![i as f64, (i * i) as f64]).collect(),
            label_kind: LabelKind::Signal,
            labels: vec![1.0; n],
            close: vec![1.0; n],
            next_close: vec![1.0; n],
            next_dates: (1..=n as i64).map(day).collect(),
            scaling: None,
        }
    }

    const HEADER: &str = "Date,Open,High,Low,Close,Adj Close,Volume\n";

    #[test]
    fn header_only_is_no_data() {
        assert!(matches!(parse_csv(HEADER.as_bytes()), Err(Error::NoData)));
    }

    #[test]
    fn three_rows_round_trip() {
        let text = format!(
            "{HEADER}2020-01-02,1,2,0.5,1.5,1.5,10\n2020-01-03,1.5,2,1,1.8,1.8,11\n2020-01-06,1.8,2.2,1.7,2.1,2.1,9\n"
        );
        let s = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(s.len(), 3);
        assert_eq!(s.closes(), vec![1.5, 1.8, 2.1]);
    }

    #[test]
    fn non_numeric_close_names_row() {
        let text = format!("{HEADER}2020-01-02,1,2,0.5,1.5,1.5,10\n2020-01-03,1,2,0.5,abc,1.5,10\n");
        match parse_csv(text.as_bytes()) {
            Err(Error::MalformedRow { row, reason }) => {
                assert_eq!(row, 2);
                assert!(reason.contains("Close"));
            }
            other => panic!("expected malformed row, got {other:?}"),
        }
    }

    #[test]
    fn duplicate_dates_rejected() {
        let text = format!("{HEADER}2020-01-02,1,2,0.5,1.5,1.5,10\n2020-01-02,1,2,0.5,1.5,1.5,10\n");
        assert!(matches!(parse_csv(text.as_bytes()), Err(Error::DuplicateDate(_))));
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let text = format!("{HEADER}2020-01-03,1,2,0.5,2,2,10\n2020-01-02,1,2,0.5,1,1,10\n");
        let s = parse_csv(text.as_bytes()).unwrap();
        assert_eq!(s.closes(), vec![1.0, 2.0]);
    }

    #[test]
    fn clean_drops_missing_volume() {
        let mut rows = String::from(HEADER);
        for i in 0..5 {
            let vol = if i == 2 { "null".to_string() } else { "5".to_string() };
            rows.push_str(&format!("2020-01-0{},1,2,0.5,1.5,1.5,{vol}\n", i + 1));
        }
        let s = parse_csv(rows.as_bytes()).unwrap();
        assert_eq!(s.len(), 5);
        let c = clean(&s).unwrap();
        assert_eq!(c.len(), 4);
        assert!(c.bars().iter().all(|b| b.date != day(2)));
    }

    #[test]
    fn clean_identity_and_idempotent() {
        let s = series_from_closes(&[1.0, 2.0, 3.0]);
        let c = clean(&s).unwrap();
        assert_eq!(c, s);
        assert_eq!(clean(&c).unwrap(), c);
    }

    #[test]
    fn clean_all_missing_is_insufficient() {
        let text = format!("{HEADER}2020-01-02,1,2,0.5,null,1.5,10\n2020-01-03,1,2,0.5,1,1.5,\n");
        let s = parse_csv(text.as_bytes()).unwrap();
        let err = clean(&s).unwrap_err();
        assert!(err.to_string().starts_with("insufficient data"));
    }

    #[test]
    fn log_returns_examples() {
        let r = log_returns(&series_from_closes(&[100.0, 100.0, 100.0])).unwrap();
        assert_eq!(r.values, vec![0.0, 0.0]);
        let r = log_returns(&series_from_closes(&[100.0, 105.0])).unwrap();
        assert!((r.values[0] - 0.048790164169432).abs() < 1e-12);
        assert_eq!(r.dates, vec![day(1)]);
    }

    #[test]
    fn log_returns_reject_non_positive() {
        assert!(log_returns(&series_from_closes(&[1.0, 0.0])).is_err());
    }

    #[test]
    fn simple_returns_examples() {
        assert_eq!(simple_returns(&series_from_closes(&[100.0, 105.0])).unwrap().values, vec![0.05]);
        assert_eq!(simple_returns(&series_from_closes(&[100.0, 100.0])).unwrap().values, vec![0.0]);
        assert_eq!(
            simple_returns(&series_from_closes(&[80.0, 100.0, 50.0])).unwrap().values,
            vec![0.25, -0.5]
        );
    }

    fn returns(values: &[f64]) -> ReturnSeries {
        ReturnSeries { dates: (0..values.len() as i64).map(day).collect(), values: values.to_vec() }
    }

    #[test]
    fn make_signal_examples() {
        // each signal is labelled by the return that follows it
        let s = make_signal(&returns(&[0.01, -0.02, 0.03]), Alphabet::Binary).unwrap();
        assert_eq!(s.values, vec![0, 1]);
        let s = make_signal(&returns(&[0.0, 0.01]), Alphabet::Binary).unwrap();
        assert_eq!(s.values, vec![1]);
        let s = make_signal(&returns(&[0.01, 0.0]), Alphabet::Binary).unwrap();
        assert_eq!(s.values, vec![0]);
        let s = make_signal(&returns(&[-0.01, 0.02]), Alphabet::Directional).unwrap();
        assert_eq!(s.values, vec![1]);
        assert!(make_signal(&returns(&[]), Alphabet::Binary).is_err());
    }

    #[test]
    fn make_signal_matches_enumeration_for_both_alphabets() {
        // Every sign pattern of length 4, both encodings.
        for mask in 0..81u32 {
            let mut m = mask;
            let vals: Vec<f64> = (0..4)
                .map(|_| {
                    let d = m % 3;
                    m /= 3;
                    [-0.01, 0.0, 0.02][d as usize]
                })
                .collect();
            for alphabet in [Alphabet::Binary, Alphabet::Directional] {
                let s = make_signal(&returns(&vals), alphabet).unwrap();
                assert_eq!(s.len(), 3);
                for t in 0..3 {
                    let expect = if vals[t + 1] > 0.0 { 1 } else { alphabet.low() };
                    assert_eq!(s.values[t], expect);
                }
            }
        }
    }

    #[test]
    fn chrono_split_examples() {
        let (tr, te) = chrono_split(&toy_frame(10), 0.8).unwrap();
        assert_eq!((tr.len(), te.len()), (8, 2));
        assert!(tr.dates.iter().max() < te.dates.iter().min());
        let (tr, te) = chrono_split(&toy_frame(5), 0.5).unwrap();
        assert_eq!((tr.len(), te.len()), (2, 3));
        assert_eq!(split_point(3641, 0.8), 2912);
        assert!(chrono_split(&toy_frame(1), 0.5).is_err());
        assert!(chrono_split(&toy_frame(10), 1.0).is_err());
    }

    #[test]
    fn minmax_examples() {
        let mut train = toy_frame(3);
        for (i, v) in [2.0, 4.0, 6.0].iter().enumerate() {
            train.rows[i][0] = *v;
        }
        let mut test = toy_frame(1);
        test.rows[0][0] = 8.0;
        let (tr, te, meta) = minmax_scale(&train, &test, &["a"]).unwrap();
        assert_eq!(tr.column("a").unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(te.rows[0][0], 1.5);
        assert_eq!(meta.invert_value("a", 1.5), Some(8.0));
        // untouched column
        assert_eq!(tr.column("b").unwrap(), train.column("b").unwrap());
    }

    #[test]
    fn minmax_rejects_constant_column() {
        let mut train = toy_frame(3);
        for r in &mut train.rows {
            r[0] = 1.0;
        }
        assert!(minmax_scale(&train, &train, &["a"]).is_err());
    }

    #[test]
    fn write_then_parse_preserves_bars() {
        let s = series_from_closes(&[1.25, 2.5, 3.75]);
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        assert_eq!(parse_csv(&buf).unwrap(), s);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn log_returns_reconstruct_closes(closes in prop::collection::vec(1.0f64..500.0, 2..80)) {
                let s = series_from_closes(&closes);
                let r = log_returns(&s).unwrap();
                let mut acc = 0.0;
                for (k, v) in r.values.iter().enumerate() {
                    acc += v;
                    let rebuilt = closes[0] * acc.exp();
                    prop_assert!((rebuilt / closes[k + 1] - 1.0).abs() < 1e-9);
                }
            }

            #[test]
            fn split_covers_rows_once(n in 2usize..200, frac in 0.05f64..0.95) {
                let f = toy_frame(n);
                if let Ok((tr, te)) = chrono_split(&f, frac) {
                    prop_assert_eq!(tr.len() + te.len(), n);
                    let mut all = tr.dates.clone();
                    all.extend(te.dates.iter().copied());
                    prop_assert_eq!(all, f.dates.clone());
                    prop_assert!(tr.dates.last() < te.dates.first());
                }
            }

            #[test]
            fn scale_round_trip(vals in prop::collection::vec(-1e3f64..1e3, 3..50)) {
                let mut f = toy_frame(vals.len());
                for (r, v) in f.rows.iter_mut().zip(&vals) { r[0] = *v; }
                let Ok((tr, _, meta)) = minmax_scale(&f, &f, &["a"]) else { return Ok(()) };
                let col = tr.column("a").unwrap();
                let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert_eq!(lo, 0.0);
                prop_assert_eq!(hi, 1.0);
                let back = invert_scaling(&tr, &meta).unwrap();
                for (a, b) in back.column("a").unwrap().iter().zip(&vals) {
                    prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
                }
            }
        }
    }
}
