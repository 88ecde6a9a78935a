//! The four subcommands. Every artifact is written under the output directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use chrono::NaiveDate;
use oilsignal_core::evaluation::CvFold;
use oilsignal_core::market_data::{clean, fetch_remote, parse_csv};
use oilsignal_core::pipeline::{backtest_model, cv_model, ModelBacktest};
use oilsignal_core::{CvResult, ModelKind, PerformanceReport, Prepared, PriceSeries, StrategyKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::RunConfig;

pub const PRICES_FILE: &str = "prices.csv";
pub const INGEST_REPORT: &str = "ingest_report.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows_read: usize,
    pub rows_dropped: usize,
    pub rows_written: usize,
    pub first_date: NaiveDate,
    pub last_date: NaiveDate,
}

/// Per-model status of a multi-model command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelStatus {
    pub model: ModelKind,
    pub ok: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub command: String,
    pub seed: u64,
    pub models: Vec<ModelStatus>,
}

impl RunSummary {
    pub fn failed(&self) -> usize {
        self.models.iter().filter(|m| !m.ok).count()
    }
}

fn is_url(source: &str) -> bool {
    source.starts_with("http://") || source.starts_with("https://")
}

fn read_source(source: &str) -> Result<Vec<u8>> {
    if is_url(source) {
        Ok(fetch_remote(source)?)
    } else {
        fs::read(source).with_context(|| format!("reading {source}"))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

pub fn ingest(cfg: &RunConfig) -> Result<IngestReport> {
    let source = cfg.source.as_deref().ok_or_else(|| anyhow!("ingest needs --source PATH|URL"))?;
    let raw = parse_csv(&read_source(source)?)?;
    let series = clean(&raw)?;
    let out = cfg.out_dir();
    create_dir(out)?;
    let prices = out.join(PRICES_FILE);
    let file = fs::File::create(&prices).with_context(|| format!("writing {}", prices.display()))?;
    series.write_csv(std::io::BufWriter::new(file))?;
    let dates = series.dates();
    let report = IngestReport {
        rows_read: raw.len(),
        rows_dropped: raw.len() - series.len(),
        rows_written: series.len(),
        first_date: dates[0],
        last_date: *dates.last().expect("cleaned series is non-empty"),
    };
    write_json(&out.join(INGEST_REPORT), &report)?;
    Ok(report)
}

/// Prices from `--source` if given, else the ingested `prices.csv`.
pub fn load_prices(cfg: &RunConfig) -> Result<PriceSeries> {
    let bytes = match &cfg.source {
        Some(s) => read_source(s)?,
        None => {
            let path = cfg.out_dir().join(PRICES_FILE);
            fs::read(&path).with_context(|| format!("missing input {}; run `ingest` first", path.display()))?
        }
    };
    Ok(clean(&parse_csv(&bytes)?)?)
}

/// Strategy name -> metrics, without the redundant strategy label.
fn performance_json(reports: &[PerformanceReport], strategies: &[StrategyKind]) -> Result<Value> {
    let mut map = serde_json::Map::new();
    for r in reports.iter().filter(|r| strategies.contains(&r.strategy)) {
        let mut v = serde_json::to_value(r)?;
        v.as_object_mut().expect("report serializes to an object").remove("strategy");
        map.insert(r.strategy.name().to_string(), v);
    }
    Ok(Value::Object(map))
}

fn write_backtest(dir: &Path, bt: &ModelBacktest, strategies: &[StrategyKind]) -> Result<()> {
    create_dir(dir)?;
    for curve in bt.curves.iter().filter(|c| strategies.contains(&c.kind)) {
        let path = dir.join(format!("equity_{}.csv", curve.kind.name()));
        let file = fs::File::create(&path).with_context(|| format!("writing {}", path.display()))?;
        curve.write_csv(std::io::BufWriter::new(file))?;
    }
    let mut w = csv::Writer::from_path(dir.join("signals.csv"))?;
    w.write_record(["date", "signal"])?;
    for (d, s) in bt.output.signals.dates.iter().zip(&bt.output.signals.values) {
        w.write_record([d.to_string(), s.to_string()])?;
    }
    w.flush()?;
    write_json(&dir.join("performance.json"), &performance_json(&bt.performance, strategies)?)?;
    write_json(&dir.join("evaluation.json"), &bt.evaluation)
}

fn finish(summary: RunSummary, out: &Path) -> Result<RunSummary> {
    write_json(&out.join(format!("{}_summary.json", summary.command)), &summary)?;
    for m in summary.models.iter().filter(|m| !m.ok) {
        eprintln!("{}: {} failed: {}", summary.command, m.model, m.error.as_deref().unwrap_or(""));
    }
    if summary.failed() == summary.models.len() {
        bail!("every selected model failed");
    }
    Ok(summary)
}

pub fn backtest(cfg: &RunConfig) -> Result<RunSummary> {
    let models = cfg.selected_models()?;
    let data = Prepared::new(load_prices(cfg)?, &cfg.models.features)?;
    let out = cfg.out_dir();
    create_dir(out)?;
    let statuses: Vec<ModelStatus> = models
        .par_iter()
        .map(|&kind| {
            let result = backtest_model(kind, &data, cfg.split, &cfg.models, cfg.seed)
                .map_err(anyhow::Error::from)
                .and_then(|bt| write_backtest(&out.join(kind.name()), &bt, &cfg.strategies));
            ModelStatus { model: kind, ok: result.is_ok(), error: result.err().map(|e| format!("{e:#}")) }
        })
        .collect();
    finish(RunSummary { command: "backtest".into(), seed: cfg.seed, models: statuses }, out)
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cv_rows(model: ModelKind, res: &CvResult) -> Vec<[String; 8]> {
    let row = |label: String, f: &CvFold| {
        [
            model.name().to_string(),
            label,
            f.train_rows.to_string(),
            f.test_rows.to_string(),
            opt(f.accuracy),
            opt(f.sharpe_only_long),
            opt(f.sharpe_long_short),
            f.error.clone().unwrap_or_default(),
        ]
    };
    let mut rows: Vec<[String; 8]> = res.folds.iter().map(|f| row((f.fold + 1).to_string(), f)).collect();
    rows.push([
        model.name().to_string(),
        "mean".into(),
        String::new(),
        String::new(),
        opt(res.mean_accuracy),
        opt(res.mean_sharpe_only_long),
        opt(res.mean_sharpe_long_short),
        if res.incomplete { "incomplete".into() } else { String::new() },
    ]);
    rows
}

pub const CV_HEADER: [&str; 8] =
    ["model", "fold", "train_rows", "test_rows", "accuracy", "sharpe_only_long", "sharpe_long_short", "note"];

pub fn cv(cfg: &RunConfig) -> Result<RunSummary> {
    let models = cfg.selected_models()?;
    let data = Prepared::new(load_prices(cfg)?, &cfg.models.features)?;
    let dir = cfg.out_dir().join("cv");
    create_dir(&dir)?;
    let results: Vec<(ModelKind, Result<CvResult>)> = models
        .par_iter()
        .map(|&kind| (kind, cv_model(kind, &data, cfg.k, &cfg.models, cfg.seed).map_err(anyhow::Error::from)))
        .collect();
    let mut w = csv::Writer::from_path(dir.join("cv_results.csv"))?;
    w.write_record(CV_HEADER)?;
    let mut all = BTreeMap::new();
    let mut statuses = Vec::new();
    for (kind, res) in results {
        match res {
            Ok(r) => {
                for row in cv_rows(kind, &r) {
                    w.write_record(&row)?;
                }
                statuses.push(ModelStatus { model: kind, ok: true, error: None });
                all.insert(kind.name(), r);
            }
            Err(e) => statuses.push(ModelStatus { model: kind, ok: false, error: Some(format!("{e:#}")) }),
        }
    }
    w.flush()?;
    write_json(&dir.join("cv_results.json"), &all)?;
    finish(RunSummary { command: "cv".into(), seed: cfg.seed, models: statuses }, cfg.out_dir())
}

/// Metrics as stored in a model's `performance.json`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct StoredPerformance {
    pub sharpe_ratio: Option<f64>,
    #[serde(deserialize_with = "de_profit_factor")]
    pub profit_factor: f64,
    pub max_drawdown: f64,
    pub total_return: f64,
    pub monthly_returns: BTreeMap<String, f64>,
}

fn de_profit_factor<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    match Value::deserialize(d)? {
        Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        Value::Number(n) => n.as_f64().ok_or_else(|| serde::de::Error::custom("bad profit factor")),
        other => Err(serde::de::Error::custom(format!("bad profit factor {other}"))),
    }
}

pub fn read_performance(path: &Path) -> Result<BTreeMap<StrategyKind, StoredPerformance>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?)
}

fn fmt_pf(v: f64) -> String {
    if v.is_infinite() {
        "inf".into()
    } else {
        v.to_string()
    }
}

fn read_equity(path: &Path) -> Result<Vec<(String, String)>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = r.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h == name).ok_or_else(|| anyhow!("{} lacks `{name}`", path.display()));
    let (d, c) = (col("date")?, col("cumulative")?);
    r.records().map(|rec| {
        let rec = rec?;
        Ok((rec[d].to_string(), rec[c].to_string()))
    })
    .collect()
}

fn write_series(path: &Path, rows: impl IntoIterator<Item = (String, String)>) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["date", "value"])?;
    for (d, v) in rows {
        w.write_record([d, v])?;
    }
    Ok(w.flush()?)
}

pub const REPORT_HEADER: [&str; 4] = ["strategy", "model", "sharpe_ratio", "profit_factor"];

/// Comparison table over models with backtest outputs, plus plot series.
pub fn report(cfg: &RunConfig) -> Result<Vec<ModelKind>> {
    let out = cfg.out_dir();
    let requested = cfg.selected_models()?;
    let explicit = cfg.model.trim() != "all";
    let perf_path = |k: ModelKind| out.join(k.name()).join("performance.json");
    let missing: Vec<PathBuf> = requested.iter().map(|&k| perf_path(k)).filter(|p| !p.exists()).collect();
    let present: Vec<ModelKind> = requested.iter().copied().filter(|&k| perf_path(k).exists()).collect();
    if present.is_empty() || (explicit && !missing.is_empty()) {
        let list: Vec<String> = missing.iter().map(|p| p.display().to_string()).collect();
        bail!("missing backtest outputs:\n  {}", list.join("\n  "));
    }

    let dir = out.join("report");
    let plots = dir.join("plots");
    create_dir(&plots)?;
    let mut table = csv::Writer::from_path(dir.join("performance_table.csv"))?;
    table.write_record(REPORT_HEADER)?;
    let mut buy_and_hold = None;
    let mut eval_rows = Vec::new();
    for &kind in &present {
        let perf = read_performance(&perf_path(kind))?;
        for (strategy, p) in &perf {
            if *strategy == StrategyKind::BuyAndHold {
                buy_and_hold.get_or_insert_with(|| p.clone());
                continue;
            }
            table.write_record([strategy.name(), kind.name(), &opt(p.sharpe_ratio), &fmt_pf(p.profit_factor)])?;
        }
        for (strategy, p) in &perf {
            let equity = out.join(kind.name()).join(format!("equity_{}.csv", strategy.name()));
            let stem = format!("{}_{}", kind.name(), strategy.name());
            write_series(&plots.join(format!("{stem}_equity.csv")), read_equity(&equity)?)?;
            write_series(
                &plots.join(format!("{stem}_monthly.csv")),
                p.monthly_returns.iter().map(|(m, v)| (m.clone(), v.to_string())),
            )?;
        }
        let eval_path = out.join(kind.name()).join("evaluation.json");
        let eval: Value = serde_json::from_str(
            &fs::read_to_string(&eval_path).with_context(|| format!("reading {}", eval_path.display()))?,
        )?;
        eval_rows.push((kind, eval));
    }
    if let Some(p) = buy_and_hold {
        table.write_record([StrategyKind::BuyAndHold.name(), "all", &opt(p.sharpe_ratio), &fmt_pf(p.profit_factor)])?;
    }
    table.flush()?;
    write_evaluation_table(&dir.join("evaluation_table.csv"), &eval_rows)?;
    Ok(present)
}

/// Accuracy, per-class metrics and extreme-day accuracy per model.
fn write_evaluation_table(path: &Path, rows: &[(ModelKind, Value)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "model",
        "accuracy",
        "up_precision",
        "up_recall",
        "up_f1",
        "down_precision",
        "down_recall",
        "down_f1",
        "extreme_95_accuracy",
        "extreme_99_accuracy",
    ])?;
    let num = |v: &Value| v.as_f64().map(|x| x.to_string()).unwrap_or_default();
    for (kind, e) in rows {
        let cr = &e["class_report"];
        let bucket = |level: f64| {
            e["extreme_accuracy"]["buckets"]
                .as_array()
                .and_then(|b| b.iter().find(|x| x["level"].as_f64() == Some(level)))
                .map(|x| num(&x["accuracy"]))
                .unwrap_or_default()
        };
        w.write_record([
            kind.name().to_string(),
            num(&e["accuracy"]),
            num(&cr["up_day"]["precision"]),
            num(&cr["up_day"]["recall"]),
            num(&cr["up_day"]["f1"]),
            num(&cr["down_day"]["precision"]),
            num(&cr["down_day"]["recall"]),
            num(&cr["down_day"]["f1"]),
            bucket(0.95),
            bucket(0.99),
        ])?;
    }
    Ok(w.flush()?)
}
