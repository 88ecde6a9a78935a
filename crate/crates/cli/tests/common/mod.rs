#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use chrono::{Datelike, NaiveDate, Weekday};
use oilsignal_core::arma_garch::simulate::simulate_garch;
use oilsignal_core::arma_garch::GarchParams;

/// Weekday-dated OHLCV CSV whose closes follow GARCH(1,1) log returns.
pub fn price_csv(n: usize, seed: u64) -> String {
    let params = GarchParams { omega: 4e-6, alpha: vec![0.06], beta: vec![0.92], df: Some(6.0) };
    let (eps, _) = simulate_garch(n, &params, seed);
    let mut date = NaiveDate::from_ymd_opt(2015, 1, 5).unwrap();
    let mut close = 60.0f64;
    let mut out = String::from("Date,Open,High,Low,Close,Adj Close,Volume\n");
    for e in eps {
        let open = close;
        close *= (2e-4 + e).exp();
        let high = open.max(close) * 1.004;
        let low = open.min(close) * 0.996;
        out.push_str(&format!("{date},{open},{high},{low},{close},{close},1000\n"));
        date = date.succ_opt().unwrap();
        while matches!(date.weekday(), Weekday::Sat | Weekday::Sun) {
            date = date.succ_opt().unwrap();
        }
    }
    out
}

/// Small models so a full `--model all` run takes seconds.
pub const FAST_CONFIG: &str = r#"{
  "schema_version": 1,
  "models": {
    "lstm": {
      "architecture": { "hidden1": 6, "hidden2": 4, "dense": 3 },
      "train": { "epochs": 1 },
      "lag": 20
    },
    "rf": { "n_trees": 25 },
    "importance_repetitions": 2
  }
}
"#;

pub fn write_fixture(dir: &Path, rows: usize) -> (std::path::PathBuf, std::path::PathBuf) {
    let csv = dir.join("prices_in.csv");
    std::fs::write(&csv, price_csv(rows, 11)).unwrap();
    let cfg = dir.join("run.json");
    std::fs::write(&cfg, FAST_CONFIG).unwrap();
    (csv, cfg)
}

pub fn oilsignal(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oilsignal"))
        .args(args)
        .env_remove("OILSIGNAL_OUT")
        .output()
        .expect("binary runs")
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}
