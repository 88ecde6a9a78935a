//! Acceptance gate: one PASS/FAIL line per criterion.
//!
//! Criteria that need the bundled Brent snapshot read it from
//! `$OILSIGNAL_BRENT_FIXTURE` or `tests/fixtures/brent_2007_2022.csv`. When the
//! file is absent they print FAIL with the reason and are counted as not
//! evaluable; the process exit status reflects only evaluable criteria.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use oilsignal_core::arma_garch::simulate::{simulate_arma, simulate_garch};
use oilsignal_core::arma_garch::{fit_arma, fit_garch, ArmaGarchOrder, GarchParams, InnovationKind};
use oilsignal_core::backtest::{max_drawdown, monthly_returns, performance, simulate};
use oilsignal_core::evaluation::{class_metrics, ConfusionMatrix};
use oilsignal_core::indicators::{macd, roc, rsi, stochastic_k};
use oilsignal_core::market_data::{chrono_split, clean, load_csv};
use oilsignal_core::ml_models::{knn_fit, svr_train, KnnConfig, SvrConfig, SvrModel};
use oilsignal_core::neural::{LstmArchitecture, LstmModel};
use oilsignal_core::pipeline::{backtest_model, ArmaGarchSettings, ModelSettings};
use oilsignal_core::stats::{jarque_bera, mean, sample_std};
use oilsignal_core::{
    Alphabet, ModelKind, PriceBar, PriceSeries, Prepared, ReturnSeries, SignalSeries, StrategyKind,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

enum Outcome {
    Pass(String),
    Fail(String),
    /// Input unavailable in this environment.
    Unavailable(String),
}

use Outcome::{Fail, Pass, Unavailable};

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn fixture_path() -> PathBuf {
    std::env::var_os("OILSIGNAL_BRENT_FIXTURE")
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/brent_2007_2022.csv"))
}

fn load_fixture() -> Result<PriceSeries, String> {
    let path = fixture_path();
    if !path.exists() {
        return Err(format!("Brent 2007-2022 snapshot not found at {}", path.display()));
    }
    load_csv(&path).and_then(|s| clean(&s)).map_err(|e| format!("fixture unreadable: {e}"))
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn c1_garch_recovery() -> Outcome {
    let start = Instant::now();
    let truth = GarchParams { omega: 0.05, alpha: vec![0.06], beta: vec![0.92], df: Some(6.0) };
    let fits: Vec<Result<(f64, f64), String>> = (1..=10u64)
        .into_par_iter()
        .map(|seed| {
            let (eps, _) = simulate_garch(10_000, &truth, seed);
            let est = fit_garch(&eps, 1, 1, InnovationKind::StudentT).map_err(|e| format!("seed {seed}: {e}"))?;
            Ok(((est.params.alpha[0] - 0.06).abs(), (est.params.beta[0] - 0.92).abs()))
        })
        .collect();
    let elapsed = start.elapsed();
    let fits = match fits.into_iter().collect::<Result<Vec<_>, _>>() {
        Ok(f) => f,
        Err(e) => return Fail(e),
    };
    let ma = median(fits.iter().map(|f| f.0).collect());
    let mb = median(fits.iter().map(|f| f.1).collect());
    check(
        ma <= 0.02 && mb <= 0.03 && elapsed < Duration::from_secs(60),
        format!("median |alpha err| {ma:.4} <= 0.02, median |beta err| {mb:.4} <= 0.03, {elapsed:.1?} < 60s"),
    )
}

fn c2_arma_recovery() -> Outcome {
    let start = Instant::now();
    let y = simulate_arma(10_000, 0.0, &[0.5], &[0.3], 1.0, 2024);
    let fit = match fit_arma(&y, 1, 1) {
        Ok(f) => f,
        Err(e) => return Fail(e.to_string()),
    };
    let elapsed = start.elapsed();
    let (a, b) = (fit.params.ar[0], fit.params.ma[0]);
    check(
        (a - 0.5).abs() <= 0.05 && (b - 0.3).abs() <= 0.05 && elapsed < Duration::from_secs(30),
        format!("a = {a:.4} (0.5 +- 0.05), b = {b:.4} (0.3 +- 0.05), {elapsed:.1?} < 30s"),
    )
}

fn random_bars(n: usize, seed: u64) -> PriceSeries {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d0 = chrono::NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    let mut p = 50.0f64;
    let bars = (0..n)
        .map(|i| {
            p *= 1.0 + rng.random_range(-0.04..0.04);
            let high = p * (1.0 + rng.random_range(0.0..0.02));
            let low = p * (1.0 - rng.random_range(0.0..0.02));
            PriceBar {
                date: d0 + chrono::Duration::days(i as i64),
                open: p,
                high,
                low,
                close: p,
                adj_close: p,
                volume: 1.0,
            }
        })
        .collect();
    PriceSeries::new(bars).unwrap()
}

/// EMA seeded with the SMA of the first `n` values, as a closed-form weighted sum.
fn ema_direct(x: &[f64], n: usize, t: usize) -> f64 {
    let k = 2.0 / (n as f64 + 1.0);
    let seed = x[..n].iter().sum::<f64>() / n as f64;
    let steps = t + 1 - n;
    let mut v = (1.0 - k).powi(steps as i32) * seed;
    for j in 0..steps {
        v += k * (1.0 - k).powi(j as i32) * x[t - j];
    }
    v
}

fn c3_indicator_oracles() -> Outcome {
    let series = random_bars(1000, 3);
    let close = series.closes();
    let bars = series.bars();
    let (r, k, m, c) = match (rsi(&close, 14), stochastic_k(&series, 14), macd(&close, 12, 26), roc(&close, 9)) {
        (Ok(r), Ok(k), Ok(m), Ok(c)) => (r, k, m, c),
        _ => return Fail("indicator returned an error".into()),
    };
    let mut worst = [0.0f64; 4];
    for t in 0..close.len() {
        if t >= 14 {
            let (mut gain, mut loss) = (0.0, 0.0);
            for i in t - 13..=t {
                let d = close[i] - close[i - 1];
                if d > 0.0 {
                    gain += d;
                } else {
                    loss -= d;
                }
            }
            let oracle = if loss == 0.0 { 100.0 } else { 100.0 * gain / (gain + loss) };
            worst[0] = worst[0].max((r.values[t] - oracle).abs());
        }
        if t >= 13 {
            let hh = bars[t - 13..=t].iter().map(|b| b.high).fold(f64::MIN, f64::max);
            let ll = bars[t - 13..=t].iter().map(|b| b.low).fold(f64::MAX, f64::min);
            let oracle = 100.0 * (close[t] - ll) / (hh - ll);
            worst[1] = worst[1].max((k.values[t] - oracle).abs());
        }
        if t >= 25 {
            let oracle = ema_direct(&close, 12, t) - ema_direct(&close, 26, t);
            worst[2] = worst[2].max((m.values[t] - oracle).abs());
        }
        if t >= 9 {
            let oracle = (close[t] / close[t - 9] - 1.0) * 100.0;
            worst[3] = worst[3].max((c.values[t] - oracle).abs());
        }
    }
    check(
        worst.iter().all(|w| *w <= 1e-9),
        format!("max |diff| rsi {:.1e}, %K {:.1e}, macd {:.1e}, roc {:.1e} (<= 1e-9)", worst[0], worst[1], worst[2], worst[3]),
    )
}

fn c4_lstm_gradients() -> Outcome {
    let start = Instant::now();
    let model = match LstmModel::init(LstmArchitecture { hidden1: 4, hidden2: 3, dense: 2 }, 99) {
        Ok(m) => m,
        Err(e) => return Fail(e.to_string()),
    };
    let window = [0.3, -0.7, 0.5, 0.9, -0.2];
    let target = 0.4;
    let cache = model.forward(&window).unwrap();
    let grad = model.backward(&cache, target);
    let loss = |m: &LstmModel| (m.predict(&window).unwrap() - target).powi(2);
    let h = 1e-5;
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for t in 0..8 {
        for k in 0..model.tensors()[t].len() {
            let orig = model.tensors()[t][k];
            probe.tensors_mut()[t][k] = orig + h;
            let up = loss(&probe);
            probe.tensors_mut()[t][k] = orig - h;
            let down = loss(&probe);
            probe.tensors_mut()[t][k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let analytic = grad.tensors()[t][k];
            worst = worst.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6));
            count += 1;
        }
    }
    let elapsed = start.elapsed();
    check(
        worst < 1e-4 && elapsed < Duration::from_secs(10),
        format!("{count} parameters, max relative error {worst:.2e} < 1e-4, {elapsed:.1?} < 10s"),
    )
}

fn c5_knn_exactness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let point = |rng: &mut ChaCha8Rng| (0..4).map(|_| rng.random::<f64>()).collect::<Vec<f64>>();
    let x: Vec<Vec<f64>> = (0..2000).map(|_| point(&mut rng)).collect();
    let y: Vec<i8> = (0..2000).map(|_| rng.random_range(0..2)).collect();
    let queries: Vec<Vec<f64>> = (0..500).map(|_| point(&mut rng)).collect();
    let cfg = KnnConfig::default();
    let model = match knn_fit(&x, &y, cfg) {
        Ok(m) => m,
        Err(e) => return Fail(e.to_string()),
    };
    let mut mismatches = 0;
    for q in &queries {
        let mut all: Vec<(f64, usize)> =
            x.iter().enumerate().map(|(i, r)| (r.iter().zip(q).map(|(a, b)| (a - b).abs()).sum(), i)).collect();
        all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let nearest = &all[..cfg.k];
        let exact: Vec<_> = nearest.iter().filter(|(d, _)| *d == 0.0).collect();
        let mut w = [0.0; 2];
        if exact.is_empty() {
            nearest.iter().for_each(|(d, i)| w[y[*i] as usize] += 1.0 / d);
        } else {
            exact.iter().for_each(|(_, i)| w[y[*i] as usize] += 1.0);
        }
        let oracle_class = i8::from(w[1] > w[0]);
        let got: Vec<usize> = model.neighbors(q).iter().map(|(i, _)| *i).collect();
        let want: Vec<usize> = nearest.iter().map(|(_, i)| *i).collect();
        if got != want || model.predict_one(q).class != oracle_class {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches} of 500 queries differ from the brute-force scan (train 2000)"))
}

fn svr_coefficient(model: &SvrModel, row: &[f64]) -> f64 {
    model.support_vectors.iter().position(|sv| sv == row).map(|k| model.coefficients[k]).unwrap_or(0.0)
}

fn c6_svr_feasibility() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x: Vec<Vec<f64>> = (0..200).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
    let z: Vec<f64> = x.iter().map(|r| 2.0 * r[0] - r[1] * r[2] + (3.0 * r[3]).sin() + rng.random_range(-0.3..0.3)).collect();
    let (c, eps) = (3.0, 0.1);
    let model = match svr_train(&x, &z, &SvrConfig { c, epsilon: eps, ..SvrConfig::default() }) {
        Ok(m) => m,
        Err(e) => return Fail(e.to_string()),
    };
    // KKT for beta = alpha+ - alpha-: 0 -> inside tube, free -> on tube, bound -> outside.
    let mut worst: f64 = 0.0;
    for (row, zi) in x.iter().zip(&z) {
        let r = zi - model.predict_one(row);
        let beta = svr_coefficient(&model, row);
        let sign_ok = beta == 0.0 || r * beta >= -1e-3;
        let v = if !sign_ok {
            f64::INFINITY
        } else if beta == 0.0 {
            (r.abs() - eps).max(0.0)
        } else if beta.abs() < c {
            (r.abs() - eps).abs()
        } else {
            (eps - r.abs()).max(0.0)
        };
        worst = worst.max(v);
    }
    let in_box = model.coefficients.iter().all(|b| b.abs() <= c);
    let sum: f64 = model.coefficients.iter().sum();
    check(
        worst < 1e-3 && in_box && sum.abs() < 1e-6,
        format!(
            "max KKT violation {worst:.2e} < 1e-3, {} coefficients in [-C, C]: {in_box}, |sum| {:.1e} < 1e-6",
            model.coefficients.len(),
            sum.abs()
        ),
    )
}

fn c7_backtest_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let d0 = chrono::NaiveDate::from_ymd_opt(2019, 1, 1).unwrap();
    let n = 400;
    let dates: Vec<_> = (0..=n as i64).map(|i| d0 + chrono::Duration::days(i)).collect();
    let returns = ReturnSeries { dates: dates[1..].to_vec(), values: (0..n).map(|_| rng.random_range(-0.05..0.05)).collect() };
    let ones = SignalSeries::new(dates[..n].to_vec(), vec![1; n], Alphabet::Binary).unwrap();
    let bh = simulate(&ones, &returns, StrategyKind::BuyAndHold).unwrap();
    let ol = simulate(&ones, &returns, StrategyKind::OnlyLong).unwrap();
    let identical = bh.returns == ol.returns && bh.cumulative == ol.cumulative;

    let mixed: Vec<i8> = (0..n).map(|_| rng.random_range(0..2)).collect();
    let curve = simulate(&SignalSeries::new(dates[..n].to_vec(), mixed, Alphabet::Binary).unwrap(), &returns, StrategyKind::LongShort)
        .unwrap();
    let product: f64 = monthly_returns(&curve).values().map(|m| 1.0 + m).product();
    let telescope = (product - 1.0 - curve.total_return()).abs();

    let mut mdd_worst: f64 = 0.0;
    for _ in 0..100 {
        let len = rng.random_range(2..120);
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(0.5..2.0)).collect();
        let mut brute: f64 = 0.0;
        for j in 0..len {
            for i in 0..=j {
                brute = brute.min(v[j] / v[i] - 1.0);
            }
        }
        let (mdd, _) = max_drawdown(&v).unwrap();
        mdd_worst = mdd_worst.max((mdd - brute).abs());
    }
    let perf = performance(&curve).unwrap();
    check(
        identical && telescope < 1e-9 && mdd_worst < 1e-12 && perf.max_drawdown <= 0.0,
        format!("only_long(all 1) == buy_and_hold: {identical}, telescoping error {telescope:.1e}, MDD vs all-pairs {mdd_worst:.1e} over 100 series"),
    )
}

fn c8_report_arithmetic() -> Outcome {
    let m = class_metrics(&ConfusionMatrix { tp: 8, fp: 2, fn_: 4, tn: 0 });
    check(
        (m.precision - 0.8).abs() < 1e-12 && (m.recall - 0.6667).abs() < 5e-5 && (m.f1 - 0.7273).abs() < 5e-5,
        format!("precision {:.4}, recall {:.4}, F1 {:.4}", m.precision, m.recall, m.f1),
    )
}

fn fixture_settings() -> ModelSettings {
    ModelSettings {
        arma_garch: ArmaGarchSettings { order: ArmaGarchOrder::default(), select_order: false, ..ArmaGarchSettings::default() },
        ..ModelSettings::default()
    }
}

fn c9_fixture_reproduction() -> Outcome {
    let series = match load_fixture() {
        Ok(s) => s,
        Err(e) => return Unavailable(e),
    };
    let start = Instant::now();
    let close = series.closes();
    let (mu, sd) = (mean(&close), sample_std(&close));
    let lo = close.iter().copied().fold(f64::MAX, f64::min);
    let hi = close.iter().copied().fold(f64::MIN, f64::max);
    let jb = jarque_bera(&close).map(|j| j.statistic).unwrap_or(f64::NAN);
    let mut notes = vec![
        ((mu - 77.38).abs() <= 0.5, format!("mean {mu:.3}")),
        ((sd - 25.9).abs() <= 0.5, format!("std {sd:.3}")),
        ((lo * 100.0).round() == 1933.0, format!("min {lo:.2}")),
        ((hi * 100.0).round() == 14608.0, format!("max {hi:.2}")),
        ((jb - 193.0).abs() <= 0.05 * 193.0, format!("JB {jb:.1}")),
    ];
    let data = match Prepared::new(series, &fixture_settings().features) {
        Ok(d) => d,
        Err(e) => return Fail(e.to_string()),
    };
    let settings = fixture_settings();
    let runs: BTreeMap<ModelKind, _> =
        ModelKind::ALL.par_iter().map(|&k| (k, backtest_model(k, &data, 0.8, &settings, 0))).collect();
    match &runs[&ModelKind::ArmaGarch] {
        Ok(bt) => {
            let a = bt.evaluation.details["garch"]["alpha"][0].as_f64().unwrap_or(f64::NAN);
            let b = bt.evaluation.details["garch"]["beta"][0].as_f64().unwrap_or(f64::NAN);
            notes.push(((a - 0.0607).abs() <= 0.04, format!("alpha1 {a:.4}")));
            notes.push(((b - 0.9386).abs() <= 0.04, format!("beta1 {b:.4}")));
            let acc = bt.evaluation.accuracy;
            notes.push(((acc - 0.543).abs() <= 0.02, format!("ARMA-GARCH accuracy {:.2}%", 100.0 * acc)));
        }
        Err(e) => notes.push((false, format!("ARMA-GARCH failed: {e}"))),
    }
    match &runs[&ModelKind::Rf] {
        Ok(bt) => {
            let acc = bt.evaluation.accuracy;
            let recall = bt.evaluation.class_report.up_day.recall;
            notes.push(((acc - 0.547).abs() <= 0.03, format!("RF accuracy {:.2}%", 100.0 * acc)));
            notes.push(((recall - 0.81).abs() <= 0.05, format!("RF up-day recall {recall:.3}")));
        }
        Err(e) => notes.push((false, format!("RF failed: {e}"))),
    }
    match &runs[&ModelKind::CrossSignal] {
        Ok(bt) => {
            let sharpe = |k: StrategyKind| bt.performance.iter().find(|p| p.strategy == k).and_then(|p| p.sharpe_ratio);
            let (ol, bh) = (sharpe(StrategyKind::OnlyLong), sharpe(StrategyKind::BuyAndHold));
            notes.push((matches!((ol, bh), (Some(o), Some(b)) if o > b), format!("cross only-long Sharpe {ol:?} vs buy-and-hold {bh:?}")));
        }
        Err(e) => notes.push((false, format!("cross signal failed: {e}"))),
    }
    let failed_models: Vec<String> =
        runs.iter().filter_map(|(k, r)| r.as_ref().err().map(|e| format!("{k}: {e}"))).collect();
    notes.push((failed_models.is_empty(), format!("full pipeline failures {failed_models:?}")));
    let elapsed = start.elapsed();
    notes.push((elapsed < Duration::from_secs(15 * 60), format!("runtime {elapsed:.0?}")));
    let ok = notes.iter().all(|n| n.0);
    let detail: Vec<String> = notes.iter().map(|(ok, s)| if *ok { s.clone() } else { format!("[off] {s}") }).collect();
    check(ok, detail.join("; "))
}

/// Brute-force quantile with linear interpolation between order statistics.
fn quantile_oracle(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let (i, frac) = (pos.floor() as usize, pos - pos.floor());
    if i + 1 < v.len() {
        v[i] + frac * (v[i + 1] - v[i])
    } else {
        v[i]
    }
}

fn c10_extreme_structure() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.csv");
    std::fs::write(&path, common::price_csv(1200, 10)).unwrap();
    let data = Prepared::new(load_csv(&path).unwrap(), &Default::default()).unwrap();
    let (_, test) = chrono_split(&data.frame, 0.8).unwrap();
    let settings = ModelSettings {
        lstm: oilsignal_core::pipeline::LstmSettings {
            architecture: LstmArchitecture { hidden1: 8, hidden2: 4, dense: 4 },
            ..Default::default()
        },
        ..ModelSettings::default()
    };
    let returns = test.next_returns();
    let truth = test.direction_labels();
    let mut problems = Vec::new();
    let mut buckets = 0;
    for kind in ModelKind::ALL {
        let bt = match backtest_model(kind, &data, 0.8, &settings, 1) {
            Ok(b) => b,
            Err(e) => {
                problems.push(format!("{kind}: {e}"));
                continue;
            }
        };
        let pred = bt.output.signals.to_alphabet(Alphabet::Binary).values;
        let ex = &bt.evaluation.extreme_accuracy;
        let (b95, b99) = (ex.bucket(0.95).unwrap(), ex.bucket(0.99).unwrap());
        if !b99.indices.iter().all(|i| b95.indices.contains(i)) {
            problems.push(format!("{kind}: 1% bucket not inside 5% bucket"));
        }
        for b in [b95, b99] {
            let lower = quantile_oracle(&returns, (1.0 - b.level) / 2.0);
            let upper = quantile_oracle(&returns, (1.0 + b.level) / 2.0);
            let members: Vec<usize> = (0..returns.len()).filter(|&i| returns[i] < lower || returns[i] > upper).collect();
            let correct = members.iter().filter(|&&i| truth[i] == pred[i]).count();
            let acc = (!members.is_empty()).then(|| correct as f64 / members.len() as f64);
            if members != b.indices || acc != b.accuracy {
                problems.push(format!("{kind}: level {} recount differs", b.level));
            }
            buckets += 1;
        }
    }
    check(problems.is_empty(), format!("{buckets} buckets over {} models recounted; problems {problems:?}", ModelKind::ALL.len()))
}

fn c10_extreme_soft() -> Outcome {
    let series = match load_fixture() {
        Ok(s) => s,
        Err(e) => return Unavailable(e),
    };
    let settings = fixture_settings();
    let data = match Prepared::new(series, &settings.features) {
        Ok(d) => d,
        Err(e) => return Fail(e.to_string()),
    };
    match backtest_model(ModelKind::ArmaGarch, &data, 0.8, &settings, 0) {
        Ok(bt) => {
            let ex = &bt.evaluation.extreme_accuracy;
            let one = ex.bucket(0.99).and_then(|b| b.accuracy);
            check(
                one.is_some_and(|a| a > ex.accuracy_regular),
                format!("ARMA-GARCH 1% bucket accuracy {one:?} vs regular {:.4}", ex.accuracy_regular),
            )
        }
        Err(e) => Fail(e.to_string()),
    }
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn c11_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("prices.csv");
    std::fs::write(&csv, common::price_csv(700, 4)).unwrap();
    let mut trees = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let res = common::oilsignal(&["backtest", "--source", common::s(&csv), "--model", "all", "--seed", "7", "--out", common::s(&out)]);
        if !res.status.success() {
            return Fail(format!("run {run} exited with {}: {}", res.status, String::from_utf8_lossy(&res.stderr)));
        }
        let summary: serde_json::Value =
            serde_json::from_slice(&std::fs::read(out.join("backtest_summary.json")).unwrap()).unwrap();
        let failed: Vec<&serde_json::Value> =
            summary["models"].as_array().unwrap().iter().filter(|m| m["ok"] != true).collect();
        if !failed.is_empty() {
            return Fail(format!("run {run} had failing models {failed:?}"));
        }
        trees.push(tree(&out));
    }
    let differing: Vec<_> =
        trees[0].iter().filter(|(p, bytes)| trees[1].get(*p) != Some(*bytes)).map(|(p, _)| p.display().to_string()).collect();
    let same_files = trees[0].keys().eq(trees[1].keys());
    check(
        differing.is_empty() && same_files && !trees[0].is_empty(),
        format!("{} files compared, differing {differing:?}", trees[0].len()),
    )
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 12] = [
        ("1", "GARCH(1,1)-t parameter recovery", c1_garch_recovery),
        ("2", "ARMA(1,1) parameter recovery", c2_arma_recovery),
        ("3", "indicator oracle equivalence", c3_indicator_oracles),
        ("4", "LSTM gradient check", c4_lstm_gradients),
        ("5", "kNN exactness", c5_knn_exactness),
        ("6", "SVR feasibility", c6_svr_feasibility),
        ("7", "backtest identities", c7_backtest_identities),
        ("8", "classification-report arithmetic", c8_report_arithmetic),
        ("9", "Brent fixture reproduction (soft)", c9_fixture_reproduction),
        ("10a", "extreme-value structure (hard)", c10_extreme_structure),
        ("10b", "extreme-value direction on fixture (soft)", c10_extreme_soft),
        ("11", "backtest determinism", c11_determinism),
    ];
    let (mut failed, mut unavailable) = (0, 0);
    for (id, name, f) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()));
            Fail(format!("panicked: {}", msg.unwrap_or_default()))
        });
        match outcome {
            Pass(d) => println!("PASS criterion {id}: {name}: {d}"),
            Fail(d) => {
                failed += 1;
                println!("FAIL criterion {id}: {name}: {d}");
            }
            Unavailable(d) => {
                unavailable += 1;
                println!("FAIL criterion {id}: {name}: not evaluable: {d}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed, {unavailable} not evaluable without the fixture",
        criteria.len() - failed - unavailable
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
