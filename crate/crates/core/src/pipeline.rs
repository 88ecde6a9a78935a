//! End-to-end model runs: prepare features, fit on one block, emit signals on
//! another, and score them. Shared by the backtest and cross-validation paths.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::arma_garch::{
    arma_residuals, fit_arma_garch, one_step_predictions, select_order, ArmaGarchOrder, InnovationKind,
};
use crate::backtest::{cross_signal, performance, simulate, EquityCurve, PerformanceReport, StrategyKind};
use crate::error::{Error, Result};
use crate::evaluation::{
    classification_report, confusion_counts, permutation_importance, run_cv, ClassReport, ConfusionMatrix,
    CvResult, ExtremeAccuracy, PermutationImportance, SignalPredictor, EXTREME_LEVELS,
};
use crate::indicators::{build_features, FeatureConfig, FEATURE_COLUMNS};
use crate::market_data::{
    chrono_split, log_returns, minmax_scale, Alphabet, LabeledFrame, PriceSeries, ReturnSeries, ScalingMeta,
    SignalSeries,
};
use crate::ml_models::{
    knn_fit, random_search, rf_train, svr_predict_signals, svr_train, KnnConfig, ModelConfig, ModelFamily,
    RfConfig, SearchSpace, SvrConfig,
};
use crate::neural::{self, LstmArchitecture, TrainConfig, WindowDataset, CLOSE_COLUMN, DEFAULT_LAG};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ArmaGarch,
    CrossSignal,
    Lstm,
    Rf,
    Svr,
    Knn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] =
        [ModelKind::ArmaGarch, ModelKind::CrossSignal, ModelKind::Lstm, ModelKind::Rf, ModelKind::Svr, ModelKind::Knn];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::ArmaGarch => "arma_garch",
            ModelKind::CrossSignal => "cross_signal",
            ModelKind::Lstm => "lstm",
            ModelKind::Rf => "rf",
            ModelKind::Svr => "svr",
            ModelKind::Knn => "knn",
        }
    }

    /// Whether the model reads the indicator feature columns.
    pub fn uses_features(self) -> bool {
        matches!(self, ModelKind::Rf | ModelKind::Svr | ModelKind::Knn)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::invalid(format!("unknown model `{s}`")))
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
}

/// Seed for a named stochastic component: `fnv1a(component) + master` (wrapping).
pub fn derive_seed(component: &str, master: u64) -> u64 {
    fnv1a(component).wrapping_add(master)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArmaGarchSettings {
    pub order: ArmaGarchOrder,
    pub innovation: InnovationKind,
    /// Pick ARMA (p, q) by BIC over `0..=p_max` x `0..=q_max`; otherwise use `order`.
    pub select_order: bool,
    pub p_max: usize,
    pub q_max: usize,
}

impl Default for ArmaGarchSettings {
    fn default() -> Self {
        Self {
            order: ArmaGarchOrder::default(),
            innovation: InnovationKind::StudentT,
            select_order: true,
            p_max: 2,
            q_max: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CrossSettings {
    pub fast: usize,
    pub slow: usize,
}

impl Default for CrossSettings {
    fn default() -> Self {
        Self { fast: 15, slow: 60 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmSettings {
    pub architecture: LstmArchitecture,
    pub train: TrainConfig,
    pub lag: usize,
}

impl Default for LstmSettings {
    fn default() -> Self {
        Self { architecture: LstmArchitecture::default(), train: TrainConfig::default(), lag: DEFAULT_LAG }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSettings {
    pub features: FeatureConfig,
    pub arma_garch: ArmaGarchSettings,
    pub cross: CrossSettings,
    pub lstm: LstmSettings,
    pub knn: KnnConfig,
    pub rf: RfConfig,
    pub svr: SvrConfig,
    /// Tune kNN/RF/SVR on the training block before the final fit.
    pub search: Option<SearchSpace>,
    pub importance_repetitions: usize,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            features: FeatureConfig::default(),
            arma_garch: ArmaGarchSettings::default(),
            cross: CrossSettings::default(),
            lstm: LstmSettings::default(),
            knn: KnnConfig::default(),
            rf: RfConfig::default(),
            svr: SvrConfig::default(),
            search: None,
            importance_repetitions: crate::evaluation::DEFAULT_REPETITIONS,
        }
    }
}

/// Cleaned prices with their log returns and the labelled indicator frame.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub series: PriceSeries,
    pub returns: ReturnSeries,
    pub frame: LabeledFrame,
    index: HashMap<NaiveDate, usize>,
}

impl Prepared {
    pub fn new(series: PriceSeries, features: &FeatureConfig) -> Result<Self> {
        let returns = log_returns(&series)?;
        let frame = build_features(&series, features)?;
        let index = series.dates().into_iter().enumerate().map(|(i, d)| (d, i)).collect();
        Ok(Self { series, returns, frame, index })
    }

    /// Position of `date` in the price series.
    pub fn position(&self, date: NaiveDate) -> Result<usize> {
        self.index.get(&date).copied().ok_or_else(|| Error::invalid(format!("date {date} not in price series")))
    }
}

#[derive(Debug, Clone)]
pub struct ModelOutput {
    pub kind: ModelKind,
    /// One signal per test row, dated at the row.
    pub signals: SignalSeries,
    /// Fitted parameters and training diagnostics.
    pub details: serde_json::Value,
    pub importance: Option<PermutationImportance>,
}

/// Fit `kind` on `train` and predict one signal for every row of `test`.
/// Both frames are unscaled rows of `data.frame`.
pub fn fit_predict(
    kind: ModelKind,
    data: &Prepared,
    train: &LabeledFrame,
    test: &LabeledFrame,
    settings: &ModelSettings,
    seed: u64,
    with_importance: bool,
) -> Result<ModelOutput> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::invalid("train and test blocks must be non-empty"));
    }
    match kind {
        ModelKind::ArmaGarch => run_arma_garch(data, test, &settings.arma_garch),
        ModelKind::CrossSignal => run_cross(data, test, settings.cross),
        ModelKind::Lstm => run_lstm(data, train, test, &settings.lstm, seed),
        ModelKind::Rf | ModelKind::Svr | ModelKind::Knn => {
            run_feature_model(kind, train, test, settings, seed, with_importance)
        }
    }
    .map(|(signals, details, importance)| ModelOutput { kind, signals, details, importance })
}

type Run = (SignalSeries, serde_json::Value, Option<PermutationImportance>);

/// Parameters are fitted on every return outside the test block and its label
/// day; forecasts condition on the actual history before the block.
fn run_arma_garch(data: &Prepared, test: &LabeledFrame, s: &ArmaGarchSettings) -> Result<Run> {
    let first = test.dates[0];
    let last_label = *test.next_dates.last().expect("non-empty test block");
    let r = &data.returns;
    let fit_data: Vec<f64> =
        r.dates.iter().zip(&r.values).filter(|(d, _)| **d < first || **d > last_label).map(|(_, v)| *v).collect();
    let history: Vec<f64> = r.dates.iter().zip(&r.values).filter(|(d, _)| **d < first).map(|(_, v)| *v).collect();
    let by_date: HashMap<NaiveDate, f64> = r.dates.iter().copied().zip(r.values.iter().copied()).collect();
    let test_values = test
        .dates
        .iter()
        .map(|d| by_date.get(d).copied().ok_or_else(|| Error::invalid(format!("no return on {d}"))))
        .collect::<Result<Vec<f64>>>()?;

    let mut order = s.order;
    let selection = if s.select_order {
        let sel = select_order(&fit_data, s.p_max, s.q_max)?;
        order.p = sel.p;
        order.q = sel.q;
        Some(sel)
    } else {
        None
    };
    let fit = fit_arma_garch(&fit_data, order, s.innovation)?;
    let hist_eps = arma_residuals(&fit.arma, &history);
    let preds = one_step_predictions(&fit.arma, &history, &hist_eps, &test_values);
    let values = preds.iter().map(|&p| Alphabet::Directional.code(p > 0.0)).collect();
    let signals = SignalSeries::new(test.dates.clone(), values, Alphabet::Directional)?;
    let details = json!({
        "order": order,
        "order_selection": selection.map(|s| s.candidates),
        "arma": fit.arma,
        "garch": fit.garch,
        "log_likelihood": fit.log_likelihood,
        "bic": fit.bic,
        "arma_log_likelihood": fit.arma_log_likelihood,
        "arma_bic": fit.arma_bic,
        "fit_observations": fit_data.len(),
    });
    Ok((signals, details, None))
}

fn run_cross(data: &Prepared, test: &LabeledFrame, s: CrossSettings) -> Result<Run> {
    let full = cross_signal(&data.series.closes(), &data.series.dates(), s.fast, s.slow)?;
    let offset = data.series.len() - full.len();
    let values = test
        .dates
        .iter()
        .map(|d| {
            let i = data.position(*d)?;
            i.checked_sub(offset)
                .map(|k| full.values[k])
                .ok_or_else(|| Error::invalid(format!("crossover undefined on {d}: needs {} prior bars", s.slow)))
        })
        .collect::<Result<Vec<i8>>>()?;
    let signals = SignalSeries::new(test.dates.clone(), values, Alphabet::Binary)?;
    Ok((signals, json!({ "fast": s.fast, "slow": s.slow }), None))
}

/// Each training row `t` contributes the window of `lag` closes ending at `t`
/// with target close `t + 1`; test rows use the same windows for prediction.
fn run_lstm(data: &Prepared, train: &LabeledFrame, test: &LabeledFrame, s: &LstmSettings, seed: u64) -> Result<Run> {
    let lag = s.lag;
    let closes = data.series.closes();
    let positions = |frame: &LabeledFrame| -> Result<Vec<usize>> { frame.dates.iter().map(|d| data.position(*d)).collect() };
    // Training rows without a full window of history are skipped; test rows must have one.
    let train_ends: Vec<usize> =
        positions(train)?.into_iter().filter(|&j| j + 1 >= lag && j + 1 < closes.len()).collect();
    let test_ends = positions(test)?;
    if let Some(&j) = test_ends.iter().find(|&&j| j + 1 < lag) {
        return Err(Error::insufficient(lag, j + 1));
    }
    if train_ends.is_empty() {
        return Err(Error::insufficient(1, 0));
    }
    let seen = train_ends.iter().flat_map(|&j| closes[j + 1 - lag..=j + 1].iter().copied());
    let (min, max) = seen.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(max > min) {
        return Err(Error::invalid("training closes are constant"));
    }
    let meta = ScalingMeta { columns: vec![CLOSE_COLUMN.into()], min: vec![min], max: vec![max] };
    let scaled: Vec<f64> = closes.iter().map(|c| (c - min) / (max - min)).collect();
    let window = |j: usize| scaled[j + 1 - lag..=j].to_vec();
    let dataset = WindowDataset {
        inputs: train_ends.iter().map(|&j| window(j)).collect(),
        targets: train_ends.iter().map(|&j| scaled[j + 1]).collect(),
    };
    let config = TrainConfig { seed, ..s.train };
    let trained = neural::train(&dataset, s.architecture, &config)?;
    let windows: Vec<Vec<f64>> = test_ends.iter().map(|&j| window(j)).collect();
    let priors: Vec<f64> = test_ends.iter().map(|&j| closes[j]).collect();
    let signals = neural::predict_signals(&trained.model, &windows, &meta, &priors, &test.dates)?;
    let details = json!({
        "architecture": s.architecture,
        "lag": lag,
        "epochs": config.epochs,
        "seed": seed,
        "parameters": trained.model.parameter_count(),
        "epoch_losses": trained.epoch_losses,
        "training_windows": dataset.len(),
    });
    Ok((signals, details, None))
}

fn run_feature_model(
    kind: ModelKind,
    train: &LabeledFrame,
    test: &LabeledFrame,
    settings: &ModelSettings,
    seed: u64,
    with_importance: bool,
) -> Result<Run> {
    let (train, test, _) = minmax_scale(train, test, &FEATURE_COLUMNS)?;
    let family = match kind {
        ModelKind::Knn => ModelFamily::Knn,
        ModelKind::Rf => ModelFamily::Rf,
        _ => ModelFamily::Svr,
    };
    let (config, search) = match &settings.search {
        Some(space) => {
            let space = SearchSpace { seed: derive_seed(&format!("search:{kind}"), seed), ..space.clone() };
            let result = random_search(family, &space, &train)?;
            (result.best, Some(result))
        }
        None => (
            match kind {
                ModelKind::Knn => ModelConfig::Knn(settings.knn),
                ModelKind::Rf => ModelConfig::Rf(RfConfig { seed: derive_seed("rf", seed), ..settings.rf }),
                _ => ModelConfig::Svr(settings.svr),
            },
            None,
        ),
    };
    let predictor: Box<dyn SignalPredictor> = match config {
        ModelConfig::Knn(c) => {
            let model = knn_fit(&train.rows, &train.direction_labels(), c)?;
            Box::new(move |f: &LabeledFrame| Ok(model.predict(&f.rows).iter().map(|p| p.class).collect()))
        }
        ModelConfig::Rf(c) => {
            let forest = rf_train(&train.rows, &train.direction_labels(), c)?;
            Box::new(move |f: &LabeledFrame| Ok(forest.predict(&f.rows).iter().map(|p| p.class).collect()))
        }
        ModelConfig::Svr(c) => {
            let model = svr_train(&train.rows, &train.next_close, &c)?;
            Box::new(move |f: &LabeledFrame| Ok(svr_predict_signals(&model, &f.rows, &f.close, &f.dates)?.values))
        }
    };
    let values = predictor.predict(&test)?;
    let signals = SignalSeries::new(test.dates.clone(), values, Alphabet::Binary)?;
    let importance = if with_importance {
        let reps = settings.importance_repetitions;
        Some(permutation_importance(predictor.as_ref(), &test, reps, derive_seed(&format!("importance:{kind}"), seed))?)
    } else {
        None
    };
    let details = json!({
        "config": config,
        "search": search.map(|s| json!({ "best_trial": s.best_trial, "best_score": s.best_score, "trials": s.trials })),
    });
    Ok((signals, details, importance))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationSummary {
    pub model: ModelKind,
    pub test_rows: usize,
    pub first_test_date: NaiveDate,
    pub last_test_date: NaiveDate,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub class_report: ClassReport,
    pub extreme_accuracy: ExtremeAccuracy,
    pub importance: Option<PermutationImportance>,
    pub details: serde_json::Value,
}

#[derive(Debug, Clone)]
pub struct ModelBacktest {
    pub output: ModelOutput,
    /// One curve per [`StrategyKind::ALL`] entry, same order.
    pub curves: Vec<EquityCurve>,
    pub performance: Vec<PerformanceReport>,
    pub evaluation: EvaluationSummary,
}

/// Chronological split, fit on the first block, trade the second.
pub fn backtest_model(
    kind: ModelKind,
    data: &Prepared,
    train_fraction: f64,
    settings: &ModelSettings,
    seed: u64,
) -> Result<ModelBacktest> {
    let (train, test) = chrono_split(&data.frame, train_fraction)?;
    let model_seed = derive_seed(kind.name(), seed);
    let output = fit_predict(kind, data, &train, &test, settings, model_seed, kind.uses_features())?;
    let returns = test.next_return_series();
    let curves =
        StrategyKind::ALL.iter().map(|&s| simulate(&output.signals, &returns, s)).collect::<Result<Vec<_>>>()?;
    let performance = curves.iter().map(performance).collect::<Result<Vec<_>>>()?;

    let truth = test.direction_labels();
    let pred = output.signals.to_alphabet(Alphabet::Binary).values;
    let confusion = confusion_counts(&truth, &pred, 1)?;
    let extreme = crate::evaluation::extreme_accuracy(&test.next_returns(), &truth, &pred, &EXTREME_LEVELS)?;
    let evaluation = EvaluationSummary {
        model: kind,
        test_rows: test.len(),
        first_test_date: test.dates[0],
        last_test_date: *test.dates.last().expect("non-empty test block"),
        accuracy: confusion.accuracy(),
        confusion,
        class_report: classification_report(&confusion),
        extreme_accuracy: extreme,
        importance: output.importance.clone(),
        details: output.details.clone(),
    };
    Ok(ModelBacktest { output, curves, performance, evaluation })
}

/// Ordered k-fold CV with fixed hyperparameters (no per-fold tuning).
pub fn cv_model(kind: ModelKind, data: &Prepared, k: usize, settings: &ModelSettings, seed: u64) -> Result<CvResult> {
    let fixed = ModelSettings { search: None, ..settings.clone() };
    let model_seed = derive_seed(kind.name(), seed);
    run_cv(&data.frame, k, |train, test| {
        fit_predict(kind, data, train, test, &fixed, model_seed, false).map(|o| o.signals)
    })
}
