//! Prediction quality: confusion matrix, class report, permutation importance,
//! ordered k-fold cross-validation and accuracy on extreme-return days.

use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::backtest::{sharpe, simulate, StrategyKind};
use crate::error::{Error, Result};
use crate::market_data::{Alphabet, LabeledFrame, SignalSeries};
use crate::stats;

/// Anything that maps a feature frame to {0, 1} direction predictions, one per row.
pub trait SignalPredictor {
    fn predict(&self, frame: &LabeledFrame) -> Result<Vec<i8>>;
}

impl<F> SignalPredictor for F
where
    F: Fn(&LabeledFrame) -> Result<Vec<i8>>,
{
    fn predict(&self, frame: &LabeledFrame) -> Result<Vec<i8>> {
        self(frame)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        if self.total() == 0 {
            0.0
        } else {
            (self.tp + self.tn) as f64 / self.total() as f64
        }
    }

    /// Same counts with the negative class treated as positive.
    pub fn swapped(&self) -> Self {
        Self { tp: self.tn, fp: self.fn_, fn_: self.fp, tn: self.tp }
    }
}

/// Counts with `positive` as the positive class.
pub fn confusion_counts(truth: &[i8], pred: &[i8], positive: i8) -> Result<ConfusionMatrix> {
    if truth.len() != pred.len() {
        return Err(Error::invalid(format!("{} truths but {} predictions", truth.len(), pred.len())));
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, &p) in truth.iter().zip(pred) {
        match (t == positive, p == positive) {
            (true, true) => cm.tp += 1,
            (false, true) => cm.fp += 1,
            (true, false) => cm.fn_ += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

pub fn confusion(y_true: &SignalSeries, y_pred: &SignalSeries) -> Result<ConfusionMatrix> {
    if y_true.alphabet != y_pred.alphabet {
        return Err(Error::invalid("signal alphabets differ"));
    }
    confusion_counts(&y_true.values, &y_pred.values, y_true.alphabet.high())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
    /// Set when a metric had a zero denominator and was reported as 0.
    pub undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub down_day: ClassMetrics,
    pub up_day: ClassMetrics,
    pub accuracy: f64,
    pub total: usize,
}

fn ratio(num: f64, den: f64, undefined: &mut bool) -> f64 {
    if den == 0.0 {
        *undefined = true;
        0.0
    } else {
        num / den
    }
}

/// Metrics for the positive class of `cm`. F1 = tp / (tp + (fp + fn) / 2).
pub fn class_metrics(cm: &ConfusionMatrix) -> ClassMetrics {
    let (tp, fp, fn_) = (cm.tp as f64, cm.fp as f64, cm.fn_ as f64);
    let mut undefined = false;
    let precision = ratio(tp, tp + fp, &mut undefined);
    let recall = ratio(tp, tp + fn_, &mut undefined);
    let f1 = ratio(tp, tp + 0.5 * (fp + fn_), &mut undefined);
    ClassMetrics { precision, recall, f1, support: cm.tp + cm.fn_, undefined }
}

pub fn classification_report(cm: &ConfusionMatrix) -> ClassReport {
    ClassReport {
        down_day: class_metrics(&cm.swapped()),
        up_day: class_metrics(cm),
        accuracy: cm.accuracy(),
        total: cm.total(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub mean_drop: f64,
    pub share: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationImportance {
    pub baseline_accuracy: f64,
    pub repetitions: usize,
    pub features: Vec<FeatureImportance>,
    /// All drops were zero, so shares are uniform.
    pub uniform_fallback: bool,
}

pub const DEFAULT_REPETITIONS: usize = 10;

fn accuracy(truth: &[i8], pred: &[i8]) -> Result<f64> {
    Ok(confusion_counts(truth, pred, 1)?.accuracy())
}

/// Mean accuracy drop when one feature column is shuffled, clipped at 0 and
/// normalized to shares. Each (feature, repetition) pair has its own RNG stream.
pub fn permutation_importance(
    model: &dyn SignalPredictor,
    test: &LabeledFrame,
    repetitions: usize,
    seed: u64,
) -> Result<PermutationImportance> {
    if test.len() < 2 {
        return Err(Error::insufficient(2, test.len()));
    }
    if repetitions == 0 {
        return Err(Error::invalid("permutation importance needs at least one repetition"));
    }
    let truth = test.direction_labels();
    let baseline = accuracy(&truth, &model.predict(test)?)?;
    let mut drops = Vec::with_capacity(test.columns.len());
    for f in 0..test.columns.len() {
        let mut total = 0.0;
        for r in 0..repetitions {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream((f * repetitions + r) as u64);
            let mut column: Vec<f64> = test.rows.iter().map(|row| row[f]).collect();
            column.shuffle(&mut rng);
            let mut shuffled = test.clone();
            shuffled.rows.iter_mut().zip(&column).for_each(|(row, v)| row[f] = *v);
            total += baseline - accuracy(&truth, &model.predict(&shuffled)?)?;
        }
        drops.push((total / repetitions as f64).max(0.0));
    }
    let sum: f64 = drops.iter().sum();
    let uniform = sum <= 0.0;
    let k = drops.len() as f64;
    let features = test
        .columns
        .iter()
        .zip(&drops)
        .map(|(name, &d)| FeatureImportance {
            feature: name.clone(),
            mean_drop: d,
            share: if uniform { 1.0 / k } else { d / sum },
        })
        .collect();
    Ok(PermutationImportance { baseline_accuracy: baseline, repetitions, features, uniform_fallback: uniform })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    /// Every row outside the test block, in time order.
    pub train: Vec<usize>,
    pub test: Range<usize>,
}

/// Contiguous blocks of n / k rows; the last block takes the remainder.
pub fn ordered_kfold(n: usize, k: usize) -> Result<Vec<Fold>> {
    if k < 2 {
        return Err(Error::invalid("k-fold needs k >= 2"));
    }
    if n < 2 * k {
        return Err(Error::insufficient(2 * k, n));
    }
    let size = n / k;
    Ok((0..k)
        .map(|i| {
            let start = i * size;
            let end = if i + 1 == k { n } else { start + size };
            Fold { index: i, train: (0..start).chain(end..n).collect(), test: start..end }
        })
        .collect())
}

pub fn ordered_kfold_frames(frame: &LabeledFrame, k: usize) -> Result<Vec<(LabeledFrame, LabeledFrame)>> {
    Ok(ordered_kfold(frame.len(), k)?
        .into_iter()
        .map(|f| (frame.select(&f.train), frame.slice(f.test)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvFold {
    pub fold: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub accuracy: Option<f64>,
    pub sharpe_only_long: Option<f64>,
    pub sharpe_long_short: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub k: usize,
    pub folds: Vec<CvFold>,
    pub mean_accuracy: Option<f64>,
    pub mean_sharpe_only_long: Option<f64>,
    pub mean_sharpe_long_short: Option<f64>,
    /// Some fold failed or had an undefined metric; means cover the rest.
    pub incomplete: bool,
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = values.flatten().collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// `fit_predict(train, test)` trains on `train` and returns one signal per test row.
pub fn run_cv(
    frame: &LabeledFrame,
    k: usize,
    fit_predict: impl Fn(&LabeledFrame, &LabeledFrame) -> Result<SignalSeries>,
) -> Result<CvResult> {
    let splits = ordered_kfold(frame.len(), k)?;
    let folds: Vec<CvFold> = splits
        .into_iter()
        .map(|split| {
            let train = frame.select(&split.train);
            let test = frame.slice(split.test.clone());
            let mut row = CvFold {
                fold: split.index,
                train_rows: train.len(),
                test_rows: test.len(),
                accuracy: None,
                sharpe_only_long: None,
                sharpe_long_short: None,
                error: None,
            };
            let outcome = fit_predict(&train, &test).and_then(|signals| {
                let binary = signals.to_alphabet(Alphabet::Binary);
                let acc = accuracy(&test.direction_labels(), &binary.values)?;
                let returns = test.next_return_series();
                let ol = simulate(&signals, &returns, StrategyKind::OnlyLong)?;
                let ls = simulate(&signals, &returns, StrategyKind::LongShort)?;
                Ok((acc, sharpe(&ol.returns).ok(), sharpe(&ls.returns).ok()))
            });
            match outcome {
                Ok((acc, ol, ls)) => {
                    row.accuracy = Some(acc);
                    row.sharpe_only_long = ol;
                    row.sharpe_long_short = ls;
                }
                Err(e) => row.error = Some(e.to_string()),
            }
            row
        })
        .collect();
    let incomplete =
        folds.iter().any(|f| f.error.is_some() || f.sharpe_only_long.is_none() || f.sharpe_long_short.is_none());
    Ok(CvResult {
        k,
        mean_accuracy: mean_of(folds.iter().map(|f| f.accuracy)),
        mean_sharpe_only_long: mean_of(folds.iter().map(|f| f.sharpe_only_long)),
        mean_sharpe_long_short: mean_of(folds.iter().map(|f| f.sharpe_long_short)),
        folds,
        incomplete,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeBucket {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    /// Days with realized return strictly outside [lower, upper].
    pub indices: Vec<usize>,
    pub extreme_count: usize,
    pub regular_count: usize,
    pub correct: usize,
    /// `None` when the bucket is empty.
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremeAccuracy {
    pub total: usize,
    pub accuracy_regular: f64,
    pub buckets: Vec<ExtremeBucket>,
}

impl ExtremeAccuracy {
    pub fn bucket(&self, level: f64) -> Option<&ExtremeBucket> {
        self.buckets.iter().find(|b| b.level == level)
    }
}

pub const EXTREME_LEVELS: [f64; 2] = [0.95, 0.99];

pub fn extreme_accuracy(returns: &[f64], y_true: &[i8], y_pred: &[i8], levels: &[f64]) -> Result<ExtremeAccuracy> {
    let n = returns.len();
    if n == 0 {
        return Err(Error::NoData);
    }
    if y_true.len() != n || y_pred.len() != n {
        return Err(Error::invalid("returns, truths and predictions must align"));
    }
    if levels.iter().any(|l| !(0.0..1.0).contains(l)) {
        return Err(Error::invalid("extreme levels must lie in [0, 1)"));
    }
    let hits: Vec<bool> = y_true.iter().zip(y_pred).map(|(a, b)| a == b).collect();
    let buckets = levels
        .iter()
        .map(|&level| {
            let lower = stats::quantile(returns, (1.0 - level) / 2.0);
            let upper = stats::quantile(returns, (1.0 + level) / 2.0);
            let indices: Vec<usize> = (0..n).filter(|&i| returns[i] < lower || returns[i] > upper).collect();
            let correct = indices.iter().filter(|&&i| hits[i]).count();
            ExtremeBucket {
                level,
                lower,
                upper,
                extreme_count: indices.len(),
                regular_count: n - indices.len(),
                correct,
                accuracy: (!indices.is_empty()).then(|| correct as f64 / indices.len() as f64),
                indices,
            }
        })
        .collect();
    let accuracy_regular = hits.iter().filter(|h| **h).count() as f64 / n as f64;
    Ok(ExtremeAccuracy { total: n, accuracy_regular, buckets })
}
