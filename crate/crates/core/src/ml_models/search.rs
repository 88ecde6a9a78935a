//! Randomized hyperparameter search scored by ordered k-fold CV on the
//! training block.

use std::ops::Range;

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{knn_fit, rf_train, svr_train, KnnConfig, Metric, RfConfig, SvrConfig, Weighting};
use crate::error::{Error, Result};
use crate::evaluation::ordered_kfold;
use crate::market_data::LabeledFrame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Knn,
    Rf,
    Svr,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelConfig {
    Knn(KnnConfig),
    Rf(RfConfig),
    Svr(SvrConfig),
}

impl ModelConfig {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelConfig::Knn(_) => ModelFamily::Knn,
            ModelConfig::Rf(_) => ModelFamily::Rf,
            ModelConfig::Svr(_) => ModelFamily::Svr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnSpace {
    pub k: Vec<usize>,
    pub metric: Vec<Metric>,
    pub weighting: Vec<Weighting>,
}

impl Default for KnnSpace {
    fn default() -> Self {
        Self {
            k: (1..=15).map(|i| 2 * i + 1).collect(),
            metric: vec![Metric::Manhattan, Metric::Euclidean],
            weighting: vec![Weighting::Uniform, Weighting::Distance],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfSpace {
    pub n_trees: Vec<usize>,
    pub max_features: Vec<usize>,
    pub max_depth: Vec<usize>,
    pub min_samples_split: Vec<usize>,
    pub min_samples_leaf: Vec<usize>,
}

impl Default for RfSpace {
    fn default() -> Self {
        Self {
            n_trees: vec![50, 100, 169, 250],
            max_features: vec![1, 2, 3, 4],
            max_depth: vec![2, 3, 4, 6, 8],
            min_samples_split: vec![2, 10, 25, 49, 100],
            min_samples_leaf: vec![1, 5, 10],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrSpace {
    pub c: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub gamma: Vec<Option<f64>>,
}

impl Default for SvrSpace {
    fn default() -> Self {
        Self {
            c: vec![1.0, 5.0, 19.0, 50.0, 100.0],
            epsilon: vec![0.5, 2.0, 5.0, 10.0, 22.4],
            gamma: vec![None, Some(0.1), Some(1.0)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchSpace {
    pub knn: KnnSpace,
    pub rf: RfSpace,
    pub svr: SvrSpace,
    pub budget: usize,
    pub folds: usize,
    pub seed: u64,
}

impl Default for SearchSpace {
    fn default() -> Self {
        Self {
            knn: KnnSpace::default(),
            rf: RfSpace::default(),
            svr: SvrSpace::default(),
            budget: 20,
            folds: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub seed: u64,
    pub config: ModelConfig,
    /// Mean fold accuracy, or negative mean squared error for SVR.
    pub score: Option<f64>,
    pub fold_scores: Vec<f64>,
    /// Test rows of each fold, as indices into the training frame.
    pub fold_test_rows: Vec<Range<usize>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub family: ModelFamily,
    pub best: ModelConfig,
    pub best_score: f64,
    pub best_trial: usize,
    pub trials: Vec<Trial>,
}

fn pick<T: Copy>(values: &[T], rng: &mut ChaCha8Rng, name: &str) -> Result<T> {
    values.choose(rng).copied().ok_or_else(|| Error::invalid(format!("search list {name} is empty")))
}

fn sample(family: ModelFamily, space: &SearchSpace, seed: u64) -> Result<ModelConfig> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rng = &mut rng;
    Ok(match family {
        ModelFamily::Knn => ModelConfig::Knn(KnnConfig {
            k: pick(&space.knn.k, rng, "k")?,
            metric: pick(&space.knn.metric, rng, "metric")?,
            weighting: pick(&space.knn.weighting, rng, "weighting")?,
            ..KnnConfig::default()
        }),
        ModelFamily::Rf => ModelConfig::Rf(RfConfig {
            n_trees: pick(&space.rf.n_trees, rng, "n_trees")?,
            max_features: pick(&space.rf.max_features, rng, "max_features")?,
            max_depth: pick(&space.rf.max_depth, rng, "max_depth")?,
            min_samples_split: pick(&space.rf.min_samples_split, rng, "min_samples_split")?,
            min_samples_leaf: pick(&space.rf.min_samples_leaf, rng, "min_samples_leaf")?,
            seed,
        }),
        ModelFamily::Svr => ModelConfig::Svr(SvrConfig {
            c: pick(&space.svr.c, rng, "c")?,
            epsilon: pick(&space.svr.epsilon, rng, "epsilon")?,
            gamma: pick(&space.svr.gamma, rng, "gamma")?,
            ..SvrConfig::default()
        }),
    })
}

fn hit_rate(truth: &[i8], pred: impl Iterator<Item = i8>) -> f64 {
    truth.iter().zip(pred).filter(|(t, p)| **t == *p).count() as f64 / truth.len() as f64
}

/// Fit on `train`, score on `test`; higher is better.
pub fn score_config(config: &ModelConfig, train: &LabeledFrame, test: &LabeledFrame) -> Result<f64> {
    match config {
        ModelConfig::Knn(c) => {
            let model = knn_fit(&train.rows, &train.direction_labels(), *c)?;
            Ok(hit_rate(&test.direction_labels(), test.rows.iter().map(|r| model.predict_one(r).class)))
        }
        ModelConfig::Rf(c) => {
            let forest = rf_train(&train.rows, &train.direction_labels(), *c)?;
            Ok(hit_rate(&test.direction_labels(), test.rows.iter().map(|r| forest.predict_one(r).class)))
        }
        ModelConfig::Svr(c) => {
            let model = svr_train(&train.rows, &train.next_close, c)?;
            let sse: f64 = test.rows.iter().zip(&test.next_close).map(|(r, y)| (model.predict_one(r) - y).powi(2)).sum();
            Ok(-sse / test.len() as f64)
        }
    }
}

/// Trial `i` samples its configuration from seed `space.seed + i`.
pub fn random_search(family: ModelFamily, space: &SearchSpace, train: &LabeledFrame) -> Result<SearchResult> {
    if space.budget == 0 {
        return Err(Error::invalid("search budget must be at least 1"));
    }
    let folds = ordered_kfold(train.len(), space.folds)?;
    let configs = (0..space.budget)
        .map(|i| {
            let seed = space.seed.wrapping_add(i as u64);
            sample(family, space, seed).map(|c| (i, seed, c))
        })
        .collect::<Result<Vec<_>>>()?;
    let trials: Vec<Trial> = configs
        .into_par_iter()
        .map(|(index, seed, config)| {
            let scores: Result<Vec<f64>> = folds
                .iter()
                .map(|f| score_config(&config, &train.select(&f.train), &train.slice(f.test.clone())))
                .collect();
            let (score, fold_scores, error) = match scores {
                Ok(s) => (Some(s.iter().sum::<f64>() / s.len() as f64), s, None),
                Err(e) => (None, Vec::new(), Some(e.to_string())),
            };
            Trial {
                index,
                seed,
                config,
                score,
                fold_scores,
                fold_test_rows: folds.iter().map(|f| f.test.clone()).collect(),
                error,
            }
        })
        .collect();
    let best = trials
        .iter()
        .filter_map(|t| t.score.map(|s| (t, s)))
        .fold(None::<(&Trial, f64)>, |acc, (t, s)| match acc {
            Some((_, b)) if b >= s => acc,
            _ => Some((t, s)),
        });
    let Some((winner, best_score)) = best else {
        let first = trials.iter().find_map(|t| t.error.clone()).unwrap_or_default();
        return Err(Error::AllFailed(format!("all {} search trials failed; first error: {first}", trials.len())));
    };
    Ok(SearchResult { family, best: winner.config, best_score, best_trial: winner.index, trials })
}
