//! Random forest of entropy-split decision trees over {0, 1} labels.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum information gain for a split to count as an improvement.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_features: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        Self { n_trees: 169, max_features: 2, max_depth: 4, min_samples_split: 49, min_samples_leaf: 1, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Node {
    Leaf {
        counts: [usize; 2],
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        counts: [usize; 2],
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    pub fn counts(&self) -> [usize; 2] {
        match self {
            Node::Leaf { counts } | Node::Split { counts, .. } => *counts,
        }
    }

    /// Class of the leaf reached by `x`; ties go to 0.
    pub fn predict(&self, x: &[f64]) -> i8 {
        match self {
            Node::Leaf { counts } => i8::from(counts[1] > counts[0]),
            Node::Split { feature, threshold, left, right, .. } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Node)) {
        f(self);
        if let Node::Split { left, right, .. } = self {
            left.visit(f);
            right.visit(f);
        }
    }
}

/// Shannon entropy in bits of a two-class count vector.
pub fn entropy(counts: [usize; 2]) -> f64 {
    let n = (counts[0] + counts[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

pub fn information_gain(parent: [usize; 2], left: [usize; 2], right: [usize; 2]) -> f64 {
    let n = (parent[0] + parent[1]) as f64;
    let nl = (left[0] + left[1]) as f64;
    let nr = (right[0] + right[1]) as f64;
    entropy(parent) - nl / n * entropy(left) - nr / n * entropy(right)
}

fn count(labels: &[i8], idx: &[usize]) -> [usize; 2] {
    let ones = idx.iter().filter(|&&i| labels[i] == 1).count();
    [idx.len() - ones, ones]
}

struct Grower<'a> {
    x: &'a [Vec<f64>],
    y: &'a [i8],
    config: &'a RfConfig,
    n_features: usize,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Grower<'_> {
    fn grow(&self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> Node {
        let counts = count(self.y, &idx);
        let pure = counts[0] == 0 || counts[1] == 0;
        if pure || depth >= self.config.max_depth || idx.len() < self.config.min_samples_split {
            return Node::Leaf { counts };
        }
        let features = sample(rng, self.n_features, self.config.max_features.min(self.n_features));
        let mut best: Option<BestSplit> = None;
        for f in features.iter() {
            if let Some(s) = self.best_threshold(&idx, f, counts) {
                if best.as_ref().is_none_or(|b| s.gain > b.gain) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else {
            return Node::Leaf { counts };
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|&&i| self.x[i][split.feature] <= split.threshold);
        Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            gain: split.gain,
            counts,
            left: Box::new(self.grow(left, depth + 1, rng)),
            right: Box::new(self.grow(right, depth + 1, rng)),
        }
    }

    /// Exhaustive scan over midpoints of consecutive distinct values.
    fn best_threshold(&self, idx: &[usize], feature: usize, parent: [usize; 2]) -> Option<BestSplit> {
        let mut order: Vec<(f64, i8)> = idx.iter().map(|&i| (self.x[i][feature], self.y[i])).collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = order.len();
        let min_leaf = self.config.min_samples_leaf.max(1);
        let mut left = [0usize; 2];
        let mut best: Option<BestSplit> = None;
        for s in 0..n - 1 {
            left[order[s].1 as usize] += 1;
            if order[s].0 == order[s + 1].0 {
                continue;
            }
            let n_left = s + 1;
            if n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let right = [parent[0] - left[0], parent[1] - left[1]];
            let gain = information_gain(parent, left, right);
            // strict comparison keeps the smaller threshold on ties
            if gain > MIN_GAIN && best.as_ref().is_none_or(|b| gain > b.gain) {
                let threshold = 0.5 * (order[s].0 + order[s + 1].0);
                best = Some(BestSplit { feature, threshold, gain });
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub config: RfConfig,
    pub n_features: usize,
    pub trees: Vec<Node>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForestPrediction {
    pub class: i8,
    /// Share of trees voting for class 1.
    pub vote_fraction: f64,
}

pub fn rf_train(features: &[Vec<f64>], labels: &[i8], config: RfConfig) -> Result<Forest> {
    let n = features.len();
    if n != labels.len() {
        return Err(Error::invalid("features and labels differ in length"));
    }
    if n == 0 || n < config.min_samples_split {
        return Err(Error::insufficient(config.min_samples_split.max(1), n));
    }
    let n_features = features[0].len();
    if config.max_features == 0 || config.max_features > n_features {
        return Err(Error::invalid(format!("max_features {} outside 1..={n_features}", config.max_features)));
    }
    if config.max_depth == 0 || config.n_trees == 0 {
        return Err(Error::invalid("max_depth and n_trees must be at least 1"));
    }
    if labels.iter().any(|&l| l != 0 && l != 1) {
        return Err(Error::invalid("forest labels must be 0 or 1"));
    }
    let grower = Grower { x: features, y: labels, config: &config, n_features };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(t as u64);
            let boot: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            grower.grow(boot, 0, &mut rng)
        })
        .collect();
    Ok(Forest { config, n_features, trees })
}

impl Forest {
    pub fn predict_one(&self, x: &[f64]) -> ForestPrediction {
        let ones = self.trees.iter().filter(|t| t.predict(x) == 1).count();
        let n = self.trees.len();
        ForestPrediction { class: i8::from(2 * ones > n), vote_fraction: ones as f64 / n as f64 }
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<ForestPrediction> {
        rows.iter().map(|r| self.predict_one(r)).collect()
    }
}
