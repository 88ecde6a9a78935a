//! Brute-force k-nearest-neighbour classifier over {0, 1} labels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Manhattan,
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Uniform,
    Distance,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct KnnConfig {
    pub k: usize,
    pub metric: Metric,
    pub weighting: Weighting,
    /// Accepted for compatibility; the exact scan ignores it.
    pub leaf_size: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        Self { k: 5, metric: Metric::Manhattan, weighting: Weighting::Distance, leaf_size: 30 }
    }
}

impl Metric {
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        match self {
            Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt(),
        }
    }
}

/// Fitted model: the training set itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub config: KnnConfig,
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<i8>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnPrediction {
    pub class: i8,
    /// Normalized vote weight for class 0 and class 1.
    pub scores: [f64; 2],
}

pub fn knn_fit(features: &[Vec<f64>], labels: &[i8], config: KnnConfig) -> Result<KnnModel> {
    if features.is_empty() {
        return Err(Error::insufficient(1, 0));
    }
    if features.len() != labels.len() {
        return Err(Error::invalid("features and labels differ in length"));
    }
    if config.k == 0 || config.k > features.len() {
        return Err(Error::invalid(format!("k = {} must lie in 1..={}", config.k, features.len())));
    }
    if labels.iter().any(|&l| l != 0 && l != 1) {
        return Err(Error::invalid("kNN labels must be 0 or 1"));
    }
    Ok(KnnModel { config, features: features.to_vec(), labels: labels.to_vec() })
}

impl KnnModel {
    /// Indices of the k nearest training rows, ordered by (distance, index).
    pub fn neighbors(&self, query: &[f64]) -> Vec<(usize, f64)> {
        let mut d: Vec<(usize, f64)> =
            self.features.iter().enumerate().map(|(i, row)| (i, self.config.metric.distance(row, query))).collect();
        let k = self.config.k;
        if k < d.len() {
            d.select_nth_unstable_by(k - 1, |a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            d.truncate(k);
        }
        d.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        d
    }

    pub fn predict_one(&self, query: &[f64]) -> KnnPrediction {
        let nn = self.neighbors(query);
        let mut votes = [0.0; 2];
        let exact: Vec<&(usize, f64)> = nn.iter().filter(|(_, d)| *d == 0.0).collect();
        match self.config.weighting {
            Weighting::Distance if !exact.is_empty() => {
                for (i, _) in exact {
                    votes[self.labels[*i] as usize] += 1.0;
                }
            }
            Weighting::Distance => {
                for (i, d) in &nn {
                    votes[self.labels[*i] as usize] += 1.0 / d;
                }
            }
            Weighting::Uniform => {
                for (i, _) in &nn {
                    votes[self.labels[*i] as usize] += 1.0;
                }
            }
        }
        let total = votes[0] + votes[1];
        KnnPrediction { class: i8::from(votes[1] > votes[0]), scores: [votes[0] / total, votes[1] / total] }
    }

    pub fn predict(&self, queries: &[Vec<f64>]) -> Vec<KnnPrediction> {
        queries.iter().map(|q| self.predict_one(q)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn random_set(n: usize, dims: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<i8>) {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..dims).map(|_| rng.random::<f64>()).collect()).collect();
        let y = (0..n).map(|_| rng.random_range(0..2)).collect();
        (x, y)
    }

    #[test]
    fn exact_match_decides_alone() {
        let x = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![0.0, 0.1], vec![0.5, 0.5]];
        let y = vec![1, 0, 0, 0];
        let m = knn_fit(&x, &y, KnnConfig { k: 3, ..Default::default() }).unwrap();
        assert_eq!(m.predict_one(&[0.0, 0.0]).class, 1);
        assert_eq!(m.predict_one(&[0.0, 0.0]).scores, [0.0, 1.0]);
    }

    #[test]
    fn one_neighbor() {
        let (x, y) = random_set(30, 3, 1);
        let m = knn_fit(&x, &y, KnnConfig { k: 1, ..Default::default() }).unwrap();
        let q = [0.4, 0.6, 0.2];
        let nearest = (0..30).min_by(|&a, &b| Metric::Manhattan.distance(&x[a], &q).total_cmp(&Metric::Manhattan.distance(&x[b], &q))).unwrap();
        assert_eq!(m.predict_one(&q).class, y[nearest]);
    }

    #[test]
    fn uniform_full_k_is_majority() {
        let (x, mut y) = random_set(21, 2, 2);
        y.iter_mut().enumerate().for_each(|(i, l)| *l = i8::from(i < 13));
        let cfg = KnnConfig { k: 21, weighting: Weighting::Uniform, ..Default::default() };
        let m = knn_fit(&x, &y, cfg).unwrap();
        assert!(m.predict(&x).iter().all(|p| p.class == 1));
    }

    #[test]
    fn tie_goes_to_zero() {
        let x = vec![vec![0.0], vec![1.0]];
        let m = knn_fit(&x, &[1, 0], KnnConfig { k: 2, ..Default::default() }).unwrap();
        assert_eq!(m.predict_one(&[0.5]).class, 0);
    }

    #[test]
    fn matches_brute_force_scan() {
        let (x, y) = random_set(300, 4, 3);
        let (q, _) = random_set(50, 4, 4);
        let m = knn_fit(&x, &y, KnnConfig::default()).unwrap();
        for query in &q {
            let mut all: Vec<(f64, usize)> =
                x.iter().enumerate().map(|(i, r)| (r.iter().zip(query).map(|(a, b)| (a - b).abs()).sum(), i)).collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let (mut w0, mut w1) = (0.0, 0.0);
            for &(d, i) in &all[..5] {
                if y[i] == 1 {
                    w1 += 1.0 / d;
                } else {
                    w0 += 1.0 / d;
                }
            }
            assert_eq!(m.predict_one(query).class, i8::from(w1 > w0));
        }
    }

    #[test]
    fn rejects_bad_k() {
        let (x, y) = random_set(4, 2, 5);
        assert!(knn_fit(&x, &y, KnnConfig { k: 5, ..Default::default() }).is_err());
        assert!(knn_fit(&[], &[], KnnConfig::default()).is_err());
    }
}
