//! Epsilon-insensitive support vector regression with an RBF kernel, solved by
//! SMO on the 2l-variable dual with second-order working-set selection.
//!
//! Dual: minimize 0.5 a'Qa + p'a subject to y'a = 0, 0 <= a <= C, where for
//! training row i the pair (a_i, a_{i+l}) holds (alpha+_i, alpha-_i),
//! y = (+1, -1), p = (eps - z_i, eps + z_i) and Q_st = y_s y_t K(s mod l, t mod l).

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::{Alphabet, SignalSeries};
use crate::neural::signal_from_price;

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrConfig {
    pub c: f64,
    pub epsilon: f64,
    /// RBF width; `None` means 1 / n_features.
    pub gamma: Option<f64>,
    /// Stop when the maximal KKT violation drops below this.
    pub tolerance: f64,
    pub shrinking: bool,
    /// Kernel cache size hint in MB. The kernel matrix is precomputed, so this is unused.
    pub cache_size: usize,
    pub max_iterations: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        Self {
            c: 19.0,
            epsilon: 22.4,
            gamma: None,
            tolerance: 1e-3,
            shrinking: true,
            cache_size: 200,
            max_iterations: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub gamma: f64,
    pub bias: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// alpha+ - alpha- for each support vector, in [-C, C].
    pub coefficients: Vec<f64>,
    pub iterations: usize,
    /// Final maximal KKT violation.
    pub violation: f64,
    /// Dual objective (maximization form) after every SMO step.
    #[serde(skip)]
    pub dual_trace: Vec<f64>,
}

pub fn rbf(gamma: f64, a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

struct Solver<'a> {
    l: usize,
    kernel: Vec<f64>,
    p: Vec<f64>,
    y: Vec<f64>,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    active: Vec<bool>,
    config: &'a SvrConfig,
}

impl Solver<'_> {
    fn q(&self, s: usize, t: usize) -> f64 {
        self.y[s] * self.y[t] * self.kernel[(s % self.l) * self.l + t % self.l]
    }

    fn is_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] < self.config.c
        } else {
            self.alpha[t] > 0.0
        }
    }

    fn is_low(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] > 0.0
        } else {
            self.alpha[t] < self.config.c
        }
    }

    /// (Gmax, Gmax2) over the active set: the KKT gap is their sum.
    fn extremes(&self, only_active: bool) -> (f64, f64) {
        let (mut gmax, mut gmax2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for t in 0..2 * self.l {
            if only_active && !self.active[t] {
                continue;
            }
            if self.is_up(t) {
                gmax = gmax.max(-self.y[t] * self.grad[t]);
            }
            if self.is_low(t) {
                gmax2 = gmax2.max(self.y[t] * self.grad[t]);
            }
        }
        (gmax, gmax2)
    }

    fn select(&self) -> Option<(usize, usize, f64)> {
        let mut gmax = f64::NEG_INFINITY;
        let mut i = None;
        for t in 0..2 * self.l {
            if self.active[t] && self.is_up(t) && -self.y[t] * self.grad[t] >= gmax {
                gmax = -self.y[t] * self.grad[t];
                i = Some(t);
            }
        }
        let i = i?;
        let mut gmax2 = f64::NEG_INFINITY;
        let mut best = f64::INFINITY;
        let mut j = None;
        for t in 0..2 * self.l {
            if !self.active[t] || !self.is_low(t) {
                continue;
            }
            gmax2 = gmax2.max(self.y[t] * self.grad[t]);
            let b = gmax + self.y[t] * self.grad[t];
            if b > 0.0 {
                let a = self.q(i, i) + self.q(t, t) - 2.0 * self.y[i] * self.y[t] * self.q(i, t);
                let obj = -(b * b) / if a > 0.0 { a } else { TAU };
                if obj <= best {
                    best = obj;
                    j = Some(t);
                }
            }
        }
        Some((i, j?, gmax + gmax2))
    }

    /// Performs one SMO update and returns the change of the primal-form objective.
    fn step(&mut self, i: usize, j: usize) -> f64 {
        let c = self.config.c;
        let (qii, qjj, qij) = (self.q(i, i), self.q(j, j), self.q(i, j));
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        if self.y[i] != self.y[j] {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-self.grad[i] - self.grad[j]) / quad;
            let diff = old_i - old_j;
            let (mut ai, mut aj) = (old_i + delta, old_j + delta);
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
            self.alpha[i] = ai;
            self.alpha[j] = aj;
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (self.grad[i] - self.grad[j]) / quad;
            let sum = old_i + old_j;
            let (mut ai, mut aj) = (old_i - delta, old_j + delta);
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
            self.alpha[i] = ai;
            self.alpha[j] = aj;
        }
        let (di, dj) = (self.alpha[i] - old_i, self.alpha[j] - old_j);
        let change = self.grad[i] * di + self.grad[j] * dj + 0.5 * (qii * di * di + qjj * dj * dj) + qij * di * dj;
        for t in 0..2 * self.l {
            if self.active[t] {
                self.grad[t] += self.q(t, i) * di + self.q(t, j) * dj;
            }
        }
        change
    }

    fn reconstruct_gradient(&mut self) {
        let n = 2 * self.l;
        for t in 0..n {
            let mut g = self.p[t];
            for s in 0..n {
                if self.alpha[s] != 0.0 {
                    g += self.q(t, s) * self.alpha[s];
                }
            }
            self.grad[t] = g;
        }
    }

    /// Deactivate bound variables that cannot re-enter the working set.
    fn shrink(&mut self, gmax: f64, gmax2: f64) {
        for t in 0..2 * self.l {
            if !self.active[t] {
                continue;
            }
            let g = self.grad[t];
            let drop = if self.alpha[t] >= self.config.c {
                if self.y[t] > 0.0 {
                    -g > gmax
                } else {
                    -g > gmax2
                }
            } else if self.alpha[t] <= 0.0 {
                if self.y[t] > 0.0 {
                    g > gmax2
                } else {
                    g > gmax
                }
            } else {
                false
            };
            if drop {
                self.active[t] = false;
            }
        }
    }

    fn bias(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum, mut free) = (0.0, 0usize);
        for t in 0..2 * self.l {
            let yg = self.y[t] * self.grad[t];
            if self.alpha[t] >= self.config.c {
                if self.y[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.alpha[t] <= 0.0 {
                if self.y[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                free += 1;
                sum += yg;
            }
        }
        let rho = if free > 0 { sum / free as f64 } else { 0.5 * (ub + lb) };
        -rho
    }
}

pub fn svr_train(features: &[Vec<f64>], targets: &[f64], config: &SvrConfig) -> Result<SvrModel> {
    let l = features.len();
    if l < 2 {
        return Err(Error::insufficient(2, l));
    }
    if targets.len() != l {
        return Err(Error::invalid("features and targets differ in length"));
    }
    if targets.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("SVR targets must be finite"));
    }
    if !(config.c > 0.0) || !(config.epsilon >= 0.0) {
        return Err(Error::invalid("SVR needs C > 0 and epsilon >= 0"));
    }
    let gamma = config.gamma.unwrap_or(1.0 / features[0].len().max(1) as f64);
    let mut kernel = vec![0.0; l * l];
    for a in 0..l {
        for b in a..l {
            let k = rbf(gamma, &features[a], &features[b]);
            kernel[a * l + b] = k;
            kernel[b * l + a] = k;
        }
    }
    let p: Vec<f64> = targets.iter().map(|z| config.epsilon - z).chain(targets.iter().map(|z| config.epsilon + z)).collect();
    let y: Vec<f64> = (0..2 * l).map(|t| if t < l { 1.0 } else { -1.0 }).collect();
    let mut s = Solver { l, kernel, grad: p.clone(), p, y, alpha: vec![0.0; 2 * l], active: vec![true; 2 * l], config };

    let shrink_every = l.clamp(1, 1000);
    let mut since_shrink = 0;
    let mut iterations = 0;
    // alpha = 0 gives objective 0
    let mut objective = 0.0;
    let mut dual_trace = vec![0.0];
    let mut unshrunk = false;
    let violation = loop {
        if config.shrinking && since_shrink >= shrink_every {
            since_shrink = 0;
            let (gmax, gmax2) = s.extremes(true);
            if !unshrunk && gmax + gmax2 <= 10.0 * config.tolerance {
                unshrunk = true;
                s.active.iter_mut().for_each(|a| *a = true);
                s.reconstruct_gradient();
            }
            let (gmax, gmax2) = s.extremes(true);
            s.shrink(gmax, gmax2);
        }
        let selected = s.select();
        let done = match selected {
            None => true,
            Some((_, _, gap)) => gap < config.tolerance,
        };
        if done {
            if s.active.iter().all(|&a| a) {
                let (gmax, gmax2) = s.extremes(false);
                break (gmax + gmax2).max(0.0);
            }
            // re-check optimality on the full problem
            s.active.iter_mut().for_each(|a| *a = true);
            s.reconstruct_gradient();
            continue;
        }
        if iterations >= config.max_iterations {
            s.active.iter_mut().for_each(|a| *a = true);
            s.reconstruct_gradient();
            let (gmax, gmax2) = s.extremes(false);
            return Err(Error::SolverCap { iterations, violation: gmax + gmax2 });
        }
        let (i, j, _) = selected.expect("checked above");
        objective += s.step(i, j);
        iterations += 1;
        since_shrink += 1;
        dual_trace.push(-objective);
    };

    let bias = s.bias();
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for i in 0..l {
        let coef = s.alpha[i] - s.alpha[i + l];
        if coef != 0.0 {
            support_vectors.push(features[i].clone());
            coefficients.push(coef);
        }
    }
    Ok(SvrModel { gamma, bias, support_vectors, coefficients, iterations, violation, dual_trace })
}

impl SvrModel {
    pub fn predict_one(&self, x: &[f64]) -> f64 {
        self.bias + self.support_vectors.iter().zip(&self.coefficients).map(|(sv, c)| c * rbf(self.gamma, sv, x)).sum::<f64>()
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_one(r)).collect()
    }
}

/// Predicted closes to {0, 1} signals against the prior actual close.
pub fn svr_predict_signals(
    model: &SvrModel,
    features: &[Vec<f64>],
    prior_closes: &[f64],
    dates: &[NaiveDate],
) -> Result<SignalSeries> {
    if features.len() != prior_closes.len() || features.len() != dates.len() {
        return Err(Error::invalid("features, prior closes and dates must align"));
    }
    let values = model.predict(features).iter().zip(prior_closes).map(|(&p, &c)| signal_from_price(p, c)).collect();
    SignalSeries::new(dates.to_vec(), values, Alphabet::Binary)
}
