//! Seeded simulators for synthetic returns.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal, StudentT};

use super::garch::GarchParams;

const BURN_IN: usize = 500;

/// ARMA path with Gaussian innovations of standard deviation `sigma`.
pub fn simulate_arma(n: usize, mu: f64, ar: &[f64], ma: &[f64], sigma: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = n + BURN_IN;
    let mut y = vec![0.0; total];
    let mut eps = vec![0.0; total];
    for t in 0..total {
        let z: f64 = StandardNormal.sample(&mut rng);
        eps[t] = sigma * z;
        let mut v = mu + eps[t];
        for (i, a) in ar.iter().enumerate() {
            if t > i {
                v += a * y[t - i - 1];
            }
        }
        for (j, b) in ma.iter().enumerate() {
            if t > j {
                v += b * eps[t - j - 1];
            }
        }
        y[t] = v;
    }
    y.split_off(BURN_IN)
}

/// Unit-variance innovation draw.
pub(crate) fn standardized_draw(df: Option<f64>, rng: &mut ChaCha8Rng) -> f64 {
    match df {
        None => StandardNormal.sample(rng),
        Some(nu) => {
            let t: f64 = StudentT::new(nu).expect("nu > 2").sample(rng);
            t * ((nu - 2.0) / nu).sqrt()
        }
    }
}

/// Zero-mean GARCH path: eps_t = sigma_t z_t with z_t of unit variance.
/// Returns (eps, sigma2).
pub fn simulate_garch(n: usize, params: &GarchParams, seed: u64) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = n + BURN_IN;
    let uncond = params.unconditional_variance().unwrap_or(params.omega);
    let mut eps = vec![0.0f64; total];
    let mut var = vec![uncond; total];
    for t in 0..total {
        let mut s2 = params.omega;
        for (i, a) in params.alpha.iter().enumerate() {
            s2 += a * if t > i { eps[t - i - 1].powi(2) } else { uncond };
        }
        for (j, b) in params.beta.iter().enumerate() {
            s2 += b * if t > j { var[t - j - 1] } else { uncond };
        }
        var[t] = s2;
        eps[t] = s2.sqrt() * standardized_draw(params.df, &mut rng);
    }
    (eps.split_off(BURN_IN), var.split_off(BURN_IN))
}
