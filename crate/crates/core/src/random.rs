//! Seeded generator and the handful of draws the samplers need.
//!
//! Gamma and Beta draws go through log space so that tiny shape parameters
//! (Dirichlet concentrations of `μ/K` with large `K`, near-zero Beta
//! parameters) do not underflow to exact zeros.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_distr::{Distribution, Gamma};

use crate::special::log_sum_exp;

/// The generator used for every chain and simulation.
pub type ChainRng = rand_chacha::ChaCha8Rng;

/// Generator for `seed`, on an independent stream per `stream` index.
pub fn rng_for(seed: u64, stream: u64) -> ChainRng {
    let mut rng = ChainRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on `(0, 1]`.
pub fn open_uniform<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

/// `ln X` with `X ~ Gamma(shape, 1)`.
pub fn sample_log_gamma<R: Rng + ?Sized>(rng: &mut R, shape: f64) -> f64 {
    debug_assert!(shape > 0.0);
    if shape >= 1.0 {
        let g = Gamma::new(shape, 1.0).expect("positive shape");
        g.sample(rng).ln()
    } else {
        // X = Y U^(1/shape) with Y ~ Gamma(shape + 1)
        let g = Gamma::new(shape + 1.0, 1.0).expect("positive shape");
        g.sample(rng).ln() + open_uniform(rng).ln() / shape
    }
}

/// Largest double below one.
const ONE_MINUS: f64 = 1.0 - f64::EPSILON / 2.0;

/// `Beta(a, b)` draw, kept strictly inside `(0, 1)`.
pub fn sample_beta<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let la = sample_log_gamma(rng, a);
    let lb = sample_log_gamma(rng, b);
    // p = Ga / (Ga + Gb) = 1 / (1 + exp(lb - la))
    let p = 1.0 / (1.0 + (lb - la).exp());
    p.clamp(f64::MIN_POSITIVE, ONE_MINUS)
}

/// Dirichlet draw; every entry is at least `f64::MIN_POSITIVE`.
pub fn sample_dirichlet<R: Rng + ?Sized>(rng: &mut R, params: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = params.iter().map(|&a| sample_log_gamma(rng, a)).collect();
    let total = log_sum_exp(&logs);
    logs.iter()
        .map(|l| (l - total).exp().max(f64::MIN_POSITIVE))
        .collect()
}

/// Index drawn with probability proportional to `exp(log_weights[i])`.
pub fn sample_log_categorical<R: Rng + ?Sized>(rng: &mut R, log_weights: &[f64]) -> usize {
    debug_assert!(!log_weights.is_empty());
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = log_weights.iter().map(|l| (l - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (i, l) in log_weights.iter().enumerate() {
        u -= (l - max).exp();
        if u < 0.0 {
            return i;
        }
    }
    // Rounding left a sliver: fall back to the last index with positive mass.
    log_weights
        .iter()
        .rposition(|l| *l > f64::NEG_INFINITY)
        .unwrap_or(log_weights.len() - 1)
}
