//! The hierarchical Beta-mixture model for test marks.
//!
//! For each method group `m`, school `s` and test `t`:
//!
//! ```text
//! K                 ~ (1 - λ) λ^(K-1),           K = 1, 2, ...
//! (α_k, β_k)        ~ proBeta(κ, a, b)            k = 1..K
//! w                 ~ Dirichlet(μ/K, ..., μ/K)
//! k_u               ~ Categorical(w)              u = 1..U
//! p_u               ~ Beta(α_{k_u}, β_{k_u})
//! n_u               ~ Binomial(N, p_u)
//! ```
//!
//! All densities are returned as logarithms.

mod data;
mod probeta;
mod simulate;
mod state;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{ln_beta, ln_choose, ln_gamma};

pub use data::{ClassRecord, Dataset, GroupKey, Method, TestDesign};
pub use probeta::{ProBetaSampler, ProBetaSupport};
pub use simulate::{forward_simulate, sample_component_count, simulate_marks, ClassSpec};
pub use state::{GroupState, LatentState, MixtureComponent};

/// The five constants at the top of the hierarchy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub mu: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            kappa: 0.01,
            a: 0.4525,
            b: 0.4525,
            lambda: 0.5,
            mu: 1.0,
        }
    }
}

impl Hyperparams {
    pub fn new(kappa: f64, a: f64, b: f64, lambda: f64, mu: f64) -> Result<Self> {
        let h = Hyperparams {
            kappa,
            a,
            b,
            lambda,
            mu,
        };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.kappa > 0.0
            && self.a > 0.0
            && self.b > 0.0
            && self.a + self.b < 1.0
            && self.lambda > 0.0
            && self.lambda < 1.0
            && self.mu > 0.0
            && [self.kappa, self.a, self.b, self.lambda, self.mu]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!(
                "hyperparameters need kappa>0, a>0, b>0, a+b<1, 0<lambda<1, mu>0; got {self:?}"
            )))
        }
    }

    /// Dirichlet concentration shared by every component when there are `k`.
    pub fn gamma(&self, k: usize) -> f64 {
        self.mu / k as f64
    }
}

/// Unnormalized log proBeta density without argument checks.
#[inline]
pub(crate) fn log_probeta_unchecked(alpha: f64, beta: f64, hyper: &Hyperparams) -> f64 {
    hyper.kappa
        * (-ln_beta(alpha, beta) + (alpha - 1.0) * hyper.a.ln() + (beta - 1.0) * hyper.b.ln())
}

/// Log of the unnormalized proBeta density
/// `(Γ(α+β) / (Γ(α)Γ(β)))^κ a^(κ(α-1)) b^(κ(β-1))`.
pub fn log_probeta(alpha: f64, beta: f64, hyper: &Hyperparams) -> Result<f64> {
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(Error::Domain(format!(
            "proBeta needs alpha, beta > 0; got ({alpha}, {beta})"
        )));
    }
    Ok(log_probeta_unchecked(alpha, beta, hyper))
}

/// Log prior on the component count: `ln((1 - λ) λ^(K-1))`.
pub fn log_k_prior(k: usize, lambda: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain("component count must be at least 1".into()));
    }
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::Domain(format!("lambda must lie in (0, 1), got {lambda}")));
    }
    Ok((1.0 - lambda).ln() + (k - 1) as f64 * lambda.ln())
}

/// Tolerance on the sum of a weight vector.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Log Dirichlet density including the `1/sqrt(K)` prefactor, i.e. the
/// density with respect to surface measure on the simplex.
pub fn log_dirichlet(weights: &[f64], gamma: &[f64]) -> Result<f64> {
    if weights.len() != gamma.len() || weights.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "weights ({}) and concentrations ({}) must be non-empty and the same length",
            weights.len(),
            gamma.len()
        )));
    }
    if let Some(g) = gamma.iter().find(|g| !(**g > 0.0)) {
        return Err(Error::Domain(format!("concentration {g} is not positive")));
    }
    let total: f64 = weights.iter().sum();
    if weights.iter().any(|w| !(*w > 0.0)) || (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::Domain(format!(
            "weights must be positive and sum to 1 (sum {total})"
        )));
    }
    Ok(log_dirichlet_unchecked(weights, gamma))
}

pub(crate) fn log_dirichlet_unchecked(weights: &[f64], gamma: &[f64]) -> f64 {
    let k = weights.len() as f64;
    let gamma_sum: f64 = gamma.iter().sum();
    let mut out = -0.5 * k.ln() + ln_gamma(gamma_sum);
    for (w, g) in weights.iter().zip(gamma) {
        out += (g - 1.0) * w.ln() - ln_gamma(*g);
    }
    out
}

/// Log binomial pmf of `n` marks out of `marks` at accuracy `p`.
pub fn log_binomial(n: u32, marks: u32, p: f64) -> Result<f64> {
    if n > marks {
        return Err(Error::Domain(format!("score {n} exceeds {marks} marks")));
    }
    if marks == 0 {
        return Ok(0.0);
    }
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("accuracy must lie in (0, 1), got {p}")));
    }
    Ok(ln_choose(marks, n) + n as f64 * p.ln() + (marks - n) as f64 * (-p).ln_1p())
}

/// Log Beta-binomial pmf: the binomial with its accuracy integrated against
/// `Beta(alpha, beta)`.
pub fn log_betabinomial(n: u32, marks: u32, alpha: f64, beta: f64) -> Result<f64> {
    if n > marks {
        return Err(Error::Domain(format!("score {n} exceeds {marks} marks")));
    }
    if !(alpha > 0.0 && beta > 0.0) {
        return Err(Error::Domain(format!(
            "Beta parameters must be positive; got ({alpha}, {beta})"
        )));
    }
    Ok(log_betabinomial_unchecked(n, marks, alpha, beta))
}

#[inline]
pub(crate) fn log_betabinomial_unchecked(n: u32, marks: u32, alpha: f64, beta: f64) -> f64 {
    if marks == 0 {
        return 0.0;
    }
    ln_choose(marks, n) + ln_beta(alpha + n as f64, beta + (marks - n) as f64)
        - ln_beta(alpha, beta)
}
