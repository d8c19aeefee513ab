//! Chain summaries: batch-means standard errors, effective sample size and
//! the potential scale reduction factor.

use serde::{Deserialize, Serialize};

/// Mean of a trace with its batch-means Monte Carlo standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchMeans {
    pub mean: f64,
    pub se: f64,
    /// `n * var / (batch size * var of batch means)`; `n` when the trace is
    /// too short to batch.
    pub ess: f64,
}

/// Batch-means estimate using about `sqrt(n)` batches of about `sqrt(n)`
/// draws each.
pub fn batch_means(trace: &[f64]) -> Option<BatchMeans> {
    let n = trace.len();
    if n == 0 {
        return None;
    }
    let mean = trace.iter().sum::<f64>() / n as f64;
    let var = trace.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let size = (n as f64).sqrt().floor() as usize;
    let batches = n / size.max(1);
    if size < 2 || batches < 2 {
        let se = (var / n as f64).sqrt();
        return Some(BatchMeans {
            mean,
            se,
            ess: n as f64,
        });
    }
    let used = batches * size;
    let means: Vec<f64> = trace[n - used..]
        .chunks(size)
        .map(|c| c.iter().sum::<f64>() / size as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / batches as f64;
    let bvar = means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (batches - 1) as f64;
    let se = (bvar / batches as f64).sqrt();
    let ess = if bvar > 0.0 {
        (var / (size as f64 * bvar) * n as f64).min(n as f64)
    } else {
        n as f64
    };
    Some(BatchMeans { mean, se, ess })
}

/// Gelman-Rubin potential scale reduction over equal-length chains.
/// `None` with fewer than two chains or two draws per chain.
pub fn rhat(chains: &[&[f64]]) -> Option<f64> {
    let m = chains.len();
    let n = chains.iter().map(|c| c.len()).min()?;
    if m < 2 || n < 2 {
        return None;
    }
    let means: Vec<f64> = chains
        .iter()
        .map(|c| c[..n].iter().sum::<f64>() / n as f64)
        .collect();
    let grand = means.iter().sum::<f64>() / m as f64;
    let b = n as f64 * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (m - 1) as f64;
    let w = chains
        .iter()
        .zip(&means)
        .map(|(c, mu)| c[..n].iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64)
        .sum::<f64>()
        / m as f64;
    if w <= 0.0 {
        return if b <= 0.0 { Some(1.0) } else { Some(f64::INFINITY) };
    }
    let var_plus = (n - 1) as f64 / n as f64 * w + b / n as f64;
    Some((var_plus / w).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::rng_for;
    use rand::Rng;

    #[test]
    fn iid_trace_has_full_ess() {
        let mut rng = rng_for(1, 0);
        let trace: Vec<f64> = (0..40_000).map(|_| rng.random::<f64>()).collect();
        let bm = batch_means(&trace).unwrap();
        assert!((bm.mean - 0.5).abs() < 0.01);
        assert!(bm.ess > 20_000.0, "{}", bm.ess);
        let naive = (1.0 / 12.0 / 40_000.0f64).sqrt();
        assert!((bm.se / naive - 1.0).abs() < 0.3);
    }

    #[test]
    fn ar1_trace_has_reduced_ess() {
        let mut rng = rng_for(2, 0);
        let rho = 0.9;
        let mut x = 0.0;
        let trace: Vec<f64> = (0..100_000)
            .map(|_| {
                x = rho * x + rng.random::<f64>() - 0.5;
                x
            })
            .collect();
        // integrated autocorrelation (1 + ρ)/(1 - ρ) = 19
        let ess = batch_means(&trace).unwrap().ess;
        assert!(ess > 100_000.0 / 30.0 && ess < 100_000.0 / 12.0, "{ess}");
    }

    #[test]
    fn rhat_flags_separated_chains() {
        let a: Vec<f64> = (0..100).map(|i| (i % 7) as f64).collect();
        let b: Vec<f64> = (0..100).map(|i| ((i + 3) % 7) as f64).collect();
        let c: Vec<f64> = a.iter().map(|x| x + 50.0).collect();
        assert!((rhat(&[&a, &b]).unwrap() - 1.0).abs() < 0.02);
        assert!(rhat(&[&a, &c]).unwrap() > 2.0);
        assert!(rhat(&[&a]).is_none());
    }
}
