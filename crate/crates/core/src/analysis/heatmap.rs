use serde::{Deserialize, Serialize};

use super::group_index;
use crate::error::{Error, Result};
use crate::mcmc::SampleSet;
use crate::model::{GroupKey, Method};

/// Fraction of `values` at or below each point of `at`.
pub fn empirical_cdf(values: &[f64], at: &[f64]) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len().max(1) as f64;
    at.iter()
        .map(|&x| sorted.partition_point(|v| *v <= x) as f64 / n)
        .collect()
}

/// Posterior of a class's empirical accuracy CDF on a lattice.
///
/// `density[i][j]` is the posterior density of the CDF value at `p[i]` over
/// level bin `j` of width `1 / levels.len()`, so each column integrates to 1.
/// `lower`, `median` and `upper` are the 2.5%, 50% and 97.5% posterior
/// quantiles of the CDF at each `p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdfHeatmap {
    pub key: GroupKey,
    pub p: Vec<f64>,
    /// Centres of the level bins.
    pub levels: Vec<f64>,
    pub density: Vec<Vec<f64>>,
    pub lower: Vec<f64>,
    pub median: Vec<f64>,
    pub upper: Vec<f64>,
}

impl CdfHeatmap {
    /// Fraction of lattice points where `truth` lies inside the central band.
    pub fn coverage(&self, truth: &[f64]) -> f64 {
        let inside = truth
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .filter(|(t, (lo, hi))| **t >= **lo - 1e-12 && **t <= **hi + 1e-12)
            .count();
        inside as f64 / self.p.len() as f64
    }
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Builds the CDF posterior of group `(method, school, test)` on `lattice`
/// equally spaced points of `[0, 1]` and `levels` level bins.
pub fn cdf_heatmap(
    set: &SampleSet,
    method: Method,
    school: u32,
    test: u32,
    lattice: usize,
    levels: usize,
) -> Result<CdfHeatmap> {
    if lattice < 2 || levels < 1 {
        return Err(Error::InvalidArgument(
            "need at least 2 lattice points and 1 level bin".into(),
        ));
    }
    let key = GroupKey {
        method,
        school,
        test,
    };
    let g = group_index(set, key)?;
    let p: Vec<f64> = (0..lattice).map(|i| i as f64 / (lattice - 1) as f64).collect();
    let width = 1.0 / levels as f64;
    let mut counts = vec![vec![0usize; levels]; lattice];
    let mut columns = vec![Vec::with_capacity(set.len()); lattice];
    for s in &set.samples {
        let cdf = empirical_cdf(&s.state.groups[g].accuracies, &p);
        for (i, &c) in cdf.iter().enumerate() {
            let bin = ((c / width) as usize).min(levels - 1);
            counts[i][bin] += 1;
            columns[i].push(c);
        }
    }
    let n = set.len() as f64;
    let density = counts
        .iter()
        .map(|row| row.iter().map(|&c| c as f64 / (n * width)).collect())
        .collect();
    let (mut lower, mut median, mut upper) = (Vec::new(), Vec::new(), Vec::new());
    for col in &mut columns {
        col.sort_by(f64::total_cmp);
        lower.push(quantile(col, 0.025));
        median.push(quantile(col, 0.5));
        upper.push(quantile(col, 0.975));
    }
    Ok(CdfHeatmap {
        key,
        p,
        levels: (0..levels).map(|j| (j as f64 + 0.5) * width).collect(),
        density,
        lower,
        median,
        upper,
    })
}
