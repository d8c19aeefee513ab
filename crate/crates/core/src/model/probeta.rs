//! Exact draws from the proBeta prior.
//!
//! The prior is used on a truncated support: the quarter annulus
//! `radius_min <= |(α, β)| <= radius_max`. The lower cut removes a
//! neighbourhood of the origin carrying mass of order `radius_min^2`; the
//! upper cut is placed where the prior tail `exp(-κ ln(1/(a+b)) (α+β))` has
//! decayed by `e^-60`. Both the samplers and the birth proposal of the
//! trans-dimensional move use the same support.
//!
//! Sampling is by rejection from a piecewise-constant envelope on a
//! log-spaced rectangular grid. The log density is concave in `(α, β)`
//! (`ln B` is jointly convex), so the tangent plane at a cell centre bounds
//! it over the whole cell: `ln f(x) <= ln f(c) + |∂α| hα/2 + |∂β| hβ/2`.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use super::{log_probeta_unchecked, Hyperparams};
use crate::special::digamma;

/// The truncated support shared by every sampler of `(α, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProBetaSupport {
    pub radius_min: f64,
    pub radius_max: f64,
}

impl ProBetaSupport {
    pub const RADIUS_MIN: f64 = 1e-6;
    /// Prior tail decay, in e-folds, at the outer radius.
    pub const TAIL_EFOLDS: f64 = 60.0;

    pub fn for_hyper(hyper: &Hyperparams) -> Self {
        let rate = -hyper.kappa * (hyper.a + hyper.b).ln();
        let radius_max = (Self::TAIL_EFOLDS / rate).clamp(100.0, 1e12);
        ProBetaSupport {
            radius_min: Self::RADIUS_MIN,
            radius_max,
        }
    }

    pub fn contains(&self, alpha: f64, beta: f64) -> bool {
        let r = alpha.hypot(beta);
        alpha > 0.0 && beta > 0.0 && r >= self.radius_min && r <= self.radius_max
    }
}

#[derive(Debug, Clone, Copy)]
struct Cell {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_bound: f64,
}

/// Rejection sampler for the proBeta prior restricted to its support.
#[derive(Debug, Clone)]
pub struct ProBetaSampler {
    hyper: Hyperparams,
    support: ProBetaSupport,
    cells: Vec<Cell>,
    index: WeightedIndex<f64>,
}

/// Ratio between consecutive grid edges.
const EDGE_RATIO: f64 = 1.05;

impl ProBetaSampler {
    pub fn new(hyper: &Hyperparams) -> Self {
        Self::with_support(hyper, ProBetaSupport::for_hyper(hyper))
    }

    pub fn with_support(hyper: &Hyperparams, support: ProBetaSupport) -> Self {
        let mut edges = vec![0.0, support.radius_min];
        while *edges.last().unwrap() < support.radius_max {
            let next = edges.last().unwrap() * EDGE_RATIO;
            edges.push(next.min(support.radius_max));
        }
        let (ln_a, ln_b) = (hyper.a.ln(), hyper.b.ln());
        let mut cells = Vec::new();
        for xs in edges.windows(2) {
            for ys in edges.windows(2) {
                let (x0, x1, y0, y1) = (xs[0], xs[1], ys[0], ys[1]);
                if x0.hypot(y0) > support.radius_max || x1.hypot(y1) < support.radius_min {
                    continue;
                }
                let (cx, cy) = (0.5 * (x0 + x1), 0.5 * (y0 + y1));
                let psi_sum = digamma(cx + cy);
                let grad_x = hyper.kappa * (psi_sum - digamma(cx) + ln_a);
                let grad_y = hyper.kappa * (psi_sum - digamma(cy) + ln_b);
                let log_bound = log_probeta_unchecked(cx, cy, hyper)
                    + grad_x.abs() * 0.5 * (x1 - x0)
                    + grad_y.abs() * 0.5 * (y1 - y0);
                cells.push(Cell {
                    x0,
                    x1,
                    y0,
                    y1,
                    log_bound,
                });
            }
        }
        let top = cells
            .iter()
            .map(|c| c.log_bound + ((c.x1 - c.x0) * (c.y1 - c.y0)).ln())
            .fold(f64::NEG_INFINITY, f64::max);
        let masses: Vec<f64> = cells
            .iter()
            .map(|c| (c.log_bound + ((c.x1 - c.x0) * (c.y1 - c.y0)).ln() - top).exp())
            .collect();
        let index = WeightedIndex::new(&masses).expect("envelope has positive mass");
        ProBetaSampler {
            hyper: *hyper,
            support,
            cells,
            index,
        }
    }

    pub fn support(&self) -> ProBetaSupport {
        self.support
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    /// One exact draw of `(α, β)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        loop {
            let cell = self.cells[self.index.sample(rng)];
            let x = cell.x0 + (cell.x1 - cell.x0) * rng.random::<f64>();
            let y = cell.y0 + (cell.y1 - cell.y0) * rng.random::<f64>();
            if !self.support.contains(x, y) {
                continue;
            }
            let log_f = log_probeta_unchecked(x, y, &self.hyper);
            debug_assert!(log_f <= cell.log_bound + 1e-9, "envelope violated");
            if crate::random::open_uniform(rng).ln() <= log_f - cell.log_bound {
                return (x, y);
            }
        }
    }

    /// Largest excess of the log density over its cell bound at `samples`
    /// uniformly placed points per cell; non-positive when the envelope holds.
    #[doc(hidden)]
    pub fn envelope_excess<R: Rng + ?Sized>(&self, rng: &mut R, samples: usize) -> f64 {
        let mut worst = f64::NEG_INFINITY;
        for cell in &self.cells {
            for _ in 0..samples {
                let x = cell.x0 + (cell.x1 - cell.x0) * rng.random::<f64>();
                let y = cell.y0 + (cell.y1 - cell.y0) * rng.random::<f64>();
                if x <= 0.0 || y <= 0.0 {
                    continue;
                }
                worst = worst.max(log_probeta_unchecked(x, y, &self.hyper) - cell.log_bound);
            }
        }
        worst
    }
}
