//! Grid validators for C1 and C2, and the expected-score lattice.

use std::fmt;
use std::io::Write;

use serde::Serialize;

use super::{expected_score_raw, unit_grid, ExtendedScore, ScoringRule};
use crate::error::{Error, Result};

/// Tolerance for pointwise identities and for flat steps in a grid profile.
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

/// One failing accuracy in a C1 check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C1Failure {
    pub p: f64,
    pub argmax: f64,
    pub local_maxima: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C1Report {
    pub rule: String,
    pub grid_size: usize,
    pub tolerance: f64,
    pub checked: usize,
    pub failures: Vec<C1Failure>,
}

impl C1Report {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for C1Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "C1 {} for rule {}: {} of {} accuracies fail (grid {}, step {:.3e})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.rule,
            self.failures.len(),
            self.checked,
            self.grid_size,
            1.0 / (self.grid_size - 1) as f64,
        )?;
        for fail in self.failures.iter().take(10) {
            writeln!(
                f,
                "  p={:.6} argmax={:.6} local maxima={}",
                fail.p, fail.argmax, fail.local_maxima
            )?;
        }
        if self.failures.len() > 10 {
            writeln!(f, "  ... {} more", self.failures.len() - 10)?;
        }
        Ok(())
    }
}

/// Counts local maxima of a grid profile. Steps within `tol` are flat, so a
/// plateau counts once; the ends count when the profile falls away from them.
fn count_local_maxima(values: &[f64], tol: f64) -> usize {
    let signs: Vec<i8> = values
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0], w[1]);
            if a == b {
                0
            } else if a == f64::NEG_INFINITY {
                1
            } else if b == f64::NEG_INFINITY {
                -1
            } else if b - a > tol {
                1
            } else if a - b > tol {
                -1
            } else {
                0
            }
        })
        .filter(|&s| s != 0)
        .collect();
    if signs.is_empty() {
        return 1;
    }
    let mut count = 0;
    if signs[0] < 0 {
        count += 1;
    }
    count += signs.windows(2).filter(|w| w[0] > 0 && w[1] < 0).count();
    if *signs.last().unwrap() > 0 {
        count += 1;
    }
    count
}

fn argmax_low(values: &[f64], grid: &[f64]) -> f64 {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    grid[best]
}

/// Checks C1 on a `grid_size`-point lattice: for each interior `p`, the grid
/// argmax of `h(p, .)` must lie within one step of `p` and the profile must
/// have exactly one local maximum.
pub fn check_c1(rule: &ScoringRule, grid_size: usize, tolerance: f64) -> Result<C1Report> {
    if grid_size < 101 {
        return Err(Error::InvalidArgument(format!(
            "grid_size must be at least 101, got {grid_size}"
        )));
    }
    let grid: Vec<f64> = unit_grid(grid_size).collect();
    let f: Vec<f64> = grid.iter().map(|&q| rule.f(q).value()).collect();
    let g: Vec<f64> = grid.iter().map(|&q| rule.g(q).value()).collect();
    let step = 1.0 / (grid_size - 1) as f64;

    let mut failures = Vec::new();
    let mut profile = vec![0.0; grid_size];
    for &p in &grid[1..grid_size - 1] {
        for (j, h) in profile.iter_mut().enumerate() {
            *h = combine(p, f[j], g[j]);
        }
        let argmax = argmax_low(&profile, &grid);
        let local_maxima = count_local_maxima(&profile, tolerance);
        if (argmax - p).abs() > step + tolerance || local_maxima != 1 {
            failures.push(C1Failure {
                p,
                argmax,
                local_maxima,
            });
        }
    }
    Ok(C1Report {
        rule: rule.name().to_string(),
        grid_size,
        tolerance,
        checked: grid_size - 2,
        failures,
    })
}

fn combine(p: f64, f: f64, g: f64) -> f64 {
    let a = if p == 0.0 { 0.0 } else { p * f };
    let b = if p == 1.0 { 0.0 } else { (1.0 - p) * g };
    a + b
}

/// A consecutive pair where `h(p, p)` fails to increase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C2Violation {
    pub p: f64,
    pub p_next: f64,
    pub h: f64,
    pub h_next: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct C2Report {
    pub rule: String,
    pub j_lower: f64,
    pub grid_size: usize,
    pub violations: Vec<C2Violation>,
}

impl C2Report {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for C2Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "C2 {} for rule {} on ({}, 1): {} non-increasing step(s) (grid {})",
            if self.passed() { "PASS" } else { "FAIL" },
            self.rule,
            self.j_lower,
            self.violations.len(),
            self.grid_size,
        )?;
        for v in self.violations.iter().take(10) {
            writeln!(
                f,
                "  h({:.6}) = {:.9} >= h({:.6}) = {:.9}",
                v.p, v.h, v.p_next, v.h_next
            )?;
        }
        if self.violations.len() > 10 {
            writeln!(f, "  ... {} more", self.violations.len() - 10)?;
        }
        Ok(())
    }
}

/// Checks that `p -> h(p, p)` strictly increases across the interior points
/// of a `grid_size`-point uniform grid on `[j_lower, 1]`.
pub fn check_c2(rule: &ScoringRule, j_lower: f64, grid_size: usize) -> Result<C2Report> {
    if !(0.0..1.0).contains(&j_lower) {
        return Err(Error::InvalidArgument(format!(
            "j_lower must lie in [0, 1), got {j_lower}"
        )));
    }
    if grid_size < 4 {
        return Err(Error::InvalidArgument(format!(
            "grid_size must be at least 4, got {grid_size}"
        )));
    }
    let width = 1.0 - j_lower;
    let last = (grid_size - 1) as f64;
    let points: Vec<(f64, f64)> = (1..grid_size - 1)
        .map(|i| {
            let p = j_lower + width * i as f64 / last;
            (p, expected_score_raw(rule, p, p).value())
        })
        .collect();
    let violations = points
        .windows(2)
        .filter(|w| !(w[1].1 > w[0].1))
        .map(|w| C2Violation {
            p: w[0].0,
            p_next: w[1].0,
            h: w[0].1,
            h_next: w[1].1,
        })
        .collect();
    Ok(C2Report {
        rule: rule.name().to_string(),
        j_lower,
        grid_size,
        violations,
    })
}

/// `h(p, q)` over a lattice. Accuracies are cell midpoints `(i + 1/2) / n`
/// and reports run over `[0, 1]` inclusive. Values are stored unclipped.
#[derive(Debug, Clone)]
pub struct ExpectedScoreSurface {
    rule: String,
    ps: Vec<f64>,
    qs: Vec<f64>,
    values: Vec<ExtendedScore>,
}

impl ExpectedScoreSurface {
    pub fn compute(rule: &ScoringRule, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidArgument(format!(
                "resolution must be at least 2, got {resolution}"
            )));
        }
        let ps: Vec<f64> = (0..resolution)
            .map(|i| (i as f64 + 0.5) / resolution as f64)
            .collect();
        let qs: Vec<f64> = unit_grid(resolution).collect();
        let mut values = Vec::with_capacity(resolution * resolution);
        for &p in &ps {
            for &q in &qs {
                values.push(expected_score_raw(rule, p, q));
            }
        }
        Ok(ExpectedScoreSurface {
            rule: rule.name().to_string(),
            ps,
            qs,
            values,
        })
    }

    pub fn rule(&self) -> &str {
        &self.rule
    }

    pub fn resolution(&self) -> usize {
        self.ps.len()
    }

    pub fn get(&self, i: usize, j: usize) -> (f64, f64, ExtendedScore) {
        (self.ps[i], self.qs[j], self.values[i * self.qs.len() + j])
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64, ExtendedScore)> + '_ {
        (0..self.ps.len()).flat_map(move |i| (0..self.qs.len()).map(move |j| self.get(i, j)))
    }

    /// Writes `p,q,h` rows. With `clip_floor`, values below it (including
    /// `-inf`) are emitted as the floor; otherwise `-inf` is written as such.
    pub fn write_csv<W: Write>(&self, mut out: W, clip_floor: Option<f64>) -> std::io::Result<()> {
        writeln!(out, "p,q,h")?;
        for (p, q, h) in self.iter() {
            match clip_floor {
                Some(floor) => writeln!(out, "{p},{q},{}", h.clipped(floor))?,
                None => writeln!(out, "{p},{q},{h}")?,
            }
        }
        Ok(())
    }
}
