//! The zero-question check: classes whose tests carry no questions must give
//! posterior gain summaries that reflect the prior alone.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::{compare_methods, per_student_prob_gain, Partition, StudentValue};
use crate::error::Result;
use crate::mcmc::{run_chain, ChainConfig, SampleSet};
use crate::model::{forward_simulate, ClassSpec, Hyperparams, Method, TestDesign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorCheckThresholds {
    /// Largest allowed `|P(method 2 better) - 0.5|`.
    pub prob_tolerance: f64,
    /// Largest allowed `|E(diff)|` in nats.
    pub diff_tolerance: f64,
    /// Largest allowed `|P(gain > 0) - 0.5|` for any student.
    pub student_tolerance: f64,
}

impl Default for PriorCheckThresholds {
    fn default() -> Self {
        PriorCheckThresholds {
            prob_tolerance: 0.02,
            diff_tolerance: 0.02,
            student_tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorCheckConfig {
    pub hyper: Hyperparams,
    pub chain: ChainConfig,
    pub students: usize,
    pub school: u32,
    pub thresholds: PriorCheckThresholds,
}

impl Default for PriorCheckConfig {
    fn default() -> Self {
        PriorCheckConfig {
            hyper: Hyperparams::default(),
            chain: ChainConfig::default(),
            students: 70,
            school: 1,
            thresholds: PriorCheckThresholds::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorCheckReport {
    pub prob_method2_better: f64,
    pub expected_gain_diff: f64,
    pub students: Vec<(Method, StudentValue)>,
    pub thresholds: PriorCheckThresholds,
    pub samples: usize,
}

impl PriorCheckReport {
    pub fn prob_passed(&self) -> bool {
        (self.prob_method2_better - 0.5).abs() <= self.thresholds.prob_tolerance
    }

    pub fn diff_passed(&self) -> bool {
        self.expected_gain_diff.abs() <= self.thresholds.diff_tolerance
    }

    /// Smallest and largest per-student probability.
    pub fn student_range(&self) -> (f64, f64) {
        self.students
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, s)| {
                (lo.min(s.value), hi.max(s.value))
            })
    }

    pub fn students_passed(&self) -> bool {
        let (lo, hi) = self.student_range();
        let tol = self.thresholds.student_tolerance;
        lo >= 0.5 - tol && hi <= 0.5 + tol
    }

    pub fn passed(&self) -> bool {
        self.prob_passed() && self.diff_passed() && self.students_passed()
    }
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

impl fmt::Display for PriorCheckReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let t = &self.thresholds;
        writeln!(f, "samples: {}", self.samples)?;
        writeln!(
            f,
            "P(method 2 gain > method 1 gain) = {:.4}  target 0.5 +/- {}  {}",
            self.prob_method2_better,
            t.prob_tolerance,
            verdict(self.prob_passed())
        )?;
        writeln!(
            f,
            "E(gain diff) = {:+.4} nats  target |diff| <= {}  {}",
            self.expected_gain_diff,
            t.diff_tolerance,
            verdict(self.diff_passed())
        )?;
        let (lo, hi) = self.student_range();
        write!(
            f,
            "per-student P(gain > 0) in [{lo:.4}, {hi:.4}]  target within 0.5 +/- {}  {}",
            t.student_tolerance,
            verdict(self.students_passed())
        )
    }
}

/// Simulates two zero-question classes with a pretest and a posttest, fits
/// them, and summarizes the gains.
pub fn prior_check(config: &PriorCheckConfig) -> Result<(PriorCheckReport, SampleSet)> {
    let school = config.school;
    let design = TestDesign::uniform(&[school], 2, 0);
    let classes: Vec<ClassSpec> = Method::ALL
        .iter()
        .map(|&method| ClassSpec {
            method,
            school,
            students: config.students,
        })
        .collect();
    let (dataset, _) = forward_simulate(&config.hyper, &design, &classes, config.chain.seed)?;
    let set = run_chain(&dataset, &config.hyper, &config.chain)?;
    let row = compare_methods(&set, &set, school, Partition::Whole, None)?.remove(0);
    let mut students = Vec::new();
    for method in Method::ALL {
        for s in per_student_prob_gain(&set, method, school, None)? {
            students.push((method, s));
        }
    }
    Ok((
        PriorCheckReport {
            prob_method2_better: row.prob_method2_better,
            expected_gain_diff: row.expected_gain_diff,
            students,
            thresholds: config.thresholds,
            samples: set.len(),
        },
        set,
    ))
}
