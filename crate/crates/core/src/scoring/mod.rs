//! Scoring functions for self-assessment of confidence.
//!
//! A student answers a question and reports a confidence `q` that the answer
//! is right. A [`ScoringRule`] pays `f(q)` for a right answer and `g(q)` for a
//! wrong one, so a student whose answers are right with probability `p`
//! expects `h(p, q) = p f(q) + (1 - p) g(q)`.
//!
//! Two properties matter:
//!
//! * **C1** – for every `p` in `(0, 1)`, `q -> h(p, q)` has a single strict
//!   maximum at `q = p` (honest reporting is optimal);
//! * **C2** – `p -> h(p, p)` is strictly increasing on an interval `J`
//!   (being right more often pays more).
//!
//! Symmetric rules (`g(q) = f(1 - q)`) can only satisfy C2 on `(1/2, 1)`;
//! asymmetric pairs can satisfy it on the whole of `(0, 1)`.

mod family;
mod validate;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use family::{
    build_asymmetric_family, build_symmetric_family, SymmetricWeight, DEFAULT_QUAD_POINTS,
    SYMMETRY_TOLERANCE,
};
pub use validate::{
    check_c1, check_c2, C1Report, C2Report, ExpectedScoreSurface, DEFAULT_TOLERANCE,
};

/// Reported confidence that an answer is right, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Confidence(f64);

impl Confidence {
    pub fn new(q: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&q) {
            Ok(Confidence(q))
        } else {
            Err(Error::Domain(format!("confidence must lie in [0, 1], got {q}")))
        }
    }

    /// Converts a report on the 0 to 10 integer scale.
    pub fn from_tenths(q: u8) -> Result<Self> {
        if q > 10 {
            return Err(Error::Domain(format!(
                "confidence on the 0-10 scale must be at most 10, got {q}"
            )));
        }
        Ok(Confidence(f64::from(q) / 10.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Probability that an answer is right, in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct Accuracy(f64);

impl Accuracy {
    pub fn new(p: f64) -> Result<Self> {
        if p > 0.0 && p < 1.0 {
            Ok(Accuracy(p))
        } else {
            Err(Error::Domain(format!("accuracy must lie in (0, 1), got {p}")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// A score that is either finite or negative infinity.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct ExtendedScore(f64);

impl ExtendedScore {
    pub const NEG_INFINITY: ExtendedScore = ExtendedScore(f64::NEG_INFINITY);

    /// Wraps a raw value. NaN and `+inf` are not representable scores.
    pub fn new(value: f64) -> Result<Self> {
        if value.is_nan() || value == f64::INFINITY {
            Err(Error::Domain(format!("not an extended score: {value}")))
        } else {
            Ok(ExtendedScore(value))
        }
    }

    pub fn finite(value: f64) -> Self {
        debug_assert!(value.is_finite());
        ExtendedScore(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_neg_infinite(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// Returns `max(self, floor)`, the clipping used when rendering surfaces.
    pub fn clipped(self, floor: f64) -> f64 {
        self.0.max(floor)
    }
}

impl fmt::Display for ExtendedScore {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_neg_infinite() {
            f.write_str("-inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

pub type ScoreFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A pair of score functions: `f` when the answer is right, `g` when wrong.
///
/// Both functions return `-inf` where the rule diverges.
#[derive(Clone)]
pub struct ScoringRule {
    name: String,
    f: ScoreFn,
    g: ScoreFn,
    symmetric: bool,
    domain_note: String,
}

impl fmt::Debug for ScoringRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScoringRule")
            .field("name", &self.name)
            .field("symmetric", &self.symmetric)
            .field("domain_note", &self.domain_note)
            .finish()
    }
}

impl ScoringRule {
    /// Builds a rule from two functions. `symmetric` asserts `g(q) = f(1 - q)`.
    pub fn new(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        g: impl Fn(f64) -> f64 + Send + Sync + 'static,
        symmetric: bool,
        domain_note: impl Into<String>,
    ) -> Self {
        ScoringRule {
            name: name.into(),
            f: Arc::new(f),
            g: Arc::new(g),
            symmetric,
            domain_note: domain_note.into(),
        }
    }

    /// Builds a symmetric rule, `g(q) = f(1 - q)`.
    pub fn symmetric(
        name: impl Into<String>,
        f: impl Fn(f64) -> f64 + Send + Sync + 'static,
        domain_note: impl Into<String>,
    ) -> Self {
        let f: ScoreFn = Arc::new(f);
        let f2 = Arc::clone(&f);
        ScoringRule {
            name: name.into(),
            f,
            g: Arc::new(move |q| f2(1.0 - q)),
            symmetric: true,
            domain_note: domain_note.into(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn domain_note(&self) -> &str {
        &self.domain_note
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Score for a right answer.
    pub fn f(&self, q: f64) -> ExtendedScore {
        to_extended((self.f)(q))
    }

    /// Score for a wrong answer.
    pub fn g(&self, q: f64) -> ExtendedScore {
        to_extended((self.g)(q))
    }

    pub fn score(&self, q: Confidence, correct: bool) -> ExtendedScore {
        if correct {
            self.f(q.value())
        } else {
            self.g(q.value())
        }
    }

    /// Largest `|g(q) - f(1 - q)|` over a uniform grid, ignoring points where
    /// both sides are `-inf`. Zero for rules built with [`ScoringRule::symmetric`].
    pub fn symmetry_defect(&self, grid_size: usize) -> f64 {
        unit_grid(grid_size.max(2))
            .map(|q| {
                let (a, b) = (self.g(q).value(), self.f(1.0 - q).value());
                if a == b {
                    0.0
                } else {
                    (a - b).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Same rule with both scores mapped through `x -> scale * x + shift`.
    pub fn affine(&self, name: impl Into<String>, scale: f64, shift: f64) -> ScoringRule {
        let f = Arc::clone(&self.f);
        let g = Arc::clone(&self.g);
        ScoringRule {
            name: name.into(),
            f: Arc::new(move |q| scale * f(q) + shift),
            g: Arc::new(move |q| scale * g(q) + shift),
            symmetric: self.symmetric,
            domain_note: self.domain_note.clone(),
        }
    }
}

fn to_extended(v: f64) -> ExtendedScore {
    // log2(0) and friends come back as -inf; a NaN here means the rule was
    // evaluated outside its domain, which we also treat as divergence.
    if v.is_nan() {
        ExtendedScore::NEG_INFINITY
    } else {
        ExtendedScore(v)
    }
}

/// The original classroom rule: `+q` for a right answer, `-q` for a wrong one.
pub fn foster_score(q: Confidence, correct: bool) -> ExtendedScore {
    let q = q.value();
    ExtendedScore::finite(if correct { q } else { -q })
}

/// [`foster_score`] packaged as a rule. It is not proper: the best report is
/// always 0 or 1.
pub fn foster_rule() -> ScoringRule {
    ScoringRule::new("foster", |q| q, |q| -q, false, "f(q)=q, g(q)=-q; finite on [0,1]")
}

/// `f(q) = log2(2q)`, `g(q) = log2(2(1-q))`.
pub fn log_rule() -> ScoringRule {
    ScoringRule::symmetric(
        "log",
        |q| (2.0 * q).log2(),
        "f(q)=log2(2q), g(q)=log2(2(1-q)); f(0)=g(1)=-inf",
    )
}

/// `f(q) = 2q - q^2`, `g(q) = 1 - q^2`.
pub fn quadratic_rule() -> ScoringRule {
    ScoringRule::symmetric(
        "quadratic",
        |q| 2.0 * q - q * q,
        "f(q)=2q-q^2, g(q)=1-q^2; finite on [0,1]",
    )
}

/// `f(q) = 2q - q^2`, `g(q) = -q^2`; truthful payoff `h(p, p) = p^2`.
pub fn asymmetric_rule() -> ScoringRule {
    ScoringRule::new(
        "asymmetric",
        |q| 2.0 * q - q * q,
        |q| -q * q,
        false,
        "f(q)=2q-q^2, g(q)=-q^2; finite on [0,1]",
    )
}

/// Twice [`asymmetric_rule`] minus one: `f(q) = 2(2q - q^2) - 1`,
/// `g(q) = -2q^2 - 1`.
pub fn scaled_asymmetric_rule() -> ScoringRule {
    ScoringRule::new(
        "scaled-asymmetric",
        |q| 2.0 * (2.0 * q - q * q) - 1.0,
        |q| -2.0 * q * q - 1.0,
        false,
        "f(q)=2(2q-q^2)-1, g(q)=-2q^2-1; finite on [0,1]",
    )
}

/// +1/-1 for correctness plus the log rule: `f(q) = 1 + log2(2q)`,
/// `g(q) = -1 + log2(2(1-q))`.
pub fn combined_rule() -> ScoringRule {
    ScoringRule::new(
        "combined",
        |q| 1.0 + (2.0 * q).log2(),
        |q| -1.0 + (2.0 * (1.0 - q)).log2(),
        false,
        "f(q)=1+log2(2q), g(q)=-1+log2(2(1-q)); f(0)=g(1)=-inf",
    )
}

/// Names accepted by [`rule_by_name`].
pub const RULE_NAMES: [&str; 6] = [
    "foster",
    "log",
    "quadratic",
    "asymmetric",
    "scaled-asymmetric",
    "combined",
];

pub fn rule_by_name(name: &str) -> Result<ScoringRule> {
    Ok(match name {
        "foster" => foster_rule(),
        "log" => log_rule(),
        "quadratic" => quadratic_rule(),
        "asymmetric" => asymmetric_rule(),
        "scaled-asymmetric" => scaled_asymmetric_rule(),
        "combined" => combined_rule(),
        other => {
            return Err(Error::InvalidArgument(format!(
                "unknown rule {other:?}; expected one of {}",
                RULE_NAMES.join(", ")
            )))
        }
    })
}

/// Weighted sum where a zero weight suppresses an infinite term.
fn weighted(p: f64, right: ExtendedScore, wrong: ExtendedScore) -> ExtendedScore {
    let part = |w: f64, s: ExtendedScore| {
        if w == 0.0 {
            0.0
        } else {
            w * s.value()
        }
    };
    ExtendedScore(part(p, right) + part(1.0 - p, wrong))
}

/// `h(p, q) = p f(q) + (1 - p) g(q)`.
pub fn expected_score(rule: &ScoringRule, p: Accuracy, q: Confidence) -> ExtendedScore {
    expected_score_raw(rule, p.value(), q.value())
}

pub(crate) fn expected_score_raw(rule: &ScoringRule, p: f64, q: f64) -> ExtendedScore {
    weighted(p, rule.f(q), rule.g(q))
}

/// Uniform grid of `n` points on `[0, 1]`.
pub(crate) fn unit_grid(n: usize) -> impl Iterator<Item = f64> {
    let last = (n - 1) as f64;
    (0..n).map(move |i| i as f64 / last)
}

/// Grid argmax of `q -> h(p, q)` over `grid_size` equally spaced reports in
/// `[0, 1]`. Reports where the rule diverges never win; ties go to the
/// smallest `q`.
pub fn optimal_report(rule: &ScoringRule, p: Accuracy, grid_size: usize) -> Result<Confidence> {
    if grid_size < 3 {
        return Err(Error::InvalidArgument(format!(
            "grid_size must be at least 3, got {grid_size}"
        )));
    }
    let mut best: Option<(f64, f64)> = None;
    for q in unit_grid(grid_size) {
        let h = expected_score_raw(rule, p.value(), q);
        if h.is_neg_infinite() {
            continue;
        }
        match best {
            Some((_, bh)) if h.value() <= bh => {}
            _ => best = Some((q, h.value())),
        }
    }
    // Every grid point diverging would need f and g both infinite.
    let (q, _) = best.ok_or_else(|| {
        Error::Domain(format!("rule {} diverges at every grid report", rule.name()))
    })?;
    Confidence::new(q)
}

/// Tolerance on the sum of a multiple-choice probability vector.
pub const SIMPLEX_TOLERANCE: f64 = 1e-9;

/// Score `ln(q_k)` for a probability vector over the choices of a
/// multiple-choice question whose right answer is `correct_index`.
pub fn multichoice_log_score(probs: &[f64], correct_index: usize) -> Result<ExtendedScore> {
    if probs.is_empty() {
        return Err(Error::InvalidArgument("empty probability vector".into()));
    }
    if let Some(bad) = probs.iter().find(|q| !(q.is_finite() && **q >= 0.0)) {
        return Err(Error::Domain(format!("probability {bad} is not in [0, 1]")));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOLERANCE {
        return Err(Error::Domain(format!("probabilities sum to {total}, not 1")));
    }
    let q = *probs.get(correct_index).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "correct index {correct_index} out of range for {} choices",
            probs.len()
        ))
    })?;
    Ok(ExtendedScore(q.ln()))
}

/// Threshold quoted alongside the computed crossover in [`SabotageReport`].
pub const STATED_SABOTAGE_THRESHOLD: f64 = 0.2;

/// Payoff for deliberately answering wrongly and reporting `q = 0` under
/// [`combined_rule`].
pub fn sabotage_payoff() -> ExtendedScore {
    combined_rule().g(0.0)
}

/// Truthful payoff `h(p, p)` under [`combined_rule`].
pub fn truthful_combined_payoff(p: f64) -> ExtendedScore {
    expected_score_raw(&combined_rule(), p, p)
}

/// Largest interior grid accuracy at which sabotage strictly beats honest
/// reporting under [`combined_rule`]. The grid is `i / (grid_size - 1)` for
/// `i = 1 .. grid_size - 2`.
pub fn sabotage_threshold(grid_size: usize) -> Result<Accuracy> {
    if grid_size < 1001 {
        return Err(Error::InvalidArgument(format!(
            "grid_size must be at least 1001, got {grid_size}"
        )));
    }
    let sabotage = sabotage_payoff().value();
    let last = (grid_size - 1) as f64;
    let threshold = (1..grid_size - 1)
        .map(|i| i as f64 / last)
        .filter(|&p| sabotage > truthful_combined_payoff(p).value())
        .last()
        .ok_or_else(|| Error::Domain("sabotage never pays on this grid".into()))?;
    Accuracy::new(threshold)
}

/// Computed sabotage crossover alongside the quoted 0.2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SabotageReport {
    pub grid_size: usize,
    pub sabotage_payoff: f64,
    pub computed_threshold: f64,
    pub stated_threshold: f64,
}

impl SabotageReport {
    pub fn compute(grid_size: usize) -> Result<Self> {
        Ok(SabotageReport {
            grid_size,
            sabotage_payoff: sabotage_payoff().value(),
            computed_threshold: sabotage_threshold(grid_size)?.value(),
            stated_threshold: STATED_SABOTAGE_THRESHOLD,
        })
    }

    pub fn discrepancy(&self) -> f64 {
        self.computed_threshold - self.stated_threshold
    }
}

impl fmt::Display for SabotageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "sabotage analysis (combined rule, {}-point grid)", self.grid_size)?;
        writeln!(
            f,
            "  sabotage payoff (answer wrong, report q=0): {:.6}",
            self.sabotage_payoff
        )?;
        writeln!(
            f,
            "  computed threshold (largest p where sabotage pays): {:.6}",
            self.computed_threshold
        )?;
        writeln!(f, "  stated threshold: {:.6}", self.stated_threshold)?;
        write!(
            f,
            "  DISCREPANCY computed - stated: {:+.6}",
            self.discrepancy()
        )
    }
}
