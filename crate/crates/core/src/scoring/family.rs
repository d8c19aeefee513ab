//! Constructors for the two families of proper scoring rules.
//!
//! Symmetric rules are generated by a weight `m` with `m(x) = m(1 - x) > 0`:
//! `f'(p) = m(p) / p` and `g(q) = f(1 - q)`. Asymmetric pairs are generated by
//! any positive `f'` together with `g'(p) = -p f'(p) / (1 - p)`. Integrals are
//! anchored at `p = 1/2`.
//!
//! Interior values are integrated after a change of variable that removes the
//! endpoint singularity of the integrand (`t = e^x` near 0, `t = 1 - e^-y`
//! near 1). Endpoints are `-inf` exactly when the integral diverges there.

use std::sync::Arc;

use super::ScoringRule;
use crate::error::{Error, Result};
use crate::quadrature::simpson;

/// Default node count for the family integrals.
pub const DEFAULT_QUAD_POINTS: usize = 4097;

/// Relative tolerance for the symmetry check on `m`.
pub const SYMMETRY_TOLERANCE: f64 = 1e-9;

/// Offset from the endpoints used to evaluate an integrand limit at 0 or 1.
const LIMIT_STEP: f64 = 1e-9;

type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Nodes for a transformed interval of length `span`: `points` per `ln 2`,
/// the length from the anchor to either endpoint in the untransformed
/// scale, capped at `points`.
fn nodes_for(span: f64, points: usize) -> usize {
    let n = (points as f64 * span.abs() / std::f64::consts::LN_2).ceil();
    (n as usize).clamp(3, points)
}

/// Weight function for the symmetric family.
#[derive(Clone)]
pub struct SymmetricWeight {
    m: RealFn,
    description: String,
}

impl std::fmt::Debug for SymmetricWeight {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymmetricWeight")
            .field("description", &self.description)
            .finish()
    }
}

impl SymmetricWeight {
    pub fn new(m: impl Fn(f64) -> f64 + Send + Sync + 'static, description: impl Into<String>) -> Self {
        SymmetricWeight {
            m: Arc::new(m),
            description: description.into(),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.m)(t)
    }

    pub fn description(&self) -> &str {
        &self.description
    }

    /// Checks `m(t) > 0` and `m(t) = m(1 - t)` at the interior nodes of a
    /// `points`-node uniform grid on `[0, 1]`.
    pub fn validate(&self, points: usize) -> Result<()> {
        let last = (points.max(3) - 1) as f64;
        for i in 1..points.max(3) - 1 {
            let t = i as f64 / last;
            let left = self.eval(t);
            let right = self.eval(1.0 - t);
            if !(left > 0.0) || !left.is_finite() {
                return Err(Error::NonPositiveWeight { t, value: left });
            }
            let scale = left.abs().max(right.abs()).max(1.0);
            if (left - right).abs() > SYMMETRY_TOLERANCE * scale {
                return Err(Error::AsymmetricWeight { t, left, right });
            }
        }
        Ok(())
    }
}

/// `f(p) = ∫_{1/2}^{p} m(t)/t dt` evaluated via `t = e^x`.
fn symmetric_primitive(m: &RealFn, p: f64, points: usize) -> f64 {
    if p == 0.0 {
        let m0 = m(0.0);
        if m0 > 0.0 {
            return f64::NEG_INFINITY;
        }
        // m(0) = 0: the integrand m(t)/t has a finite limit at 0.
        let integrand = |t: f64| {
            let t = t.max(LIMIT_STEP);
            m(t) / t
        };
        return simpson(integrand, 0.5, 0.0, points);
    }
    if !(p > 0.0 && p <= 1.0) {
        return f64::NAN;
    }
    let (a, b) = ((0.5f64).ln(), p.ln());
    simpson(|x| m(x.exp()), a, b, nodes_for(b - a, points))
}

/// Builds the symmetric rule generated by `m`, with `f(1/2) = 0`.
pub fn build_symmetric_family(weight: &SymmetricWeight, quad_points: usize) -> Result<ScoringRule> {
    if quad_points < 3 {
        return Err(Error::InvalidArgument(format!(
            "quad_points must be at least 3, got {quad_points}"
        )));
    }
    weight.validate(quad_points)?;
    let m = Arc::clone(&weight.m);
    let note = format!(
        "symmetric family, m = {}; f(p) = integral from 1/2 to p of m(t)/t",
        weight.description
    );
    Ok(ScoringRule::symmetric(
        format!("symmetric[{}]", weight.description),
        move |q| symmetric_primitive(&m, q, quad_points),
        note,
    ))
}

/// `∫_{1/2}^{p} f'(t) dt` evaluated via `t = e^x`.
fn asymmetric_f(fd: &RealFn, p: f64, points: usize) -> f64 {
    if p == 0.0 {
        let d0 = fd(0.0);
        if !d0.is_finite() {
            return f64::NEG_INFINITY;
        }
        return simpson(|t| fd(t), 0.5, 0.0, points);
    }
    if !(p > 0.0 && p <= 1.0) {
        return f64::NAN;
    }
    let (a, b) = ((0.5f64).ln(), p.ln());
    simpson(|x| {
        let t = x.exp();
        t * fd(t)
    }, a, b, nodes_for(b - a, points))
}

/// `-∫_{1/2}^{p} t f'(t) / (1 - t) dt` evaluated via `t = 1 - e^-y`.
fn asymmetric_g(fd: &RealFn, p: f64, points: usize) -> f64 {
    if p == 1.0 {
        let d1 = fd(1.0);
        if d1 > 0.0 || !d1.is_finite() {
            return f64::NEG_INFINITY;
        }
        let integrand = |t: f64| {
            let t = t.min(1.0 - LIMIT_STEP);
            t * fd(t) / (1.0 - t)
        };
        return -simpson(integrand, 0.5, 1.0, points);
    }
    if !(0.0..1.0).contains(&p) {
        return f64::NAN;
    }
    let y_half = 2f64.ln();
    let y_p = -(-p).ln_1p();
    -simpson(|y| {
        let t = -(-y).exp_m1();
        t * fd(t)
    }, y_half, y_p, nodes_for(y_p - y_half, points))
}

/// Builds the asymmetric pair generated by a positive `f'`.
///
/// `f(p) = offset + ∫_{1/2}^{p} f'` and `g(p) = -∫_{1/2}^{p} t f'(t)/(1-t) dt`.
/// Fails if `f'` is not positive on the interior quadrature grid, or if
/// `f(p) <= g(p)` at any interior grid point; the error lists the offending
/// `p` values.
pub fn build_asymmetric_family(
    f_deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    offset: f64,
    quad_points: usize,
) -> Result<ScoringRule> {
    if quad_points < 3 {
        return Err(Error::InvalidArgument(format!(
            "quad_points must be at least 3, got {quad_points}"
        )));
    }
    if !offset.is_finite() {
        return Err(Error::InvalidArgument(format!("offset must be finite, got {offset}")));
    }
    let fd: RealFn = Arc::new(f_deriv);
    let last = (quad_points - 1) as f64;
    for i in 1..quad_points - 1 {
        let t = i as f64 / last;
        let value = fd(t);
        if !(value > 0.0) || !value.is_finite() {
            return Err(Error::NonPositiveDerivative { t, value });
        }
    }

    let f_fd = Arc::clone(&fd);
    let g_fd = Arc::clone(&fd);
    let rule = ScoringRule::new(
        "asymmetric-family",
        move |q| offset + asymmetric_f(&f_fd, q, quad_points),
        move |q| asymmetric_g(&g_fd, q, quad_points),
        false,
        format!("asymmetric family, offset {offset}; f and g anchored at 1/2"),
    );

    // f > g on the interior of a fixed grid.
    const ORDER_GRID: usize = 1001;
    let violations: Vec<f64> = (1..ORDER_GRID - 1)
        .map(|i| i as f64 / (ORDER_GRID - 1) as f64)
        .filter(|&p| !(rule.f(p).value() > rule.g(p).value()))
        .collect();
    if !violations.is_empty() {
        return Err(Error::ScoreOrdering { violations });
    }
    Ok(rule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::{expected_score_raw, quadratic_rule};

    #[test]
    fn empty_integral_at_half() {
        let w = SymmetricWeight::new(|t| 1.0 + t * (1.0 - t), "1+t(1-t)");
        let rule = build_symmetric_family(&w, DEFAULT_QUAD_POINTS).unwrap();
        assert_eq!(rule.f(0.5).value(), 0.0);
        assert_eq!(rule.g(0.5).value(), 0.0);
    }

    #[test]
    fn constant_weight_gives_natural_log() {
        let w = SymmetricWeight::new(|_| 1.0, "1");
        let rule = build_symmetric_family(&w, DEFAULT_QUAD_POINTS).unwrap();
        for &p in &[0.01f64, 0.2, 0.5, 0.77, 0.999, 1.0] {
            let exact = (2.0 * p).ln();
            assert!((rule.f(p).value() - exact).abs() < 1e-12, "p={p}");
        }
        assert!(rule.f(0.0).is_neg_infinite());
        assert!(rule.g(1.0).is_neg_infinite());
    }

    #[test]
    fn quadratic_weight_matches_quadratic_rule() {
        // m(t) = 2t(1-t) gives f'(q) = 2(1-q): the quadratic rule shifted by
        // the constant that makes f(1/2) = 0.
        let w = SymmetricWeight::new(|t| 2.0 * t * (1.0 - t), "2t(1-t)");
        let rule = build_symmetric_family(&w, DEFAULT_QUAD_POINTS).unwrap();
        let reference = quadratic_rule();
        for i in 0..=100 {
            let q = i as f64 / 100.0;
            let shift = reference.f(q).value() - rule.f(q).value();
            assert!((shift - 0.75).abs() < 1e-9, "q={q} shift={shift}");
            let shift_g = reference.g(q).value() - rule.g(q).value();
            assert!((shift_g - 0.75).abs() < 1e-9, "q={q} shift_g={shift_g}");
        }
    }

    #[test]
    fn finite_difference_derivative_matches_weight() {
        let w = SymmetricWeight::new(|t| (t * (1.0 - t)).sqrt() + 0.1, "sqrt");
        let rule = build_symmetric_family(&w, DEFAULT_QUAD_POINTS).unwrap();
        let h = 1e-5;
        for &q in &[0.1, 0.3, 0.6, 0.9] {
            let fd = (rule.f(q + h).value() - rule.f(q - h).value()) / (2.0 * h);
            assert!((fd - w.eval(q) / q).abs() < 1e-6, "q={q}");
        }
    }

    #[test]
    fn symmetric_rejects_bad_weights() {
        let lopsided = SymmetricWeight::new(|t| 1.0 + t, "1+t");
        assert!(matches!(
            build_symmetric_family(&lopsided, 101),
            Err(Error::AsymmetricWeight { .. })
        ));
        let negative = SymmetricWeight::new(|t| t * (1.0 - t) - 0.1, "t(1-t)-0.1");
        assert!(matches!(
            build_symmetric_family(&negative, 101),
            Err(Error::NonPositiveWeight { .. })
        ));
    }

    #[test]
    fn asymmetric_quadratic_derivative() {
        // f'(t) = 2(1-t). The anchored g is g_ref + 1/4, so offset 1 shifts f
        // by the same constant and f(p) - g(p) = 2p as for the reference rule.
        // (Offset 3/4, i.e. f(0) = 0, would leave f <= g for p <= 1/8.)
        let rule = build_asymmetric_family(|t| 2.0 * (1.0 - t), 1.0, DEFAULT_QUAD_POINTS).unwrap();
        let reference = crate::scoring::asymmetric_rule();
        for i in 0..=50 {
            let q = i as f64 / 50.0;
            let df = rule.f(q).value() - reference.f(q).value();
            let dg = rule.g(q).value() - reference.g(q).value();
            assert!((df - 0.25).abs() < 1e-10, "q={q} df={df}");
            assert!((dg - 0.25).abs() < 1e-10, "q={q} dg={dg}");
        }
        let h = expected_score_raw(&rule, 0.6, 0.6).value();
        assert!((h - 0.36 - 0.25).abs() < 1e-10);
        assert!(build_asymmetric_family(|t| 2.0 * (1.0 - t), 0.75, 1001).is_err());
    }

    #[test]
    fn reciprocal_derivative_recovers_log_shape() {
        // f' = 1/t gives f = ln(2p) and g' = -1/(1-t), i.e. g = ln(2(1-p)).
        let fd: RealFn = Arc::new(|t| 1.0 / t);
        for &p in &[0.05, 0.3, 0.5, 0.8, 0.95] {
            let f = asymmetric_f(&fd, p, DEFAULT_QUAD_POINTS);
            let g = asymmetric_g(&fd, p, DEFAULT_QUAD_POINTS);
            assert!((f - (2.0 * p).ln()).abs() < 1e-10, "p={p}");
            assert!((g - (2.0 * (1.0 - p)).ln()).abs() < 1e-10, "p={p}");
        }
        assert_eq!(asymmetric_f(&fd, 0.0, 101), f64::NEG_INFINITY);
        assert_eq!(asymmetric_g(&fd, 1.0, 101), f64::NEG_INFINITY);
        // f - g = logit(p) + offset is unbounded below, so no offset makes
        // this a valid pair.
        let err = build_asymmetric_family(|t| 1.0 / t, 5.0, 1001).unwrap_err();
        assert!(matches!(err, Error::ScoreOrdering { .. }));
    }

    #[test]
    fn asymmetric_rejects_small_offset() {
        // With f' = 2(1-t) and no offset, f(p) - g(p) = 2p - 1 + 1/4 - ... is
        // negative for small p.
        let err = build_asymmetric_family(|t| 2.0 * (1.0 - t), -1.0, 501).unwrap_err();
        match err {
            Error::ScoreOrdering { violations } => {
                assert!(!violations.is_empty());
                assert!(violations.iter().all(|&p| p > 0.0 && p < 1.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn asymmetric_rejects_nonpositive_derivative() {
        assert!(matches!(
            build_asymmetric_family(|t| t - 0.5, 1.0, 101),
            Err(Error::NonPositiveDerivative { .. })
        ));
    }
}
