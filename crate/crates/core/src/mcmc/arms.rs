//! Univariate adaptive rejection Metropolis sampling.
//!
//! The envelope is built from chords through the abscissae. Inside an
//! interval it is `max(chord, min(left neighbour chord, right neighbour chord))`
//! and the outer intervals use the extended end chords. For log-concave targets
//! this bounds the density everywhere and the Metropolis step always accepts;
//! otherwise the final Metropolis step keeps the chain exact.

use rand::Rng;

use crate::random::open_uniform;

/// How one draw ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArmsOutcome {
    /// The proposal passed the rejection stage and the Metropolis step.
    Moved,
    /// The Metropolis step kept the current point.
    Stayed,
    /// The envelope could not be built; a random-walk step was used.
    Fallback { accepted: bool },
}

#[derive(Debug, Clone, Copy)]
struct Piece {
    lo: f64,
    hi: f64,
    slope: f64,
    /// Hull value at `lo`.
    y_lo: f64,
    log_mass: f64,
}

impl Piece {
    fn new(lo: f64, hi: f64, slope: f64, y_lo: f64) -> Self {
        let w = hi - lo;
        let log_mass = if (slope * w).abs() < 1e-10 {
            y_lo + w.ln()
        } else if slope > 0.0 {
            y_lo + slope * w + (-(-slope * w).exp_m1() / slope).ln()
        } else {
            y_lo + ((slope * w).exp_m1() / slope).ln()
        };
        Piece {
            lo,
            hi,
            slope,
            y_lo,
            log_mass,
        }
    }

    fn sample(&self, u: f64) -> f64 {
        let w = self.hi - self.lo;
        let s = self.slope;
        let x = if (s * w).abs() < 1e-10 {
            self.lo + u * w
        } else if s > 0.0 {
            self.hi + ((1.0 - u) * (-s * w).exp_m1()).ln_1p() / s
        } else {
            self.lo + (u * (s * w).exp_m1()).ln_1p() / s
        };
        x.clamp(self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy)]
struct Line {
    slope: f64,
    x0: f64,
    y0: f64,
}

impl Line {
    fn through(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Line {
            slope: (y1 - y0) / (x1 - x0),
            x0,
            y0,
        }
    }

    fn at(&self, x: f64) -> f64 {
        self.y0 + self.slope * (x - self.x0)
    }

    fn crossing(&self, other: &Line) -> Option<f64> {
        let ds = self.slope - other.slope;
        if ds == 0.0 {
            return None;
        }
        // y0 + s (x - x0) = y0' + s' (x - x0')
        let x = (other.y0 - self.y0 + self.slope * self.x0 - other.slope * other.x0) / ds;
        x.is_finite().then_some(x)
    }
}

struct Hull {
    pieces: Vec<Piece>,
    total: f64,
}

impl Hull {
    fn build(xs: &[f64], ys: &[f64], lo: f64, hi: f64) -> Option<Hull> {
        let n = xs.len();
        if n < 3 {
            return None;
        }
        let chords: Vec<Line> = (0..n - 1)
            .map(|i| Line::through(xs[i], ys[i], xs[i + 1], ys[i + 1]))
            .collect();
        let mut pieces = Vec::with_capacity(3 * n);
        if lo < xs[0] {
            let c = chords[0];
            pieces.push(Piece::new(lo, xs[0], c.slope, c.at(lo)));
        }
        for i in 0..n - 1 {
            let (a, b) = (xs[i], xs[i + 1]);
            let chord = chords[i];
            let left = (i > 0).then(|| chords[i - 1]);
            let right = chords.get(i + 1).copied();
            let hull_at = |x: f64| -> f64 {
                let outer = match (left, right) {
                    (Some(l), Some(r)) => l.at(x).min(r.at(x)),
                    (Some(l), None) => l.at(x),
                    (None, Some(r)) => r.at(x),
                    (None, None) => f64::NEG_INFINITY,
                };
                chord.at(x).max(outer)
            };
            let lines: Vec<Line> = [Some(chord), left, right].into_iter().flatten().collect();
            let mut cuts = vec![a, b];
            for (j, l1) in lines.iter().enumerate() {
                for l2 in &lines[j + 1..] {
                    if let Some(x) = l1.crossing(l2) {
                        if x > a && x < b {
                            cuts.push(x);
                        }
                    }
                }
            }
            cuts.sort_by(f64::total_cmp);
            for w in cuts.windows(2) {
                let (p, q) = (w[0], w[1]);
                if q - p <= 0.0 {
                    continue;
                }
                let (yp, yq) = (hull_at(p), hull_at(q));
                pieces.push(Piece::new(p, q, (yq - yp) / (q - p), yp));
            }
        }
        if hi > xs[n - 1] {
            let c = chords[n - 2];
            pieces.push(Piece::new(xs[n - 1], hi, c.slope, c.at(xs[n - 1])));
        }
        let max = pieces
            .iter()
            .map(|p| p.log_mass)
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() || pieces.iter().any(|p| p.log_mass.is_nan()) {
            return None;
        }
        let total = max + pieces.iter().map(|p| (p.log_mass - max).exp()).sum::<f64>().ln();
        Some(Hull { pieces, total })
    }

    fn eval(&self, x: f64) -> f64 {
        let i = self
            .pieces
            .partition_point(|p| p.hi < x)
            .min(self.pieces.len() - 1);
        let p = &self.pieces[i];
        p.y_lo + p.slope * (x - p.lo)
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut u = rng.random::<f64>();
        for p in &self.pieces {
            let share = (p.log_mass - self.total).exp();
            if u < share {
                return p.sample(u / share);
            }
            u -= share;
        }
        let last = self.pieces.last().expect("non-empty hull");
        last.sample(rng.random())
    }
}

/// One ARMS transition of `current` under `log_f` on `[lo, hi]`.
///
/// `init` are the starting abscissae; they must not depend on `current`.
/// At most `max_points` abscissae are used and at most `max_tries`
/// envelope proposals are made before falling back to a random walk.
#[allow(clippy::too_many_arguments)]
pub fn arms_step<R, F>(
    rng: &mut R,
    log_f: F,
    lo: f64,
    hi: f64,
    init: &[f64],
    current: f64,
    max_points: usize,
    max_tries: usize,
) -> (f64, ArmsOutcome)
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let f_cur = log_f(current);
    let mut xs: Vec<f64> = init.iter().copied().filter(|x| *x > lo && *x < hi).collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut ys: Vec<f64> = xs.iter().map(|&x| log_f(x)).collect();
    if !f_cur.is_finite() || ys.iter().any(|y| !y.is_finite()) {
        return random_walk(rng, &log_f, lo, hi, current, f_cur);
    }
    let Some(mut hull) = Hull::build(&xs, &ys, lo, hi) else {
        return random_walk(rng, &log_f, lo, hi, current, f_cur);
    };
    for _ in 0..max_tries {
        let x = hull.sample(rng);
        let fx = log_f(x);
        if !fx.is_finite() {
            return random_walk(rng, &log_f, lo, hi, current, f_cur);
        }
        let hx = hull.eval(x);
        if open_uniform(rng).ln() <= fx - hx {
            let h_cur = hull.eval(current);
            let log_ratio = fx + f_cur.min(h_cur) - f_cur - fx.min(hx);
            return if log_ratio >= 0.0 || open_uniform(rng).ln() <= log_ratio {
                (x, ArmsOutcome::Moved)
            } else {
                (current, ArmsOutcome::Stayed)
            };
        }
        if xs.len() < max_points {
            let i = xs.partition_point(|&v| v < x);
            if xs.get(i) != Some(&x) {
                xs.insert(i, x);
                ys.insert(i, fx);
                match Hull::build(&xs, &ys, lo, hi) {
                    Some(h) => hull = h,
                    None => return random_walk(rng, &log_f, lo, hi, current, f_cur),
                }
            }
        }
    }
    random_walk(rng, &log_f, lo, hi, current, f_cur)
}

/// Gaussian random-walk Metropolis step with reflection at the bounds.
fn random_walk<R, F>(
    rng: &mut R,
    log_f: &F,
    lo: f64,
    hi: f64,
    current: f64,
    f_cur: f64,
) -> (f64, ArmsOutcome)
where
    R: Rng + ?Sized,
    F: Fn(f64) -> f64,
{
    let scale = 0.1 * (hi - lo);
    let z: f64 = rng.sample(rand_distr::StandardNormal);
    let mut x = current + scale * z;
    // Reflection keeps the proposal symmetric.
    let width = hi - lo;
    let mut r = (x - lo).rem_euclid(2.0 * width);
    if r > width {
        r = 2.0 * width - r;
    }
    x = lo + r;
    let fx = log_f(x);
    let accept = fx.is_finite()
        && (!f_cur.is_finite() || fx >= f_cur || open_uniform(rng).ln() <= fx - f_cur);
    if accept {
        (x, ArmsOutcome::Fallback { accepted: true })
    } else {
        (current, ArmsOutcome::Fallback { accepted: false })
    }
}
