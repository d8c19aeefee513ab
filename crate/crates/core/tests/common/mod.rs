//! Helpers shared by the integration tests.
#![allow(dead_code)]

use sac_core::model::{log_probeta, ClassRecord, Dataset, Hyperparams, Method, ProBetaSupport};

/// One traditional-method class in school 1 with a single test.
pub fn one_class(scores: Vec<u32>, marks: u32) -> Dataset {
    let students = scores.len() as u32;
    Dataset::new(vec![ClassRecord {
        method: Method::Traditional,
        school: 1,
        student_ids: (1..=students).collect(),
        marks: vec![marks],
        scores: vec![scores],
    }])
    .unwrap()
}

/// `E[ln r]` and `E[θ]` under the truncated prior by midpoint enumeration
/// on `(ln r, θ)`.
pub fn polar_moments(hyper: &Hyperparams, support: ProBetaSupport, cells: usize) -> (f64, f64) {
    let (lo, hi) = (support.radius_min.ln(), support.radius_max.ln());
    let half_pi = std::f64::consts::FRAC_PI_2;
    let (he, ht) = ((hi - lo) / cells as f64, half_pi / cells as f64);
    let mut pts = Vec::new();
    for i in 0..cells {
        let eta = lo + he * (i as f64 + 0.5);
        for j in 0..cells {
            let theta = ht * (j as f64 + 0.5);
            let r = eta.exp();
            let lw = log_probeta(r * theta.cos(), r * theta.sin(), hyper).unwrap() + 2.0 * eta;
            pts.push((lw, eta, theta));
        }
    }
    let top = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    let (mut z, mut e, mut t) = (0.0, 0.0, 0.0);
    for (lw, eta, theta) in pts {
        let w = (lw - top).exp();
        z += w;
        e += w * eta;
        t += w * theta;
    }
    (e / z, t / z)
}

