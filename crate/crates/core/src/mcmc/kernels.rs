use std::f64::consts::FRAC_PI_2;

use rand::Rng;

use super::arms::{arms_step, ArmsOutcome};
use super::{ChainConfig, MoveStats};
use crate::model::{
    log_betabinomial_unchecked, log_dirichlet_unchecked, log_k_prior, log_probeta_unchecked,
    Dataset, GroupState, Hyperparams, LatentState, MixtureComponent, ProBetaSampler,
    ProBetaSupport,
};
use crate::random::{sample_beta, sample_dirichlet, sample_log_categorical};
use crate::special::ln_beta;

/// Initial angular abscissae as fractions of a right angle.
const THETA_INIT: [f64; 7] = [0.02, 0.1, 0.3, 0.5, 0.7, 0.9, 0.98];
/// Number of initial radial abscissae, spread evenly in log radius.
const RADIAL_INIT: usize = 9;
/// Envelope proposals per draw before giving up on the envelope.
const MAX_TRIES: usize = 200;

/// Marks and scores of one group.
#[derive(Debug, Clone, Copy)]
pub struct GroupData<'a> {
    pub marks: u32,
    pub scores: &'a [u32],
}

impl<'a> GroupData<'a> {
    pub fn of(dataset: &'a Dataset, group: &GroupState) -> Self {
        let (marks, scores) = dataset
            .group(group.key)
            .unwrap_or_else(|| panic!("dataset lacks group {}", group.key));
        GroupData { marks, scores }
    }
}

/// Starting state: one `Beta(1, 1)` component per group, accuracies drawn
/// from their conditionals.
pub fn init_state<R: Rng + ?Sized>(dataset: &Dataset, rng: &mut R) -> LatentState {
    let groups = dataset
        .group_keys()
        .into_iter()
        .map(|key| {
            let (_, scores) = dataset.group(key).expect("key from dataset");
            GroupState {
                key,
                components: vec![MixtureComponent {
                    alpha: 1.0,
                    beta: 1.0,
                }],
                weights: vec![1.0],
                assignments: vec![0; scores.len()],
                accuracies: vec![0.5; scores.len()],
            }
        })
        .collect();
    let mut state = LatentState { groups };
    resample_p(&mut state, dataset, rng);
    state
}

/// Draws every accuracy from `Beta(α + n, β + N - n)`.
pub fn resample_p<R: Rng + ?Sized>(state: &mut LatentState, dataset: &Dataset, rng: &mut R) {
    for group in &mut state.groups {
        let data = GroupData::of(dataset, group);
        for (u, &n) in data.scores.iter().enumerate() {
            let c = group.components[group.assignments[u]];
            group.accuracies[u] =
                sample_beta(rng, c.alpha + n as f64, c.beta + (data.marks - n) as f64);
        }
    }
}

/// Draws weights from `Dirichlet(μ/K + c_k)`.
pub fn sample_weights<R: Rng + ?Sized>(group: &GroupState, hyper: &Hyperparams, rng: &mut R) -> Vec<f64> {
    let gamma = hyper.gamma(group.k());
    let params: Vec<f64> = group.counts().iter().map(|&c| gamma + c as f64).collect();
    sample_dirichlet(rng, &params)
}

/// Draws student `u`'s component with `p` integrated out.
pub fn sample_assignment<R: Rng + ?Sized>(
    u: usize,
    group: &GroupState,
    data: GroupData<'_>,
    rng: &mut R,
) -> usize {
    if group.k() == 1 {
        return 0;
    }
    let n = data.scores[u];
    let log_w: Vec<f64> = group
        .weights
        .iter()
        .zip(&group.components)
        .map(|(w, c)| w.ln() + log_betabinomial_unchecked(n, data.marks, c.alpha, c.beta))
        .collect();
    sample_log_categorical(rng, &log_w)
}

/// Collapsed log-joint of one group, with the proBeta prior unnormalized.
pub fn log_joint_group(group: &GroupState, data: GroupData<'_>, hyper: &Hyperparams) -> f64 {
    let k = group.k();
    let mut out = log_k_prior(k, hyper.lambda).expect("k >= 1")
        + log_dirichlet_unchecked(&group.weights, &vec![hyper.gamma(k); k]);
    for c in &group.components {
        out += log_probeta_unchecked(c.alpha, c.beta, hyper);
    }
    for (u, &z) in group.assignments.iter().enumerate() {
        let c = group.components[z];
        out += group.weights[z].ln()
            + log_betabinomial_unchecked(data.scores[u], data.marks, c.alpha, c.beta);
    }
    out
}

/// Collapsed log-joint of a whole state.
pub fn log_joint(state: &LatentState, dataset: &Dataset, hyper: &Hyperparams) -> f64 {
    state
        .groups
        .iter()
        .map(|g| log_joint_group(g, GroupData::of(dataset, g), hyper))
        .sum()
}

/// Scores of the students in one component, as `(n, multiplicity)`.
fn score_histogram(group: &GroupState, data: GroupData<'_>, k: usize) -> Vec<(u32, f64)> {
    let mut counts = vec![0usize; data.marks as usize + 1];
    for (u, &z) in group.assignments.iter().enumerate() {
        if z == k {
            counts[data.scores[u] as usize] += 1;
        }
    }
    counts
        .into_iter()
        .enumerate()
        .filter(|(_, c)| *c > 0)
        .map(|(n, c)| (n as u32, c as f64))
        .collect()
}

/// The transition kernels for one chain. Holds the prior sampler, which is
/// costly to build, and running acceptance counts.
#[derive(Debug, Clone)]
pub struct Kernel {
    hyper: Hyperparams,
    prior: ProBetaSampler,
    k_max: usize,
    ars_max_points: usize,
    eta_init: Vec<f64>,
    theta_init: Vec<f64>,
    pub stats: MoveStats,
}

impl Kernel {
    pub fn new(hyper: &Hyperparams, config: &ChainConfig) -> Self {
        let prior = ProBetaSampler::new(hyper);
        let support = prior.support();
        let (lo, hi) = (support.radius_min.ln(), support.radius_max.ln());
        let eta_init = (0..RADIAL_INIT)
            .map(|i| lo + (hi - lo) * (i as f64 + 0.5) / RADIAL_INIT as f64)
            .collect();
        Kernel {
            hyper: *hyper,
            prior,
            k_max: config.k_max,
            ars_max_points: config.ars_max_points.max(RADIAL_INIT + 1),
            eta_init,
            theta_init: THETA_INIT.iter().map(|f| f * FRAC_PI_2).collect(),
            stats: MoveStats::default(),
        }
    }

    pub fn hyper(&self) -> &Hyperparams {
        &self.hyper
    }

    pub fn support(&self) -> ProBetaSupport {
        self.prior.support()
    }

    /// One palindromic pass over every group.
    pub fn sweep<R: Rng + ?Sized>(&mut self, state: &mut LatentState, dataset: &Dataset, rng: &mut R) {
        for group in &mut state.groups {
            let data = GroupData::of(dataset, group);
            self.update_assignments(group, data, rng);
            group.weights = sample_weights(group, &self.hyper, rng);
            self.update_components(group, data, rng);
            self.sample_k(group, rng);
            self.sample_k(group, rng);
            self.update_components(group, data, rng);
            group.weights = sample_weights(group, &self.hyper, rng);
            self.update_assignments(group, data, rng);
        }
    }

    fn update_assignments<R: Rng + ?Sized>(&self, group: &mut GroupState, data: GroupData<'_>, rng: &mut R) {
        if group.k() == 1 {
            return;
        }
        for u in 0..group.assignments.len() {
            group.assignments[u] = sample_assignment(u, group, data, rng);
        }
    }

    fn update_components<R: Rng + ?Sized>(&mut self, group: &mut GroupState, data: GroupData<'_>, rng: &mut R) {
        for k in 0..group.k() {
            group.components[k] = self.sample_component(k, group, data, rng);
        }
    }

    /// Updates `(α, β)` of component `k`: an ARMS draw of the radius along the
    /// ray through the origin, then of the angle at that radius.
    pub fn sample_component<R: Rng + ?Sized>(
        &mut self,
        k: usize,
        group: &GroupState,
        data: GroupData<'_>,
        rng: &mut R,
    ) -> MixtureComponent {
        let hist = if data.marks == 0 {
            Vec::new()
        } else {
            score_histogram(group, data, k)
        };
        let size: f64 = hist.iter().map(|(_, c)| c).sum();
        let hyper = self.hyper;
        let marks = data.marks;
        let log_target = move |alpha: f64, beta: f64| -> f64 {
            let mut v = log_probeta_unchecked(alpha, beta, &hyper);
            if size > 0.0 {
                v -= size * ln_beta(alpha, beta);
                for &(n, c) in &hist {
                    v += c * ln_beta(alpha + n as f64, beta + (marks - n) as f64);
                }
            }
            v
        };
        let support = self.prior.support();
        let c = group.components[k];
        let sigma = c.alpha.hypot(c.beta);
        let theta = c.beta.atan2(c.alpha);

        // Radius: polar measure σ dσ becomes σ² dη with η = ln σ.
        let (cos, sin) = (theta.cos(), theta.sin());
        let radial = |eta: f64| {
            let s = eta.exp();
            2.0 * eta + log_target(s * cos, s * sin)
        };
        let (eta, out) = arms_step(
            rng,
            radial,
            support.radius_min.ln(),
            support.radius_max.ln(),
            &self.eta_init,
            sigma.ln().clamp(support.radius_min.ln(), support.radius_max.ln()),
            self.ars_max_points,
            MAX_TRIES,
        );
        self.stats.record_arms(out);
        let sigma = eta.exp();

        let angular = |t: f64| log_target(sigma * t.cos(), sigma * t.sin());
        let (theta, out) = arms_step(
            rng,
            angular,
            0.0,
            FRAC_PI_2,
            &self.theta_init,
            theta,
            self.ars_max_points,
            MAX_TRIES,
        );
        self.stats.record_arms(out);
        MixtureComponent {
            alpha: sigma * theta.cos(),
            beta: sigma * theta.sin(),
        }
    }

    /// Birth/death move on `K`.
    ///
    /// The new component of a birth is empty, so the data never enter.
    pub fn sample_k<R: Rng + ?Sized>(&mut self, group: &mut GroupState, rng: &mut R) {
        if rng.random::<bool>() {
            self.birth(group, rng);
        } else {
            self.death(group, rng);
        }
    }

    /// Log acceptance ratio of a birth from `k` to `k + 1` components that
    /// maps `small` to `large` with new weight `v`.
    fn log_birth_ratio(&self, k: usize, small: &[f64], large: &[f64], v: f64, students: usize, empty_after: usize) -> f64 {
        let h = &self.hyper;
        let (kf, k1) = (k as f64, (k + 1) as f64);
        log_k_prior(k + 1, h.lambda).unwrap() - log_k_prior(k, h.lambda).unwrap()
            + log_dirichlet_unchecked(large, &vec![h.gamma(k + 1); k + 1])
            - log_dirichlet_unchecked(small, &vec![h.gamma(k); k])
            + students as f64 * (-v).ln_1p()
            // reverse picks one of the empty components
            - (empty_after as f64).ln()
            // forward: slot 1/(K+1) and v ~ Beta(1, K) with density K (1-v)^(K-1)
            + k1.ln()
            - kf.ln()
            // surface-measure Jacobian sqrt((K+1)/K) (1-v)^(K-1); the power
            // cancels the proposal's
            + 0.5 * (k1 / kf).ln()
    }

    fn birth<R: Rng + ?Sized>(&mut self, group: &mut GroupState, rng: &mut R) {
        self.stats.birth_proposed += 1;
        let k = group.k();
        if k >= self.k_max {
            return;
        }
        let v = sample_beta(rng, 1.0, k as f64);
        let slot = rng.random_range(0..=k);
        let mut large: Vec<f64> = group
            .weights
            .iter()
            .map(|w| (w * (1.0 - v)).max(f64::MIN_POSITIVE))
            .collect();
        large.insert(slot, v);
        let empty_after = group.counts().iter().filter(|&&c| c == 0).count() + 1;
        let log_a = self.log_birth_ratio(k, &group.weights, &large, v, group.assignments.len(), empty_after);
        if log_a >= 0.0 || rng.random::<f64>().ln() < log_a {
            let (alpha, beta) = self.prior.sample(rng);
            group.components.insert(slot, MixtureComponent { alpha, beta });
            group.weights = large;
            for z in &mut group.assignments {
                if *z >= slot {
                    *z += 1;
                }
            }
            self.stats.birth_accepted += 1;
        }
    }

    fn death<R: Rng + ?Sized>(&mut self, group: &mut GroupState, rng: &mut R) {
        self.stats.death_proposed += 1;
        let k = group.k();
        if k == 1 {
            return;
        }
        let empty: Vec<usize> = group
            .counts()
            .iter()
            .enumerate()
            .filter(|(_, c)| **c == 0)
            .map(|(i, _)| i)
            .collect();
        if empty.is_empty() {
            return;
        }
        let j = empty[rng.random_range(0..empty.len())];
        let v = group.weights[j];
        let rest: f64 = group
            .weights
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, w)| w)
            .sum();
        let small: Vec<f64> = group
            .weights
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, w)| (w / rest).max(f64::MIN_POSITIVE))
            .collect();
        let log_a = -self.log_birth_ratio(k - 1, &small, &group.weights, v, group.assignments.len(), empty.len());
        if log_a >= 0.0 || rng.random::<f64>().ln() < log_a {
            group.components.remove(j);
            group.weights = small;
            for z in &mut group.assignments {
                if *z > j {
                    *z -= 1;
                }
            }
            self.stats.death_accepted += 1;
        }
    }
}

impl MoveStats {
    fn record_arms(&mut self, out: ArmsOutcome) {
        match out {
            ArmsOutcome::Moved => {
                self.arms_steps += 1;
                self.arms_moved += 1;
            }
            ArmsOutcome::Stayed => self.arms_steps += 1,
            ArmsOutcome::Fallback { accepted } => {
                self.fallback_steps += 1;
                self.fallback_accepted += u64::from(accepted);
            }
        }
    }
}
