use sac_core::mcmc::{
    batch_means, init_state, log_joint, log_joint_rhat, run_chain, run_chain_on_stream, run_chains,
    sample_assignment, sample_weights, ChainConfig, GroupData, Kernel,
};
use sac_core::model::{
    forward_simulate, simulate_marks, ClassSpec, GroupKey, GroupState, Hyperparams, Method,
    MixtureComponent, ProBetaSampler, TestDesign,
};
use sac_core::random::rng_for;

mod common;
use common::{one_class, polar_moments};

fn small_config(n_samples: usize, burn_in: usize, seed: u64) -> ChainConfig {
    ChainConfig {
        n_samples,
        burn_in,
        seed,
        ..ChainConfig::default()
    }
}

fn two_method_data(seed: u64) -> sac_core::model::Dataset {
    let design = TestDesign::uniform(&[1], 2, 8);
    let classes: Vec<ClassSpec> = Method::ALL
        .iter()
        .map(|&method| ClassSpec {
            method,
            school: 1,
            students: 12,
        })
        .collect();
    forward_simulate(&Hyperparams::default(), &design, &classes, seed).unwrap().0
}

#[test]
fn same_seed_same_chain() {
    let data = two_method_data(1);
    let hyper = Hyperparams::default();
    let a = run_chain(&data, &hyper, &small_config(50, 10, 3)).unwrap();
    let b = run_chain(&data, &hyper, &small_config(50, 10, 3)).unwrap();
    assert_eq!(a, b);
    let c = run_chain_on_stream(&data, &hyper, &small_config(50, 10, 3), 1).unwrap();
    assert_ne!(a.trace, c.trace);
}

#[test]
fn zero_samples_and_thinning() {
    let data = two_method_data(2);
    let hyper = Hyperparams::default();
    let empty = run_chain(&data, &hyper, &small_config(0, 5, 0)).unwrap();
    assert!(empty.is_empty());
    assert_eq!(empty.trace.len(), 5);
    assert!(empty.diagnostics.log_joint.is_none());

    let mut cfg = small_config(30, 0, 0);
    cfg.thin = 7;
    let thinned = run_chain(&data, &hyper, &cfg).unwrap();
    let sweeps: Vec<usize> = thinned.samples.iter().map(|s| s.sweep).collect();
    assert_eq!(sweeps, vec![7, 14, 21, 28]);
    assert_eq!(thinned.len(), cfg.stored());

    cfg.thin = 0;
    assert!(run_chain(&data, &hyper, &cfg).is_err());
}

#[test]
fn stored_states_are_valid_and_consistent() {
    let data = two_method_data(3);
    let hyper = Hyperparams::default();
    let set = run_chain(&data, &hyper, &small_config(200, 50, 4)).unwrap();
    for s in &set.samples {
        s.state.validate().unwrap();
        assert!(s.state.groups.iter().all(|g| g.k() <= set.config.k_max));
        let lj = log_joint(&s.state, &data, &hyper);
        assert!((lj - s.log_joint).abs() < 1e-9);
    }
}

#[test]
fn acceptance_rates_are_interior_over_long_runs() {
    let data = two_method_data(4);
    let set = run_chain(&data, &Hyperparams::default(), &small_config(3_000, 200, 5)).unwrap();
    let m = set.diagnostics.moves;
    for (name, rate) in [
        ("k-move", m.k_move_rate()),
        ("birth", m.birth_rate()),
        ("death", m.death_rate()),
        ("arms", m.arms_rate()),
    ] {
        let r = rate.unwrap_or_else(|| panic!("no {name} proposals"));
        assert!(r > 0.0 && r < 1.0, "{name} rate {r}");
    }
    if let Some(r) = m.fallback_rate() {
        assert!(r > 0.0 && r < 1.0, "fallback rate {r}");
    }
}

#[test]
fn independent_chains_agree() {
    let data = two_method_data(5);
    let sets = run_chains(&data, &Hyperparams::default(), &small_config(2_000, 300, 6), 3).unwrap();
    assert_eq!(sets.len(), 3);
    let r = log_joint_rhat(&sets).unwrap();
    assert!(r < 1.1, "R-hat {r}");
}

#[test]
fn weights_follow_their_dirichlet() {
    let hyper = Hyperparams::default();
    let group = GroupState {
        key: GroupKey {
            method: Method::Traditional,
            school: 1,
            test: 1,
        },
        components: vec![MixtureComponent::new(1.0, 1.0).unwrap(); 3],
        weights: vec![1.0 / 3.0; 3],
        assignments: vec![0, 0, 0, 0, 1, 2, 2],
        accuracies: vec![0.5; 7],
    };
    let params: Vec<f64> = [4.0, 1.0, 2.0].iter().map(|c| c + hyper.mu / 3.0).collect();
    let total: f64 = params.iter().sum();
    let mut rng = rng_for(7, 0);
    let n = 40_000;
    let mut sums = [0.0; 3];
    for _ in 0..n {
        let w = sample_weights(&group, &hyper, &mut rng);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        for (s, x) in sums.iter_mut().zip(&w) {
            *s += x;
        }
    }
    for k in 0..3 {
        let mean = params[k] / total;
        let var = mean * (1.0 - mean) / (total + 1.0);
        let z = (sums[k] / n as f64 - mean) / (var / n as f64).sqrt();
        assert!(z.abs() < 4.0, "component {k}: z {z}");
    }
}

#[test]
fn identical_components_assign_by_weight() {
    let group = GroupState {
        key: GroupKey {
            method: Method::Sac,
            school: 1,
            test: 1,
        },
        components: vec![MixtureComponent::new(2.0, 3.0).unwrap(); 2],
        weights: vec![0.25, 0.75],
        assignments: vec![0],
        accuracies: vec![0.5],
    };
    let scores = [3];
    let data = GroupData {
        marks: 5,
        scores: &scores,
    };
    let mut rng = rng_for(8, 0);
    let n = 40_000;
    let ones = (0..n).filter(|_| sample_assignment(0, &group, data, &mut rng) == 1).count();
    let p = ones as f64 / n as f64;
    let z = (p - 0.75) / (0.75f64 * 0.25 / n as f64).sqrt();
    assert!(z.abs() < 4.0, "{p}");
}

// Alternating sweeps with fresh data drawn given the parameters leaves the
// joint prior invariant, so parameter marginals must match the prior.
#[test]
fn successive_conditional_simulation_recovers_the_prior() {
    let hyper = Hyperparams::new(1.0, 0.3, 0.5, 0.5, 1.0).unwrap();
    let mut data = one_class(vec![0; 6], 4);
    let config = small_config(0, 0, 9);
    let mut kernel = Kernel::new(&hyper, &config);
    let mut rng = rng_for(9, 0);
    let mut state = init_state(&data, &mut rng);
    // Start from the prior.
    let sampler = ProBetaSampler::new(&hyper);
    let (a, b) = sampler.sample(&mut rng);
    state.groups[0].components[0] = MixtureComponent::new(a, b).unwrap();
    data = simulate_marks(&mut state, &data, &mut rng).unwrap();

    let iterations = 30_000;
    let mut k1 = Vec::with_capacity(iterations);
    let mut theta = Vec::with_capacity(iterations);
    for _ in 0..iterations {
        kernel.sweep(&mut state, &data, &mut rng);
        data = simulate_marks(&mut state, &data, &mut rng).unwrap();
        let g = &state.groups[0];
        k1.push(f64::from(u8::from(g.k() == 1)));
        theta.push(g.components.iter().map(|c| c.beta.atan2(c.alpha)).sum::<f64>() / g.k() as f64);
    }
    let (_, want_theta) = polar_moments(&hyper, sampler.support(), 600);
    for (name, trace, want) in [("P(K=1)", &k1, 0.5), ("E[theta]", &theta, want_theta)] {
        let bm = batch_means(trace).unwrap();
        let z = (bm.mean - want) / bm.se;
        assert!(z.abs() < 4.0, "{name}: {} vs {want} (z {z})", bm.mean);
    }
}
