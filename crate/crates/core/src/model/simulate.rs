use rand::Rng;
use rand_distr::{Binomial, Distribution, Geometric};
use serde::{Deserialize, Serialize};

use super::{
    ClassRecord, Dataset, GroupState, Hyperparams, LatentState, Method, MixtureComponent,
    ProBetaSampler, TestDesign,
};
use crate::error::{Error, Result};
use crate::random::{rng_for, sample_beta, sample_dirichlet, sample_log_categorical};

/// Size of one simulated class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSpec {
    pub method: Method,
    pub school: u32,
    pub students: usize,
}

/// Draws `K` from its geometric prior.
pub fn sample_component_count<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> usize {
    let failures = Geometric::new(1.0 - lambda)
        .expect("lambda in (0, 1)")
        .sample(rng);
    1 + failures as usize
}

fn binomial<R: Rng + ?Sized>(marks: u32, p: f64, rng: &mut R) -> u32 {
    if marks == 0 {
        return 0;
    }
    Binomial::new(u64::from(marks), p)
        .expect("p in (0, 1)")
        .sample(rng) as u32
}

/// Draws a complete dataset and its latent truth top-down through the model.
///
/// The same seed always yields the same output.
pub fn forward_simulate(
    hyper: &Hyperparams,
    design: &TestDesign,
    classes: &[ClassSpec],
    seed: u64,
) -> Result<(Dataset, LatentState)> {
    hyper.validate()?;
    design.validate()?;
    let sampler = ProBetaSampler::new(hyper);
    let mut rng = rng_for(seed, 0);

    let mut records = Vec::with_capacity(classes.len());
    let mut groups = Vec::new();
    for spec in classes {
        let tests = design.test_count(spec.school);
        if tests == 0 {
            return Err(Error::InvalidArgument(format!(
                "school {} has no tests in the design",
                spec.school
            )));
        }
        let mut record = ClassRecord {
            method: spec.method,
            school: spec.school,
            student_ids: (1..=spec.students as u32).collect(),
            marks: Vec::with_capacity(tests as usize),
            scores: Vec::with_capacity(tests as usize),
        };
        for t in 1..=tests {
            let marks = design.marks(spec.school, t).expect("validated design");
            let k = sample_component_count(hyper.lambda, &mut rng);
            let components: Vec<MixtureComponent> = (0..k)
                .map(|_| {
                    let (alpha, beta) = sampler.sample(&mut rng);
                    MixtureComponent { alpha, beta }
                })
                .collect();
            let weights = sample_dirichlet(&mut rng, &vec![hyper.gamma(k); k]);
            let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
            let assignments: Vec<usize> = (0..spec.students)
                .map(|_| sample_log_categorical(&mut rng, &log_w))
                .collect();
            let accuracies: Vec<f64> = assignments
                .iter()
                .map(|&z| sample_beta(&mut rng, components[z].alpha, components[z].beta))
                .collect();
            let scores: Vec<u32> = accuracies
                .iter()
                .map(|&p| binomial(marks, p, &mut rng))
                .collect();
            record.marks.push(marks);
            record.scores.push(scores);
            groups.push(GroupState {
                key: record.group_key(t),
                components,
                weights,
                assignments,
                accuracies,
            });
        }
        records.push(record);
    }
    let dataset = Dataset::new(records)?;
    // Keep the latent groups in the dataset's canonical order.
    let order = dataset.group_keys();
    groups.sort_by_key(|g| order.iter().position(|k| *k == g.key));
    Ok((dataset, LatentState { groups }))
}

/// Redraws accuracies and marks given the mixture part of `state`, keeping the
/// shape of `template`. Used to alternate data and parameter updates.
pub fn simulate_marks<R: Rng + ?Sized>(
    state: &mut LatentState,
    template: &Dataset,
    rng: &mut R,
) -> Result<Dataset> {
    let mut records: Vec<ClassRecord> = template.classes().to_vec();
    for record in &mut records {
        for t in 1..=record.tests() {
            let key = record.group_key(t);
            let group = state
                .groups
                .iter_mut()
                .find(|g| g.key == key)
                .ok_or_else(|| Error::InvalidArgument(format!("state lacks group {key}")))?;
            let marks = record.marks[(t - 1) as usize];
            let row = &mut record.scores[(t - 1) as usize];
            for (u, score) in row.iter_mut().enumerate() {
                let c = group.components[group.assignments[u]];
                let p = sample_beta(rng, c.alpha, c.beta);
                group.accuracies[u] = p;
                *score = binomial(marks, p, rng);
            }
        }
    }
    Dataset::new(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_classes(n: usize) -> Vec<ClassSpec> {
        vec![
            ClassSpec {
                method: Method::Traditional,
                school: 1,
                students: n,
            },
            ClassSpec {
                method: Method::Sac,
                school: 1,
                students: n,
            },
        ]
    }

    #[test]
    fn zero_marks_give_zero_scores() {
        let design = TestDesign::uniform(&[1], 2, 0);
        let (ds, truth) = forward_simulate(&Hyperparams::default(), &design, &two_classes(5), 3).unwrap();
        assert!(ds
            .classes()
            .iter()
            .all(|c| c.scores.iter().flatten().all(|&n| n == 0)));
        assert_eq!(truth.groups.len(), 4);
        truth.validate().unwrap();
    }

    #[test]
    fn same_seed_same_output() {
        let design = TestDesign::uniform(&[1], 2, 20);
        let a = forward_simulate(&Hyperparams::default(), &design, &two_classes(8), 42).unwrap();
        let b = forward_simulate(&Hyperparams::default(), &design, &two_classes(8), 42).unwrap();
        let c = forward_simulate(&Hyperparams::default(), &design, &two_classes(8), 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.0, c.0);
    }

    #[test]
    fn geometric_component_count_mean() {
        let mut rng = rng_for(9, 0);
        let n = 100_000;
        let mean = (0..n)
            .map(|_| sample_component_count(0.5, &mut rng) as f64)
            .sum::<f64>()
            / n as f64;
        // mean 1/(1-λ) = 2, sd sqrt(λ)/(1-λ) = sqrt(2)
        assert!((mean - 2.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn uniform_component_gives_half_marks() {
        let design = TestDesign::uniform(&[1], 1, 10);
        let template = Dataset::new(vec![ClassRecord {
            method: Method::Traditional,
            school: 1,
            student_ids: (1..=2000).collect(),
            marks: vec![10],
            scores: vec![vec![0; 2000]],
        }])
        .unwrap();
        template.check_design(&design).unwrap();
        let mut state = LatentState {
            groups: vec![GroupState {
                key: template.group_keys()[0],
                components: vec![MixtureComponent { alpha: 1.0, beta: 1.0 }],
                weights: vec![1.0],
                assignments: vec![0; 2000],
                accuracies: vec![0.5; 2000],
            }],
        };
        let mut rng = rng_for(10, 0);
        let ds = simulate_marks(&mut state, &template, &mut rng).unwrap();
        let scores = &ds.classes()[0].scores[0];
        let mean = scores.iter().map(|&n| n as f64).sum::<f64>() / scores.len() as f64;
        // Beta-binomial(10, 1, 1) is uniform on 0..=10: variance 10.
        let se = (10.0f64 / scores.len() as f64).sqrt();
        assert!((mean - 5.0).abs() < 3.0 * se, "{mean}");
    }
}
