use proptest::prelude::*;

use sac_core::analysis::{
    cdf_heatmap, compare_gains, compare_methods, empirical_cdf, per_student_expected_gain,
    per_student_prob_gain, split_by_rank, student_gains, GainRecord, Partition, Subset,
};
use sac_core::mcmc::{run_chain, ChainConfig, SampleSet};
use sac_core::model::{forward_simulate, ClassSpec, Hyperparams, Method, TestDesign};

fn record(method: Method, gains: Vec<Vec<f64>>) -> GainRecord {
    GainRecord {
        method,
        school: 1,
        t_pre: 1,
        t_post: 2,
        gains,
    }
}

fn gains_strategy(students: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0f64..3.0, students), 1..40)
}

fn whole(n: usize) -> Subset {
    Subset {
        label: "whole".into(),
        students: (0..n).collect(),
    }
}

proptest! {
    #[test]
    fn rank_split_is_an_ordered_partition(pretest in prop::collection::vec(0u32..20, 0..40), parts in 1usize..5) {
        let split = split_by_rank(&pretest, parts);
        prop_assert_eq!(split.len(), parts);
        let mut all: Vec<usize> = split.iter().flatten().copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..pretest.len()).collect::<Vec<_>>());
        for w in split.windows(2) {
            prop_assert!(w[0].len() >= w[1].len() && w[0].len() <= w[1].len() + 1);
            for &a in &w[0] {
                for &b in &w[1] {
                    prop_assert!(pretest[a] >= pretest[b]);
                }
            }
        }
    }

    #[test]
    fn swapping_methods_mirrors_the_comparison(pair in (1usize..10).prop_flat_map(|n| {
        (gains_strategy(n), gains_strategy(n))
    })) {
        let (a, b) = pair;
        let rows = a.len().min(b.len());
        let g1 = record(Method::Traditional, a[..rows].to_vec());
        let g2 = record(Method::Sac, b[..rows].to_vec());
        let s = whole(g1.students());
        let fwd = compare_gains(&g1, &s, &g2, &s).unwrap();
        let back = compare_gains(&g2, &s, &g1, &s).unwrap();
        prop_assert!((fwd.prob_method2_better + back.prob_method2_better - 1.0).abs() < 1e-12);
        prop_assert!((fwd.expected_gain_diff + back.expected_gain_diff).abs() < 1e-12);
    }

    #[test]
    fn part_means_average_to_the_whole(
        n in 1usize..30,
        seed_gains in prop::collection::vec(-3.0f64..3.0, 60 * 5),
        pretest in prop::collection::vec(0u32..10, 30),
        parts in 1usize..5,
    ) {
        let rows = 5;
        let g1 = record(Method::Traditional, (0..rows).map(|i| seed_gains[i * 60..i * 60 + n].to_vec()).collect());
        let g2 = record(Method::Sac, (0..rows).map(|i| seed_gains[i * 60 + 30..i * 60 + 30 + n].to_vec()).collect());
        let split = split_by_rank(&pretest[..n], parts);
        let s = whole(n);
        let total = compare_gains(&g1, &s, &g2, &s).unwrap().expected_gain_diff;
        let mut weighted = 0.0;
        for students in split.into_iter().filter(|p| !p.is_empty()) {
            let size = students.len() as f64;
            let sub = Subset { label: "x".into(), students };
            weighted += size * compare_gains(&g1, &sub, &g2, &sub).unwrap().expected_gain_diff;
        }
        prop_assert!((weighted / n as f64 - total).abs() < 1e-10);
    }

    #[test]
    fn empirical_cdf_is_a_cdf(values in prop::collection::vec(0.0f64..1.0, 1..50)) {
        let at: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
        let cdf = empirical_cdf(&values, &at);
        prop_assert!(cdf.windows(2).all(|w| w[0] <= w[1]));
        prop_assert_eq!(*cdf.last().unwrap(), 1.0);
        prop_assert!(cdf.iter().all(|c| (0.0..=1.0).contains(c)));
    }
}

fn fitted(students: usize, seed: u64) -> SampleSet {
    let design = TestDesign::uniform(&[1], 2, 10);
    let classes: Vec<ClassSpec> = Method::ALL
        .iter()
        .map(|&method| ClassSpec {
            method,
            school: 1,
            students,
        })
        .collect();
    let hyper = Hyperparams::default();
    let (data, _) = forward_simulate(&hyper, &design, &classes, seed).unwrap();
    let config = ChainConfig {
        n_samples: 200,
        burn_in: 50,
        seed,
        ..ChainConfig::default()
    };
    run_chain(&data, &hyper, &config).unwrap()
}

#[test]
fn comparison_tables_have_one_row_per_part() {
    let set = fitted(9, 1);
    for (partition, labels) in [
        (Partition::Whole, vec!["whole"]),
        (Partition::Halves, vec!["a", "b"]),
        (Partition::Quartiles, vec!["a", "b", "c", "d"]),
    ] {
        let rows = compare_methods(&set, &set, 1, partition, None).unwrap();
        let got: Vec<&str> = rows.iter().map(|r| r.label.as_str()).collect();
        assert_eq!(got, labels);
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.prob_method2_better) && r.samples == 200));
    }
    assert!(compare_methods(&set, &set, 2, Partition::Whole, None).is_err());
}

#[test]
fn per_student_summaries_agree_with_gains() {
    let set = fitted(6, 2);
    let gains = student_gains(&set, Method::Sac, 1, 1, None).unwrap();
    let probs = per_student_prob_gain(&set, Method::Sac, 1, None).unwrap();
    let means = per_student_expected_gain(&set, Method::Sac, 1, None).unwrap();
    let class = set.dataset.class(Method::Sac, 1).unwrap();
    for u in 0..6 {
        let col: Vec<f64> = gains.gains.iter().map(|r| r[u]).collect();
        let p = col.iter().filter(|g| **g > 0.0).count() as f64 / col.len() as f64;
        let m = col.iter().sum::<f64>() / col.len() as f64;
        assert_eq!(probs[u].value, p);
        assert!((means[u].value - m).abs() < 1e-12);
        assert_eq!(probs[u].pretest, class.scores_for(1).unwrap()[u]);
    }
    // A test compared with itself gains nothing.
    let none = per_student_prob_gain(&set, Method::Sac, 1, Some(1)).unwrap();
    assert!(none.iter().all(|s| s.value == 0.0));
}

#[test]
fn heatmap_columns_are_densities() {
    let set = fitted(8, 3);
    let map = cdf_heatmap(&set, Method::Traditional, 1, 2, 21, 10).unwrap();
    let width = 1.0 / map.levels.len() as f64;
    for (i, row) in map.density.iter().enumerate() {
        let mass: f64 = row.iter().sum::<f64>() * width;
        assert!((mass - 1.0).abs() < 1e-12);
        assert!(map.lower[i] <= map.median[i] && map.median[i] <= map.upper[i]);
    }
    assert_eq!(map.lower[0], 0.0);
    assert_eq!(map.upper[20], 1.0);
    assert_eq!(map.coverage(&map.median), 1.0);
    assert!(cdf_heatmap(&set, Method::Traditional, 1, 3, 21, 10).is_err());
}
