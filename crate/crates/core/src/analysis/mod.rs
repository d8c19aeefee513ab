//! Posterior queries over stored samples: log-odds gains between tests,
//! method comparisons on pretest-ranked subsets, per-student summaries and
//! the posterior of each class's empirical accuracy CDF.
//!
//! Every average over students weights students equally.

mod heatmap;
mod protocol;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::SampleSet;
use crate::model::{GroupKey, Method};
use crate::special::logit;

pub use heatmap::{cdf_heatmap, empirical_cdf, CdfHeatmap};
pub use protocol::{prior_check, PriorCheckConfig, PriorCheckReport, PriorCheckThresholds};

/// Log-odds gains `logit(p_post) - logit(p_pre)` in nats, `gains[i][u]` for
/// sample `i` and student `u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRecord {
    pub method: Method,
    pub school: u32,
    pub t_pre: u32,
    pub t_post: u32,
    pub gains: Vec<Vec<f64>>,
}

impl GainRecord {
    pub fn students(&self) -> usize {
        self.gains.first().map_or(0, Vec::len)
    }

    pub fn samples(&self) -> usize {
        self.gains.len()
    }

    /// Mean gain over `students` in sample `i`.
    fn subset_mean(&self, i: usize, students: &[usize]) -> f64 {
        let row = &self.gains[i];
        students.iter().map(|&u| row[u]).sum::<f64>() / students.len() as f64
    }
}

fn group_index(set: &SampleSet, key: GroupKey) -> Result<usize> {
    let first = set
        .samples
        .first()
        .ok_or_else(|| Error::InvalidArgument("sample set is empty".into()))?;
    first
        .state
        .groups
        .iter()
        .position(|g| g.key == key)
        .ok_or_else(|| Error::InvalidArgument(format!("samples contain no group {key}")))
}

/// Last test of a class in the fitted dataset.
pub fn final_test(set: &SampleSet, method: Method, school: u32) -> Result<u32> {
    set.dataset
        .class(method, school)
        .map(|c| c.tests())
        .ok_or_else(|| Error::InvalidArgument(format!("no class m{method}/s{school} in the samples")))
}

/// Gains between `t_pre` and `t_post` (default: the final test) per sample
/// and student.
pub fn student_gains(
    set: &SampleSet,
    method: Method,
    school: u32,
    t_pre: u32,
    t_post: Option<u32>,
) -> Result<GainRecord> {
    let t_post = match t_post {
        Some(t) => t,
        None => final_test(set, method, school)?,
    };
    let key = |test| GroupKey {
        method,
        school,
        test,
    };
    let pre = group_index(set, key(t_pre))?;
    let post = group_index(set, key(t_post))?;
    let mut gains = Vec::with_capacity(set.len());
    for s in &set.samples {
        let a = &s.state.groups[pre].accuracies;
        let b = &s.state.groups[post].accuracies;
        if a.len() != b.len() {
            return Err(Error::InvalidArgument(format!(
                "tests {t_pre} and {t_post} of m{method}/s{school} have {} and {} students",
                a.len(),
                b.len()
            )));
        }
        gains.push(a.iter().zip(b).map(|(p, q)| logit(*q) - logit(*p)).collect());
    }
    Ok(GainRecord {
        method,
        school,
        t_pre,
        t_post,
        gains,
    })
}

/// How a class is cut by pretest rank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Partition {
    Whole,
    Halves,
    Quartiles,
}

impl Partition {
    pub fn parts(self) -> usize {
        match self {
            Partition::Whole => 1,
            Partition::Halves => 2,
            Partition::Quartiles => 4,
        }
    }

    pub fn labels(self) -> Vec<String> {
        match self {
            Partition::Whole => vec!["whole".into()],
            p => (0..p.parts())
                .map(|i| char::from(b'a' + i as u8).to_string())
                .collect(),
        }
    }
}

/// A labelled set of student indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subset {
    pub label: String,
    pub students: Vec<usize>,
}

/// Splits students into `parts` contiguous runs of the pretest ranking
/// (highest mark first, ties by index). Earlier parts take the remainder.
pub fn split_by_rank(pretest: &[u32], parts: usize) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..pretest.len()).collect();
    order.sort_by(|&x, &y| pretest[y].cmp(&pretest[x]).then(x.cmp(&y)));
    let base = pretest.len() / parts;
    let extra = pretest.len() % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for i in 0..parts {
        let size = base + usize::from(i < extra);
        out.push(order[start..start + size].to_vec());
        start += size;
    }
    out
}

/// Pretest-ranked subsets of one class.
pub fn subset_by_pretest(
    set: &SampleSet,
    method: Method,
    school: u32,
    partition: Partition,
) -> Result<Vec<Subset>> {
    let class = set
        .dataset
        .class(method, school)
        .ok_or_else(|| Error::InvalidArgument(format!("no class m{method}/s{school} in the samples")))?;
    let pretest = class
        .scores_for(1)
        .ok_or_else(|| Error::InvalidArgument(format!("class m{method}/s{school} has no pretest")))?;
    Ok(partition
        .labels()
        .into_iter()
        .zip(split_by_rank(pretest, partition.parts()))
        .map(|(label, students)| Subset { label, students })
        .collect())
}

/// One row of a method comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub school: u32,
    pub label: String,
    /// Fraction of samples where method 2's mean gain beats method 1's; ties
    /// count one half.
    pub prob_method2_better: f64,
    /// Posterior mean of method 2's mean gain minus method 1's, in nats.
    pub expected_gain_diff: f64,
    pub samples: usize,
}

/// Compares mean gains over `subset1` of `gains1` and `subset2` of `gains2`,
/// pairing samples by position.
pub fn compare_gains(
    gains1: &GainRecord,
    subset1: &Subset,
    gains2: &GainRecord,
    subset2: &Subset,
) -> Result<ComparisonRow> {
    if subset1.students.is_empty() || subset2.students.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "subset {} is empty",
            subset1.label
        )));
    }
    if gains1.samples() != gains2.samples() || gains1.samples() == 0 {
        return Err(Error::InvalidArgument(format!(
            "need equal, non-zero sample counts; got {} and {}",
            gains1.samples(),
            gains2.samples()
        )));
    }
    let n = gains1.samples();
    let mut wins = 0.0;
    let mut diff = 0.0;
    for i in 0..n {
        let d = gains2.subset_mean(i, &subset2.students) - gains1.subset_mean(i, &subset1.students);
        wins += if d > 0.0 {
            1.0
        } else if d == 0.0 {
            0.5
        } else {
            0.0
        };
        diff += d;
    }
    Ok(ComparisonRow {
        school: gains1.school,
        label: subset1.label.clone(),
        prob_method2_better: wins / n as f64,
        expected_gain_diff: diff / n as f64,
        samples: n,
    })
}

/// Method 2 against method 1 in one school, one row per subset. The subsets
/// of each class come from that class's own pretest marks.
pub fn compare_methods(
    samples1: &SampleSet,
    samples2: &SampleSet,
    school: u32,
    partition: Partition,
    t_post: Option<u32>,
) -> Result<Vec<ComparisonRow>> {
    let g1 = student_gains(samples1, Method::Traditional, school, 1, t_post)?;
    let g2 = student_gains(samples2, Method::Sac, school, 1, t_post)?;
    let s1 = subset_by_pretest(samples1, Method::Traditional, school, partition)?;
    let s2 = subset_by_pretest(samples2, Method::Sac, school, partition)?;
    s1.iter()
        .zip(&s2)
        .map(|(a, b)| compare_gains(&g1, a, &g2, b))
        .collect()
}

/// A per-student summary paired with the pretest mark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudentValue {
    pub student: u32,
    pub pretest: u32,
    pub value: f64,
}

fn per_student(
    set: &SampleSet,
    method: Method,
    school: u32,
    t_post: Option<u32>,
    stat: impl Fn(&[f64]) -> f64,
) -> Result<Vec<StudentValue>> {
    let gains = student_gains(set, method, school, 1, t_post)?;
    let class = set.dataset.class(method, school).expect("checked by student_gains");
    let pretest = class.scores_for(1).expect("checked by student_gains");
    let mut column = vec![0.0; gains.samples()];
    Ok((0..gains.students())
        .map(|u| {
            for (c, row) in column.iter_mut().zip(&gains.gains) {
                *c = row[u];
            }
            StudentValue {
                student: class.student_ids[u],
                pretest: pretest[u],
                value: stat(&column),
            }
        })
        .collect())
}

/// Per student, the posterior probability that the gain is positive.
pub fn per_student_prob_gain(
    set: &SampleSet,
    method: Method,
    school: u32,
    t_post: Option<u32>,
) -> Result<Vec<StudentValue>> {
    per_student(set, method, school, t_post, |g| {
        g.iter().filter(|x| **x > 0.0).count() as f64 / g.len() as f64
    })
}

/// Per student, the posterior expected gain in nats.
pub fn per_student_expected_gain(
    set: &SampleSet,
    method: Method,
    school: u32,
    t_post: Option<u32>,
) -> Result<Vec<StudentValue>> {
    per_student(set, method, school, t_post, |g| g.iter().sum::<f64>() / g.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_split_examples() {
        assert_eq!(split_by_rank(&[10, 8, 6, 4], 2), vec![vec![0, 1], vec![2, 3]]);
        assert_eq!(split_by_rank(&[4, 6, 8, 10], 2), vec![vec![3, 2], vec![1, 0]]);
        let sizes: Vec<usize> = split_by_rank(&[1, 2, 3, 4, 5], 4).iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 1, 1, 1]);
        assert_eq!(split_by_rank(&[3, 3, 3], 2), vec![vec![0, 1], vec![2]]);
        assert_eq!(split_by_rank(&[], 2), vec![Vec::<usize>::new(), vec![]]);
    }

    #[test]
    fn partition_labels() {
        assert_eq!(Partition::Whole.labels(), vec!["whole"]);
        assert_eq!(Partition::Quartiles.labels(), vec!["a", "b", "c", "d"]);
    }

    fn record(gains: Vec<Vec<f64>>) -> GainRecord {
        GainRecord {
            method: Method::Traditional,
            school: 1,
            t_pre: 1,
            t_post: 2,
            gains,
        }
    }

    #[test]
    fn identical_gains_give_half() {
        let g = record(vec![vec![0.1, -0.2], vec![0.3, 0.0]]);
        let s = Subset {
            label: "whole".into(),
            students: vec![0, 1],
        };
        let row = compare_gains(&g, &s, &g, &s).unwrap();
        assert_eq!(row.prob_method2_better, 0.5);
        assert_eq!(row.expected_gain_diff, 0.0);
        let empty = Subset {
            label: "a".into(),
            students: vec![],
        };
        assert!(compare_gains(&g, &empty, &g, &s).is_err());
    }
}
