use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Teaching method: 1 is the traditional method, 2 adds confidence reporting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Method {
    Traditional,
    Sac,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Traditional, Method::Sac];

    pub fn index(self) -> u8 {
        match self {
            Method::Traditional => 1,
            Method::Sac => 2,
        }
    }
}

impl TryFrom<u8> for Method {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Method::Traditional),
            2 => Ok(Method::Sac),
            other => Err(Error::Domain(format!("method must be 1 or 2, got {other}"))),
        }
    }
}

impl From<Method> for u8 {
    fn from(m: Method) -> u8 {
        m.index()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// One `(method, school, test)` cell of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroupKey {
    pub method: Method,
    pub school: u32,
    pub test: u32,
}

impl fmt::Display for GroupKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "m{}/s{}/t{}", self.method, self.school, self.test)
    }
}

/// Marks available in each test of each school. Tests are numbered
/// `1..=T_s` within a school; test 1 is the pretest.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestDesign {
    marks: BTreeMap<(u32, u32), u32>,
}

impl TestDesign {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, school: u32, test: u32, marks: u32) -> Result<()> {
        if test == 0 {
            return Err(Error::Domain("tests are numbered from 1".into()));
        }
        if self.marks.insert((school, test), marks).is_some() {
            return Err(Error::InvalidArgument(format!(
                "duplicate design entry for school {school}, test {test}"
            )));
        }
        Ok(())
    }

    /// Same number of marks for tests `1..=tests` of every listed school.
    pub fn uniform(schools: &[u32], tests: u32, marks: u32) -> Self {
        let mut d = TestDesign::new();
        for &s in schools {
            for t in 1..=tests {
                d.marks.insert((s, t), marks);
            }
        }
        d
    }

    pub fn marks(&self, school: u32, test: u32) -> Option<u32> {
        self.marks.get(&(school, test)).copied()
    }

    pub fn schools(&self) -> Vec<u32> {
        let mut s: Vec<u32> = self.marks.keys().map(|(s, _)| *s).collect();
        s.dedup();
        s
    }

    /// `T_s`, the number of tests for a school.
    pub fn test_count(&self, school: u32) -> u32 {
        self.marks.range((school, 0)..=(school, u32::MAX)).count() as u32
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        self.marks.iter().map(|(&(s, t), &n)| (s, t, n))
    }

    /// Tests of each school must be numbered contiguously from 1.
    pub fn validate(&self) -> Result<()> {
        for s in self.schools() {
            let count = self.test_count(s);
            for t in 1..=count {
                if self.marks(s, t).is_none() {
                    return Err(Error::Domain(format!(
                        "school {s} has {count} tests but test {t} is missing"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Scores of one method group in one school across all of its tests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub method: Method,
    pub school: u32,
    /// External student identifiers in ascending order; position is `u`.
    pub student_ids: Vec<u32>,
    /// Marks available per test, index `t - 1`.
    pub marks: Vec<u32>,
    /// `scores[t - 1][u]`.
    pub scores: Vec<Vec<u32>>,
}

impl ClassRecord {
    pub fn students(&self) -> usize {
        self.student_ids.len()
    }

    pub fn tests(&self) -> u32 {
        self.marks.len() as u32
    }

    pub fn scores_for(&self, test: u32) -> Option<&[u32]> {
        self.scores.get(test.checked_sub(1)? as usize).map(Vec::as_slice)
    }

    pub fn group_key(&self, test: u32) -> GroupKey {
        GroupKey {
            method: self.method,
            school: self.school,
            test,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.scores.len() != self.marks.len() {
            return Err(Error::Domain(format!(
                "class m{}/s{} has {} score rows for {} tests",
                self.method,
                self.school,
                self.scores.len(),
                self.marks.len()
            )));
        }
        for (t, (row, &marks)) in self.scores.iter().zip(&self.marks).enumerate() {
            if row.len() != self.student_ids.len() {
                return Err(Error::Domain(format!(
                    "class m{}/s{} test {}: {} scores for {} students",
                    self.method,
                    self.school,
                    t + 1,
                    row.len(),
                    self.student_ids.len()
                )));
            }
            if let Some(n) = row.iter().find(|&&n| n > marks) {
                return Err(Error::Domain(format!(
                    "class m{}/s{} test {}: score {n} exceeds {marks} marks",
                    self.method,
                    self.school,
                    t + 1
                )));
            }
        }
        Ok(())
    }
}

/// All observed scores, one [`ClassRecord`] per `(method, school)`, sorted by
/// school then method.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dataset {
    classes: Vec<ClassRecord>,
}

impl Dataset {
    pub fn new(mut classes: Vec<ClassRecord>) -> Result<Self> {
        classes.sort_by_key(|c| (c.school, c.method));
        for w in classes.windows(2) {
            if (w[0].school, w[0].method) == (w[1].school, w[1].method) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate class m{}/s{}",
                    w[0].method, w[0].school
                )));
            }
        }
        for c in &classes {
            c.validate()?;
        }
        Ok(Dataset { classes })
    }

    pub fn classes(&self) -> &[ClassRecord] {
        &self.classes
    }

    pub fn class(&self, method: Method, school: u32) -> Option<&ClassRecord> {
        self.classes
            .iter()
            .find(|c| c.method == method && c.school == school)
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Every `(method, school, test)` group in canonical order.
    pub fn group_keys(&self) -> Vec<GroupKey> {
        self.classes
            .iter()
            .flat_map(|c| (1..=c.tests()).map(move |t| c.group_key(t)))
            .collect()
    }

    /// Marks and scores for one group.
    pub fn group(&self, key: GroupKey) -> Option<(u32, &[u32])> {
        let class = self.class(key.method, key.school)?;
        let marks = *class.marks.get(key.test.checked_sub(1)? as usize)?;
        Some((marks, class.scores_for(key.test)?))
    }

    /// Checks that every class uses the design's marks.
    pub fn check_design(&self, design: &TestDesign) -> Result<()> {
        for c in &self.classes {
            if design.test_count(c.school) != c.tests() {
                return Err(Error::Domain(format!(
                    "school {} has {} tests in the design but {} in the data",
                    c.school,
                    design.test_count(c.school),
                    c.tests()
                )));
            }
            for (t, &m) in c.marks.iter().enumerate() {
                if design.marks(c.school, t as u32 + 1) != Some(m) {
                    return Err(Error::Domain(format!(
                        "school {} test {} marks disagree with the design",
                        c.school,
                        t + 1
                    )));
                }
            }
        }
        Ok(())
    }
}
