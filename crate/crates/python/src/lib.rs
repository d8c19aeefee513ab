//! Python bindings: scoring rules, datasets, posterior fitting and queries.

use std::path::PathBuf;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use sac_core::analysis::{
    cdf_heatmap, compare_methods, final_test, per_student_expected_gain, per_student_prob_gain,
    prior_check as core_prior_check, Partition, PriorCheckConfig, StudentValue,
};
use sac_core::io;
use sac_core::mcmc::{run_chain, ChainConfig, SampleSet};
use sac_core::model::{self, ClassSpec, Method, TestDesign};
use sac_core::scoring::{
    self, check_c1, check_c2, rule_by_name, Accuracy, Confidence, SabotageReport, DEFAULT_TOLERANCE,
    RULE_NAMES,
};

fn err(e: sac_core::Error) -> PyErr {
    if e.is_io() {
        PyIOError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn method(m: u8) -> PyResult<Method> {
    Method::try_from(m).map_err(err)
}

/// A named scoring rule.
#[pyclass(name = "Rule", frozen)]
struct PyRule {
    inner: scoring::ScoringRule,
}

#[pymethods]
impl PyRule {
    #[new]
    fn new(name: &str) -> PyResult<Self> {
        Ok(PyRule {
            inner: rule_by_name(name).map_err(err)?,
        })
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name().to_string()
    }

    #[getter]
    fn symmetric(&self) -> bool {
        self.inner.is_symmetric()
    }

    /// Score of reporting confidence `q` on an answer; may be `-inf`.
    fn score(&self, q: f64, correct: bool) -> PyResult<f64> {
        let q = Confidence::new(q).map_err(err)?;
        Ok(self.inner.score(q, correct).value())
    }

    /// Expected score `h(p, q)`.
    fn expected(&self, p: f64, q: f64) -> PyResult<f64> {
        let p = Accuracy::new(p).map_err(err)?;
        let q = Confidence::new(q).map_err(err)?;
        Ok(scoring::expected_score(&self.inner, p, q).value())
    }

    /// Grid maximiser of `h(p, .)`.
    #[pyo3(signature = (p, grid=1001))]
    fn optimal_report(&self, p: f64, grid: usize) -> PyResult<f64> {
        let p = Accuracy::new(p).map_err(err)?;
        Ok(scoring::optimal_report(&self.inner, p, grid).map_err(err)?.value())
    }

    /// Runs both checks; returns `{"c1": bool, "c2": bool, "report": str}`.
    #[pyo3(signature = (j_lower=None, grid=1001))]
    fn validate<'py>(&self, py: Python<'py>, j_lower: Option<f64>, grid: usize) -> PyResult<Bound<'py, PyDict>> {
        let j = j_lower.unwrap_or(if self.inner.is_symmetric() { 0.5 } else { 0.0 });
        let c1 = check_c1(&self.inner, grid, DEFAULT_TOLERANCE).map_err(err)?;
        let c2 = check_c2(&self.inner, j, grid).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("c1", c1.passed())?;
        d.set_item("c2", c2.passed())?;
        d.set_item("report", format!("{c1}{c2}"))?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Rule({:?})", self.inner.name())
    }
}

#[pyfunction]
fn rule_names() -> Vec<&'static str> {
    RULE_NAMES.to_vec()
}

/// Largest accuracy at which answering wrong with zero confidence beats
/// truthful reporting under the combined rule, with the stated value.
#[pyfunction]
#[pyo3(signature = (grid=1001))]
fn sabotage<'py>(py: Python<'py>, grid: usize) -> PyResult<Bound<'py, PyDict>> {
    let r = SabotageReport::compute(grid).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("computed", r.computed_threshold)?;
    d.set_item("stated", r.stated_threshold)?;
    d.set_item("discrepancy", r.discrepancy())?;
    Ok(d)
}

/// The five hyperparameters.
#[pyclass(name = "Hyperparams", frozen, from_py_object)]
#[derive(Clone)]
struct PyHyper {
    inner: model::Hyperparams,
}

#[pymethods]
impl PyHyper {
    #[new]
    #[pyo3(signature = (kappa=0.01, a=0.4525, b=0.4525, lambda_=0.5, mu=1.0))]
    fn new(kappa: f64, a: f64, b: f64, lambda_: f64, mu: f64) -> PyResult<Self> {
        Ok(PyHyper {
            inner: model::Hyperparams::new(kappa, a, b, lambda_, mu).map_err(err)?,
        })
    }

    fn __repr__(&self) -> String {
        let h = &self.inner;
        format!(
            "Hyperparams(kappa={}, a={}, b={}, lambda_={}, mu={})",
            h.kappa, h.a, h.b, h.lambda, h.mu
        )
    }
}

fn hyper_or_default(h: Option<PyHyper>) -> model::Hyperparams {
    h.map(|h| h.inner).unwrap_or_default()
}

/// Marks of every class with the test design they were scored against.
#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    data: model::Dataset,
    design: TestDesign,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn from_csv(data: PathBuf, design: PathBuf) -> PyResult<Self> {
        let (data, design, _) = io::ingest(&data, &design).map_err(err)?;
        Ok(PyDataset { data, design })
    }

    /// Draws a dataset from the model. Returns the dataset and the latent
    /// state as a JSON string.
    #[staticmethod]
    #[pyo3(signature = (students=70, schools=1, tests=2, marks=20, seed=0, hyper=None))]
    fn simulate(
        students: usize,
        schools: u32,
        tests: u32,
        marks: u32,
        seed: u64,
        hyper: Option<PyHyper>,
    ) -> PyResult<(Self, String)> {
        let ids: Vec<u32> = (1..=schools).collect();
        let design = TestDesign::uniform(&ids, tests, marks);
        let classes: Vec<ClassSpec> = ids
            .iter()
            .flat_map(|&school| {
                Method::ALL.iter().map(move |&method| ClassSpec {
                    method,
                    school,
                    students,
                })
            })
            .collect();
        let (data, truth) =
            model::forward_simulate(&hyper_or_default(hyper), &design, &classes, seed).map_err(err)?;
        let truth = serde_json::to_string(&truth).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok((PyDataset { data, design }, truth))
    }

    fn to_csv(&self, data: PathBuf, design: PathBuf) -> PyResult<()> {
        let open = |p: &PathBuf| std::fs::File::create(p).map_err(|e| PyIOError::new_err(format!("{}: {e}", p.display())));
        io::write_dataset(&self.data, open(&data)?).map_err(err)?;
        io::write_design(&self.design, open(&design)?).map_err(err)
    }

    /// `(method, school, students, tests)` per class.
    fn classes(&self) -> Vec<(u8, u32, usize, u32)> {
        self.data
            .classes()
            .iter()
            .map(|c| (c.method.index(), c.school, c.students(), c.tests()))
            .collect()
    }

    /// Marks of one class on one test, in student order.
    fn scores(&self, method: u8, school: u32, test: u32) -> PyResult<Vec<u32>> {
        let m = self::method(method)?;
        self.data
            .class(m, school)
            .and_then(|c| c.scores_for(test))
            .map(<[u32]>::to_vec)
            .ok_or_else(|| PyValueError::new_err(format!("no test {test} for m{method}/s{school}")))
    }
}

/// Stored posterior samples of one chain.
#[pyclass(name = "Samples", frozen)]
struct PySamples {
    inner: SampleSet,
}

fn student_rows(values: Vec<StudentValue>) -> Vec<(u32, u32, f64)> {
    values.into_iter().map(|v| (v.student, v.pretest, v.value)).collect()
}

#[pymethods]
impl PySamples {
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PySamples {
            inner: io::load_samples(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        io::save_samples(&self.inner, &path).map_err(err)
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// Log-joint after every sweep, burn-in included.
    fn trace(&self) -> Vec<f64> {
        self.inner.trace.clone()
    }

    /// Component counts of group `(method, school, test)` per sample.
    fn k_trace(&self, method: u8, school: u32, test: u32) -> PyResult<Vec<usize>> {
        let key = model::GroupKey {
            method: self::method(method)?,
            school,
            test,
        };
        self.inner
            .samples
            .iter()
            .map(|s| {
                s.state
                    .group(key)
                    .map(|g| g.k())
                    .ok_or_else(|| PyValueError::new_err(format!("no group {key}")))
            })
            .collect()
    }

    /// Method 2 against method 1 by pretest-ranked subset. `other` holds
    /// method 2 when the methods were fitted separately. Returns
    /// `(label, P(method 2 better), E[gain diff])` per subset.
    #[pyo3(signature = (partition="whole", school=1, posttest=None, other=None))]
    fn compare(
        &self,
        partition: &str,
        school: u32,
        posttest: Option<u32>,
        other: Option<&PySamples>,
    ) -> PyResult<Vec<(String, f64, f64)>> {
        let partition = match partition {
            "whole" => Partition::Whole,
            "halves" => Partition::Halves,
            "quartiles" => Partition::Quartiles,
            p => return Err(PyValueError::new_err(format!("unknown partition {p:?}"))),
        };
        let second = other.map_or(&self.inner, |o| &o.inner);
        let rows = compare_methods(&self.inner, second, school, partition, posttest).map_err(err)?;
        Ok(rows
            .into_iter()
            .map(|r| (r.label, r.prob_method2_better, r.expected_gain_diff))
            .collect())
    }

    /// `(student, pretest, P(gain > 0))` per student.
    #[pyo3(signature = (method, school=1, posttest=None))]
    fn per_student_prob(&self, method: u8, school: u32, posttest: Option<u32>) -> PyResult<Vec<(u32, u32, f64)>> {
        per_student_prob_gain(&self.inner, self::method(method)?, school, posttest)
            .map(student_rows)
            .map_err(err)
    }

    /// `(student, pretest, E[gain])` per student, in nats.
    #[pyo3(signature = (method, school=1, posttest=None))]
    fn per_student_gain(&self, method: u8, school: u32, posttest: Option<u32>) -> PyResult<Vec<(u32, u32, f64)>> {
        per_student_expected_gain(&self.inner, self::method(method)?, school, posttest)
            .map(student_rows)
            .map_err(err)
    }

    /// Posterior of the empirical accuracy CDF: a dict of `p`, `levels`,
    /// `density` (one row per `p`), `lower`, `median` and `upper`.
    #[pyo3(signature = (method, school=1, test=None, lattice=101, levels=50))]
    fn cdf<'py>(
        &self,
        py: Python<'py>,
        method: u8,
        school: u32,
        test: Option<u32>,
        lattice: usize,
        levels: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let m = self::method(method)?;
        let t = match test {
            Some(t) => t,
            None => final_test(&self.inner, m, school).map_err(err)?,
        };
        let map = cdf_heatmap(&self.inner, m, school, t, lattice, levels).map_err(err)?;
        let d = PyDict::new(py);
        d.set_item("p", map.p)?;
        d.set_item("levels", map.levels)?;
        d.set_item("density", map.density)?;
        d.set_item("lower", map.lower)?;
        d.set_item("median", map.median)?;
        d.set_item("upper", map.upper)?;
        Ok(d)
    }

    /// Acceptance rates of the chain's moves.
    fn acceptance<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let m = &self.inner.diagnostics.moves;
        let d = PyDict::new(py);
        d.set_item("birth", m.birth_rate())?;
        d.set_item("death", m.death_rate())?;
        d.set_item("k_move", m.k_move_rate())?;
        d.set_item("arms", m.arms_rate())?;
        d.set_item("fallback", m.fallback_rate())?;
        Ok(d)
    }
}

/// Samples the posterior of `dataset`. Releases the interpreter while the
/// chain runs.
#[pyfunction]
#[pyo3(signature = (dataset, hyper=None, n_samples=10_000, burn_in=1_000, thin=1, seed=0, k_max=50, ars_max_points=40))]
#[allow(clippy::too_many_arguments)]
fn fit(
    py: Python<'_>,
    dataset: &PyDataset,
    hyper: Option<PyHyper>,
    n_samples: usize,
    burn_in: usize,
    thin: usize,
    seed: u64,
    k_max: usize,
    ars_max_points: usize,
) -> PyResult<PySamples> {
    let hyper = hyper_or_default(hyper);
    let config = ChainConfig {
        n_samples,
        burn_in,
        thin,
        seed,
        ars_max_points,
        k_max,
    };
    let data = &dataset.data;
    let inner = py.detach(|| run_chain(data, &hyper, &config)).map_err(err)?;
    Ok(PySamples { inner })
}

/// Fits two zero-question classes and checks that the gain summaries stay
/// at their prior values. Returns the printed report and the verdicts.
#[pyfunction]
#[pyo3(signature = (seed=0, n_samples=10_000, burn_in=1_000, students=70, hyper=None))]
fn prior_check<'py>(
    py: Python<'py>,
    seed: u64,
    n_samples: usize,
    burn_in: usize,
    students: usize,
    hyper: Option<PyHyper>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = PriorCheckConfig::default();
    cfg.hyper = hyper_or_default(hyper);
    cfg.chain.seed = seed;
    cfg.chain.n_samples = n_samples;
    cfg.chain.burn_in = burn_in;
    cfg.students = students;
    let (report, _) = py.detach(|| core_prior_check(&cfg)).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("prob_method2_better", report.prob_method2_better)?;
    d.set_item("expected_gain_diff", report.expected_gain_diff)?;
    d.set_item("passed", report.passed())?;
    d.set_item("report", report.to_string())?;
    Ok(d)
}

#[pymodule]
fn sac(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyRule>()?;
    m.add_class::<PyHyper>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PySamples>()?;
    m.add_function(wrap_pyfunction!(rule_names, m)?)?;
    m.add_function(wrap_pyfunction!(sabotage, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add_function(wrap_pyfunction!(prior_check, m)?)?;
    Ok(())
}
