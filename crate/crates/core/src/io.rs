//! File formats: score and design CSVs, key=value configs, JSON-lines
//! sample files, and the CSV tables emitted by the analysis queries.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{CdfHeatmap, ComparisonRow, Partition, StudentValue};
use crate::error::{Error, Result};
use crate::mcmc::{ChainConfig, ChainDiagnostics, Sample, SampleSet};
use crate::model::{ClassRecord, Dataset, GroupKey, Hyperparams, LatentState, Method, MixtureComponent, GroupState, TestDesign};

pub const DATA_HEADER: [&str; 5] = ["school", "method", "student", "test", "score"];
pub const DESIGN_HEADER: [&str; 3] = ["school", "test", "marks"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn check_header(path: &Path, found: &csv::StringRecord, expected: &[&str]) -> Result<()> {
    let found: Vec<&str> = found.iter().map(str::trim).collect();
    if found != expected {
        return Err(Error::parse(
            path,
            1,
            format!("header must be `{}`, found `{}`", expected.join(","), found.join(",")),
        ));
    }
    Ok(())
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, rec: &csv::StringRecord, i: usize, name: &str) -> Result<T> {
    let raw = rec
        .get(i)
        .ok_or_else(|| Error::parse(path, line, format!("missing field `{name}`")))?
        .trim();
    raw.parse()
        .map_err(|_| Error::parse(path, line, format!("`{name}` has invalid value `{raw}`")))
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::parse(path, line, format!("{other:?}")),
    }
}

/// Reads a `school,test,marks` design.
pub fn read_design(path: &Path) -> Result<TestDesign> {
    read_design_from(open(path)?, path)
}

pub fn read_design_from<R: Read>(input: R, path: &Path) -> Result<TestDesign> {
    let mut rdr = csv_reader(input);
    check_header(path, rdr.headers().map_err(|e| csv_error(path, e))?, &DESIGN_HEADER)?;
    let mut design = TestDesign::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let school: u32 = field(path, line, &rec, 0, "school")?;
        let test: u32 = field(path, line, &rec, 1, "test")?;
        let marks: u32 = field(path, line, &rec, 2, "marks")?;
        design
            .insert(school, test, marks)
            .map_err(|e| Error::parse(path, line, e.to_string()))?;
    }
    design
        .validate()
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok(design)
}

/// Counts reported after a successful ingest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub classes: usize,
    pub students: usize,
    pub groups: usize,
    pub max_score: u32,
}

/// Reads a `school,method,student,test,score` file against `design`.
///
/// Every student of a class must have exactly one score for every test of
/// the school.
pub fn read_dataset(path: &Path, design: &TestDesign) -> Result<(Dataset, IngestReport)> {
    read_dataset_from(open(path)?, path, design)
}

pub fn read_dataset_from<R: Read>(input: R, path: &Path, design: &TestDesign) -> Result<(Dataset, IngestReport)> {
    let mut rdr = csv_reader(input);
    check_header(path, rdr.headers().map_err(|e| csv_error(path, e))?, &DATA_HEADER)?;
    // (school, method) -> student -> test -> score
    let mut cells: BTreeMap<(u32, Method), BTreeMap<u32, BTreeMap<u32, u32>>> = BTreeMap::new();
    let mut rows = 0;
    let mut max_score = 0;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let school: u32 = field(path, line, &rec, 0, "school")?;
        let method: u8 = field(path, line, &rec, 1, "method")?;
        let method = Method::try_from(method).map_err(|e| Error::parse(path, line, e.to_string()))?;
        let student: u32 = field(path, line, &rec, 2, "student")?;
        let test: u32 = field(path, line, &rec, 3, "test")?;
        let score: u32 = field(path, line, &rec, 4, "score")?;
        let marks = design.marks(school, test).ok_or_else(|| {
            Error::parse(path, line, format!("school {school} test {test} is not in the design"))
        })?;
        if score > marks {
            return Err(Error::parse(
                path,
                line,
                format!("score {score} exceeds the {marks} marks of school {school} test {test}"),
            ));
        }
        let slot = cells
            .entry((school, method))
            .or_default()
            .entry(student)
            .or_default();
        if slot.insert(test, score).is_some() {
            return Err(Error::parse(
                path,
                line,
                format!("duplicate row for school {school}, method {method}, student {student}, test {test}"),
            ));
        }
        rows += 1;
        max_score = max_score.max(score);
    }
    let mut classes = Vec::with_capacity(cells.len());
    let mut students = 0;
    for ((school, method), by_student) in cells {
        let tests = design.test_count(school);
        let marks: Vec<u32> = (1..=tests).map(|t| design.marks(school, t).unwrap()).collect();
        let mut scores = vec![Vec::with_capacity(by_student.len()); tests as usize];
        for (student, by_test) in &by_student {
            for t in 1..=tests {
                let s = by_test.get(&t).ok_or_else(|| {
                    Error::parse(
                        path,
                        0,
                        format!("school {school}, method {method}, student {student} has no score for test {t}"),
                    )
                })?;
                scores[(t - 1) as usize].push(*s);
            }
        }
        students += by_student.len();
        classes.push(ClassRecord {
            method,
            school,
            student_ids: by_student.keys().copied().collect(),
            marks,
            scores,
        });
    }
    let dataset = Dataset::new(classes)?;
    let report = IngestReport {
        rows,
        classes: dataset.classes().len(),
        students,
        groups: dataset.group_keys().len(),
        max_score,
    };
    Ok((dataset, report))
}

/// Reads scores and design together.
pub fn ingest(data_path: &Path, design_path: &Path) -> Result<(Dataset, TestDesign, IngestReport)> {
    let design = read_design(design_path)?;
    let (dataset, report) = read_dataset(data_path, &design)?;
    Ok((dataset, design, report))
}

pub fn write_design<W: Write>(design: &TestDesign, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(DESIGN_HEADER).map_err(|e| csv_error(Path::new("<design>"), e))?;
    for (s, t, n) in design.iter() {
        w.write_record([s.to_string(), t.to_string(), n.to_string()])
            .map_err(|e| csv_error(Path::new("<design>"), e))?;
    }
    w.flush().map_err(|e| Error::io("<design>", e))?;
    Ok(())
}

pub fn write_dataset<W: Write>(dataset: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| csv_error(Path::new("<data>"), e);
    w.write_record(DATA_HEADER).map_err(err)?;
    for c in dataset.classes() {
        for (u, id) in c.student_ids.iter().enumerate() {
            for t in 1..=c.tests() {
                w.write_record([
                    c.school.to_string(),
                    c.method.to_string(),
                    id.to_string(),
                    t.to_string(),
                    c.scores[(t - 1) as usize][u].to_string(),
                ])
                .map_err(err)?;
            }
        }
    }
    w.flush().map_err(|e| Error::io("<data>", e))?;
    Ok(())
}

/// Hyperparameters plus optional chain settings read from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    pub hyper: Hyperparams,
    pub chain: ChainConfig,
}

/// Parses `key = value` lines. `#` starts a comment. Recognized keys are
/// `kappa, a, b, lambda, mu` and the chain settings `n_samples, burn_in,
/// thin, seed, ars_max_points, k_max`; missing keys keep their defaults.
pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    let mut seen = BTreeSet::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap().trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if !seen.insert(key.to_string()) {
            return Err(Error::parse(path, line, format!("duplicate key `{key}`")));
        }
        let real = || -> Result<f64> {
            value
                .parse()
                .map_err(|_| Error::parse(path, line, format!("`{key}` needs a number, got `{value}`")))
        };
        let int = || -> Result<u64> {
            value
                .parse()
                .map_err(|_| Error::parse(path, line, format!("`{key}` needs an integer, got `{value}`")))
        };
        match key {
            "kappa" => cfg.hyper.kappa = real()?,
            "a" => cfg.hyper.a = real()?,
            "b" => cfg.hyper.b = real()?,
            "lambda" => cfg.hyper.lambda = real()?,
            "mu" => cfg.hyper.mu = real()?,
            "n_samples" => cfg.chain.n_samples = int()? as usize,
            "burn_in" => cfg.chain.burn_in = int()? as usize,
            "thin" => cfg.chain.thin = int()? as usize,
            "seed" => cfg.chain.seed = int()?,
            "ars_max_points" => cfg.chain.ars_max_points = int()? as usize,
            "k_max" => cfg.chain.k_max = int()? as usize,
            other => return Err(Error::parse(path, line, format!("unknown key `{other}`"))),
        }
    }
    cfg.hyper
        .validate()
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    cfg.chain
        .validate()
        .map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok(cfg)
}

pub fn read_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

pub fn format_config(cfg: &RunConfig) -> String {
    let h = &cfg.hyper;
    let c = &cfg.chain;
    format!(
        "kappa = {}\na = {}\nb = {}\nlambda = {}\nmu = {}\nn_samples = {}\nburn_in = {}\nthin = {}\nseed = {}\nars_max_points = {}\nk_max = {}\n",
        h.kappa, h.a, h.b, h.lambda, h.mu, c.n_samples, c.burn_in, c.thin, c.seed, c.ars_max_points, c.k_max
    )
}

#[derive(Serialize, Deserialize)]
struct HeaderLine {
    kind: String,
    hyper: Hyperparams,
    config: ChainConfig,
    dataset: Dataset,
    diagnostics: ChainDiagnostics,
    trace: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct GroupLine {
    key: GroupKey,
    k: usize,
    components: Vec<MixtureComponent>,
    weights: Vec<f64>,
    assignments: Vec<usize>,
    p: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SampleLine {
    kind: String,
    sweep: usize,
    groups: Vec<GroupLine>,
    log_joint: f64,
}

/// Writes a header line describing the run, then one line per sample.
pub fn write_samples<W: Write>(set: &SampleSet, mut out: W) -> Result<()> {
    let header = HeaderLine {
        kind: "header".into(),
        hyper: set.hyper,
        config: set.config,
        dataset: set.dataset.clone(),
        diagnostics: set.diagnostics.clone(),
        trace: set.trace.clone(),
    };
    let io = |e| Error::io("<samples>", e);
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n").map_err(io)?;
    for s in &set.samples {
        let line = SampleLine {
            kind: "sample".into(),
            sweep: s.sweep,
            groups: s
                .state
                .groups
                .iter()
                .map(|g| GroupLine {
                    key: g.key,
                    k: g.k(),
                    components: g.components.clone(),
                    weights: g.weights.clone(),
                    assignments: g.assignments.clone(),
                    p: g.accuracies.clone(),
                })
                .collect(),
            log_joint: s.log_joint,
        };
        serde_json::to_writer(&mut out, &line)?;
        out.write_all(b"\n").map_err(io)?;
    }
    out.flush().map_err(io)?;
    Ok(())
}

pub fn save_samples(set: &SampleSet, path: &Path) -> Result<()> {
    write_samples(set, create(path)?).map_err(|e| relabel(e, path))
}

fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

pub fn read_samples_from<R: BufRead>(input: R, path: &Path) -> Result<SampleSet> {
    let mut lines = input.lines().enumerate();
    let (_, first) = lines
        .next()
        .ok_or_else(|| Error::parse(path, 1, "empty samples file"))?;
    let first = first.map_err(|e| Error::io(path, e))?;
    let header: HeaderLine =
        serde_json::from_str(&first).map_err(|e| Error::parse(path, 1, e.to_string()))?;
    if header.kind != "header" {
        return Err(Error::parse(path, 1, "first line must have kind `header`"));
    }
    let mut samples = Vec::new();
    for (i, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let s: SampleLine =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        let state = LatentState {
            groups: s
                .groups
                .into_iter()
                .map(|g| GroupState {
                    key: g.key,
                    components: g.components,
                    weights: g.weights,
                    assignments: g.assignments,
                    accuracies: g.p,
                })
                .collect(),
        };
        state
            .validate()
            .map_err(|e| Error::parse(path, i + 1, e.to_string()))?;
        samples.push(Sample {
            sweep: s.sweep,
            state,
            log_joint: s.log_joint,
        });
    }
    Ok(SampleSet {
        hyper: header.hyper,
        config: header.config,
        dataset: header.dataset,
        samples,
        trace: header.trace,
        diagnostics: header.diagnostics,
    })
}

pub fn load_samples(path: &Path) -> Result<SampleSet> {
    read_samples_from(BufReader::new(open(path)?), path)
}

/// Writes method comparison rows in table form: one line per school with
/// the probability columns first, then the expected-difference columns.
pub fn write_comparison_table<W: Write>(partition: Partition, rows: &[ComparisonRow], out: W) -> Result<()> {
    let labels = partition.labels();
    let mut w = csv::Writer::from_writer(out);
    let err = |e| csv_error(Path::new("<table>"), e);
    let mut header = vec!["school".to_string()];
    header.extend(labels.iter().map(|l| format!("p_{l}")));
    header.extend(labels.iter().map(|l| format!("e_{l}")));
    w.write_record(&header).map_err(err)?;
    let mut by_school: BTreeMap<u32, BTreeMap<&str, &ComparisonRow>> = BTreeMap::new();
    for r in rows {
        by_school.entry(r.school).or_default().insert(&r.label, r);
    }
    for (school, cells) in by_school {
        let mut rec = vec![school.to_string()];
        let get = |l: &String| {
            cells
                .get(l.as_str())
                .copied()
                .ok_or_else(|| Error::InvalidArgument(format!("school {school} lacks subset {l}")))
        };
        for l in &labels {
            rec.push(get(l)?.prob_method2_better.to_string());
        }
        for l in &labels {
            rec.push(get(l)?.expected_gain_diff.to_string());
        }
        w.write_record(&rec).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<table>", e))?;
    Ok(())
}

/// Writes `student,pretest,<value_name>` rows.
pub fn write_student_values<W: Write>(values: &[StudentValue], value_name: &str, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| csv_error(Path::new("<students>"), e);
    w.write_record(["student", "pretest", value_name]).map_err(err)?;
    for v in values {
        w.write_record([v.student.to_string(), v.pretest.to_string(), v.value.to_string()])
            .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<students>", e))?;
    Ok(())
}

/// Writes the heatmap lattice as `p,level,density`.
pub fn write_heatmap<W: Write>(map: &CdfHeatmap, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| csv_error(Path::new("<heatmap>"), e);
    w.write_record(["p", "level", "density"]).map_err(err)?;
    for (i, p) in map.p.iter().enumerate() {
        for (j, level) in map.levels.iter().enumerate() {
            w.write_record([p.to_string(), level.to_string(), map.density[i][j].to_string()])
                .map_err(err)?;
        }
    }
    w.flush().map_err(|e| Error::io("<heatmap>", e))?;
    Ok(())
}

/// Writes the central band as `p,lower,median,upper`.
pub fn write_band<W: Write>(map: &CdfHeatmap, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e| csv_error(Path::new("<band>"), e);
    w.write_record(["p", "lower", "median", "upper"]).map_err(err)?;
    for i in 0..map.p.len() {
        w.write_record([
            map.p[i].to_string(),
            map.lower[i].to_string(),
            map.median[i].to_string(),
            map.upper[i].to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<band>", e))?;
    Ok(())
}

/// Reads a `p,level,density` lattice back.
pub fn read_heatmap_rows<R: Read>(input: R, path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    let mut rdr = csv_reader(input);
    check_header(path, rdr.headers().map_err(|e| csv_error(path, e))?, &["p", "level", "density"])?;
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            Ok((
                field(path, line, &rec, 0, "p")?,
                field(path, line, &rec, 1, "level")?,
                field(path, line, &rec, 2, "density")?,
            ))
        })
        .collect()
}
