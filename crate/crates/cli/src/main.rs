mod manifest;
mod weight_spec;

use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use sac_core::analysis::{
    cdf_heatmap, compare_methods, final_test, per_student_expected_gain, per_student_prob_gain,
    prior_check, Partition, PriorCheckConfig,
};
use sac_core::io::{
    self, format_config, load_samples, read_config, save_samples, RunConfig,
};
use sac_core::mcmc::{log_joint_rhat, run_chains, ChainDiagnostics, SampleSet};
use sac_core::model::{forward_simulate, ClassSpec, Method, TestDesign};
use sac_core::scoring::{
    check_c1, check_c2, rule_by_name, Confidence, ExpectedScoreSurface, SabotageReport,
    ScoringRule, DEFAULT_TOLERANCE,
};
use sac_core::{Error, Result};

use manifest::RunManifest;
use weight_spec::WeightSpec;

/// Confidence scoring rules and posterior analysis of pretest/posttest marks.
#[derive(Debug, Parser)]
#[command(name = "sac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score one answer under a named rule.
    Score {
        /// Rule name: foster, log, quadratic, asymmetric, scaled-asymmetric or combined.
        #[arg(long)]
        rule: String,
        /// Reported confidence in [0, 1].
        #[arg(long, conflicts_with = "q10", required_unless_present = "q10")]
        q: Option<f64>,
        /// Reported confidence in tenths, 0 to 10.
        #[arg(long)]
        q10: Option<u8>,
        /// Whether the answer was right.
        #[arg(long, action = clap::ArgAction::Set)]
        correct: bool,
    },
    /// Check a rule for honest reporting (C1) and monotone payoff (C2).
    ValidateRule {
        /// A named rule.
        #[arg(long, conflicts_with = "weight_spec", required_unless_present = "weight_spec")]
        rule: Option<String>,
        /// A `key = value` file describing a symmetric or asymmetric family.
        #[arg(long)]
        weight_spec: Option<PathBuf>,
        /// Lower end of the interval on which C2 is checked. Defaults to 0.5
        /// for symmetric rules and 0 otherwise.
        #[arg(long)]
        j_lower: Option<f64>,
        /// Grid points for both checks.
        #[arg(long, default_value_t = 1001)]
        grid: usize,
    },
    /// Write the expected score h(p, q) on a grid as `p,q,h`.
    Surface {
        #[arg(long)]
        rule: String,
        /// Grid points per axis.
        #[arg(long, default_value_t = 101)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
        /// Replace scores below this value (including -inf) with it.
        #[arg(long)]
        clip_floor: Option<f64>,
    },
    /// Draw a synthetic dataset from the model.
    Simulate {
        /// Output directory for data.csv, design.csv, truth.json and the manifest.
        #[arg(long)]
        out: PathBuf,
        /// Hyperparameter config file (`key = value`).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Students per class.
        #[arg(long, default_value_t = 70)]
        students: usize,
        #[arg(long, default_value_t = 1)]
        schools: u32,
        /// Tests per school; test 1 is the pretest.
        #[arg(long, default_value_t = 2)]
        tests: u32,
        /// Marks per test.
        #[arg(long, default_value_t = 20)]
        marks: u32,
        /// Use tests with no questions (every score is 0).
        #[arg(long)]
        zero_questions: bool,
    },
    /// Sample the posterior and write samples as JSON lines.
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        design: PathBuf,
        /// Hyperparameter and chain config file (`key = value`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Samples file; further chains go to `<stem>.chain<c>.jsonl`.
        #[arg(long)]
        samples_out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        n_samples: Option<usize>,
        #[arg(long)]
        burn_in: Option<usize>,
        #[arg(long)]
        thin: Option<usize>,
        #[arg(long)]
        k_max: Option<usize>,
        #[arg(long)]
        ars_max_points: Option<usize>,
        /// Chains run concurrently, each on its own generator stream.
        #[arg(long, default_value_t = 1)]
        chains: usize,
    },
    /// Query fitted samples.
    Analyze {
        /// One samples file holding both methods, or one file per method.
        #[arg(long, num_args = 1..=2, required = true)]
        samples: Vec<PathBuf>,
        #[arg(long, value_enum)]
        query: Query,
        /// School to report; all schools when omitted for table queries.
        #[arg(long)]
        school: Option<u32>,
        /// Posttest; defaults to the final test.
        #[arg(long)]
        posttest: Option<u32>,
        /// Method for per-student and cdf queries.
        #[arg(long, default_value_t = 2)]
        method: u8,
        /// Test for the cdf query; defaults to the final test.
        #[arg(long)]
        test: Option<u32>,
        /// Lattice points in p for the cdf query.
        #[arg(long, default_value_t = 101)]
        lattice: usize,
        /// Level bins for the cdf query.
        #[arg(long, default_value_t = 50)]
        levels: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit two zero-question classes and check that gain summaries stay at
    /// their prior values.
    PriorCheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 10_000)]
        n_samples: usize,
        #[arg(long, default_value_t = 1_000)]
        burn_in: usize,
        #[arg(long, default_value_t = 70)]
        students: usize,
        /// Hyperparameter config file (`key = value`).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Directory for the samples file, report and manifest.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Query {
    Whole,
    Halves,
    Quartiles,
    PerStudentProb,
    PerStudentGain,
    Cdf,
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    CheckFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::CheckFailed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<Outcome> {
    match command {
        Command::Score {
            rule,
            q,
            q10,
            correct,
        } => {
            let rule = rule_by_name(&rule)?;
            let q = match (q, q10) {
                (Some(q), _) => Confidence::new(q)?,
                (None, Some(t)) => Confidence::from_tenths(t)?,
                (None, None) => unreachable!("clap requires one of them"),
            };
            println!("{}", rule.score(q, correct));
            Ok(Outcome::Ok)
        }
        Command::ValidateRule {
            rule,
            weight_spec,
            j_lower,
            grid,
        } => validate_rule(rule, weight_spec, j_lower, grid),
        Command::Surface {
            rule,
            resolution,
            out,
            clip_floor,
        } => {
            let rule = rule_by_name(&rule)?;
            let surface = ExpectedScoreSurface::compute(&rule, resolution)?;
            let file = create(&out)?;
            surface
                .write_csv(file, clip_floor)
                .map_err(|e| Error::io(&out, e))?;
            let mut m = RunManifest::start("surface");
            m.config(&serde_json::json!({
                "rule": rule.name(),
                "resolution": resolution,
                "clip_floor": clip_floor,
            }))?;
            m.output(&out);
            m.finish(parent(&out))?;
            Ok(Outcome::Ok)
        }
        Command::Simulate {
            out,
            config,
            seed,
            students,
            schools,
            tests,
            marks,
            zero_questions,
        } => simulate(out, config, seed, students, schools, tests, marks, zero_questions),
        Command::Fit {
            data,
            design,
            config,
            samples_out,
            seed,
            n_samples,
            burn_in,
            thin,
            k_max,
            ars_max_points,
            chains,
        } => {
            let mut m = RunManifest::start("fit");
            let mut cfg = match &config {
                Some(p) => {
                    m.input(p)?;
                    read_config(p)?
                }
                None => RunConfig::default(),
            };
            let c = &mut cfg.chain;
            c.seed = seed.unwrap_or(c.seed);
            c.n_samples = n_samples.unwrap_or(c.n_samples);
            c.burn_in = burn_in.unwrap_or(c.burn_in);
            c.thin = thin.unwrap_or(c.thin);
            c.k_max = k_max.unwrap_or(c.k_max);
            c.ars_max_points = ars_max_points.unwrap_or(c.ars_max_points);
            c.validate()?;
            if chains == 0 {
                return Err(Error::InvalidArgument("--chains must be at least 1".into()));
            }
            m.input(&data)?;
            m.input(&design)?;
            let (dataset, _, report) = io::ingest(&data, &design)?;
            println!(
                "ingested {} rows: {} classes, {} students, {} groups, max score {}",
                report.rows, report.classes, report.students, report.groups, report.max_score
            );
            let sets = run_chains(&dataset, &cfg.hyper, &cfg.chain, chains)?;
            let dir = parent(&samples_out);
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            for (i, set) in sets.iter().enumerate() {
                let path = chain_path(&samples_out, i);
                save_samples(set, &path)?;
                m.output(&path);
                println!("chain {i}: {} samples -> {}", set.len(), path.display());
                print_diagnostics(&set.diagnostics);
            }
            if let Some(r) = log_joint_rhat(&sets) {
                println!("log-joint R-hat across {chains} chains: {r:.4}");
            }
            m.seed = Some(cfg.chain.seed);
            m.config(&serde_json::json!({ "run": cfg, "chains": chains }))?;
            m.finish(parent(&samples_out))?;
            Ok(Outcome::Ok)
        }
        Command::Analyze {
            samples,
            query,
            school,
            posttest,
            method,
            test,
            lattice,
            levels,
            out,
        } => analyze(&samples, query, school, posttest, method, test, lattice, levels, &out),
        Command::PriorCheck {
            seed,
            n_samples,
            burn_in,
            students,
            config,
            out,
        } => {
            let mut m = RunManifest::start("prior-check");
            let mut pc = PriorCheckConfig::default();
            if let Some(p) = &config {
                m.input(p)?;
                pc.hyper = read_config(p)?.hyper;
            }
            pc.chain.seed = seed;
            pc.chain.n_samples = n_samples;
            pc.chain.burn_in = burn_in;
            pc.students = students;
            let (report, set) = prior_check(&pc)?;
            println!("{report}");
            print_diagnostics(&set.diagnostics);
            if let Some(dir) = &out {
                fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let samples_path = dir.join("samples.jsonl");
                save_samples(&set, &samples_path)?;
                let report_path = dir.join("report.txt");
                fs::write(&report_path, format!("{report}\n")).map_err(|e| Error::io(&report_path, e))?;
                m.output(&samples_path);
                m.output(&report_path);
                m.seed = Some(seed);
                m.config(&pc)?;
                m.finish(dir)?;
            }
            Ok(if report.passed() {
                Outcome::Ok
            } else {
                Outcome::CheckFailed
            })
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn parent(path: &Path) -> &Path {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    }
}

fn chain_path(base: &Path, chain: usize) -> PathBuf {
    if chain == 0 {
        return base.to_path_buf();
    }
    let stem = base.file_stem().and_then(|s| s.to_str()).unwrap_or("samples");
    base.with_file_name(format!("{stem}.chain{chain}.jsonl"))
}

fn fmt_rate(r: Option<f64>) -> String {
    r.map_or("n/a".into(), |r| format!("{r:.4}"))
}

fn print_diagnostics(d: &ChainDiagnostics) {
    let m = &d.moves;
    println!(
        "  acceptance: birth {} death {} K-moves {} ARMS {} fallback {} ({} fallback steps)",
        fmt_rate(m.birth_rate()),
        fmt_rate(m.death_rate()),
        fmt_rate(m.k_move_rate()),
        fmt_rate(m.arms_rate()),
        fmt_rate(m.fallback_rate()),
        m.fallback_steps
    );
    if let Some(bm) = &d.log_joint {
        println!(
            "  log-joint mean {:.4} (MC SE {:.4}, ESS {:.0})",
            bm.mean, bm.se, bm.ess
        );
    }
}

fn validate_rule(
    name: Option<String>,
    spec: Option<PathBuf>,
    j_lower: Option<f64>,
    grid: usize,
) -> Result<Outcome> {
    let rule: ScoringRule = match (&name, &spec) {
        (Some(n), _) => rule_by_name(n)?,
        (None, Some(p)) => {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            WeightSpec::parse(&text, p)?.build()?
        }
        (None, None) => unreachable!("clap requires one of them"),
    };
    let j = j_lower.unwrap_or(if rule.is_symmetric() { 0.5 } else { 0.0 });
    let c1 = check_c1(&rule, grid, DEFAULT_TOLERANCE)?;
    let c2 = check_c2(&rule, j, grid)?;
    print!("{c1}{c2}");
    if rule.name() == "combined" {
        println!("{}", SabotageReport::compute(grid.max(1001))?);
    }
    Ok(if c1.passed() && c2.passed() {
        Outcome::Ok
    } else {
        Outcome::CheckFailed
    })
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    out: PathBuf,
    config: Option<PathBuf>,
    seed: u64,
    students: usize,
    schools: u32,
    tests: u32,
    marks: u32,
    zero_questions: bool,
) -> Result<Outcome> {
    let mut m = RunManifest::start("simulate");
    let hyper = match &config {
        Some(p) => {
            m.input(p)?;
            read_config(p)?.hyper
        }
        None => Default::default(),
    };
    if tests == 0 || schools == 0 {
        return Err(Error::InvalidArgument("need at least one school and one test".into()));
    }
    let marks = if zero_questions { 0 } else { marks };
    let school_ids: Vec<u32> = (1..=schools).collect();
    let design = TestDesign::uniform(&school_ids, tests, marks);
    let classes: Vec<ClassSpec> = school_ids
        .iter()
        .flat_map(|&school| {
            Method::ALL.iter().map(move |&method| ClassSpec {
                method,
                school,
                students,
            })
        })
        .collect();
    let (dataset, truth) = forward_simulate(&hyper, &design, &classes, seed)?;
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    let data_path = out.join("data.csv");
    let design_path = out.join("design.csv");
    let truth_path = out.join("truth.json");
    let config_path = out.join("config.txt");
    io::write_dataset(&dataset, create(&data_path)?).map_err(|e| relabel(e, &data_path))?;
    io::write_design(&design, create(&design_path)?).map_err(|e| relabel(e, &design_path))?;
    let truth_text = serde_json::to_string(&truth)?;
    fs::write(&truth_path, truth_text + "\n").map_err(|e| Error::io(&truth_path, e))?;
    let run = RunConfig {
        hyper,
        ..Default::default()
    };
    fs::write(&config_path, format_config(&run)).map_err(|e| Error::io(&config_path, e))?;
    println!(
        "simulated {} classes of {students} students, {tests} tests of {marks} marks -> {}",
        classes.len(),
        out.display()
    );
    for p in [&data_path, &design_path, &truth_path, &config_path] {
        m.output(p);
    }
    m.seed = Some(seed);
    m.config(&serde_json::json!({
        "hyper": hyper,
        "students": students,
        "schools": schools,
        "tests": tests,
        "marks": marks,
        "zero_questions": zero_questions,
    }))?;
    m.finish(&out)?;
    Ok(Outcome::Ok)
}

fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

/// The loaded set holding the class `(method, school)`.
fn set_for<'a>(sets: &'a [SampleSet], method: Method, school: u32) -> Result<&'a SampleSet> {
    sets.iter()
        .find(|s| s.dataset.class(method, school).is_some())
        .ok_or_else(|| {
            Error::InvalidArgument(format!("no samples file contains class m{method}/s{school}"))
        })
}

#[allow(clippy::too_many_arguments)]
fn analyze(
    paths: &[PathBuf],
    query: Query,
    school: Option<u32>,
    posttest: Option<u32>,
    method: u8,
    test: Option<u32>,
    lattice: usize,
    levels: usize,
    out: &Path,
) -> Result<Outcome> {
    let mut m = RunManifest::start("analyze");
    let mut sets = Vec::with_capacity(paths.len());
    for p in paths {
        m.input(p)?;
        sets.push(load_samples(p)?);
    }
    let method = Method::try_from(method)?;
    let partition = match query {
        Query::Whole => Some(Partition::Whole),
        Query::Halves => Some(Partition::Halves),
        Query::Quartiles => Some(Partition::Quartiles),
        _ => None,
    };
    let file = create(out)?;
    if let Some(partition) = partition {
        let schools: Vec<u32> = match school {
            Some(s) => vec![s],
            None => {
                let mut all: Vec<u32> = sets
                    .iter()
                    .flat_map(|s| s.dataset.classes().iter().map(|c| c.school))
                    .collect();
                all.sort_unstable();
                all.dedup();
                all.into_iter()
                    .filter(|&s| {
                        set_for(&sets, Method::Traditional, s).is_ok() && set_for(&sets, Method::Sac, s).is_ok()
                    })
                    .collect()
            }
        };
        let mut rows = Vec::new();
        for s in schools {
            let s1 = set_for(&sets, Method::Traditional, s)?;
            let s2 = set_for(&sets, Method::Sac, s)?;
            rows.extend(compare_methods(s1, s2, s, partition, posttest)?);
        }
        io::write_comparison_table(partition, &rows, file).map_err(|e| relabel(e, out))?;
        println!(
            "{} rows -> {} (students weighted equally; larger parts at higher pretest ranks)",
            rows.len(),
            out.display()
        );
    } else {
        let school = match school {
            Some(s) => s,
            None => {
                let first = sets[0]
                    .dataset
                    .classes()
                    .first()
                    .ok_or_else(|| Error::InvalidArgument("samples hold no classes".into()))?;
                first.school
            }
        };
        let set = set_for(&sets, method, school)?;
        match query {
            Query::PerStudentProb => {
                let v = per_student_prob_gain(set, method, school, posttest)?;
                io::write_student_values(&v, "prob_gain", file).map_err(|e| relabel(e, out))?;
            }
            Query::PerStudentGain => {
                let v = per_student_expected_gain(set, method, school, posttest)?;
                io::write_student_values(&v, "expected_gain", file).map_err(|e| relabel(e, out))?;
            }
            Query::Cdf => {
                let t = match test {
                    Some(t) => t,
                    None => final_test(set, method, school)?,
                };
                let map = cdf_heatmap(set, method, school, t, lattice, levels)?;
                io::write_heatmap(&map, file).map_err(|e| relabel(e, out))?;
                let band_path = out.with_extension("band.csv");
                io::write_band(&map, create(&band_path)?).map_err(|e| relabel(e, &band_path))?;
                m.output(&band_path);
            }
            _ => unreachable!("table queries handled above"),
        }
        println!("-> {}", out.display());
    }
    m.output(out);
    m.config(&serde_json::json!({
        "query": format!("{query:?}"),
        "school": school,
        "posttest": posttest,
        "method": method,
        "test": test,
        "lattice": lattice,
        "levels": levels,
    }))?;
    m.finish(parent(out))?;
    Ok(Outcome::Ok)
}
