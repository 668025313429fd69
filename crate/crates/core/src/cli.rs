//! Command-line front end.
//!
//! Exit status is 0 on success, 1 when a library operation fails (the error
//! name is printed on stderr) and 2 on usage errors.
//!
//! Experiment subcommands build an [`ExperimentConfig`] from their flags (or
//! read one with `--config`, which also accepts a previous report) and
//! write a CSV report whose leading `#` lines hold the config, the seed and
//! the crate version.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::chain::{BoxDomain, Chain, ChainFile, GridStamp};
use crate::error::Error;
use crate::field::{
    dirichlet_energy, energy_bound_test, homotopy_norm_estimate, random_detection,
    sgrid_consistency, stability_test, Field, Target, DEFAULT_EPSILONS,
};
use crate::flat::{flat_norm, solve, Mode, NormResult, Solver};
use crate::grid::{deform, deform_random, deformation_scaling_test, skeleton_average_test, Grid};
use crate::group::GroupSpec;
use crate::stats::sample_rng;
use crate::synth::{dipole_cylinder_field, hedgehog_field, vortex_field, DefectSpec, DipoleSpec};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Parser, Debug)]
#[command(name = "flatchain", version, about = "Flat norms of 0-chains and singular sets of sampled maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a field with a known singular chain.
    Generate(GenerateArgs),
    /// Extract the grid singular chain of a field.
    Detect(DetectArgs),
    /// Discrete p-Dirichlet energy of a field.
    Energy(EnergyArgs),
    /// Flat or flat-size norm of a chain with a certificate.
    Flatnorm(FlatnormArgs),
    /// Push a chain to the centers of a grid.
    Deform(DeformArgs),
    /// Monte Carlo F(S - P(S, h, y)) across grid sizes.
    DeformScaling(DeformScalingArgs),
    /// Monte Carlo skeleton averages against binomial integrals.
    FubiniCheck(FubiniArgs),
    /// Detected chains against a known reference across grid sizes.
    SgridConsistency(ConsistencyArgs),
    /// Flat norm of singular chains over Dirichlet energy.
    EnergyBound(EnergyBoundArgs),
    /// Detected chains under growing perturbations.
    Stability(StabilityArgs),
    /// Upper bounds for the norm of a homotopy class.
    NormEstimate(NormEstimateArgs),
    /// Norm of the difference of two chains.
    ChainDiff(ChainDiffArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Kind {
    Vortex,
    Hedgehog,
    Dipole,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: Kind,
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    spacing: f64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    truth: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DetectArgs {
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    h: f64,
    /// `random` or a comma-separated offset in [0, 1)^n.
    #[arg(long, default_value = "random")]
    y: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Known singular chain; random offsets are then drawn among admissible ones.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Norm scale of the integer coefficients.
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct EnergyArgs {
    #[arg(long)]
    field: PathBuf,
    #[arg(long)]
    p: usize,
    /// Region as `lo1,lo2,..:hi1,hi2,..`; the field domain by default.
    #[arg(long)]
    region: Option<String>,
}

#[derive(Args, Debug)]
#[group(id = "solver", multiple = false)]
struct SolverFlags {
    #[arg(long, group = "solver")]
    oracle: bool,
    #[arg(long, group = "solver")]
    flow: bool,
    #[arg(long, group = "solver")]
    auto: bool,
}

impl SolverFlags {
    fn solver(&self) -> Solver {
        if self.oracle {
            Solver::Oracle
        } else if self.flow {
            Solver::Flow
        } else {
            Solver::Auto
        }
    }
}

#[derive(Args, Debug)]
struct FlatnormArgs {
    #[arg(long, value_parser = parse_mode)]
    mode: Mode,
    #[arg(long)]
    chain: PathBuf,
    #[command(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug)]
struct DeformArgs {
    #[arg(long)]
    chain: PathBuf,
    #[arg(long)]
    h: f64,
    #[arg(long, default_value = "random")]
    y: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug, Default)]
struct ExperimentFlags {
    /// Experiment config as JSON, or a report written by a previous run.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Tolerance override `name=value`, repeatable.
    #[arg(long = "tol", value_parser = parse_tolerance)]
    tolerances: Vec<(String, f64)>,
}

#[derive(Args, Debug)]
struct DeformScalingArgs {
    #[arg(long)]
    chain: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    h_list: Vec<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    common: ExperimentFlags,
}

#[derive(Args, Debug)]
struct FubiniArgs {
    /// Dimension of the unit box.
    #[arg(long)]
    dim: Option<usize>,
    /// Skeleton dimension; every j from 0 to n when omitted.
    #[arg(long)]
    j: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    h_list: Vec<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Integrand: `one` or `ramp` (the first coordinate).
    #[arg(long)]
    f: Option<String>,
    #[command(flatten)]
    common: ExperimentFlags,
}

#[derive(Args, Debug)]
struct ConsistencyArgs {
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    h_list: Vec<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    common: ExperimentFlags,
}

#[derive(Args, Debug)]
struct EnergyBoundArgs {
    /// Field files, paired in order with `--truth`.
    #[arg(long)]
    field: Vec<PathBuf>,
    #[arg(long)]
    truth: Vec<PathBuf>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    #[command(flatten)]
    common: ExperimentFlags,
}

#[derive(Args, Debug)]
struct StabilityArgs {
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    y: Option<String>,
    #[arg(long, value_delimiter = ',')]
    epsilons: Vec<f64>,
    #[command(flatten)]
    common: ExperimentFlags,
}

#[derive(Args, Debug)]
struct NormEstimateArgs {
    #[arg(long)]
    target: Option<Target>,
    #[arg(long, allow_hyphen_values = true)]
    d: Option<i64>,
    #[arg(long)]
    levels: Option<usize>,
    #[command(flatten)]
    common: ExperimentFlags,
}

#[derive(Args, Debug)]
struct ChainDiffArgs {
    a: PathBuf,
    b: PathBuf,
    #[arg(long, value_parser = parse_mode, default_value = "flat")]
    mode: Mode,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_tolerance(s: &str) -> Result<(String, f64), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("expected name=value, got \"{s}\""))?;
    Ok((k.to_string(), v.parse().map_err(|e| format!("{e}"))?))
}

/// Everything that determines the output of an experiment.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: String,
    #[serde(default)]
    pub inputs: Vec<String>,
    #[serde(default)]
    pub h_list: Vec<f64>,
    #[serde(default)]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
    /// Experiment-specific settings.
    #[serde(default)]
    pub options: BTreeMap<String, Value>,
    #[serde(default)]
    pub tolerances: BTreeMap<String, f64>,
}

impl ExperimentConfig {
    fn tol(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    fn option<T: serde::de::DeserializeOwned>(&self, name: &str) -> Result<Option<T>, Failure> {
        self.options
            .get(name)
            .map(|v| serde_json::from_value(v.clone()))
            .transpose()
            .map_err(|e| Failure::Usage(format!("option {name}: {e}")))
    }

    fn input(&self, k: usize) -> Result<&str, Failure> {
        self.inputs
            .get(k)
            .map(String::as_str)
            .ok_or_else(|| Failure::Usage(format!("{} needs input #{}", self.experiment, k + 1)))
    }
}

/// A finished experiment: summary values, table, and verdict.
#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub config: ExperimentConfig,
    pub summary: BTreeMap<String, Value>,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
    pub pass: bool,
}

impl Report {
    pub fn to_csv(&self) -> Result<String, Error> {
        let mut out = String::new();
        out.push_str(&format!("# flatchain {VERSION}\n"));
        out.push_str(&format!("# config: {}\n", serde_json::to_string(&self.config)?));
        out.push_str(&format!("# seed: {}\n", self.config.seed));
        for (k, v) in &self.summary {
            out.push_str(&format!("# {k}: {v}\n"));
        }
        out.push_str(&format!("# verdict: {}\n", if self.pass { "pass" } else { "fail" }));
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::InvalidInput(e.to_string()))?;
        out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
        Ok(out)
    }
}

/// Reads the embedded config of a report, or a plain JSON config.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(path)?;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# config: ") {
            return Ok(serde_json::from_str(rest)?);
        }
    }
    Ok(serde_json::from_str(&text)?)
}

enum Failure {
    Usage(String),
    Domain(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Domain(e)
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// Runs the command line `argv` (program name first) and returns the exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            2
        }
        Err(Failure::Domain(e)) => {
            eprintln!("{}: {e}", e.name());
            1
        }
    }
}

fn dispatch(cmd: Command) -> Outcome {
    match cmd {
        Command::Generate(a) => generate(a),
        Command::Detect(a) => detect(a),
        Command::Energy(a) => energy(a),
        Command::Flatnorm(a) => {
            let chain = read_chain(&a.chain)?;
            print_norm(&solve(&chain, a.mode, a.solver.solver())?)
        }
        Command::Deform(a) => deform_cmd(a),
        Command::ChainDiff(a) => {
            let r = chain_diff(&read_chain(&a.a)?, &read_chain(&a.b)?, a.mode)?;
            print_norm(&r)
        }
        Command::DeformScaling(a) => {
            let cfg = configure(&a.common, "deform-scaling", |c| {
                c.inputs = vec![path_flag(&a.chain, "--chain")?];
                c.h_list = list_flag(&a.h_list, "--h-list")?;
                c.samples = a.samples.unwrap_or(200);
                Ok(())
            })?;
            experiment(cfg)
        }
        Command::FubiniCheck(a) => {
            let cfg = configure(&a.common, "fubini-check", |c| {
                c.h_list = list_flag(&a.h_list, "--h-list")?;
                c.samples = a.samples.unwrap_or(500);
                c.options.insert("dim".into(), json!(a.dim.unwrap_or(2)));
                c.options.insert("f".into(), json!(a.f.clone().unwrap_or_else(|| "one".into())));
                if let Some(j) = a.j {
                    c.options.insert("j".into(), json!(j));
                }
                Ok(())
            })?;
            experiment(cfg)
        }
        Command::SgridConsistency(a) => {
            let cfg = configure(&a.common, "sgrid-consistency", |c| {
                c.inputs = vec![path_flag(&a.field, "--field")?, path_flag(&a.truth, "--truth")?];
                c.h_list = list_flag(&a.h_list, "--h-list")?;
                c.samples = a.samples.unwrap_or(200);
                Ok(())
            })?;
            experiment(cfg)
        }
        Command::EnergyBound(a) => {
            let cfg = configure(&a.common, "energy-bound", |c| {
                if a.field.is_empty() || a.field.len() != a.truth.len() {
                    return Err(Failure::Usage("--field and --truth must be given in pairs".into()));
                }
                for (f, t) in a.field.iter().zip(&a.truth) {
                    c.inputs.push(f.display().to_string());
                    c.inputs.push(t.display().to_string());
                }
                c.h_list = vec![a.h.ok_or_else(|| missing("--h"))?];
                c.samples = a.samples.unwrap_or(20);
                Ok(())
            })?;
            experiment(cfg)
        }
        Command::Stability(a) => {
            let cfg = configure(&a.common, "stability", |c| {
                c.inputs = vec![path_flag(&a.field, "--field")?];
                c.h_list = vec![a.h.ok_or_else(|| missing("--h"))?];
                c.options.insert("y".into(), json!(a.y.clone().unwrap_or_else(|| "random".into())));
                let eps = if a.epsilons.is_empty() { DEFAULT_EPSILONS.to_vec() } else { a.epsilons.clone() };
                c.options.insert("epsilons".into(), json!(eps));
                Ok(())
            })?;
            experiment(cfg)
        }
        Command::NormEstimate(a) => {
            let cfg = configure(&a.common, "norm-estimate", |c| {
                c.options.insert("target".into(), json!(a.target.ok_or_else(|| missing("--target"))?));
                c.options.insert("d".into(), json!(a.d.ok_or_else(|| missing("--d"))?));
                c.options.insert("levels".into(), json!(a.levels.unwrap_or(5)));
                Ok(())
            })?;
            experiment(cfg)
        }
    }
}

fn missing(flag: &str) -> Failure {
    Failure::Usage(format!("missing required flag {flag}"))
}

fn path_flag(p: &Option<PathBuf>, flag: &str) -> Result<String, Failure> {
    p.as_ref().map(|p| p.display().to_string()).ok_or_else(|| missing(flag))
}

fn list_flag(v: &[f64], flag: &str) -> Result<Vec<f64>, Failure> {
    if v.is_empty() {
        Err(missing(flag))
    } else {
        Ok(v.to_vec())
    }
}

fn configure(
    flags: &ExperimentFlags,
    name: &str,
    fill: impl FnOnce(&mut ExperimentConfig) -> Outcome,
) -> Outcome<ExperimentConfig> {
    let mut cfg = match &flags.config {
        Some(path) => {
            let cfg = load_config(path)?;
            if cfg.experiment != name {
                return Err(Failure::Usage(format!(
                    "--config holds a {} experiment, not {name}",
                    cfg.experiment
                )));
            }
            cfg
        }
        None => {
            let mut cfg = ExperimentConfig { experiment: name.into(), ..Default::default() };
            fill(&mut cfg)?;
            cfg
        }
    };
    if let Some(s) = flags.seed {
        cfg.seed = s;
    }
    if let Some(o) = &flags.out {
        cfg.output = Some(o.display().to_string());
    }
    for (k, v) in &flags.tolerances {
        cfg.tolerances.insert(k.clone(), *v);
    }
    Ok(cfg)
}

fn experiment(cfg: ExperimentConfig) -> Outcome {
    let report = run_experiment(&cfg)?;
    let text = report.to_csv()?;
    match &cfg.output {
        Some(path) => {
            write_atomic(Path::new(path), text.as_bytes())?;
            println!("{}", serde_json::to_string(&json!({
                "experiment": cfg.experiment,
                "output": path,
                "pass": report.pass,
                "summary": report.summary,
            })).map_err(Error::from)?);
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn f(x: f64) -> String {
    format!("{x:?}")
}

/// Runs the experiment described by `cfg`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report, Error> {
    run_experiment_inner(cfg).map_err(|e| match e {
        Failure::Usage(m) => Error::InvalidInput(m),
        Failure::Domain(e) => e,
    })
}

fn run_experiment_inner(cfg: &ExperimentConfig) -> Outcome<Report> {
    let mut summary = BTreeMap::new();
    let (columns, rows, pass): (Vec<&'static str>, Vec<Vec<String>>, bool) = match cfg.experiment.as_str() {
        "deform-scaling" => {
            let s = read_chain(Path::new(cfg.input(0)?))?;
            let family: Vec<(f64, usize)> = cfg.h_list.iter().map(|&h| (h, cfg.samples)).collect();
            let r = deformation_scaling_test(&s, &family, cfg.seed)?;
            summary.insert("mass".into(), json!(r.mass));
            summary.insert("slope".into(), json!(r.slope));
            let (lo, hi) = (cfg.tol("slope_min", 0.85), cfg.tol("slope_max", 1.15));
            let bounded = r.rows.iter().all(|row| row.estimate.mean <= row.bound);
            let slope_ok = r.rows.len() < 2 || (lo..=hi).contains(&r.slope);
            let rows = r
                .rows
                .iter()
                .map(|row| {
                    vec![
                        f(row.h),
                        row.estimate.samples.to_string(),
                        f(row.estimate.mean),
                        f(row.estimate.std_err),
                        f(row.ratio),
                        f(row.bound),
                    ]
                })
                .collect();
            (vec!["h", "samples", "mean", "std_err", "ratio", "bound"], rows, bounded && slope_ok)
        }
        "fubini-check" => {
            let n: usize = cfg.option("dim")?.unwrap_or(2);
            let kind: String = cfg.option("f")?.unwrap_or_else(|| "one".into());
            let func: Box<dyn Fn(&[f64]) -> f64 + Sync> = match kind.as_str() {
                "one" => Box::new(|_| 1.0),
                "ramp" => Box::new(|x| x[0]),
                other => return Err(Failure::Usage(format!("unknown integrand \"{other}\""))),
            };
            let js: Vec<usize> = match cfg.option::<usize>("j")? {
                Some(j) => vec![j],
                None => (0..=n).collect(),
            };
            let sig = cfg.tol("sigmas", 3.0);
            let region = BoxDomain::unit(n);
            let mut rows = Vec::new();
            let mut pass = true;
            for &h in &cfg.h_list {
                for &j in &js {
                    let r = skeleton_average_test(&*func, &region, j, h, cfg.samples, cfg.seed)?;
                    pass &= r.sigmas <= sig;
                    rows.push(vec![
                        j.to_string(),
                        f(r.h),
                        r.estimate.samples.to_string(),
                        f(r.estimate.mean),
                        f(r.estimate.std_err),
                        f(r.target),
                        f(r.rel_error),
                        f(r.sigmas),
                    ]);
                }
            }
            (vec!["j", "h", "samples", "mean", "std_err", "target", "rel_error", "sigmas"], rows, pass)
        }
        "sgrid-consistency" => {
            let u = Field::load(cfg.input(0)?)?;
            let truth = read_chain(Path::new(cfg.input(1)?))?;
            let family: Vec<(f64, usize)> = cfg.h_list.iter().map(|&h| (h, cfg.samples)).collect();
            let r = sgrid_consistency(&u, &truth, &family, cfg.seed)?;
            summary.insert("slope".into(), json!(r.slope));
            summary.insert("exact".into(), json!(r.exact()));
            if let Some(e) = &r.first_error {
                summary.insert("first_error".into(), json!(e));
            }
            let rows = r
                .rows
                .iter()
                .map(|row| {
                    vec![
                        f(row.h),
                        row.samples.to_string(),
                        row.matches.to_string(),
                        row.errors.to_string(),
                        f(row.estimate.mean),
                        f(row.estimate.std_err),
                        f(row.scale),
                    ]
                })
                .collect();
            (vec!["h", "samples", "matches", "errors", "mean", "std_err", "h_mass"], rows, r.exact())
        }
        "energy-bound" => {
            if cfg.inputs.is_empty() || cfg.inputs.len() % 2 != 0 {
                return Err(Failure::Usage("energy-bound needs field/truth pairs".into()));
            }
            let mut corpus = Vec::new();
            for pair in cfg.inputs.chunks(2) {
                corpus.push((Field::load(&pair[0])?, read_chain(Path::new(&pair[1]))?));
            }
            let h = *cfg.h_list.first().ok_or_else(|| missing("--h"))?;
            let r = energy_bound_test(&corpus, h, cfg.samples, cfg.seed)?;
            summary.insert("max_ratio".into(), json!(r.max_ratio));
            summary.insert("max_grid_ratio".into(), json!(r.max_grid_ratio));
            let rows = r
                .rows
                .iter()
                .map(|row| {
                    vec![
                        row.index.to_string(),
                        row.atoms.to_string(),
                        f(row.flat),
                        f(row.energy),
                        f(row.ratio),
                        f(row.grid_ratio),
                    ]
                })
                .collect();
            (
                vec!["index", "atoms", "flat", "energy", "ratio", "grid_ratio"],
                rows,
                r.max_ratio.is_finite(),
            )
        }
        "stability" => {
            let u = Field::load(cfg.input(0)?)?;
            let h = *cfg.h_list.first().ok_or_else(|| missing("--h"))?;
            let y: String = cfg.option("y")?.unwrap_or_else(|| "random".into());
            let eps: Vec<f64> = cfg.option("epsilons")?.unwrap_or_else(|| DEFAULT_EPSILONS.to_vec());
            let g = grid_from(&y, h, u.domain.clone(), cfg.seed)?;
            let r = stability_test(&u, &eps, &g, cfg.seed)?;
            summary.insert("threshold".into(), json!(r.threshold));
            summary.insert("y".into(), json!(g.y));
            let rows = r
                .rows
                .iter()
                .map(|row| vec![f(row.epsilon), row.same.to_string(), row.error.clone().unwrap_or_default()])
                .collect();
            (vec!["epsilon", "same", "error"], rows, r.threshold >= cfg.tol("epsilon", 1e-3))
        }
        "norm-estimate" => {
            let target: Target = cfg.option("target")?.ok_or_else(|| missing("--target"))?;
            let d: i64 = cfg.option("d")?.ok_or_else(|| missing("--d"))?;
            let levels: usize = cfg.option("levels")?.unwrap_or(5);
            let r = homotopy_norm_estimate(target, d, levels, cfg.seed);
            summary.insert("value".into(), json!(r.value));
            let reference = match target {
                Target::S1 => 2.0 * std::f64::consts::PI,
                Target::S2 => 8.0 * std::f64::consts::PI,
            } * d.unsigned_abs() as f64;
            summary.insert("reference".into(), json!(reference));
            let rel = match target {
                Target::S1 => cfg.tol("relative", 0.05),
                Target::S2 => cfg.tol("relative", 0.10),
            };
            let pass = r.value <= reference * (1.0 + rel) + 1e-12
                && (d.unsigned_abs() != 1 || r.value >= reference * (1.0 - rel));
            let rows = r.levels.iter().enumerate().map(|(k, v)| vec![k.to_string(), f(*v)]).collect();
            (vec!["level", "value"], rows, pass)
        }
        other => return Err(Failure::Usage(format!("unknown experiment \"{other}\""))),
    };
    Ok(Report { config: cfg.clone(), summary, columns, rows, pass })
}

/// `flat_norm(a - b, mode)` for chains on the same domain and group.
pub fn chain_diff(a: &Chain, b: &Chain, mode: Mode) -> Result<NormResult, Error> {
    if a.domain() != b.domain() {
        return Err(Error::DomainMismatch);
    }
    if a.group() != b.group() {
        return Err(Error::GroupMismatch);
    }
    Ok(flat_norm(&a.try_sub(b)?, mode))
}

fn read_chain(path: &Path) -> Result<Chain, Error> {
    Chain::from_json(&fs::read_to_string(path)?)
}

fn chain_json(c: &Chain, g: Option<&Grid>) -> Result<String, Error> {
    let mut file: ChainFile = c.to_file();
    file.grid = g.map(|g| GridStamp { h: g.h, y: g.y.clone() });
    Ok(serde_json::to_string_pretty(&file)?)
}

fn print_norm(r: &NormResult) -> Outcome {
    println!("{}", serde_json::to_string_pretty(r).map_err(Error::from)?);
    Ok(())
}

/// Writes through a temporary file in the same directory.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    with_temp(path, |tmp| Ok(fs::write(tmp, bytes)?))
}

fn with_temp(path: &Path, write: impl FnOnce(&Path) -> Result<(), Error>) -> Result<(), Error> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = write(&tmp).and_then(|()| Ok(fs::rename(&tmp, path)?));
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

fn parse_vec(s: &str, flag: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Usage(format!("{flag}: cannot parse \"{s}\" as a list of numbers")))
}

fn grid_from(y: &str, h: f64, domain: BoxDomain, seed: u64) -> Outcome<Grid> {
    if y == "random" {
        Ok(Grid::random(h, domain, &mut sample_rng(seed, 0, 0))?)
    } else {
        Ok(Grid::new(h, parse_vec(y, "--y")?, domain)?)
    }
}

fn generate(a: GenerateArgs) -> Outcome {
    let text = fs::read_to_string(&a.spec).map_err(Error::from)?;
    let (u, truth) = match a.kind {
        Kind::Vortex => vortex_field(&serde_json::from_str::<DefectSpec>(&text).map_err(Error::from)?, a.spacing)?,
        Kind::Hedgehog => {
            hedgehog_field(&serde_json::from_str::<DefectSpec>(&text).map_err(Error::from)?, a.spacing)?
        }
        Kind::Dipole => {
            dipole_cylinder_field(&serde_json::from_str::<DipoleSpec>(&text).map_err(Error::from)?, a.spacing)?
        }
    };
    with_temp(&a.out, |tmp| u.save(tmp))?;
    if let Some(t) = &a.truth {
        write_atomic(t, chain_json(&truth, None)?.as_bytes())?;
    }
    println!(
        "{}",
        json!({"shape": u.shape, "spacing": u.spacing, "atoms": truth.len()})
    );
    Ok(())
}

fn detect(a: DetectArgs) -> Outcome {
    let u = Field::load(&a.field)?;
    let truth = a.truth.as_deref().map(read_chain).transpose()?;
    let group = match &truth {
        Some(t) => *t.group(),
        None => GroupSpec::int(a.scale, 1.0)?,
    };
    let s = if a.y == "random" {
        random_detection(&u, a.h, truth.as_ref(), group, &mut sample_rng(a.seed, 0, 0))?
    } else {
        let g = Grid::new(a.h, parse_vec(&a.y, "--y")?, u.domain.clone())?;
        crate::field::extract_sgrid_with(&u, &g, u.target.sphere_dim(), group)?
    };
    let g = Grid::new(s.h, s.y.clone(), u.domain.clone())?;
    let text = chain_json(&s.chain, Some(&g))?;
    match &a.out {
        Some(p) => write_atomic(p, text.as_bytes())?,
        None => println!("{text}"),
    }
    Ok(())
}

fn energy(a: EnergyArgs) -> Outcome {
    let u = Field::load(&a.field)?;
    let region = match &a.region {
        None => u.domain.clone(),
        Some(r) => {
            let (lo, hi) = r
                .split_once(':')
                .ok_or_else(|| Failure::Usage(format!("--region: expected lo:hi, got \"{r}\"")))?;
            BoxDomain::new(parse_vec(lo, "--region")?, parse_vec(hi, "--region")?)?
        }
    };
    let e = dirichlet_energy(&u, a.p, &region)?;
    println!("{}", json!({"energy": e, "p": a.p}));
    Ok(())
}

fn deform_cmd(a: DeformArgs) -> Outcome {
    let s = read_chain(&a.chain)?;
    let (g, p) = if a.y == "random" {
        deform_random(&s, a.h, &mut sample_rng(a.seed, 0, 0))?
    } else {
        let g = Grid::new(a.h, parse_vec(&a.y, "--y")?, s.domain().clone())?;
        let p = deform(&s, &g)?;
        (g, p)
    };
    let text = chain_json(&p, Some(&g))?;
    match &a.out {
        Some(path) => write_atomic(path, text.as_bytes())?,
        None => println!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["flatchain", "frobnicate"]), 2);
        assert_eq!(run(["flatchain", "flatnorm", "--mode", "sideways", "--chain", "x.json"]), 2);
        assert_eq!(run(["flatchain", "deform-scaling", "--samples", "3"]), 2);
        assert_eq!(run(["flatchain", "--version"]), 0);
    }

    #[test]
    fn missing_file_is_a_domain_error() {
        assert_eq!(run(["flatchain", "flatnorm", "--mode", "flat", "--chain", "/nonexistent/c.json"]), 1);
    }

    #[test]
    fn config_round_trips_through_report() {
        let cfg = ExperimentConfig {
            experiment: "norm-estimate".into(),
            seed: 3,
            options: [("target".to_string(), json!("S1")), ("d".to_string(), json!(1)), ("levels".to_string(), json!(3))]
                .into_iter()
                .collect(),
            ..Default::default()
        };
        let r = run_experiment(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        fs::write(&path, r.to_csv().unwrap()).unwrap();
        let back = load_config(&path).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(run_experiment(&back).unwrap().to_csv().unwrap(), r.to_csv().unwrap());
    }
}
