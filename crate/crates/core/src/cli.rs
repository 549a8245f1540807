//! Experiment runner behind the `prs-lab` binary.
//!
//! Parameters come from an optional JSON config (`{"command": ..., "seed": ...,
//! "parameters": {...}}`) overridden by command-line flags. Every command
//! writes its artifacts under `--out-dir` and reports whether all of its
//! assertions held.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::boolfn::{function_space_size, BooleanFunction};
use crate::budget::Budget;
use crate::combinatorics::{census, lemma_suite, write_census_csv, Census};
use crate::condcheck::{check_cond1_prs, check_cond2, ConditionReport, ConditionWitness};
use crate::error::{Error, Result};
use crate::expand::{closed_form_construction1, construction1, evaluate};
use crate::moments::{
    compare_to_haar, ensemble_moment_bruteforce, ensemble_moment_deltapair, haar_distance, FunctionSpace, Method,
    MomentReport, MomentSpec, Source,
};
use crate::prsgen::PrsKind;

pub const CSV_SCHEMA_LINE: &str = "# schema=1";

/// Slack allowed when asserting that distances do not increase with `n`.
pub const MONOTONE_SLACK: f64 = 1e-10;

/// Tolerance for brute-force/delta-pairing agreement.
pub const METHOD_TOL: f64 = 1e-12;

#[derive(Debug, Parser)]
#[command(name = "prs-lab", version, about = "Exact moment, counting and condition checks for phase PRS ensembles")]
pub struct Cli {
    /// Seed for every sampled function space.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Memory budget in MiB (default: $PRS_LAB_BUDGET_MIB or 2048).
    #[arg(long, global = true)]
    pub budget_mib: Option<u64>,
    #[arg(long, global = true)]
    pub out_dir: Option<PathBuf>,
    /// JSON config; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Zero `runtime_ms` so outputs are byte-comparable.
    #[arg(long, global = true)]
    pub canonical: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// t-copy moment of one ensemble and its Haar distance.
    Moments(MomentsArgs),
    /// Construction-1 circuit against its closed form.
    ExpandCheck(ExpandArgs),
    /// Distinct-tuple and set-state counting checks.
    Lemmas(LemmaArgs),
    /// Exhaustive Dist/Good census.
    GoodCensus(CensusArgs),
    /// Generalization condition for a shipped witness.
    Condition(ConditionArgs),
    /// Moment distances over a parameter grid.
    Sweep(SweepArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Moments(_) => "moments",
            Command::ExpandCheck(_) => "expand-check",
            Command::Lemmas(_) => "lemmas",
            Command::GoodCensus(_) => "good-census",
            Command::Condition(_) => "condition",
            Command::Sweep(_) => "sweep",
        }
    }
}

#[derive(Debug, Args)]
pub struct MomentsArgs {
    #[arg(long)]
    pub source: Option<Source>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Added qubits (construction 1) or number of blocks (construction 3).
    #[arg(long)]
    pub i: Option<usize>,
    #[arg(long)]
    pub t: Option<usize>,
    #[arg(long)]
    pub kind: Option<PrsKind>,
    /// exhaustive | prf | uniform
    #[arg(long)]
    pub space: Option<String>,
    /// Sample count for prf/uniform spaces.
    #[arg(long)]
    pub count: Option<u64>,
    /// brute_force | delta_pairing | monte_carlo | both | auto
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub no_final_layer: bool,
    #[arg(long)]
    pub key_reuse: bool,
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub i: Option<usize>,
    /// Check this many uniformly sampled functions instead of all of them.
    #[arg(long)]
    pub samples: Option<u64>,
}

#[derive(Debug, Args)]
pub struct LemmaArgs {
    #[arg(long)]
    pub max_n: Option<usize>,
    #[arg(long)]
    pub max_t: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CensusArgs {
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub i: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub t: Option<Vec<usize>>,
}

#[derive(Debug, Args)]
pub struct ConditionArgs {
    /// binary | general
    #[arg(long)]
    pub witness: Option<PrsKind>,
    #[arg(long)]
    pub n: Option<usize>,
    /// Sampled functions for cond-1 (default: all binary functions, 64 general).
    #[arg(long)]
    pub samples: Option<u64>,
    /// Override the witness's cond-2 scale.
    #[arg(long)]
    pub scale: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub source: Option<Vec<Source>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub kind: Option<Vec<PrsKind>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub n: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub i: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub t: Option<Vec<usize>>,
    #[arg(long)]
    pub space: Option<String>,
    #[arg(long)]
    pub count: Option<u64>,
    #[arg(long)]
    pub method: Option<String>,
    #[arg(long)]
    pub no_final_layer: bool,
    /// Skip the non-increasing-in-n assertion.
    #[arg(long)]
    pub no_monotone_check: bool,
}

/// Contents of a `--config` file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub budget_mib: Option<u64>,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub canonical: Option<bool>,
    #[serde(default)]
    pub parameters: Map<String, Value>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Flag-over-config lookup for one command's parameters.
struct Params {
    map: Map<String, Value>,
}

impl Params {
    fn new(map: Map<String, Value>, allowed: &[&str], command: &str) -> Result<Self> {
        if let Some(k) = map.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::Config(format!(
                "unknown parameter {k:?} for {command} (expected one of {})",
                allowed.join(", ")
            )));
        }
        Ok(Params { map })
    }

    fn get<T: DeserializeOwned>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.map
            .get(key)
            .map(|v| serde_json::from_value(v.clone()).map_err(|e| Error::Config(format!("parameter {key}: {e}"))))
            .transpose()
    }

    fn parsed<T: FromStr<Err = Error>>(&self, key: &str, flag: Option<T>) -> Result<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get::<String>(key, None)?.map(|s| s.parse()).transpose()
    }

    fn parsed_list<T: FromStr<Err = Error>>(&self, key: &str, flag: Option<Vec<T>>) -> Result<Option<Vec<T>>> {
        if flag.is_some() {
            return Ok(flag);
        }
        self.get::<Vec<String>>(key, None)?
            .map(|v| v.iter().map(|s| s.parse()).collect())
            .transpose()
    }

    fn flag(&self, key: &str, flag: bool) -> Result<bool> {
        Ok(flag || self.get::<bool>(key, None)?.unwrap_or(false))
    }
}

fn required<T>(v: Option<T>, key: &str) -> Result<T> {
    v.ok_or_else(|| Error::Config(format!("missing parameter {key}")))
}

/// Settings shared by all commands after merging config and flags.
#[derive(Clone, Debug)]
pub struct Context {
    pub seed: Option<u64>,
    pub budget: Budget,
    pub out_dir: PathBuf,
    pub canonical: bool,
}

impl Context {
    fn runtime(&self, ms: u64) -> u64 {
        if self.canonical {
            0
        } else {
            ms
        }
    }

    fn seed_for(&self, space: &str) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::Config(format!("a seed is required for the {space} function space")))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

/// What a command produced.
#[derive(Clone, Debug, Default)]
pub struct Outcome {
    pub passed: bool,
    pub artifacts: Vec<PathBuf>,
    pub messages: Vec<String>,
}

impl Outcome {
    fn new(passed: bool) -> Self {
        Outcome {
            passed,
            ..Default::default()
        }
    }
}

/// `|x| < 1e-3` (nonzero) in scientific notation, otherwise shortest decimal.
pub fn format_number(x: f64) -> String {
    if x != 0.0 && x.abs() < 1e-3 {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

fn parse_space(name: &str, count: Option<u64>, ctx: &Context) -> Result<FunctionSpace> {
    let need_count = || required(count, "count");
    Ok(match name {
        "exhaustive" => FunctionSpace::Exhaustive,
        "prf" | "prf_keys" => FunctionSpace::PrfKeys { count: need_count()?, seed: ctx.seed_for(name)? },
        "uniform" | "uniform_sample" => FunctionSpace::UniformSample { count: need_count()?, seed: ctx.seed_for(name)? },
        _ => return Err(Error::Config(format!("unknown function space {name:?} (exhaustive|prf|uniform)"))),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum MethodChoice {
    One(Method),
    Both,
    Auto,
}

impl FromStr for MethodChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "both" => Ok(MethodChoice::Both),
            "auto" => Ok(MethodChoice::Auto),
            _ => s.parse().map(MethodChoice::One),
        }
    }
}

fn delta_supported(spec: &MomentSpec) -> bool {
    spec.kind == PrsKind::BinaryPhase
        && matches!(spec.source, Source::PlainPrs | Source::Construction1)
        && spec.function_space == FunctionSpace::Exhaustive
}

/// One computed grid point (or single `moments` run).
#[derive(Clone, Debug)]
struct Row {
    spec: MomentSpec,
    method: String,
    haar_distance: f64,
    runtime_ms: u64,
    method_diff: Option<f64>,
    reports: Vec<MomentReport>,
}

fn run_point(spec: &MomentSpec, choice: MethodChoice, ctx: &Context) -> Result<Row> {
    let row = |r: MomentReport, method: String, diff| Row {
        spec: spec.clone(),
        method,
        haar_distance: r.haar_distance,
        runtime_ms: ctx.runtime(r.runtime_ms),
        method_diff: diff,
        reports: vec![r],
    };
    match choice {
        MethodChoice::One(m) => {
            let r = compare_to_haar(spec, m, &ctx.budget)?;
            Ok(row(r, m.name().to_string(), None))
        }
        MethodChoice::Auto => {
            let m = if delta_supported(spec) {
                Method::DeltaPairing
            } else if spec.function_space == FunctionSpace::Exhaustive {
                Method::BruteForce
            } else {
                Method::MonteCarlo
            };
            run_point(spec, MethodChoice::One(m), ctx)
        }
        MethodChoice::Both => {
            let start = std::time::Instant::now();
            let brute = ensemble_moment_bruteforce(spec, &ctx.budget)?;
            let delta = ensemble_moment_deltapair(spec, &ctx.budget)?;
            let diff = brute.max_abs_diff(&delta)?;
            let d = haar_distance(&delta, spec.local_dim()?, spec.t, &ctx.budget)?;
            let report = MomentReport {
                spec: spec.clone(),
                method: Method::DeltaPairing,
                moment: delta,
                haar_distance: d,
                runtime_ms: start.elapsed().as_millis() as u64,
                seed: spec.seed(),
            };
            Ok(row(report, "both".into(), Some(diff)))
        }
    }
}

fn write_rows(path: &Path, rows: &[Row], with_diff: bool) -> Result<()> {
    let mut file = fs::File::create(path)?;
    writeln!(file, "{CSV_SCHEMA_LINE}")?;
    let mut w = csv::Writer::from_writer(file);
    let mut header = vec![
        "source", "kind", "n", "i", "t", "method", "seed", "haar_distance", "runtime_ms", "space",
    ];
    if with_diff {
        header.push("method_max_abs_diff");
    }
    w.write_record(&header)?;
    for r in rows {
        let s = &r.spec;
        let mut rec = vec![
            s.source.name().to_string(),
            s.kind.name().to_string(),
            s.n.to_string(),
            s.i.to_string(),
            s.t.to_string(),
            r.method.clone(),
            s.seed().to_string(),
            format_number(r.haar_distance),
            r.runtime_ms.to_string(),
            s.function_space.name().to_string(),
        ];
        if with_diff {
            rec.push(r.method_diff.map(format_number).unwrap_or_default());
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn moments(args: MomentsArgs, p: &Params, ctx: &Context) -> Result<Outcome> {
    let source = required(p.parsed("source", args.source)?, "source")?;
    let n = required(p.get("n", args.n)?, "n")?;
    let i = p.get("i", args.i)?.unwrap_or(0);
    let t = required(p.get("t", args.t)?, "t")?;
    let kind = p.parsed("kind", args.kind)?.unwrap_or(PrsKind::BinaryPhase);
    let space_name = p.get("space", args.space)?.unwrap_or_else(|| "exhaustive".to_string());
    let space = parse_space(&space_name, p.get("count", args.count)?, ctx)?;
    let choice: MethodChoice = p.parsed("method", args.method.map(|m| m.parse()).transpose()?)?.unwrap_or(MethodChoice::Auto);
    let mut spec = MomentSpec::new(source, n, i, t, kind, space);
    spec.final_layer = !p.flag("no_final_layer", args.no_final_layer)?;
    spec.key_reuse = p.flag("key_reuse", args.key_reuse)?;

    let row = run_point(&spec, choice, ctx)?;
    let passed = row.method_diff.is_none_or(|d| d <= METHOD_TOL);
    let mut out = Outcome::new(passed);
    let csv_path = ctx.path("moments.csv");
    write_rows(&csv_path, std::slice::from_ref(&row), row.method_diff.is_some())?;
    let json_path = ctx.path("moments.json");
    let mut report = row.reports[0].clone();
    report.runtime_ms = ctx.runtime(report.runtime_ms);
    let mut text = report.to_json(false)?;
    text.push('\n');
    fs::write(&json_path, text)?;
    out.messages.push(format!(
        "{} n={n} i={i} t={t} {}: haar_distance={}",
        source.name(),
        row.method,
        format_number(row.haar_distance)
    ));
    if let Some(d) = row.method_diff {
        out.messages.push(format!("method max |diff| = {}", format_number(d)));
    }
    out.artifacts = vec![csv_path, json_path];
    Ok(out)
}

#[derive(Serialize)]
struct ExpandReport {
    n: usize,
    i: usize,
    functions_checked: u64,
    max_deviation: f64,
    max_norm_error: f64,
    tolerance: f64,
    passed: bool,
}

fn expand_check(args: ExpandArgs, p: &Params, ctx: &Context) -> Result<Outcome> {
    let n = required(p.get("n", args.n)?, "n")?;
    let i = required(p.get("i", args.i)?, "i")?;
    let samples: Option<u64> = p.get("samples", args.samples)?;
    let functions: Vec<BooleanFunction> = match samples {
        Some(count) => {
            let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed_for("uniform")?);
            (0..count).map(|_| BooleanFunction::sample_uniform(n, 2, &mut rng)).collect::<Result<_>>()?
        }
        None => {
            ctx.budget.check_count("functions to check", function_space_size(n, 2))?;
            crate::boolfn::enumerate_all(n, 2, &ctx.budget)?.collect()
        }
    };
    let (mut max_dev, mut max_norm) = (0.0f64, 0.0f64);
    for f in &functions {
        let spec = construction1(f.clone(), n, i, PrsKind::BinaryPhase, true)?;
        let circuit = evaluate(&spec, &ctx.budget)?;
        let closed = closed_form_construction1(f, n, i, true, &ctx.budget)?;
        max_dev = max_dev.max(circuit.max_abs_diff(&closed)?);
        max_norm = max_norm.max((closed.norm_sqr() - 1.0).abs());
    }
    let tolerance = 1e-12;
    let report = ExpandReport {
        n,
        i,
        functions_checked: functions.len() as u64,
        max_deviation: max_dev,
        max_norm_error: max_norm,
        tolerance,
        passed: max_dev <= tolerance && max_norm <= tolerance,
    };
    let path = ctx.path("expand_check.json");
    write_json(&path, &report)?;
    let mut out = Outcome::new(report.passed);
    out.messages.push(format!(
        "{} functions, max amplitude deviation {}",
        report.functions_checked,
        format_number(max_dev)
    ));
    out.artifacts.push(path);
    Ok(out)
}

fn lemmas(args: LemmaArgs, p: &Params, ctx: &Context) -> Result<Outcome> {
    let max_n = p.get("max_n", args.max_n)?.unwrap_or(8);
    let max_t = p.get("max_t", args.max_t)?.unwrap_or(5);
    let report = lemma_suite(max_n, max_t)?;
    let path = ctx.path("lemmas.json");
    write_json(&path, &report)?;
    let mut out = Outcome::new(report.passed());
    out.messages.push(format!(
        "{} distinct-count cases, {} set-state cases ({} dense), {} failures",
        report.dist_cases,
        report.perm_cases,
        report.dense_checks,
        report.dist_failures.len() + report.perm_failures.len()
    ));
    out.artifacts.push(path);
    Ok(out)
}

/// Assertions on one census row; returns the violated ones.
pub fn census_violations(c: &Census) -> Vec<String> {
    use num_bigint::BigInt;
    use num_rational::BigRational;
    let mut v = Vec::new();
    let tag = format!("n={} i={} t={}", c.n, c.i, c.t);
    if c.dist_members != c.dist_expected {
        v.push(format!("{tag}: Dist count {} != {}", c.dist_members, c.dist_expected));
    }
    if c.good_members != c.good_direct {
        v.push(format!("{tag}: Good count {} != direct scan {}", c.good_members, c.good_direct));
    }
    if num_bigint::BigUint::from(c.g_members) != c.g_expected {
        v.push(format!("{tag}: |G^t| {} != {}", c.g_members, c.g_expected));
    }
    if BigRational::from_integer(BigInt::from(c.good_members)) < c.good_bound {
        v.push(format!("{tag}: Good count {} below bound {}", c.good_members, c.good_bound));
    }
    if c.non_good_rejected != c.non_good_total {
        v.push(format!("{tag}: {} non-Good inputs accepted", c.non_good_total - c.non_good_rejected));
    }
    if c.round_trip_ok != c.good_members {
        v.push(format!(
            "{tag}: recombination round trip fails for {} of {} Good members ({} ambiguous)",
            c.good_members - c.round_trip_ok,
            c.good_members,
            c.ambiguous
        ));
    }
    v
}

fn good_census(args: CensusArgs, p: &Params, ctx: &Context) -> Result<Outcome> {
    let ns: Vec<usize> = required(p.get("n", args.n)?, "n")?;
    let is: Vec<usize> = p.get("i", args.i)?.unwrap_or_else(|| vec![1]);
    let ts: Vec<usize> = p.get("t", args.t)?.unwrap_or_else(|| vec![2]);
    let mut rows = Vec::new();
    for &n in &ns {
        for &i in &is {
            for &t in &ts {
                rows.push(census(n, i, t, &ctx.budget)?);
            }
        }
    }
    let path = ctx.path("good_census.csv");
    let mut file = fs::File::create(&path)?;
    writeln!(file, "{CSV_SCHEMA_LINE}")?;
    write_census_csv(&rows, file)?;
    let violations: Vec<String> = rows.iter().flat_map(census_violations).collect();
    let mut out = Outcome::new(violations.is_empty());
    out.messages = violations;
    out.artifacts.push(path);
    Ok(out)
}

#[derive(Serialize)]
struct ConditionOutput {
    witness: PrsKind,
    cond1: ConditionReport,
    cond2: ConditionReport,
}

fn condition(args: ConditionArgs, p: &Params, ctx: &Context) -> Result<Outcome> {
    let kind = p.parsed("witness", args.witness)?.unwrap_or(PrsKind::BinaryPhase);
    let n = required(p.get("n", args.n)?, "n")?;
    let samples: Option<u64> = p.get("samples", args.samples)?;
    let mut witness = ConditionWitness::for_kind(kind, n)?;
    if let Some(s) = p.get("scale", args.scale)? {
        witness.scale = s;
    }
    let space = match (kind, samples) {
        (_, Some(count)) => FunctionSpace::UniformSample { count, seed: ctx.seed_for("uniform")? },
        (PrsKind::BinaryPhase, None) => FunctionSpace::Exhaustive,
        (PrsKind::GeneralPhase, None) => FunctionSpace::UniformSample { count: 64, seed: ctx.seed_for("uniform")? },
    };
    let cond1 = check_cond1_prs(kind, n, space, &witness, &ctx.budget)?;
    let cond2 = check_cond2(&witness, n)?;
    let mut out = Outcome::new(cond1.passed && cond2.passed);
    out.messages.push(format!(
        "cond-1 {} ({} checks), cond-2 {} (scale {})",
        if cond1.passed { "pass" } else { "FAIL" },
        cond1.checked,
        if cond2.passed { "pass" } else { "FAIL" },
        witness.scale
    ));
    let path = ctx.path("condition.json");
    write_json(&path, &ConditionOutput { witness: kind, cond1, cond2 })?;
    out.artifacts.push(path);
    Ok(out)
}

#[derive(Serialize)]
struct PointId {
    source: Source,
    kind: PrsKind,
    n: usize,
    i: usize,
    t: usize,
}

#[derive(Serialize)]
struct PointFailure {
    point: PointId,
    error: String,
}

#[derive(Serialize)]
struct FailureManifest {
    failed_points: Vec<PointFailure>,
    assertion_failures: Vec<String>,
}

fn point_id(s: &MomentSpec) -> PointId {
    PointId {
        source: s.source,
        kind: s.kind,
        n: s.n,
        i: s.i,
        t: s.t,
    }
}

/// Grid points run one at a time (each already reduces in parallel), rows
/// sorted by `(source, kind, n, i, t)`.
fn sweep(args: SweepArgs, p: &Params, ctx: &Context) -> Result<Outcome> {
    let sources = p.parsed_list("source", args.source)?.unwrap_or_else(|| vec![Source::Construction1]);
    let kinds = p.parsed_list("kind", args.kind)?.unwrap_or_else(|| vec![PrsKind::BinaryPhase]);
    let ns: Vec<usize> = required(p.get("n", args.n)?, "n")?;
    let is: Vec<usize> = p.get("i", args.i)?.unwrap_or_else(|| vec![1]);
    let ts: Vec<usize> = p.get("t", args.t)?.unwrap_or_else(|| vec![2]);
    let space_name = p.get("space", args.space)?.unwrap_or_else(|| "exhaustive".to_string());
    let space = parse_space(&space_name, p.get("count", args.count)?, ctx)?;
    let choice: MethodChoice = p.parsed("method", args.method.map(|m| m.parse()).transpose()?)?.unwrap_or(MethodChoice::Auto);
    let final_layer = !p.flag("no_final_layer", args.no_final_layer)?;
    let monotone = !p.flag("no_monotone_check", args.no_monotone_check)?;

    let mut specs = Vec::new();
    for &source in &sources {
        for &kind in &kinds {
            for &n in &ns {
                for &i in &is {
                    for &t in &ts {
                        let mut s = MomentSpec::new(source, n, i, t, kind, space);
                        s.final_layer = final_layer;
                        specs.push(s);
                    }
                }
            }
        }
    }
    specs.sort_by_key(|s| (s.source, s.kind, s.n, s.i, s.t));
    specs.dedup();

    let mut rows = Vec::new();
    let mut failed_points = Vec::new();
    for s in &specs {
        match run_point(s, choice, ctx) {
            Ok(r) => rows.push(r),
            Err(e) => failed_points.push(PointFailure { point: point_id(s), error: e.to_string() }),
        }
    }

    let mut assertion_failures = Vec::new();
    for r in &rows {
        if let Some(d) = r.method_diff.filter(|&d| d > METHOD_TOL) {
            assertion_failures.push(format!(
                "{} n={} i={} t={}: methods differ by {}",
                r.spec.source.name(),
                r.spec.n,
                r.spec.i,
                r.spec.t,
                format_number(d)
            ));
        }
    }
    if monotone {
        for pair in rows.windows(2) {
            let (a, b) = (&pair[0].spec, &pair[1].spec);
            let same_family = a.source == b.source && a.kind == b.kind && a.t == b.t;
            if same_family && a.i == b.i && b.n > a.n && pair[1].haar_distance > pair[0].haar_distance + MONOTONE_SLACK {
                assertion_failures.push(format!(
                    "{} i={} t={}: distance rises from {} at n={} to {} at n={}",
                    a.source.name(),
                    a.i,
                    a.t,
                    format_number(pair[0].haar_distance),
                    a.n,
                    format_number(pair[1].haar_distance),
                    b.n
                ));
            }
        }
    }

    let path = ctx.path("sweep.csv");
    write_rows(&path, &rows, choice == MethodChoice::Both)?;
    let mut out = Outcome::new(failed_points.is_empty() && assertion_failures.is_empty());
    out.artifacts.push(path);
    out.messages.push(format!("{} of {} grid points completed", rows.len(), specs.len()));
    if !out.passed {
        let manifest = ctx.path("sweep_failures.json");
        out.messages.extend(failed_points.iter().map(|f| format!("failed point: {}", f.error)));
        out.messages.extend(assertion_failures.iter().cloned());
        write_json(&manifest, &FailureManifest { failed_points, assertion_failures })?;
        out.artifacts.push(manifest);
    }
    Ok(out)
}

const MOMENT_KEYS: &[&str] = &["source", "n", "i", "t", "kind", "space", "count", "method", "no_final_layer", "key_reuse"];
const EXPAND_KEYS: &[&str] = &["n", "i", "samples"];
const LEMMA_KEYS: &[&str] = &["max_n", "max_t"];
const CENSUS_KEYS: &[&str] = &["n", "i", "t"];
const CONDITION_KEYS: &[&str] = &["witness", "n", "samples", "scale"];
const SWEEP_KEYS: &[&str] = &[
    "source", "kind", "n", "i", "t", "space", "count", "method", "no_final_layer", "no_monotone_check",
];

/// Merges config and flags, runs the command, and returns its outcome.
pub fn run(cli: Cli) -> Result<Outcome> {
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let name = cli.command.name();
    if let Some(c) = config.command.as_deref().filter(|c| *c != name) {
        return Err(Error::Config(format!("config is for {c:?} but {name:?} was requested")));
    }
    let budget = match cli.budget_mib.or(config.budget_mib) {
        Some(mib) => Budget::from_mib(mib),
        None => Budget::from_env()?,
    };
    let ctx = Context {
        seed: cli.seed.or(config.seed),
        budget,
        out_dir: cli.out_dir.or(config.out_dir).unwrap_or_else(|| PathBuf::from(".")),
        canonical: cli.canonical || config.canonical.unwrap_or(false),
    };
    fs::create_dir_all(&ctx.out_dir)?;
    let params = config.parameters;
    match cli.command {
        Command::Moments(a) => moments(a, &Params::new(params, MOMENT_KEYS, name)?, &ctx),
        Command::ExpandCheck(a) => expand_check(a, &Params::new(params, EXPAND_KEYS, name)?, &ctx),
        Command::Lemmas(a) => lemmas(a, &Params::new(params, LEMMA_KEYS, name)?, &ctx),
        Command::GoodCensus(a) => good_census(a, &Params::new(params, CENSUS_KEYS, name)?, &ctx),
        Command::Condition(a) => condition(a, &Params::new(params, CONDITION_KEYS, name)?, &ctx),
        Command::Sweep(a) => sweep(a, &Params::new(params, SWEEP_KEYS, name)?, &ctx),
    }
}
