//! Command-line front end.
//!
//! Exit status: 0 on success or a satisfied verdict, 1 when a violation or
//! witness was found, 2 on usage and input errors.

use std::ffi::OsString;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::conditions::{certify, ConditionKind, Scope};
use crate::enumerator::{fixed_point_census, implication_audit, random_finite_metric};
use crate::error::{Error, Result};
use crate::gallery::{GalleryBuild, GalleryName};
use crate::map::SelfMap;
use crate::orbit::{
    cauchy_estimate, fixed_point_of, iterate, psi_curve, sequential_diagnostic, write_csv,
    DiagnosticThresholds, OrbitTrace,
};
use crate::scalar::{format_rational, Policy, Scalar};
use crate::space::{verify_metric_axioms, MetricSpace, Point};

#[derive(Parser, Debug)]
#[command(name = "fixlab", version, about = "Fixed-point conditions on metric spaces")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check a contractive condition over pairs of points
    Certify(CertifyArgs),
    /// Iterate a map and run the sequential diagnostic on the orbit
    Orbit(OrbitArgs),
    /// Rebuild a named gallery construction and report its checks
    Gallery(GalleryArgs),
    /// Count fixed points over every self-map of a small space
    Census(CensusArgs),
    /// Empirical psi curve and Cauchy estimate along an orbit
    Probe(ProbeArgs),
}

#[derive(Args, Debug, Clone)]
pub struct SpaceArgs {
    /// Space file (JSON: label, points, matrix of rational strings)
    #[arg(long, conflicts_with = "gallery", required_unless_present = "gallery")]
    pub space: Option<PathBuf>,

    /// Gallery construction, e.g. "suzuki(eta=3/5,N=40)"
    #[arg(long)]
    pub gallery: Option<String>,

    /// Map table ("1,0,2" by point id or index), "identity" or "constant:k";
    /// defaults to the gallery map
    #[arg(long)]
    pub map: Option<String>,

    #[arg(long, value_enum, default_value_t = Backend::Exact)]
    pub backend: Backend,

    /// Comparison tolerance for the float backend
    #[arg(long, required_if_eq("backend", "float"))]
    pub eps: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Backend {
    Exact,
    Float,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ScopeArg {
    Exhaustive,
    Sampled,
}

#[derive(Args, Debug)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub input: SpaceArgs,

    /// Condition, e.g. "eta_nonstrict(3/5)" or "contractive"
    #[arg(long)]
    pub condition: String,

    #[arg(long, value_enum, default_value_t = ScopeArg::Exhaustive)]
    pub scope: ScopeArg,

    #[arg(long, required_if_eq("scope", "sampled"))]
    pub seed: Option<u64>,

    /// Number of sampled pairs
    #[arg(long, default_value_t = 10_000)]
    pub pairs: usize,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct OrbitOpts {
    /// Start point: a point id, or a coordinate on line carriers
    #[arg(long)]
    pub from: String,

    #[arg(long, default_value_t = 100)]
    pub steps: usize,
}

#[derive(Args, Debug)]
pub struct OrbitArgs {
    #[command(flatten)]
    pub input: SpaceArgs,

    #[command(flatten)]
    pub orbit: OrbitOpts,

    /// Closeness of the image ratio to 1
    #[arg(long, default_value = "1/100")]
    pub eps_ratio: Scalar,

    /// Smallest gap considered
    #[arg(long, default_value = "1/100")]
    pub eps_gap: Scalar,

    #[arg(long, default_value_t = crate::orbit::DEFAULT_HORIZON)]
    pub horizon: usize,

    /// Witnesses kept in the report
    #[arg(long, default_value_t = crate::orbit::DEFAULT_MAX_WITNESSES)]
    pub max_witnesses: usize,

    #[arg(long)]
    pub csv: Option<PathBuf>,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct GalleryArgs {
    /// Construction name, e.g. "dyadic_probe(B=64)"
    pub name: String,

    /// Pairs sampled on lazy carriers
    #[arg(long, default_value_t = 10_000)]
    pub pairs: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CensusArgs {
    /// Space file with at most five points
    #[arg(long, conflicts_with = "random", required_unless_present = "random")]
    pub space: Option<PathBuf>,

    /// Size of a random shortest-path metric
    #[arg(long, requires = "seed")]
    pub random: Option<usize>,

    #[arg(long)]
    pub seed: Option<u64>,

    #[arg(long, required_unless_present = "audit")]
    pub condition: Option<String>,

    /// Check certification along the implication chain instead
    #[arg(long)]
    pub audit: bool,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ProbeArgs {
    #[command(flatten)]
    pub input: SpaceArgs,

    #[command(flatten)]
    pub orbit: OrbitOpts,

    /// Comma-separated values of s
    #[arg(long, default_value = "0,1/16,1/8,1/4,1/2,1")]
    pub grid: String,

    #[arg(long, default_value_t = crate::orbit::DEFAULT_HORIZON)]
    pub horizon: usize,

    /// Points in the tail used by the Cauchy estimate
    #[arg(long, default_value_t = 10)]
    pub tail: usize,

    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Outcome of a successful run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    Found,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Success => 0,
            Outcome::Found => 1,
        }
    }
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(outcome) => outcome.code(),
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

pub fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Certify(a) => run_certify(a),
        Command::Orbit(a) => run_orbit(a),
        Command::Gallery(a) => run_gallery(a),
        Command::Census(a) => run_census(a),
        Command::Probe(a) => run_probe(a),
    }
}

struct Loaded {
    space: MetricSpace,
    map: SelfMap,
    policy: Policy,
}

fn load_space_file(path: &Path) -> Result<MetricSpace> {
    let space = MetricSpace::load(path)?;
    let report = verify_metric_axioms(&space, &space.points().expect("file spaces are finite"))?;
    if let Some(v) = report.violations.first() {
        let names: Vec<String> = v.witness.iter().map(|p| space.point_label(p)).collect();
        return Err(Error::Domain(format!(
            "{} is not a metric: {:?} fails at ({}): {} vs {}",
            path.display(),
            v.axiom,
            names.join(", "),
            v.lhs,
            v.rhs
        )));
    }
    Ok(space)
}

fn parse_map(text: &str, space: &MetricSpace) -> Result<SelfMap> {
    let n = space
        .len()
        .ok_or_else(|| Error::Parse("explicit map tables need a finite space".into()))?;
    let text = text.trim();
    if text == "identity" {
        return Ok(SelfMap::identity(n));
    }
    if let Some(k) = text.strip_prefix("constant:") {
        let Point::Id(i) = resolve_id(k, space, n)? else { unreachable!() };
        return Ok(SelfMap::constant(n, i));
    }
    let targets = text
        .split(',')
        .map(|t| match resolve_id(t, space, n)? {
            Point::Id(i) => Ok(i),
            Point::At(_) => unreachable!(),
        })
        .collect::<Result<Vec<usize>>>()?;
    let map = SelfMap::table(text, targets);
    map.check_against(space)?;
    Ok(map)
}

/// A point id, else a zero-based index.
fn resolve_id(text: &str, space: &MetricSpace, n: usize) -> Result<Point> {
    let text = text.trim();
    if let Some(i) = space.ids().and_then(|ids| ids.iter().position(|id| id == text)) {
        return Ok(Point::Id(i));
    }
    match text.parse::<usize>() {
        Ok(i) if i < n => Ok(Point::Id(i)),
        _ => Err(Error::Parse(format!("unknown map target {text:?}"))),
    }
}

fn load(args: &SpaceArgs) -> Result<(Loaded, Option<GalleryBuild>)> {
    let (space, default_map, build) = match (&args.space, &args.gallery) {
        (Some(path), _) => (load_space_file(path)?, None, None),
        (None, Some(name)) => {
            let build = GalleryName::parse(name)?.build()?;
            (build.space.clone(), Some(build.map.clone()), Some(build))
        }
        (None, None) => return Err(Error::Parse("one of --space or --gallery is required".into())),
    };
    let map = match (&args.map, default_map) {
        (Some(text), _) => parse_map(text, &space)?,
        (None, Some(m)) => m,
        (None, None) => return Err(Error::Parse("--map is required with --space".into())),
    };
    let (space, policy) = match args.backend {
        Backend::Exact => (space, Policy::Exact),
        Backend::Float => {
            let eps = args
                .eps
                .ok_or_else(|| Error::Parse("--backend float needs --eps".into()))?;
            let policy = Policy::epsilon(eps)?;
            (space.to_float_backend(policy), policy)
        }
    };
    Ok((Loaded { space, map, policy }, build))
}

fn start_point(loaded: &Loaded, text: &str) -> Result<Point> {
    Ok(match loaded.space.find_point(text)? {
        Point::At(v) if loaded.policy != Policy::Exact => Point::At(v.to_float(loaded.policy)),
        p => p,
    })
}

fn emit<T: Serialize>(report: &T, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    println!("{text}");
    if let Some(path) = out {
        std::fs::write(path, format!("{text}\n"))?;
    }
    Ok(())
}

fn verdict_outcome(found: bool) -> Outcome {
    if found {
        Outcome::Found
    } else {
        Outcome::Success
    }
}

fn run_certify(a: &CertifyArgs) -> Result<Outcome> {
    let (loaded, _) = load(&a.input)?;
    let condition = ConditionKind::parse(&a.condition)?;
    let scope = match a.scope {
        ScopeArg::Exhaustive => Scope::Exhaustive,
        ScopeArg::Sampled => Scope::Sampled {
            seed: a.seed.ok_or_else(|| Error::Parse("--scope sampled needs --seed".into()))?,
            count: a.pairs,
        },
    };
    let cert = certify(&loaded.space, &loaded.map, &condition, &scope)?;
    let report = json!({
        "space": loaded.space.label(),
        "map": loaded.map.label(),
        "certificate": cert.report(&loaded.space),
    });
    emit(&report, a.out.as_deref())?;
    Ok(verdict_outcome(!cert.satisfied()))
}

fn trace_json(space: &MetricSpace, trace: &OrbitTrace) -> Value {
    let points: Vec<String> = trace.points().iter().map(|p| space.point_label(p)).collect();
    let deltas: Vec<String> = trace.deltas().iter().map(|d| d.to_string()).collect();
    json!({
        "points": points,
        "deltas": deltas,
        "termination": trace.termination(),
        "fixed_point": fixed_point_of(trace).map(|(p, _)| space.point_label(&p)),
    })
}

fn run_orbit(a: &OrbitArgs) -> Result<Outcome> {
    let (loaded, _) = load(&a.input)?;
    let x0 = start_point(&loaded, &a.orbit.from)?;
    let trace = iterate(&loaded.space, &loaded.map, x0, a.orbit.steps)?;
    if let Some(path) = &a.csv {
        write_csv(&loaded.space, &trace, BufWriter::new(File::create(path)?))?;
    }
    let thresholds = DiagnosticThresholds {
        max_witnesses: a.max_witnesses,
        ..DiagnosticThresholds::new(a.eps_ratio.clone(), a.eps_gap.clone(), a.horizon)?
    };
    let diagnostic = if trace.deltas().len() >= 2 {
        Some(sequential_diagnostic(&loaded.space, &loaded.map, &trace, &thresholds)?)
    } else {
        None
    };
    let found = diagnostic.as_ref().is_some_and(|d| !d.is_empty());
    let report = json!({
        "space": loaded.space.label(),
        "map": loaded.map.label(),
        "orbit": trace_json(&loaded.space, &trace),
        "thresholds": {
            "eps_ratio": thresholds.eps_ratio,
            "eps_gap": thresholds.eps_gap,
            "horizon": thresholds.horizon,
        },
        "diagnostic": diagnostic,
    });
    emit(&report, a.out.as_deref())?;
    Ok(verdict_outcome(found))
}

fn run_gallery(a: &GalleryArgs) -> Result<Outcome> {
    let name = GalleryName::parse(&a.name)?;
    let build = name.build()?;
    let space = &build.space;
    let scope = if space.is_materialized() {
        Scope::Exhaustive
    } else {
        Scope::Sampled {
            seed: a.seed,
            count: a.pairs,
        }
    };
    let mut found = false;
    let mut details = serde_json::Map::new();

    if let Some(points) = space.points() {
        let axioms = verify_metric_axioms(space, &points)?;
        found |= !axioms.passed;
        details.insert("axioms_passed".into(), json!(axioms.passed));
    }
    let mut wanted: Vec<(ConditionKind, bool)> = Vec::new();
    if let Some(s) = &build.suzuki {
        wanted.push((ConditionKind::eta_nonstrict(Scalar::exact(s.params.eta.clone()))?, true));
        wanted.push((ConditionKind::suzuki_theta(Scalar::exact(s.params.r.clone()))?, false));
        details.insert("eta".into(), json!(format_rational(&s.params.eta)));
        details.insert("r".into(), json!(format_rational(&s.params.r)));
        details.insert(
            "u".into(),
            json!((0..=s.params.n).map(|k| format_rational(&s.params.u(k))).collect::<Vec<_>>()),
        );
        let domain = build.map.domain(space).unwrap_or_default();
        let fixed: Vec<String> = domain
            .iter()
            .filter(|p| build.map.apply(p).is_ok_and(|q| &q == *p))
            .map(|p| space.point_label(p))
            .collect();
        found |= !fixed.is_empty();
        details.insert("fixed_points".into(), json!(fixed));
    }
    if let Some(d) = &build.dyadic {
        wanted.push((ConditionKind::SuzukiHalfStrict, true));
        details.insert("bound".into(), json!(d.bound()));
        details.insert("anchor".into(), json!(format_rational(d.anchor())));
        details.insert(
            "u".into(),
            json!(d.u_sequence().iter().map(format_rational).collect::<Vec<_>>()),
        );
    }
    match name {
        GalleryName::Divergent => wanted.push((ConditionKind::Contractive, true)),
        GalleryName::Halving => wanted.push((ConditionKind::banach(Scalar::ratio(1, 2))?, true)),
        _ => {}
    }
    let mut checks = Vec::new();
    for (condition, expect) in wanted {
        let cert = certify(space, &build.map, &condition, &scope)?;
        found |= cert.satisfied() != expect;
        checks.push(json!({
            "expected": if expect { "satisfied" } else { "violated" },
            "certificate": cert.report(space),
        }));
    }
    let report = json!({
        "gallery": a.name,
        "space": space.label(),
        "map": build.map.label(),
        "domain": build.map.domain_note(),
        "details": details,
        "checks": checks,
    });
    emit(&report, a.out.as_deref())?;
    Ok(verdict_outcome(found))
}

fn run_census(a: &CensusArgs) -> Result<Outcome> {
    let space = match (&a.space, a.random, a.seed) {
        (Some(path), _, _) => load_space_file(path)?,
        (None, Some(n), Some(seed)) => random_finite_metric(n, seed)?,
        _ => return Err(Error::Parse("census needs --space or --random with --seed".into())),
    };
    if a.audit {
        let report = implication_audit(&space)?;
        emit(&report, a.out.as_deref())?;
        return Ok(verdict_outcome(!report.violations.is_empty()));
    }
    let text = a
        .condition
        .as_deref()
        .ok_or_else(|| Error::Parse("census needs --condition".into()))?;
    let report = fixed_point_census(&space, &ConditionKind::parse(text)?)?;
    emit(&report, a.out.as_deref())?;
    Ok(verdict_outcome(report.exceptions > 0))
}

fn run_probe(a: &ProbeArgs) -> Result<Outcome> {
    let (loaded, _) = load(&a.input)?;
    let x0 = start_point(&loaded, &a.orbit.from)?;
    let trace = iterate(&loaded.space, &loaded.map, x0, a.orbit.steps)?;
    let grid = a
        .grid
        .split(',')
        .map(|s| {
            let v: Scalar = s.trim().parse()?;
            Ok(if loaded.policy == Policy::Exact { v } else { v.to_float(loaded.policy) })
        })
        .collect::<Result<Vec<Scalar>>>()?;
    let curve = psi_curve(&loaded.space, &loaded.map, &trace, &grid, a.horizon)?;
    let tail = a.tail.min(trace.len());
    let cauchy = cauchy_estimate(&loaded.space, &trace, tail)?;
    let report = json!({
        "space": loaded.space.label(),
        "map": loaded.map.label(),
        "orbit_length": trace.len(),
        "termination": trace.termination(),
        "horizon": a.horizon,
        "psi": curve
            .iter()
            .map(|(s, v)| json!({"s": s, "psi": v}))
            .collect::<Vec<_>>(),
        "cauchy_tail": tail,
        "cauchy_estimate": cauchy,
    });
    emit(&report, a.out.as_deref())?;
    Ok(Outcome::Success)
}
