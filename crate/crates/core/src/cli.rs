//! Command-line front end: argument grammar, dispatch, demos, run reports.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::dynamics::{self, BipartiteState, FtqecStep};
use crate::error::{Error, Result};
use crate::io;
use crate::lqec::{self, CodeProjector, RecoveryMapRep};
use crate::maps::{self, AnyMap, Classification, HermitianMapRep, LinearMapRep, QuantumMap};
use crate::numerics::{self, pauli, CMatrix};
use crate::positivity::{self, Directions, ScanConfig};

#[derive(Debug, Parser)]
#[command(name = "hermap", version, about = "Linear and Hermitian quantum maps toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub opts: Opts,
}

#[derive(Debug, Clone, Args)]
pub struct Opts {
    /// Map JSON; repeat for `compose` (applied in the order given).
    #[arg(long = "map", visible_alias = "noise", global = true)]
    pub maps: Vec<PathBuf>,
    /// Density matrix JSON (bare matrix or {"matrix": ...}).
    #[arg(long, global = true)]
    pub state: Option<PathBuf>,
    /// Code JSON ({"dim", "projector"} or {"codewords"}).
    #[arg(long, global = true)]
    pub code: Option<PathBuf>,
    /// Bipartite state JSON ({"dim_S", "dim_B", "matrix"}).
    #[arg(long, global = true)]
    pub bipartite: Option<PathBuf>,
    /// Unitary JSON (bare matrix or {"matrix": ...}).
    #[arg(long, global = true)]
    pub unitary: Option<PathBuf>,
    /// Number of random scan directions.
    #[arg(long, global = true, default_value_t = 256)]
    pub dirs: usize,
    /// Coarse grid points per ray.
    #[arg(long, global = true, default_value_t = positivity::DEFAULT_GRID)]
    pub grid: usize,
    /// Bisection tolerance on the Bloch radius.
    #[arg(long, global = true, default_value_t = positivity::DEFAULT_TOL)]
    pub tol: f64,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Comma-separated Hermitian recovery weights.
    #[arg(long, global = true, value_delimiter = ',', allow_hyphen_values = true)]
    pub weights: Option<Vec<f64>>,
    /// Write the run report as JSON.
    #[arg(long, global = true)]
    pub json: Option<PathBuf>,
    /// Write the main artifact (map, matrix, CSV) here.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Recovery family for `lqec recover|verify`.
    #[arg(long, global = true, value_enum, default_value_t = RecoveryChoice::Cp)]
    pub kind: RecoveryChoice,
    /// Random code states used by `lqec verify`.
    #[arg(long, global = true, default_value_t = 64)]
    pub samples: usize,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Classify a map as linear, Hermitian, or CP.
    Classify,
    /// Apply a map to a state.
    Apply,
    /// Compose two or more maps.
    Compose,
    /// Invert a map.
    Invert,
    /// Print the Choi matrix.
    Choi,
    /// Canonical operator-sum decomposition and CP difference.
    Decompose,
    /// Reduce system-bath dynamics to a Hermitian map.
    Qdp,
    /// Scan the positivity domain along random Bloch directions.
    Pdscan,
    /// Error-correction conditions and recovery synthesis.
    Lqec {
        #[command(subcommand)]
        action: LqecAction,
    },
    /// Built-in end-to-end scenarios.
    Demo {
        #[arg(value_enum)]
        name: DemoName,
    },
}

#[derive(Debug, Clone, Copy, Subcommand)]
pub enum LqecAction {
    Check,
    Recover,
    Verify,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum DemoName {
    InversePhaseFlip,
    BitFlipCode,
    QdpBellSwap,
    FtqecTwoSteps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RecoveryChoice {
    Cp,
    Linear,
    Hermitian,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Metric {
    Num(f64),
    Int(usize),
    Bool(bool),
    Text(String),
    List(Vec<f64>),
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::Num(x) => write!(f, "{x:.12}"),
            Metric::Int(n) => write!(f, "{n}"),
            Metric::Bool(b) => write!(f, "{b}"),
            Metric::Text(s) => f.write_str(s),
            Metric::List(v) => {
                let parts: Vec<String> = v.iter().map(|x| format!("{x:.12}")).collect();
                write!(f, "[{}]", parts.join(", "))
            }
        }
    }
}

impl Serialize for Metric {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Metric::Num(x) => s.serialize_f64(*x),
            Metric::Int(n) => s.serialize_u64(*n as u64),
            Metric::Bool(b) => s.serialize_bool(*b),
            Metric::Text(t) => s.serialize_str(t),
            Metric::List(v) => v.serialize(s),
        }
    }
}

impl From<f64> for Metric {
    fn from(x: f64) -> Self {
        Metric::Num(x)
    }
}

impl From<usize> for Metric {
    fn from(n: usize) -> Self {
        Metric::Int(n)
    }
}

impl From<bool> for Metric {
    fn from(b: bool) -> Self {
        Metric::Bool(b)
    }
}

impl From<&str> for Metric {
    fn from(s: &str) -> Self {
        Metric::Text(s.to_owned())
    }
}

impl From<String> for Metric {
    fn from(s: String) -> Self {
        Metric::Text(s)
    }
}

impl From<Vec<f64>> for Metric {
    fn from(v: Vec<f64>) -> Self {
        Metric::List(v)
    }
}

/// Ordered key/value metrics; serialized as a JSON object.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Metrics(pub Vec<(String, Metric)>);

impl Metrics {
    pub fn get(&self, key: &str) -> Option<&Metric> {
        self.0.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

impl Serialize for Metrics {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = s.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub inputs: Vec<InputDigest>,
    pub outputs: Vec<String>,
    pub metrics: Metrics,
    pub seed: u64,
    /// Matrices and other structured results.
    pub data: serde_json::Map<String, Value>,
}

/// Everything a subcommand produced, before printing.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: RunReport,
    pub lines: Vec<String>,
    /// Raw payload for stdout (pdscan CSV without `--out`).
    pub stdout: Option<String>,
    /// Set when the run completed but the input failed a mathematical check.
    pub failure: Option<String>,
}

struct Session<'a> {
    opts: &'a Opts,
    report: RunReport,
    lines: Vec<String>,
    stdout: Option<String>,
    failure: Option<String>,
}

impl<'a> Session<'a> {
    fn new(command: &str, opts: &'a Opts) -> Self {
        Session {
            opts,
            report: RunReport {
                command: command.to_owned(),
                inputs: Vec::new(),
                outputs: Vec::new(),
                metrics: Metrics::default(),
                seed: opts.seed,
                data: serde_json::Map::new(),
            },
            lines: Vec::new(),
            stdout: None,
            failure: None,
        }
    }

    fn read(&mut self, path: &Path) -> Result<Value> {
        let bytes = std::fs::read(path)
            .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
        let digest = Sha256::digest(&bytes);
        self.report.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
        });
        Ok(serde_json::from_slice(&bytes)?)
    }

    fn required<'p>(path: &'p Option<PathBuf>, flag: &str) -> Result<&'p Path> {
        path.as_deref().ok_or_else(|| Error::InvalidInput(format!("missing --{flag}")))
    }

    fn map(&mut self) -> Result<AnyMap> {
        match self.opts.maps.as_slice() {
            [one] => {
                let v = self.read(one)?;
                io::map_from_json(&v)
            }
            [] => Err(Error::InvalidInput("missing --map".into())),
            _ => Err(Error::InvalidInput("expected a single --map".into())),
        }
    }

    fn code(&mut self) -> Result<CodeProjector> {
        let v = self.read(Self::required(&self.opts.code, "code")?)?;
        io::code_from_json(&v)
    }

    fn metric(&mut self, key: impl Into<String>, value: impl Into<Metric>) {
        self.report.metrics.0.push((key.into(), value.into()));
    }

    fn line(&mut self, s: impl Into<String>) {
        self.lines.push(s.into());
    }

    fn data(&mut self, key: &str, v: Value) {
        self.report.data.insert(key.to_owned(), v);
    }

    fn classification(&mut self, prefix: &str, cls: &Classification) {
        self.metric(format!("{prefix}class"), cls.class.to_string());
        if let Some(w) = cls.witness() {
            self.metric(format!("{prefix}witness"), w);
        }
        self.metric(format!("{prefix}asymmetry"), cls.asymmetry);
    }

    /// Write the main artifact to `--out` when given.
    fn artifact(&mut self, v: &Value) -> Result<()> {
        if let Some(path) = &self.opts.out {
            io::write_json(path, v)?;
            self.report.outputs.push(path.display().to_string());
        }
        Ok(())
    }

    fn finish(self) -> Outcome {
        let mut lines = self.lines;
        lines.extend(self.report.metrics.0.iter().map(|(k, v)| format!("{k} {v}")));
        Outcome { report: self.report, lines, stdout: self.stdout, failure: self.failure }
    }
}

fn format_matrix(m: &CMatrix) -> Vec<String> {
    (0..m.nrows())
        .map(|r| {
            let mut s = String::new();
            for c in 0..m.ncols() {
                let z = m[(r, c)];
                let _ = write!(s, "{}{:.12}{:+.12}i", if c == 0 { "" } else { "  " }, z.re, z.im);
            }
            s
        })
        .collect()
}

/// Hermitian maps come back in canonical Hermitian form, others as linear.
fn canonical(map: &dyn QuantumMap) -> Result<AnyMap> {
    let c = maps::choi(map);
    if c.hermiticity_residual() <= numerics::EPS_HERM {
        Ok(AnyMap::Hermitian(maps::from_choi_hermitian(&c)?))
    } else {
        Ok(AnyMap::Linear(maps::from_choi_linear(&c)))
    }
}

fn hermitian_form(map: &AnyMap) -> Result<HermitianMapRep> {
    match map {
        AnyMap::Hermitian(h) => Ok(h.clone()),
        AnyMap::Linear(_) => maps::from_choi_hermitian(&maps::choi(map)),
    }
}

fn weights_of(map: &AnyMap) -> Option<Vec<f64>> {
    match map {
        AnyMap::Hermitian(h) => Some(h.weights()),
        AnyMap::Linear(_) => None,
    }
}

/// Parse `argv` (program name first), run, print, and return the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            if let Some(raw) = &out.stdout {
                print!("{raw}");
                for l in &out.lines {
                    eprintln!("{l}");
                }
            } else {
                for l in &out.lines {
                    println!("{l}");
                }
            }
            if let Some(path) = &cli.opts.json {
                let written = serde_json::to_value(&out.report)
                    .map_err(Error::from)
                    .and_then(|v| io::write_json(path, &v));
                if let Err(e) = written {
                    eprintln!("error: {e}");
                    return 2;
                }
            }
            match &out.failure {
                Some(msg) => {
                    eprintln!("error: {msg}");
                    1
                }
                None => 0,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_domain_failure() {
                1
            } else {
                2
            }
        }
    }
}

pub fn execute(cli: &Cli) -> Result<Outcome> {
    let opts = &cli.opts;
    match cli.command {
        Command::Classify => classify_cmd(opts),
        Command::Apply => apply_cmd(opts),
        Command::Compose => compose_cmd(opts),
        Command::Invert => invert_cmd(opts),
        Command::Choi => choi_cmd(opts),
        Command::Decompose => decompose_cmd(opts),
        Command::Qdp => qdp_cmd(opts),
        Command::Pdscan => pdscan_cmd(opts),
        Command::Lqec { action } => lqec_cmd(action, opts),
        Command::Demo { name } => run_demo(name, opts),
    }
}

fn classify_cmd(opts: &Opts) -> Result<Outcome> {
    let mut s = Session::new("classify", opts);
    let map = s.map()?;
    let cls = maps::classify(&map);
    s.line(cls.describe());
    s.classification("", &cls);
    if let Some(min) = cls.min_eigenvalue {
        s.metric("min_eigenvalue", min);
    }
    let (tp, tp_res) = maps::is_trace_preserving(&map)?;
    s.metric("trace_preserving", tp);
    s.metric("trace_residual", tp_res);
    Ok(s.finish())
}

fn apply_cmd(opts: &Opts) -> Result<Outcome> {
    let mut s = Session::new("apply", opts);
    let map = s.map()?;
    let v = s.read(Session::required(&opts.state, "state")?)?;
    let rho = io::matrix_or_wrapped(&v)?;
    let out = map.apply(&rho)?;
    for l in format_matrix(&out) {
        s.line(l);
    }
    s.metric("trace", numerics::trace(&out).re);
    s.metric("trace_imag", numerics::trace(&out).im);
    s.metric("hermiticity_residual", numerics::hermiticity_residual(&out));
    s.metric("positive", positivity::is_positive(&out));
    if numerics::is_hermitian(&out, numerics::EPS_HERM) {
        s.metric("min_eigenvalue", numerics::min_eigenvalue(&out)?);
    }
    let m = io::matrix_to_json(&out);
    s.artifact(&m)?;
    s.data("output", m);
    Ok(s.finish())
}

fn compose_cmd(opts: &Opts) -> Result<Outcome> {
    let mut s = Session::new("compose", opts);
    if opts.maps.len() < 2 {
        return Err(Error::InvalidInput("compose needs at least two --map files".into()));
    }
    let mut parts = Vec::new();
    for p in &opts.maps {
        let v = s.read(p)?;
        parts.push(io::map_from_json(&v)?);
    }
    let mut total = parts[0].to_linear();
    for next in &parts[1..] {
        total = maps::compose(next, &total)?;
    }
    let out = canonical(&total)?;
    let cls = maps::classify(&out);
    s.line(cls.describe());
    s.metric("maps", parts.len());
    s.metric("elements", out.to_linear().len());
    s.classification("", &cls);
    s.metric("trace_preserving", maps::is_trace_preserving(&out)?.0);
    if let Some(w) = weights_of(&out) {
        s.metric("weights", w);
    }
    let v = io::map_to_json(&out);
    s.artifact(&v)?;
    s.data("map", v);
    Ok(s.finish())
}

fn invert_cmd(opts: &Opts) -> Result<Outcome> {
    let mut s = Session::new("invert", opts);
    let map = s.map()?;
    let inv = maps::invert(&map)?;
    let out = canonical(&inv.map)?;
    let round = maps::compose(&out, &map)?;
    let residual = maps::action_deviation(&round, &LinearMapRep::identity(map.dim_in()))?;
    let cls = maps::classify(&out);
    s.line(cls.describe());
    s.metric("condition", inv.condition);
    s.metric("inversion_residual", residual);
    s.classification("", &cls);
    if let Some(w) = weights_of(&out) {
        s.metric("weights", w);
    }
    let v = io::map_to_json(&out);
    s.artifact(&v)?;
    s.data("map", v);
    Ok(s.finish())
}

fn choi_cmd(opts: &Opts) -> Result<Outcome> {
    let mut s = Session::new("choi", opts);
    let map = s.map()?;
    let c = maps::choi(&map);
    for l in format_matrix(c.matrix()) {
        s.line(l);
    }
    s.metric("dim_in", c.dim_in());
    s.metric("dim_out", c.dim_out());
    s.metric("hermiticity_residual", c.hermiticity_residual());
    if c.hermiticity_residual() <= numerics::EPS_HERM {
        s.metric("eigenvalues", c.eigenvalues()?);
    }
    let m = io::matrix_to_json(c.matrix());
    s.artifact(&m)?;
    s.data("choi", m);
    Ok(s.finish())
}

fn decompose_cmd(opts: &Opts) -> Result<Outcome> {
    let mut s = Session::new("decompose", opts);
    let map = s.map()?;
    let out = canonical(&map)?;
    s.metric("kind", if matches!(out, AnyMap::Hermitian(_)) { "hermitian" } else { "linear" });
    s.metric("elements", out.to_linear().len());
    s.metric("reassembly_residual", maps::action_deviation(&out, &map)?);
    if let AnyMap::Hermitian(h) = &out {
        let (plus, minus) = maps::cp_difference(h)?;
        let mut terms: Vec<(f64, CMatrix)> =
            plus.terms().iter().map(|t| (t.weight, t.op.clone())).collect();
        terms.extend(minus.terms().iter().map(|t| (-t.weight, t.op.clone())));
        let diff = HermitianMapRep::new(h.dim_in(), h.dim_out(), terms)?;
        s.metric("weights", h.weights());
        s.metric("positive_terms", plus.terms().len());
        s.metric("negative_terms", minus.terms().len());
        s.metric("cp_difference_residual", maps::action_deviation(&diff, &map)?);
        s.data("plus", io::map_to_json(&plus.into()));
        s.data("minus", io::map_to_json(&minus.into()));
    }
    let v = io::map_to_json(&out);
    s.artifact(&v)?;
    s.data("map", v);
    Ok(s.finish())
}

fn qdp_report(s: &mut Session<'_>, prefix: &str, state: &BipartiteState, u: &CMatrix) -> Result<AnyMap> {
    let res = dynamics::reduce(state, u)?;
    let rho_s = state.reduced_system();
    let dev = numerics::max_abs_diff(&res.phi_h.apply(&rho_s)?, &dynamics::evolve_exact(state, u)?);
    let cls = maps::classify(&res.phi_h);
    s.line(format!("{}{}", prefix.replace('_', ": ").trim_start_matches(": "), cls.describe()));
    s.metric(format!("{prefix}sl"), res.split.is_sl());
    s.metric(format!("{prefix}sl_terms"), res.split.sl_terms.len());
    s.metric(format!("{prefix}nsl_terms"), res.split.nsl_terms.len());
    s.metric(format!("{prefix}k_nsl_max"), numerics::max_abs(&res.k_nsl));
    s.metric(format!("{prefix}oracle_max_dev"), dev);
    s.classification(prefix, &cls);
    s.data(&format!("{prefix}k_nsl"), io::matrix_to_json(&res.k_nsl));
    Ok(AnyMap::Hermitian(res.phi_h))
}

fn qdp_cmd(opts: &Opts) -> Result<Outcome> {
    let mut s = Session::new("qdp", opts);
    let state = {
        let v = s.read(Session::required(&opts.bipartite, "bipartite")?)?;
        io::bipartite_from_json(&v)?
    };
    let u = {
        let v = s.read(Session::required(&opts.unitary, "unitary")?)?;
        io::matrix_or_wrapped(&v)?
    };
    let phi_h = qdp_report(&mut s, "", &state, &u)?;
    let v = io::map_to_json(&phi_h);
    s.artifact(&v)?;
    s.data("map", v);
    Ok(s.finish())
}

fn fmt_full(x: f64) -> String {
    format!("{x}")
}

fn pdscan_cmd(opts: &Opts) -> Result<Outcome> {
    let mut s = Session::new("pdscan", opts);
    let map = s.map()?;
    let cfg = ScanConfig { grid: opts.grid, tol: opts.tol };
    let points = positivity::scan_boundary(
        &map,
        &Directions::Random { count: opts.dirs, seed: opts.seed },
        cfg,
    )?;
    let k = map.dim_in() * map.dim_in() - 1;
    let mut csv: Vec<String> = (1..=k).map(|i| format!("n_{i}")).collect();
    csv.extend(["r_bloch", "crossing_1", "crossing_2"].map(String::from));
    let mut text = csv.join(",") + "\n";
    for p in &points {
        let mut row: Vec<String> = p.direction.iter().copied().map(fmt_full).collect();
        row.push(fmt_full(p.r_bloch));
        for i in 0..2 {
            row.push(p.crossings.get(i).copied().map(fmt_full).unwrap_or_default());
        }
        text += &(row.join(",") + "\n");
    }
    let firsts: Vec<f64> = points.iter().filter_map(|p| p.crossings.first().copied()).collect();
    let convexity = positivity::midpoint_convexity(&map, &points, 200, opts.seed)?;
    s.metric("directions", points.len());
    s.metric("with_crossing", firsts.len());
    s.metric("origin_positive", points.iter().all(|p| p.origin_positive));
    if !firsts.is_empty() {
        s.metric("min_crossing", firsts.iter().copied().fold(f64::INFINITY, f64::min));
        s.metric("max_crossing", firsts.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    }
    s.metric("convexity_pairs", convexity.pairs);
    s.metric("convexity_violations", convexity.violations);
    let cloud: Vec<Value> = points
        .iter()
        .map(|p| {
            json!({
                "direction": p.direction,
                "r_bloch": p.r_bloch,
                "crossings": p.crossings,
                "origin_positive": p.origin_positive,
                "diagnostic": p.diagnostic,
            })
        })
        .collect();
    s.data("points", Value::Array(cloud));
    match &opts.out {
        Some(path) => {
            std::fs::write(path, &text)?;
            s.report.outputs.push(path.display().to_string());
        }
        None => s.stdout = Some(text),
    }
    Ok(s.finish())
}

struct Synthesized {
    recovery: RecoveryMapRep,
    predicted: (f64, f64),
}

fn synthesize(s: &mut Session<'_>, code: &CodeProjector, map: &AnyMap) -> Result<Synthesized> {
    s.metric("kind", s.opts.kind.to_possible_value().expect("named").get_name().to_owned());
    match s.opts.kind {
        RecoveryChoice::Cp => {
            let r = lqec::synthesize_cp_recovery(code, &lqec::expanded_cp(map)?)?;
            // The recovery projects onto every error subspace, so the factor on
            // the original noise is the sign-weighted trace of lambda.
            let predicted = match map {
                AnyMap::Hermitian(h) => {
                    let f = h.terms().iter().enumerate();
                    (f.map(|(i, t)| t.weight.signum() * r.lambda[(i, i)].re).sum(), 0.0)
                }
                AnyMap::Linear(_) => {
                    let t = lqec::check_lqec_conditions(code, map)?.two_tr_gamma_dag();
                    (t.re, t.im)
                }
            };
            s.metric("kl_residual", r.kl_residual);
            s.metric("orthogonality_residual", r.orthogonality_residual);
            s.data("lambda", io::matrix_to_json(&r.lambda));
            Ok(Synthesized { predicted, recovery: r.recovery })
        }
        RecoveryChoice::Linear => {
            let r = lqec::synthesize_linear_recovery(code, map)?;
            let t = r.certificate.two_tr_gamma_dag();
            s.metric("two_tr_gamma_dag", t.re);
            s.metric("two_tr_gamma_dag_imag", t.im);
            s.metric("orthogonality_residual", r.orthogonality_residual);
            Ok(Synthesized { predicted: (r.factor.re, r.factor.im), recovery: r.recovery })
        }
        RecoveryChoice::Hermitian => {
            let h = hermitian_form(map)?;
            let r = lqec::synthesize_hermitian_recovery(code, &h, s.opts.weights.as_deref())?;
            s.metric("kl_residual", r.kl_residual);
            s.metric("sign_sum", r.sign_sum);
            s.metric("weights", r.weights.clone());
            s.metric("orthogonality_residual", r.orthogonality_residual);
            s.data("beta", io::matrix_to_json(&r.beta));
            Ok(Synthesized { predicted: (r.factor, 0.0), recovery: r.recovery })
        }
    }
}

fn lqec_cmd(action: LqecAction, opts: &Opts) -> Result<Outcome> {
    let name = match action {
        LqecAction::Check => "lqec check",
        LqecAction::Recover => "lqec recover",
        LqecAction::Verify => "lqec verify",
    };
    let mut s = Session::new(name, opts);
    let code = s.code()?;
    let map = s.map()?;
    match action {
        LqecAction::Check => {
            let cert = lqec::check_lqec_conditions(&code, &map)?;
            let cp = lqec::expanded_cp(&map)?;
            let f: Vec<CMatrix> =
                cp.terms().iter().map(|t| &t.op * numerics::re(t.weight.sqrt())).collect();
            let kl = lqec::check_kl(&code, &f)?;
            let t = cert.two_tr_gamma_dag();
            s.line(if cert.all_satisfied() { "correctable" } else { "not correctable" });
            for (i, label) in ["i", "ii", "iii"].iter().enumerate() {
                s.metric(format!("residual_{label}"), cert.residuals[i]);
            }
            s.metric("satisfied", cert.all_satisfied());
            s.metric("two_tr_gamma_dag", t.re);
            s.metric("two_tr_gamma_dag_imag", t.im);
            if let Some(r) = cert.relation_residual {
                s.metric("relation_residual", r);
            }
            s.metric("expanded_kl_residual", kl.residual);
            s.data("alpha", io::matrix_to_json(&cert.alpha));
            s.data("alpha_prime", io::matrix_to_json(&cert.alpha_prime));
            s.data("gamma", io::matrix_to_json(&cert.gamma));
            s.data("lambda", io::matrix_to_json(&kl.lambda));
            if !cert.all_satisfied() {
                s.failure = Some("error-correction conditions are not satisfied".into());
            }
        }
        LqecAction::Recover => {
            let syn = synthesize(&mut s, &code, &map)?;
            s.line(format!("predicted factor {:.12}", syn.predicted.0));
            s.metric("elements", syn.recovery.len());
            s.metric("predicted_factor", syn.predicted.0);
            s.metric("predicted_factor_imag", syn.predicted.1);
            let v = io::map_to_json(&syn.recovery.to_any());
            s.artifact(&v)?;
            s.data("recovery", v);
        }
        LqecAction::Verify => {
            let syn = synthesize(&mut s, &code, &map)?;
            let ver = lqec::verify_recovery(&syn.recovery, &map, &code, opts.samples, opts.seed)?;
            s.line(format!("factor {:.12}", ver.factor.re));
            s.metric("factor_imag", ver.factor.im);
            s.metric("predicted_factor", syn.predicted.0);
            s.metric("predicted_factor_imag", syn.predicted.1);
            s.metric("max_dev", ver.max_dev);
            s.metric("spread", ver.spread);
            s.metric("samples", opts.samples);
        }
    }
    Ok(s.finish())
}

/// Run a built-in scenario.
pub fn run_demo(name: DemoName, opts: &Opts) -> Result<Outcome> {
    match name {
        DemoName::InversePhaseFlip => demo_inverse_phase_flip(opts),
        DemoName::BitFlipCode => demo_bit_flip_code(opts),
        DemoName::QdpBellSwap => demo_qdp_bell_swap(opts),
        DemoName::FtqecTwoSteps => demo_ftqec(opts),
    }
}

fn demo_inverse_phase_flip(opts: &Opts) -> Result<Outcome> {
    let mut s = Session::new("demo inverse_phase_flip", opts);
    let p = 0.25;
    let pf = maps::phase_flip(p)?;
    let inv = maps::invert(&pf)?;
    let h = maps::from_choi_hermitian(&maps::choi(&inv.map))?;
    let c0 = h.weight_along(&numerics::identity(2)).unwrap_or(0.0);
    let c1 = h.weight_along(&pauli::z()).unwrap_or(0.0);
    let round = maps::compose(&h, &pf)?;
    let residual = maps::action_deviation(&round, &LinearMapRep::identity(2))?;
    let cls = maps::classify(&h);
    s.line(cls.describe());
    s.metric("p", p);
    s.metric("c0", c0);
    s.metric("c1", c1);
    s.metric("expected_c1", p / (2.0 * p - 1.0));
    s.metric("inversion_residual", residual);
    s.metric("condition", inv.condition);
    s.classification("", &cls);
    s.data("inverse", io::map_to_json(&h.into()));
    Ok(s.finish())
}

fn demo_bit_flip_code(opts: &Opts) -> Result<Outcome> {
    let mut s = Session::new("demo bit_flip_code", opts);
    let code = lqec::three_qubit_code();
    for c1 in [-0.1, -0.3] {
        let noise = maps::standard_map("inverse_bit_flip_3q", &[c1], None)?;
        let rec = lqec::synthesize_cp_recovery(&code, &lqec::expanded_cp(&noise.clone().into())?)?;
        let ver = lqec::verify_recovery(&rec.recovery, &noise, &code, opts.samples, opts.seed)?;
        let tag = format!("[c1={c1}]");
        s.line(format!("c1 {c1}: factor {:.12}", ver.factor.re));
        s.metric(format!("kl_residual{tag}"), rec.kl_residual);
        s.metric(format!("recovery_elements{tag}"), rec.recovery.len());
        s.metric(format!("factor{tag}"), ver.factor.re);
        s.metric(format!("factor_imag{tag}"), ver.factor.im);
        s.metric(format!("max_dev{tag}"), ver.max_dev);
    }
    Ok(s.finish())
}

fn demo_qdp_bell_swap(opts: &Opts) -> Result<Outcome> {
    let mut s = Session::new("demo qdp_bell_swap", opts);
    let bell = BipartiteState::new(2, 2, dynamics::bell_state())?;
    qdp_report(&mut s, "swap_", &bell, &dynamics::swap(2))?;
    qdp_report(&mut s, "cnot_", &bell, &dynamics::cnot())?;
    Ok(s.finish())
}

fn demo_ftqec(opts: &Opts) -> Result<Outcome> {
    let mut s = Session::new("demo ftqec_two_steps", opts);
    let hadamard = numerics::from_real_rows(2, 2, &[1.0, 1.0, 1.0, -1.0]) * numerics::re(0.5f64.sqrt());
    let first = FtqecStep { noise: maps::phase_flip(0.1)?.into(), gate: hadamard };
    let steps = [
        first.clone(),
        FtqecStep { noise: maps::inverse_phase_flip(0.25)?.into(), gate: numerics::identity(2) },
    ];
    let control = [
        first,
        FtqecStep { noise: maps::phase_flip(0.25)?.into(), gate: numerics::identity(2) },
    ];
    let res = dynamics::ftqec_compose(&steps)?;
    let ctl = dynamics::ftqec_compose(&control)?;
    s.line(format!("total: {}", res.classification.describe()));
    s.line(format!("all-cp control: {}", ctl.classification.describe()));
    s.metric("steps", steps.len());
    s.classification("", &res.classification);
    s.metric("trace_preserving", maps::is_trace_preserving(&res.total)?.0);
    s.metric("choi_eigenvalues", maps::choi(&res.total).eigenvalues()?);
    s.metric("control_class", ctl.classification.class.to_string());
    s.data("total", io::map_to_json(&canonical(&res.total)?));
    Ok(s.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("hermap").chain(args.iter().copied())).unwrap()
    }

    fn num(out: &Outcome, key: &str) -> f64 {
        match out.report.metrics.get(key) {
            Some(Metric::Num(x)) => *x,
            other => panic!("{key}: {other:?}"),
        }
    }

    #[test]
    fn grammar() {
        let cli = parse(&["lqec", "verify", "--noise", "n.json", "--code", "c.json", "--seed", "3"]);
        assert!(matches!(cli.command, Command::Lqec { action: LqecAction::Verify }));
        assert_eq!(cli.opts.maps, vec![PathBuf::from("n.json")]);
        assert_eq!(cli.opts.seed, 3);
        let cli = parse(&["--weights", "1,-0.5,2", "lqec", "recover"]);
        assert_eq!(cli.opts.weights, Some(vec![1.0, -0.5, 2.0]));
        let cli = parse(&["compose", "--map", "a", "--map", "b"]);
        assert_eq!(cli.opts.maps.len(), 2);
        assert!(Cli::try_parse_from(["hermap", "demo", "nope"]).is_err());
        assert!(Cli::try_parse_from(["hermap", "frobnicate"]).is_err());
    }

    #[test]
    fn demos_report_expected_metrics() {
        let opts = parse(&["demo", "inverse_phase_flip"]).opts;
        let out = run_demo(DemoName::InversePhaseFlip, &opts).unwrap();
        assert!((num(&out, "c1") + 0.5).abs() <= 1e-12);
        assert!((num(&out, "c0") - 1.5).abs() <= 1e-12);
        assert!(num(&out, "inversion_residual") <= 1e-12);
        assert_eq!(out.report.metrics.get("class"), Some(&Metric::Text("hermitian".into())));

        let out = run_demo(DemoName::BitFlipCode, &opts).unwrap();
        for c1 in ["-0.1", "-0.3"] {
            assert!((num(&out, &format!("factor[c1={c1}]")) - 1.0).abs() <= 1e-10);
            assert!(num(&out, &format!("kl_residual[c1={c1}]")) <= 1e-10);
        }

        let out = run_demo(DemoName::QdpBellSwap, &opts).unwrap();
        assert!(num(&out, "swap_oracle_max_dev") <= 1e-8);
        assert!(num(&out, "cnot_oracle_max_dev") <= 1e-8);
        assert_eq!(out.report.metrics.get("cnot_class"), Some(&Metric::Text("hermitian".into())));

        let out = run_demo(DemoName::FtqecTwoSteps, &opts).unwrap();
        assert!(num(&out, "witness") < -1e-6);
        assert_eq!(out.report.metrics.get("control_class"), Some(&Metric::Text("cp".into())));
    }

    #[test]
    fn metric_printing() {
        assert_eq!(Metric::Num(1.0).to_string(), "1.000000000000");
        assert_eq!(Metric::List(vec![0.5, -1.0]).to_string(), "[0.500000000000, -1.000000000000]");
        let m = Metrics(vec![("b".into(), Metric::Int(2)), ("a".into(), Metric::Bool(true))]);
        assert_eq!(serde_json::to_string(&m).unwrap(), r#"{"b":2,"a":true}"#);
    }
}
