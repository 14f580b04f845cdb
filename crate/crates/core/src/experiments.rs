//! Config-driven experiments: each reads a flat JSON document, writes CSV
//! tables plus a `manifest.json`, and reports pass/fail checks.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::bessel::{disk_spectrum, lambda_disk, BoundaryCondition};
use crate::curve::{test_direction, AmbientField, BoundaryScalar, FourierCurve};
use crate::error::{Error, Result};
use crate::fem::{solve_eigs, Domain, EigenPair};
use crate::flow::{run as run_flow, FlowConfig};
use crate::riemann::{connection_identity_check, hessian_form, Functional, MetricKind, MetricSpec};
use crate::shape::{
    dj_dirichlet, dj2_reduced, dj3, dlambda_neumann, fd_shape_derivative, optimality_residual, peak_normalized,
    schiffer_residuals, FdQuantity,
};

pub const SEED_ENV: &str = "SCHIFFER_LAB_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentId {
    DiskOracle,
    Solve,
    FdCheck,
    SchifferCheck,
    Monotonicity,
    Flow,
    HessianCheck,
    SymmetryCheck,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        ExperimentId::DiskOracle,
        ExperimentId::Solve,
        ExperimentId::FdCheck,
        ExperimentId::SchifferCheck,
        ExperimentId::Monotonicity,
        ExperimentId::Flow,
        ExperimentId::HessianCheck,
        ExperimentId::SymmetryCheck,
    ];

    pub fn label(self) -> &'static str {
        match self {
            ExperimentId::DiskOracle => "disk-oracle",
            ExperimentId::Solve => "solve",
            ExperimentId::FdCheck => "fd-check",
            ExperimentId::SchifferCheck => "schiffer-check",
            ExperimentId::Monotonicity => "monotonicity",
            ExperimentId::Flow => "flow",
            ExperimentId::HessianCheck => "hessian-check",
            ExperimentId::SymmetryCheck => "symmetry-check",
        }
    }
}

impl std::str::FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.label() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

/// Named check evaluated by an experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self { name: name.to_string(), passed, detail }
    }
}

/// Result of a completed experiment.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
    pub manifest: Value,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Process exit code: 0 success, 1 failed check, 2 configuration error,
/// 3 numerical failure.
pub fn exit_code(result: &Result<Outcome>) -> i32 {
    match result {
        Ok(o) if o.passed() => 0,
        Ok(_) => 1,
        Err(Error::Config(_)) => 2,
        Err(_) => 3,
    }
}

// ---------------------------------------------------------------- CSV output

/// One CSV cell; floats are written with 17 significant digits.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map(Cell::Float).unwrap_or(Cell::Empty)
    }
}

/// Header plus rows.
#[derive(Debug, Clone, Default)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Self { headers: headers.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    /// RFC-4180 text with CRLF line endings.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Named numeric columns of equal length as CSV text.
pub fn emit_plot_data(series: &[(&str, Vec<f64>)]) -> Result<String> {
    let len = series.first().map(|s| s.1.len()).unwrap_or(0);
    for (name, col) in series {
        if col.len() != len {
            return Err(Error::LengthMismatch { name: name.to_string(), len: col.len(), expected: len });
        }
    }
    let mut table = Table::new(&series.iter().map(|s| s.0).collect::<Vec<_>>());
    for i in 0..len {
        table.push(series.iter().map(|s| Cell::Float(s.1[i])).collect());
    }
    table.to_csv()
}

struct Writer {
    dir: PathBuf,
    files: Vec<PathBuf>,
}

impl Writer {
    fn write(&mut self, name: &str, text: &str) -> Result<()> {
        fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        self.files.push(path);
        Ok(())
    }

    fn table(&mut self, name: &str, table: &Table) -> Result<()> {
        self.write(name, &table.to_csv()?)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

// ------------------------------------------------------------- config input

/// Curve description: a path to a curve file, inline coefficients, or a
/// named shape `{"kind": "circle" | "ellipse" | "kidney" | "perturbed-disk", ...}`.
pub fn parse_curve(value: &Value, seed: u64) -> Result<FourierCurve> {
    let bad = |e: Error| Error::Config(format!("invalid curve: {e}"));
    match value {
        Value::String(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read curve {path}: {e}")))?;
            FourierCurve::from_json_str(&text).map_err(bad)
        }
        Value::Object(map) if map.contains_key("harmonics_max") => {
            FourierCurve::from_json_value(value.clone()).map_err(bad)
        }
        Value::Object(map) => {
            let spec: ShapeSpec =
                serde_json::from_value(Value::Object(map.clone())).map_err(|e| Error::Config(e.to_string()))?;
            spec.build(seed).map_err(bad)
        }
        other => Err(Error::Config(format!("curve must be a path or an object, got {other}"))),
    }
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum ShapeSpec {
    Circle {
        #[serde(default = "one")]
        radius: f64,
        #[serde(default)]
        center: [f64; 2],
    },
    Ellipse {
        a: f64,
        b: f64,
    },
    Kidney,
    PerturbedDisk {
        #[serde(default = "default_amplitude")]
        amplitude: f64,
        #[serde(default = "default_band")]
        harmonics: [usize; 2],
        #[serde(default = "pi")]
        area: f64,
    },
}

fn one() -> f64 {
    1.0
}

fn pi() -> f64 {
    PI
}

fn default_amplitude() -> f64 {
    0.05
}

fn default_band() -> [usize; 2] {
    [2, 4]
}

impl ShapeSpec {
    fn build(&self, seed: u64) -> Result<FourierCurve> {
        match *self {
            ShapeSpec::Circle { radius, center } => Ok(FourierCurve::circle(center, radius)),
            ShapeSpec::Ellipse { a, b } => Ok(FourierCurve::ellipse([0.0, 0.0], a, b)),
            ShapeSpec::Kidney => Ok(FourierCurve::kidney()),
            ShapeSpec::PerturbedDisk { amplitude, harmonics, area } => {
                perturbed_disk(amplitude, harmonics[0], harmonics[1], seed)?.rescale_to_area(area)
            }
        }
    }
}

/// Unit circle plus seeded uniform noise of size `amplitude` on every
/// coefficient of harmonics lo..=hi.
pub fn perturbed_disk(amplitude: f64, lo: usize, hi: usize, seed: u64) -> Result<FourierCurve> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xd15c);
    let mut cos = vec![[0.0, 0.0]; hi.max(1) + 1];
    let mut sin = vec![[0.0, 0.0]; hi.max(1) + 1];
    cos[1] = [1.0, 0.0];
    sin[1] = [0.0, 1.0];
    for m in lo.max(1)..=hi {
        for k in 0..2 {
            cos[m][k] += amplitude * rng.random_range(-1.0..1.0);
            sin[m][k] += amplitude * rng.random_range(-1.0..1.0);
        }
    }
    FourierCurve::new(cos, sin)
}

/// Band-limited perturbation a₀ + Σ_{k≤4} a_k cos kθ + b_k sin kθ with
/// a₀ ∈ [0.5, 1.5] and the other coefficients in [−0.5, 0.5].
pub fn random_alpha(rng: &mut ChaCha8Rng, nodes: usize) -> (Vec<f64>, BoundaryScalar) {
    let mut coeffs = vec![rng.random_range(0.5..1.5)];
    for _ in 0..8 {
        coeffs.push(rng.random_range(-0.5..0.5));
    }
    let field = BoundaryScalar::from_fourier(nodes, &coeffs);
    (coeffs, field)
}

fn default_curve() -> Value {
    json!({"kind": "circle", "radius": 1.0})
}

fn parse_bc(s: &str) -> Result<BoundaryCondition> {
    s.parse()
}

fn from_config<T: for<'de> Deserialize<'de>>(value: Value) -> Result<T> {
    serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))
}

/// Seed precedence: environment, then the config's `seed` key.
fn resolve_seed(config: &mut serde_json::Map<String, Value>) -> Result<u64> {
    let from_config = match config.remove("seed") {
        None => 0,
        Some(v) => v.as_u64().ok_or_else(|| Error::Config(format!("seed must be a non-negative integer, got {v}")))?,
    };
    match std::env::var(SEED_ENV) {
        Ok(s) => s.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={s:?} is not an integer"))),
        Err(_) => Ok(from_config),
    }
}

// ------------------------------------------------------------- experiments

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct DiskOracleConfig {
    radius: f64,
    bc: String,
    count: usize,
}

impl Default for DiskOracleConfig {
    fn default() -> Self {
        Self { radius: 1.0, bc: "dirichlet".into(), count: 10 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SolveConfig {
    curve: Value,
    bc: String,
    h: f64,
    count: usize,
    nodes: usize,
    dump_mesh: bool,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self { curve: default_curve(), bc: "dirichlet".into(), h: 0.05, count: 6, nodes: 256, dump_mesh: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FdCheckConfig {
    curve: Value,
    /// lambda_dirichlet | lambda_neumann | j2 | j3
    quantity: String,
    /// eigenpair index; defaults to the first Dirichlet mode, the first
    /// simple nonconstant Neumann mode for eigenvalues, and the most
    /// constant-trace Neumann mode for J2
    mode: Option<usize>,
    gamma: f64,
    /// Fourier coefficients [a0, a1, b1, a2, b2, ...] of α
    alpha: Vec<f64>,
    random_alpha: usize,
    t: f64,
    h: f64,
    /// maximum accepted relative gap (no check when absent)
    max_gap: Option<f64>,
}

impl Default for FdCheckConfig {
    fn default() -> Self {
        Self {
            curve: default_curve(),
            quantity: "lambda_dirichlet".into(),
            mode: None,
            gamma: 0.0,
            alpha: vec![1.0],
            random_alpha: 0,
            t: 1e-3,
            h: 0.05,
            max_gap: Some(0.02),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SchifferConfig {
    curve: Value,
    h: f64,
    max_neumann: Option<f64>,
    max_dirichlet: Option<f64>,
    min_neumann: Option<f64>,
    min_dirichlet: Option<f64>,
}

impl Default for SchifferConfig {
    fn default() -> Self {
        Self {
            curve: default_curve(),
            h: 0.05,
            max_neumann: None,
            max_dirichlet: None,
            min_neumann: None,
            min_dirichlet: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct MonotonicityConfig {
    radii: Vec<f64>,
    /// mesh size relative to the radius
    h_factor: f64,
    tol: f64,
}

impl Default for MonotonicityConfig {
    fn default() -> Self {
        Self { radii: vec![0.5, 0.75, 1.0, 1.25], h_factor: 0.05, tol: 0.01 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct FlowExperimentConfig {
    curve: Value,
    functional: String,
    /// defaults to the disk-critical value for the area
    gamma: Option<f64>,
    metric: String,
    #[serde(rename = "A")]
    a: f64,
    s0: f64,
    max_iter: usize,
    tol: f64,
    area: f64,
    harmonics: usize,
    h: f64,
    remesh_every: usize,
    /// Neumann mode index for J2
    mode: usize,
    max_disk_defect: Option<f64>,
}

impl Default for FlowExperimentConfig {
    fn default() -> Self {
        Self {
            curve: json!({"kind": "perturbed-disk"}),
            functional: "j3".into(),
            gamma: None,
            metric: "ga".into(),
            a: 0.0,
            s0: 0.1,
            max_iter: 200,
            tol: 1e-3,
            area: PI,
            harmonics: 8,
            h: 0.08,
            remesh_every: 0,
            mode: 5,
            max_disk_defect: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct HessianConfig {
    curve: Value,
    functional: String,
    /// defaults to the value making the boundary density mean zero
    gamma: Option<f64>,
    #[serde(rename = "A")]
    a: f64,
    /// "+1", "-1" or "both"
    convention: String,
    /// "radial" or "rotation"
    field: String,
    t: f64,
    h: f64,
    /// Neumann mode index for J2 (defaults to the most constant trace)
    mode: Option<usize>,
    /// seeded α draws for the positivity bound
    samples: usize,
    max_gap: Option<f64>,
    min_positivity: Option<f64>,
}

impl Default for HessianConfig {
    fn default() -> Self {
        Self {
            curve: default_curve(),
            functional: "j2".into(),
            gamma: None,
            a: 1.0,
            convention: "both".into(),
            field: "radial".into(),
            t: 1e-2,
            h: 0.04,
            mode: None,
            samples: 20,
            max_gap: None,
            min_positivity: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SymmetryConfig {
    curve: Value,
    directions: usize,
    /// true: the predicate holds in every direction; false: it fails in at
    /// least one
    expect_p0: Option<bool>,
}

impl Default for SymmetryConfig {
    fn default() -> Self {
        Self { curve: default_curve(), directions: 16, expect_p0: None }
    }
}

/// Parses and validates `config` for experiment `id` without touching the
/// filesystem. Returns the resolved config (defaults filled in) and seed.
pub fn resolve_config(id: ExperimentId, config: Value) -> Result<(Value, u64)> {
    let mut map = match config {
        Value::Object(m) => m,
        Value::Null => serde_json::Map::new(),
        other => return Err(Error::Config(format!("config must be a JSON object, got {other}"))),
    };
    if let Some(v) = map.remove("experiment") {
        if v.as_str() != Some(id.label()) {
            return Err(Error::Config(format!("config is for experiment {v}, not {}", id.label())));
        }
    }
    let seed = resolve_seed(&mut map)?;
    let value = Value::Object(map);
    let resolved = match id {
        ExperimentId::DiskOracle => serde_json::to_value(from_config::<DiskOracleConfig>(value)?),
        ExperimentId::Solve => serde_json::to_value(from_config::<SolveConfig>(value)?),
        ExperimentId::FdCheck => serde_json::to_value(from_config::<FdCheckConfig>(value)?),
        ExperimentId::SchifferCheck => serde_json::to_value(from_config::<SchifferConfig>(value)?),
        ExperimentId::Monotonicity => serde_json::to_value(from_config::<MonotonicityConfig>(value)?),
        ExperimentId::Flow => serde_json::to_value(from_config::<FlowExperimentConfig>(value)?),
        ExperimentId::HessianCheck => serde_json::to_value(from_config::<HessianConfig>(value)?),
        ExperimentId::SymmetryCheck => serde_json::to_value(from_config::<SymmetryConfig>(value)?),
    }?;
    Ok((resolved, seed))
}

/// Runs experiment `id`, writing artifacts and `manifest.json` into `out`.
/// Configuration problems are reported before any file is created.
pub fn run_experiment(id: ExperimentId, config: Value, out: &Path) -> Result<Outcome> {
    let started = Instant::now();
    let (resolved, seed) = resolve_config(id, config)?;
    let ctx = Context { seed };
    // curve problems are configuration problems; surface them before writing
    if let Some(curve) = resolved.get("curve") {
        parse_curve(curve, seed)?;
    }
    let mut writer = Writer { dir: out.to_path_buf(), files: Vec::new() };
    let mut extra = BTreeMap::new();
    let checks = match id {
        ExperimentId::DiskOracle => disk_oracle(&ctx, from_config(resolved.clone())?, &mut writer)?,
        ExperimentId::Solve => solve(&ctx, from_config(resolved.clone())?, &mut writer)?,
        ExperimentId::FdCheck => fd_check(&ctx, from_config(resolved.clone())?, &mut writer)?,
        ExperimentId::SchifferCheck => schiffer_check(&ctx, from_config(resolved.clone())?, &mut writer, &mut extra)?,
        ExperimentId::Monotonicity => monotonicity(&ctx, from_config(resolved.clone())?, &mut writer)?,
        ExperimentId::Flow => flow(&ctx, from_config(resolved.clone())?, &mut writer, &mut extra)?,
        ExperimentId::HessianCheck => hessian_check(&ctx, from_config(resolved.clone())?, &mut writer, &mut extra)?,
        ExperimentId::SymmetryCheck => symmetry_check(&ctx, from_config(resolved.clone())?, &mut writer, &mut extra)?,
    };
    let mut files = Vec::new();
    for path in &writer.files {
        let bytes = fs::read(path)?;
        files.push(json!({
            "name": path.file_name().and_then(|n| n.to_str()).unwrap_or_default(),
            "bytes": bytes.len(),
            "sha256": sha256_hex(&bytes),
        }));
    }
    let manifest = json!({
        "experiment": id.label(),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": resolved,
        "wall_time_seconds": started.elapsed().as_secs_f64(),
        "files": files,
        "checks": checks,
        "passed": checks.iter().all(|c| c.passed),
        "extra": extra,
    });
    writer.write("manifest.json", &serde_json::to_string_pretty(&manifest)?)?;
    Ok(Outcome { files: writer.files, checks, manifest })
}

struct Context {
    seed: u64,
}

impl Context {
    fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

fn disk_oracle(_: &Context, cfg: DiskOracleConfig, w: &mut Writer) -> Result<Vec<Check>> {
    let bc = parse_bc(&cfg.bc)?;
    if !(cfg.radius > 0.0) || cfg.count == 0 {
        return Err(Error::Config("radius and count must be positive".into()));
    }
    let mut table = Table::new(&["n", "m", "kind", "root", "eigenvalue"]);
    for e in disk_spectrum(cfg.radius, bc, cfg.count)? {
        table.push(vec![e.n.into(), e.m.into(), bc.root_kind().label().into(), e.root.into(), e.lambda.into()]);
    }
    w.table("disk_oracle.csv", &table)?;
    Ok(Vec::new())
}

fn mesh_dump(pairs: &[EigenPair]) -> String {
    let mesh = &pairs[0].domain.mesh;
    let mut s = String::new();
    s.push_str(&format!("POINTS {}\n", mesh.vertex_count()));
    for p in &mesh.vertices {
        s.push_str(&format!("{:.16e} {:.16e}\n", p[0], p[1]));
    }
    s.push_str(&format!("TRIANGLES {}\n", mesh.triangles.len()));
    for t in &mesh.triangles {
        s.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
    }
    for (k, e) in pairs.iter().enumerate() {
        s.push_str(&format!("FIELD u{k} lambda {:.16e}\n", e.lambda));
        for v in &e.values {
            s.push_str(&format!("{v:.16e}\n"));
        }
    }
    s
}

fn solve(ctx: &Context, cfg: SolveConfig, w: &mut Writer) -> Result<Vec<Check>> {
    let bc = parse_bc(&cfg.bc)?;
    let curve = parse_curve(&cfg.curve, ctx.seed)?;
    let domain = Domain::with_nodes(curve, cfg.h, cfg.nodes)?;
    let pairs = solve_eigs(&domain, bc, cfg.count)?;
    let mut table = Table::new(&["index", "lambda"]);
    for (i, e) in pairs.iter().enumerate() {
        table.push(vec![i.into(), e.lambda.into()]);
    }
    w.table("eigenvalues.csv", &table)?;
    if cfg.dump_mesh {
        w.write("mesh.txt", &mesh_dump(&pairs))?;
    }
    Ok(Vec::new())
}

/// Index of the Neumann mode (among the first six nonconstant) whose trace
/// is closest to constant.
fn witness_mode(domain: &Arc<Domain>) -> Result<usize> {
    Ok(schiffer_residuals(domain)?.neumann.mode)
}

/// First nonconstant Neumann mode whose eigenvalue is simple.
fn first_simple_neumann(domain: &Arc<Domain>) -> Result<usize> {
    let pairs = solve_eigs(domain, BoundaryCondition::Neumann, 12)?;
    let gap = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-12);
    (1..pairs.len() - 1)
        .find(|&i| gap(pairs[i].lambda, pairs[i - 1].lambda) > 1e-3 && gap(pairs[i + 1].lambda, pairs[i].lambda) > 1e-3)
        .ok_or_else(|| Error::SolverDivergence("no simple Neumann eigenvalue among the first 12".into()))
}

fn fd_check(ctx: &Context, cfg: FdCheckConfig, w: &mut Writer) -> Result<Vec<Check>> {
    let curve = parse_curve(&cfg.curve, ctx.seed)?;
    if !(1e-4..=1e-2).contains(&cfg.t) {
        return Err(Error::Config(format!("t = {} must lie in [1e-4, 1e-2]", cfg.t)));
    }
    if cfg.alpha.is_empty() {
        return Err(Error::Config("alpha needs at least one coefficient".into()));
    }
    let domain = Domain::new(curve, cfg.h)?;
    let nodes = domain.nodes();
    let (bc, quantity) = match cfg.quantity.as_str() {
        "lambda_dirichlet" => (BoundaryCondition::Dirichlet, FdQuantity::Lambda),
        "lambda_neumann" => (BoundaryCondition::Neumann, FdQuantity::Lambda),
        "j2" => (BoundaryCondition::Neumann, FdQuantity::J2 { gamma: cfg.gamma }),
        "j3" => (BoundaryCondition::Dirichlet, FdQuantity::J3 { gamma: cfg.gamma }),
        other => return Err(Error::Config(format!("unknown quantity {other:?}"))),
    };
    let mode = match (cfg.mode, bc, quantity) {
        (Some(m), _, _) => m,
        (None, BoundaryCondition::Dirichlet, _) => 0,
        (None, _, FdQuantity::J2 { .. }) => witness_mode(&domain)?,
        (None, _, _) => first_simple_neumann(&domain)?,
    };
    let eig = solve_eigs(&domain, bc, mode + 1)?.remove(mode);

    let mut fields = vec![("given".to_string(), BoundaryScalar::from_fourier(nodes, &cfg.alpha))];
    let mut rng = ctx.rng();
    for k in 0..cfg.random_alpha {
        fields.push((format!("random{k}"), random_alpha(&mut rng, nodes).1));
    }
    let mut table = Table::new(&[
        "alpha",
        "mode",
        "lambda",
        "formula_value",
        "half_variant",
        "fd_value",
        "rel_gap",
        "half_ratio",
    ]);
    let mut worst: f64 = 0.0;
    for (name, alpha) in &fields {
        // the −½ weight variant exists for the Dirichlet-type quantities only
        let (formula, half) = match (cfg.quantity.as_str(), quantity) {
            ("lambda_dirichlet", _) => {
                let r = dj_dirichlet(&eig, alpha)?;
                (r.value, r.alternate_value())
            }
            ("lambda_neumann", _) => (dlambda_neumann(std::slice::from_ref(&eig), alpha)?.value, None),
            (_, FdQuantity::J2 { gamma }) => (dj2_reduced(&eig, gamma, alpha)?.value, None),
            (_, FdQuantity::J3 { gamma }) => {
                let r = dj3(&eig, gamma, alpha)?;
                (r.alternate_value().unwrap_or(r.value), Some(r.value))
            }
            _ => unreachable!("quantity validated above"),
        };
        let fd = fd_shape_derivative(&eig, alpha, quantity, cfg.t)?;
        let gap = crate::shape::relative_gap(formula, fd);
        worst = worst.max(gap);
        table.push(vec![
            name.as_str().into(),
            mode.into(),
            eig.lambda.into(),
            formula.into(),
            half.into(),
            fd.into(),
            gap.into(),
            half.map(|v| v / fd).into(),
        ]);
    }
    w.table("fd_check.csv", &table)?;
    Ok(cfg
        .max_gap
        .map(|limit| vec![Check::new("fd_gap", worst <= limit, format!("worst relative gap {worst:.3e} vs {limit}"))])
        .unwrap_or_default())
}

fn schiffer_check(
    ctx: &Context,
    cfg: SchifferConfig,
    w: &mut Writer,
    extra: &mut BTreeMap<String, Value>,
) -> Result<Vec<Check>> {
    let curve = parse_curve(&cfg.curve, ctx.seed)?;
    let domain = Domain::new(curve, cfg.h)?;
    let r = schiffer_residuals(&domain)?;
    let mut table = Table::new(&["problem", "residual", "witness_mode", "lambda", "mean"]);
    table.push(vec![
        "neumann_constant_trace".into(),
        r.neumann.residual.into(),
        r.neumann.mode.into(),
        r.neumann.lambda.into(),
        r.neumann.mean.into(),
    ]);
    table.push(vec![
        "dirichlet_constant_flux".into(),
        r.dirichlet.residual.into(),
        r.dirichlet.mode.into(),
        r.dirichlet.lambda.into(),
        r.dirichlet.mean.into(),
    ]);
    w.table("schiffer.csv", &table)?;
    extra.insert("neumann_witness_mode".into(), json!(r.neumann.mode));
    extra.insert("dirichlet_witness_mode".into(), json!(r.dirichlet.mode));
    let mut checks = Vec::new();
    let bound = |name: &str, value: f64, limit: Option<f64>, below: bool| {
        limit.map(|l| {
            let ok = if below { value < l } else { value > l };
            Check::new(name, ok, format!("{value:.4e} {} {l}", if below { "<" } else { ">" }))
        })
    };
    checks.extend(bound("neumann_residual_max", r.neumann.residual, cfg.max_neumann, true));
    checks.extend(bound("dirichlet_residual_max", r.dirichlet.residual, cfg.max_dirichlet, true));
    checks.extend(bound("neumann_residual_min", r.neumann.residual, cfg.min_neumann, false));
    checks.extend(bound("dirichlet_residual_min", r.dirichlet.residual, cfg.min_dirichlet, false));
    Ok(checks)
}

fn monotonicity(_: &Context, cfg: MonotonicityConfig, w: &mut Writer) -> Result<Vec<Check>> {
    if cfg.radii.is_empty() || cfg.radii.iter().any(|r| !(*r > 0.0)) || !(cfg.h_factor > 0.0) {
        return Err(Error::Config("radii and h_factor must be positive".into()));
    }
    let mut table = Table::new(&["R", "lambda_fem", "lambda_oracle", "rel_error"]);
    let mut fem = Vec::new();
    let mut worst: f64 = 0.0;
    for &r in &cfg.radii {
        let domain = Domain::new(FourierCurve::circle([0.0, 0.0], r), cfg.h_factor * r)?;
        let eig = solve_eigs(&domain, BoundaryCondition::Dirichlet, 1)?.remove(0);
        let value = optimality_residual(&eig)?.lambda;
        let oracle = lambda_disk(r);
        let err = (value - oracle).abs() / oracle;
        worst = worst.max(err);
        fem.push(value);
        table.push(vec![r.into(), value.into(), oracle.into(), err.into()]);
    }
    w.table("monotonicity.csv", &table)?;
    let mut order: Vec<usize> = (0..cfg.radii.len()).collect();
    order.sort_by(|&a, &b| cfg.radii[a].total_cmp(&cfg.radii[b]));
    let decreasing = order.windows(2).all(|p| fem[p[0]] > fem[p[1]]);
    Ok(vec![
        Check::new("strictly_decreasing", decreasing, format!("{fem:?}")),
        Check::new("matches_closed_form", worst <= cfg.tol, format!("worst relative error {worst:.3e} vs {}", cfg.tol)),
    ])
}

fn parse_functional(name: &str, gamma: f64) -> Result<Functional> {
    match name {
        "j2" => Ok(Functional::J2 { gamma }),
        "j3" => Ok(Functional::J3 { gamma }),
        other => Err(Error::Config(format!("unknown functional {other:?}"))),
    }
}

fn flow(ctx: &Context, cfg: FlowExperimentConfig, w: &mut Writer, extra: &mut BTreeMap<String, Value>) -> Result<Vec<Check>> {
    let curve = parse_curve(&cfg.curve, ctx.seed)?;
    let radius = (cfg.area / PI).sqrt();
    let gamma = match (cfg.gamma, cfg.functional.as_str()) {
        (Some(g), _) => g,
        (None, "j3") => 0.5 * lambda_disk(radius).powi(2),
        // disk-critical J2 weight: minus the squared peak-normalized trace
        (None, _) => -crate::bessel::bessel_j(0, crate::bessel::bessel_root(1, 1, crate::bessel::RootKind::Function)?)
            .powi(2),
    };
    let config = FlowConfig {
        functional: parse_functional(&cfg.functional, gamma)?,
        metric: MetricSpec::new(cfg.metric.parse::<MetricKind>()?, cfg.a)?,
        s0: cfg.s0,
        max_iterations: cfg.max_iter,
        tol: cfg.tol,
        area: cfg.area,
        harmonics: cfg.harmonics,
        h: cfg.h,
        remesh_every: cfg.remesh_every,
    };
    config.validate()?;
    let run = run_flow(&curve, &config, cfg.mode)?;
    let states = &run.states;
    let data = emit_plot_data(&[
        ("iter", states.iter().map(|s| s.iteration as f64).collect()),
        ("J", states.iter().map(|s| s.value).collect()),
        ("grad_norm", states.iter().map(|s| s.grad_norm).collect()),
        ("disk_defect", states.iter().map(|s| s.disk_defect).collect()),
        ("step", states.iter().map(|s| s.step).collect()),
    ])?;
    w.write("flow.csv", &data)?;
    let last = states.last().expect("flow has an initial state");
    w.write("final_curve.json", &last.curve.to_json_string())?;

    let monotone = states.windows(2).all(|p| p[1].value < p[0].value);
    let area_err = states.iter().map(|s| (s.curve.area() - cfg.area).abs()).fold(0.0, f64::max);
    extra.insert("termination".into(), json!(run.verdict.termination.label()));
    extra.insert("gamma".into(), json!(gamma));
    extra.insert("final_disk_defect".into(), json!(run.verdict.disk_defect));
    extra.insert("neumann_residual".into(), json!(run.verdict.schiffer.neumann.residual));
    extra.insert("dirichlet_residual".into(), json!(run.verdict.schiffer.dirichlet.residual));
    if let Some(o) = run.verdict.optimality {
        extra.insert("optimality_deviation".into(), json!(o.deviation));
    }
    extra.insert("convex_iterates".into(), json!(states.iter().all(|s| s.convex)));
    let mut checks = vec![
        Check::new("monotone_descent", monotone, format!("{} iterates", states.len())),
        Check::new("area_preserved", area_err <= 1e-8, format!("max area error {area_err:.3e}")),
    ];
    if let Some(limit) = cfg.max_disk_defect {
        checks.push(Check::new(
            "disk_defect",
            run.verdict.disk_defect < limit,
            format!("{:.4e} < {limit}", run.verdict.disk_defect),
        ));
    }
    Ok(checks)
}

fn hessian_check(
    ctx: &Context,
    cfg: HessianConfig,
    w: &mut Writer,
    extra: &mut BTreeMap<String, Value>,
) -> Result<Vec<Check>> {
    let curve = parse_curve(&cfg.curve, ctx.seed)?;
    let domain = Domain::new(curve, cfg.h)?;
    let frame = &domain.frame;
    let field = match cfg.field.as_str() {
        "radial" => AmbientField::radial(),
        "rotation" => AmbientField::rotation(),
        other => return Err(Error::Config(format!("unknown field {other:?}"))),
    };
    let conventions: Vec<f64> = match cfg.convention.as_str() {
        "+1" | "1" => vec![1.0],
        "-1" => vec![-1.0],
        "both" => vec![1.0, -1.0],
        other => return Err(Error::Config(format!("convention must be +1, -1 or both, got {other:?}"))),
    };
    let (eig, gamma, functional) = match cfg.functional.as_str() {
        "j2" => {
            let mode = match cfg.mode {
                Some(m) => m,
                None => witness_mode(&domain)?,
            };
            let eig = solve_eigs(&domain, BoundaryCondition::Neumann, mode + 1)?.remove(mode);
            let u = peak_normalized(&eig);
            let mean_sq = frame.inner(&u.trace, &u.trace) / frame.length();
            let gamma = cfg.gamma.unwrap_or(-mean_sq);
            (eig, gamma, Functional::J2 { gamma })
        }
        "j3" => {
            let eig = solve_eigs(&domain, BoundaryCondition::Dirichlet, 1)?.remove(0);
            let gamma = cfg.gamma.unwrap_or(-optimality_residual(&eig)?.tau);
            (eig, gamma, Functional::J3 { gamma })
        }
        other => return Err(Error::Config(format!("unknown functional {other:?}"))),
    };
    let density_max = functional.density(&eig)?.max_abs();

    let mut table = Table::new(&["functional", "gamma", "lhs", "rhs", "gap", "convention"]);
    let mut results = Vec::new();
    for &s in &conventions {
        let c = connection_identity_check(&eig, functional, &field, cfg.a, s, cfg.t)?;
        table.push(vec![
            functional.label().into(),
            gamma.into(),
            c.lhs.into(),
            c.rhs.into(),
            c.gap.into(),
            Cell::Int(s as i64),
        ]);
        results.push(c);
    }
    w.table("hessian.csv", &table)?;
    let best = results.iter().min_by(|a, b| a.gap.total_cmp(&b.gap)).expect("at least one convention");
    extra.insert("winning_convention".into(), json!(best.convention as i64));
    extra.insert("winning_gap".into(), json!(best.gap));
    extra.insert("density_max".into(), json!(density_max));

    // positivity of the quadratic form relative to u²‖α‖² with s = +1
    let form = hessian_form(&eig, functional, 1.0)?;
    let weight = match functional {
        Functional::J2 { .. } => {
            let u = peak_normalized(&eig);
            frame.inner(&u.trace, &u.trace) / frame.length()
        }
        Functional::J3 { .. } => 1.0,
    };
    let mut rng = ctx.rng();
    let mut positivity = Table::new(&["sample", "hessian", "weighted_norm", "ratio"]);
    let mut worst = f64::INFINITY;
    for k in 0..cfg.samples {
        let (_, alpha) = random_alpha(&mut rng, frame.nodes());
        let hess = form.evaluate(frame, &alpha, &alpha)?;
        let norm = weight * frame.inner(&alpha, &alpha);
        worst = worst.min(hess / norm);
        positivity.push(vec![k.into(), hess.into(), norm.into(), (hess / norm).into()]);
    }
    w.table("positivity.csv", &positivity)?;
    extra.insert("min_positivity_ratio".into(), json!(if cfg.samples > 0 { worst } else { f64::NAN }));

    let mut checks = Vec::new();
    if let Some(limit) = cfg.max_gap {
        checks.push(Check::new("connection_gap", best.gap < limit, format!("{:.3e} < {limit}", best.gap)));
    }
    if let Some(limit) = cfg.min_positivity {
        checks.push(Check::new("hessian_positivity", worst >= limit, format!("{worst:.4} >= {limit}")));
    }
    Ok(checks)
}

fn symmetry_check(
    ctx: &Context,
    cfg: SymmetryConfig,
    w: &mut Writer,
    extra: &mut BTreeMap<String, Value>,
) -> Result<Vec<Check>> {
    let curve = parse_curve(&cfg.curve, ctx.seed)?;
    if cfg.directions == 0 {
        return Err(Error::Config("directions must be positive".into()));
    }
    let mut table = Table::new(&["index", "ex", "ey", "p0", "violation_level", "symmetry_defect"]);
    let mut all = true;
    for k in 0..cfg.directions {
        let e = test_direction(k, cfg.directions);
        let p0 = curve.p0_predicate(e)?;
        all &= p0.holds;
        table.push(vec![
            k.into(),
            e[0].into(),
            e[1].into(),
            p0.holds.into(),
            p0.violation.map(|v| v.level).into(),
            curve.symmetry_defect(e)?.into(),
        ]);
    }
    w.table("symmetry.csv", &table)?;
    let fit = curve.disk_defect();
    let frame = curve.frame(crate::curve::DEFAULT_NODES.max((4 * (curve.harmonics_max() + 1)).next_power_of_two()))?;
    let turning = frame.integrate(&frame.curvature_field());
    extra.insert("disk_defect".into(), json!(fit.defect));
    extra.insert("disk_center".into(), json!(fit.center));
    extra.insert("disk_radius".into(), json!(fit.radius));
    extra.insert("total_curvature".into(), json!(turning));
    let mut checks = vec![Check::new(
        "turning_number",
        (turning - 2.0 * PI).abs() < 1e-6,
        format!("total curvature {turning:.12}"),
    )];
    if let Some(expect) = cfg.expect_p0 {
        let ok = if expect { all } else { !all };
        checks.push(Check::new("p0", ok, format!("expected {expect} in every direction, got all true: {all}")));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plot_data_shapes() {
        let two = emit_plot_data(&[("a", vec![1.0, 2.0, 3.0]), ("b", vec![4.0, 5.0, 6.0])]).unwrap();
        assert_eq!(two.lines().count(), 4);
        assert!(two.contains("\r\n"));
        assert!(two.starts_with("a,b\r\n1.0000000000000000e0,4.0000000000000000e0\r\n"));
        let empty = emit_plot_data(&[("a", vec![]), ("b", vec![])]).unwrap();
        assert_eq!(empty, "a,b\r\n");
        let bad = emit_plot_data(&[("a", vec![1.0]), ("b", vec![])]);
        assert!(matches!(bad, Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let r = resolve_config(ExperimentId::Monotonicity, json!({"foo": 1}));
        assert!(matches!(r, Err(Error::Config(_))));
        let r = resolve_config(ExperimentId::Solve, json!({"experiment": "flow"}));
        assert!(matches!(r, Err(Error::Config(_))));
        let (v, _) = resolve_config(ExperimentId::Solve, json!({"experiment": "solve", "h": 0.1})).unwrap();
        assert_eq!(v["h"], json!(0.1));
    }

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(Cell::Float(0.1).render(), "1.0000000000000001e-1");
        assert_eq!(Cell::Float(-PI).render().parse::<f64>().unwrap(), -PI);
    }

    #[test]
    fn curve_specs() {
        let c = parse_curve(&json!({"kind": "ellipse", "a": 2.0, "b": 1.0}), 0).unwrap();
        assert!((c.area() - 2.0 * PI).abs() < 1e-12);
        let p = parse_curve(&json!({"kind": "perturbed-disk"}), 3).unwrap();
        assert!((p.area() - PI).abs() < 1e-12);
        assert_eq!(p, parse_curve(&json!({"kind": "perturbed-disk"}), 3).unwrap());
        assert!(parse_curve(&json!({"kind": "square"}), 0).is_err());
        assert!(parse_curve(&json!(3), 0).is_err());
    }
}
