//! The `curvkit` command line: argument parsing, configuration layering,
//! orchestration and machine-readable reports.
//!
//! Settings are resolved flag → environment (`CURVKIT_BUDGET`) → config file
//! → spec-file budgets → built-in defaults.  Reports are JSON with sorted
//! keys; `--format csv` prints the report's tables instead.

use crate::curvature::{self, check_cg, check_cj, check_cy, normal_form, CurvatureError, CurvatureVerdict, GammaFamily, NormalFormOutcome};
use crate::freegeom::{lift_free, FreeGeomError};
use crate::nilpotent::{NilpotentAlgebra, NilpotentError};
use crate::oplab::{self, BuildConfig, Grid, Interp, KernelSpec, NumericGamma, OplabError};
use crate::spec::{parse_rationals, parse_spec, FamilySpec, SpecError};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {msg}")]
    Io { path: String, msg: String },
    #[error("config: {0}")]
    Config(String),
    #[error("spec: {0}")]
    Spec(#[from] SpecError),
    #[error(transparent)]
    Curvature(#[from] CurvatureError),
    #[error(transparent)]
    Nilpotent(#[from] NilpotentError),
    #[error(transparent)]
    Geometry(#[from] FreeGeomError),
    #[error(transparent)]
    Oplab(#[from] OplabError),
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Parser, Debug)]
#[command(name = "curvkit", version, about = "Curvature checks, free nilpotent lifts and Radon-transform experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Weighted degree / jet order for the bracket conditions (step for `nilpotent`).
    #[arg(long, global = true)]
    pub order: Option<u32>,
    /// Number of iterates r for the Jacobian condition (default: n).
    #[arg(long, global = true)]
    pub iterates: Option<usize>,
    /// τ-degree budget for the Jacobian condition and the normal form.
    #[arg(long, global = true, env = "CURVKIT_BUDGET")]
    pub budget: Option<u32>,
    /// Grid points per axis for oplab experiments (power of two).
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// TOML file with any of the flags above plus an `[oplab]` table.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Curvature verdicts and certificates for a family (spec file or built-in name).
    Check {
        spec: String,
        /// Override the base point, e.g. `0,1`.
        #[arg(long)]
        base: Option<String>,
    },
    /// Dump the free nilpotent Lie algebra on `p` generators (step = --order).
    Nilpotent {
        p: usize,
        /// Generator degrees, comma separated (default all 1).
        #[arg(long, value_delimiter = ',')]
        degrees: Option<Vec<u32>>,
    },
    /// Free lift of a family's bracket generators (step = --order).
    Lift {
        spec: String,
        #[arg(long)]
        base: Option<String>,
    },
    /// Run a named numeric experiment.
    Oplab { experiment: Experiment },
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Symbol,
    Decay,
    Maximal,
    Mollifier,
    Smoothing,
    Vdc,
    Pushforward,
}

/// Experiment parameters (the `[oplab]` table of a config file).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct OplabSettings {
    pub side: f64,
    pub jmax: u32,
    pub kernel_a: f64,
    pub interp: Interp,
    pub samples: usize,
    pub bins: usize,
    pub mass_bins: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub lambda_count: usize,
    pub vdc_powers: Vec<u32>,
    pub s_list: Vec<f64>,
    pub delta_list: Vec<f64>,
    pub n_aniso: u32,
    pub smoothing_a: f64,
    pub mollifier_point: Vec<f64>,
}

impl Default for OplabSettings {
    fn default() -> Self {
        OplabSettings {
            side: 1.0,
            jmax: 6,
            kernel_a: 0.5,
            interp: Interp::Cubic,
            samples: 1_000_000,
            bins: 1024,
            mass_bins: 200,
            lambda_min: 1e2,
            lambda_max: 1e5,
            lambda_count: 13,
            vdc_powers: vec![1, 2, 3],
            s_list: vec![0.1, 0.5],
            delta_list: (1..=6).map(|i| 2f64.powi(-i)).collect(),
            n_aniso: 3,
            smoothing_a: 0.25,
            mollifier_point: vec![0.6, 0.3],
        }
    }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    order: Option<u32>,
    iterates: Option<usize>,
    budget: Option<u32>,
    grid: Option<usize>,
    seed: Option<u64>,
    format: Option<Format>,
    normal_form_steps: Option<usize>,
    #[serde(default)]
    oplab: OplabSettings,
}

pub const DEFAULT_ORDER: u32 = 4;
pub const DEFAULT_BUDGET: u32 = 6;
pub const DEFAULT_GRID: usize = 256;

/// Fully resolved settings; recorded in every report.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Settings {
    pub order: u32,
    pub iterates: Option<usize>,
    pub budget: u32,
    pub grid: usize,
    pub seed: u64,
    pub format: Format,
    /// Step cap for the normal-form iteration (config file only).
    pub normal_form_steps: Option<usize>,
    /// Only recorded for `oplab` runs.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oplab: Option<OplabSettings>,
}

#[derive(Clone, Copy, Debug, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Complete,
    /// Budget-limited: nothing certified either way.
    Inconclusive,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Complete => 0,
            Status::Inconclusive => 2,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }
    fn push(&mut self, row: Vec<Value>) {
        self.rows.push(row);
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Canonical input text (spec or experiment description).
    pub input: String,
    pub input_digest: String,
    pub settings: Settings,
    pub status: Status,
    pub results: Value,
    pub tables: Vec<Table>,
}

impl Report {
    /// Pretty JSON with sorted keys.
    pub fn to_json(&self) -> String {
        // serde_json's map is ordered by key, so going through `Value` sorts
        let v = serde_json::to_value(self).expect("report serialises");
        serde_json::to_string_pretty(&v).expect("report serialises") + "\n"
    }

    /// Every table as CSV, separated by `# name` lines.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for t in &self.tables {
            out.push_str(&format!("# {}\n", t.name));
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&t.columns).expect("in-memory write");
            for r in &t.rows {
                w.write_record(r.iter().map(cell)).expect("in-memory write");
            }
            out.push_str(&String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8"));
        }
        out
    }

    pub fn render(&self) -> String {
        match self.settings.format {
            Format::Json => self.to_json(),
            Format::Csv => self.to_csv(),
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

fn digest(text: &str) -> String {
    let h = Sha256::digest(text.as_bytes());
    h.iter().map(|b| format!("{b:02x}")).collect()
}

/// Layer flags, environment, config file and defaults.
pub fn resolve_settings(cli: &Cli, spec: Option<&FamilySpec>) -> Result<Settings, CliError> {
    let file = match &cli.config {
        Some(path) => {
            let text = read(path)?;
            toml::from_str::<FileConfig>(&text).map_err(|e| CliError::Config(e.to_string()))?
        }
        None => FileConfig::default(),
    };
    let sb = spec.map(|s| s.budgets.clone()).unwrap_or_default();
    let grid = cli.grid.or(file.grid).unwrap_or(DEFAULT_GRID);
    if !grid.is_power_of_two() {
        return Err(CliError::Usage(format!("--grid {grid} is not a power of two")));
    }
    Ok(Settings {
        order: cli.order.or(file.order).or(sb.order).unwrap_or(DEFAULT_ORDER),
        iterates: cli.iterates.or(file.iterates).or(sb.iterates),
        budget: cli.budget.or(file.budget).or(sb.budget).unwrap_or(DEFAULT_BUDGET),
        grid,
        seed: cli.seed.or(file.seed).unwrap_or(0),
        format: cli.format.or(file.format).unwrap_or(Format::Json),
        normal_form_steps: file.normal_form_steps,
        oplab: matches!(cli.command, Command::Oplab { .. }).then_some(file.oplab),
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io { path: path.display().to_string(), msg: e.to_string() })
}

/// A spec file path, or the name of a built-in family.
pub fn load_spec(arg: &str, base: Option<&str>) -> Result<FamilySpec, CliError> {
    let path = Path::new(arg);
    let mut spec = if path.is_file() {
        parse_spec(&read(path)?)?
    } else if let Some((n, k, comps)) = curvature::named_components(arg) {
        let mut s = FamilySpec::from_components(n, k, comps)?;
        s.name = Some(arg.to_string());
        s
    } else {
        return Err(CliError::Usage(format!("`{arg}` is neither a spec file nor a built-in family ({})", curvature::NAMED_FAMILIES.join(", "))));
    };
    if let Some(b) = base {
        let b = parse_rationals(b)?;
        if b.len() != spec.n {
            return Err(CliError::Usage(format!("--base has {} entries, expected {}", b.len(), spec.n)));
        }
        spec.base = b;
    }
    Ok(spec)
}

/// Run a parsed command line.
pub fn execute(cli: &Cli) -> Result<Report, CliError> {
    match &cli.command {
        Command::Check { spec, base } => {
            let spec = load_spec(spec, base.as_deref())?;
            let settings = resolve_settings(cli, Some(&spec))?;
            run_check(&spec, settings)
        }
        Command::Nilpotent { p, degrees } => {
            let settings = resolve_settings(cli, None)?;
            let degrees = degrees.clone().unwrap_or_else(|| vec![1; *p]);
            run_nilpotent(*p, &degrees, settings)
        }
        Command::Lift { spec, base } => {
            let spec = load_spec(spec, base.as_deref())?;
            let settings = resolve_settings(cli, Some(&spec))?;
            run_lift(&spec, settings)
        }
        Command::Oplab { experiment } => {
            let settings = resolve_settings(cli, None)?;
            run_oplab(*experiment, settings)
        }
    }
}

fn report(command: &str, input: String, settings: Settings, status: Status, results: Value, tables: Vec<Table>) -> Report {
    Report {
        tool: "curvkit".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        input_digest: digest(&input),
        input,
        settings,
        status,
        results,
        tables,
    }
}

fn certificate_kind(v: &CurvatureVerdict) -> &'static str {
    match v.certificate {
        curvature::Certificate::None => "none",
        curvature::Certificate::Spanning { .. } => "spanning",
        curvature::Certificate::Jacobian { .. } => "jacobian",
        curvature::Certificate::InvariantManifold { .. } => "invariant_manifold",
        curvature::Certificate::Mixed { .. } => "mixed",
    }
}

fn outcome_text(v: &CurvatureVerdict) -> String {
    match v.outcome {
        curvature::Outcome::CurvedCertified => "curved".into(),
        curvature::Outcome::FlatToOrder(m) => format!("flat_to_order_{m}"),
    }
}

pub fn run_check(spec: &FamilySpec, settings: Settings) -> Result<Report, CliError> {
    let m = settings.order;
    let b = settings.budget;
    let gamma = spec.family(m.max(b) + 1)?;
    let r = settings.iterates.unwrap_or(spec.n);
    let verdicts = vec![check_cg(&gamma, m, m)?, check_cy(&gamma, m, m)?, check_cj(&gamma, r, b)?];
    let curved = verdicts.iter().any(|v| v.is_curved());
    let mut table = Table::new("verdicts", &["condition", "outcome", "certificate"]);
    for v in &verdicts {
        table.push(vec![json!(v.condition.to_string()), json!(outcome_text(v)), json!(certificate_kind(v))]);
    }
    let mut results = json!({ "curved": curved, "verdicts": verdicts });
    let mut status = Status::Complete;
    if !curved {
        let nf = normal_form(&gamma, b, settings.normal_form_steps)?;
        let cert = nf.certificate();
        let kind = match &nf.outcome {
            NormalFormOutcome::InvariantManifold => "invariant_manifold",
            NormalFormOutcome::Curved(_) => "curved",
            NormalFormOutcome::Inconclusive => "inconclusive",
        };
        table.push(vec![json!("normal_form"), json!(kind), json!(format!("q={}", nf.q))]);
        let settled = match &nf.outcome {
            NormalFormOutcome::InvariantManifold => true,
            NormalFormOutcome::Curved(v) => v.is_curved(),
            NormalFormOutcome::Inconclusive => false,
        };
        if !settled {
            status = Status::Inconclusive;
        }
        results["normal_form"] = json!({
            "outcome": nf.outcome,
            "certificate": cert,
            "steps": nf.steps,
            "transformed_family": nf.gamma.jets().iter().map(|j| j.pretty()).collect::<Vec<_>>(),
        });
    }
    Ok(report("check", spec.pretty(), settings, status, results, vec![table]))
}

pub fn run_nilpotent(p: usize, degrees: &[u32], settings: Settings) -> Result<Report, CliError> {
    if degrees.len() != p {
        return Err(CliError::Usage(format!("{} degrees for p = {p}", degrees.len())));
    }
    let m = settings.order;
    let alg = NilpotentAlgebra::build(p, degrees, m)?;
    let mut basis = Table::new("basis", &["index", "label", "degree"]);
    for (i, h) in alg.basis().iter().enumerate() {
        basis.push(vec![json!(i), json!(format!("Y{}", h.label(p))), json!(h.degree)]);
    }
    let mut brackets = Table::new("brackets", &["i", "j", "k", "coefficient"]);
    for i in 0..alg.dim() {
        for j in i + 1..alg.dim() {
            for (k, c) in alg.bracket(i, j) {
                brackets.push(vec![json!(i), json!(j), json!(k), json!(c.to_string())]);
            }
        }
    }
    let results = json!({
        "p": p,
        "degrees": degrees,
        "step": m,
        "dim": alg.dim(),
        "homogeneous_dimension": alg.homogeneous_dimension(),
        "group_law": alg.product_polynomials().iter().map(|j| j.pretty()).collect::<Vec<_>>(),
    });
    let input = format!("p = {p}\ndegrees = {degrees:?}\nstep = {m}\n");
    Ok(report("nilpotent", input, settings, Status::Complete, results, vec![basis, brackets]))
}

pub fn run_lift(spec: &FamilySpec, settings: Settings) -> Result<Report, CliError> {
    let m = settings.order;
    let gamma = spec.family(2 * m + 2)?;
    let gens = curvature::cg_generators(&gamma, m)?;
    let (kept, dropped): (Vec<_>, Vec<_>) = gens.into_iter().partition(|g| !g.2.is_zero());
    let fields: Vec<_> = kept.iter().map(|g| g.2.clone()).collect();
    let degrees: Vec<u32> = kept.iter().map(|g| g.1).collect();
    let frame = lift_free(&fields, &degrees, m)?;
    let check = frame.verify(&fields)?;
    let mut table = Table::new("lifted_fields", &["generator", "degree", "field"]);
    for (g, f) in kept.iter().zip(frame.fields()) {
        table.push(vec![json!(g.0), json!(g.1), json!(f.pretty())]);
    }
    let results = json!({
        "generators": kept.iter().map(|g| g.0.clone()).collect::<Vec<_>>(),
        "zero_generators": dropped.iter().map(|g| g.0.clone()).collect::<Vec<_>>(),
        "degrees": degrees,
        "n": spec.n,
        "d": frame.dim(),
        "check": check,
    });
    let status = if check.ok() { Status::Complete } else { Status::Inconclusive };
    Ok(report("lift", spec.pretty(), settings, status, results, vec![table]))
}

fn num(v: f64) -> Value {
    json!(v)
}

pub fn run_oplab(exp: Experiment, settings: Settings) -> Result<Report, CliError> {
    let o = settings.oplab.clone().unwrap_or_default();
    let g = settings.grid;
    let mut tables = Vec::new();
    let results = match exp {
        Experiment::Symbol => {
            let grid = Grid::new(1, 8.0, g)?;
            let k = KernelSpec::hilbert(o.kernel_a);
            let cfg = BuildConfig { interp: Interp::Spectral, margin: 0.0, psi_radius: None };
            let t = oplab::build_t(&NumericGamma::shift_1d(), &k, &grid, 24, &cfg)?;
            let m = t.symbol().expect("circulant");
            let mut tab = Table::new("symbol", &["xi", "re", "im", "abs"]);
            for (i, z) in m.iter().enumerate().take(g / 2) {
                tab.push(vec![num(grid.frequency(0, i)), num(z.re), num(z.im), num(z.norm())]);
            }
            tables.push(tab);
            let top = m[g / 2 - 1].norm();
            json!({ "family": "shift", "kernel": "hilbert", "top_frequency_abs": top, "pi_gap": (top - std::f64::consts::PI).abs() })
        }
        Experiment::Decay => {
            let grid = Grid::new(2, o.side, g)?;
            let k = KernelSpec::hilbert(o.kernel_a);
            let cfg = BuildConfig { interp: o.interp, margin: 0.0, psi_radius: None };
            let t = oplab::orthogonality_decay(&NumericGamma::parabola(), &k, &grid, o.jmax, &cfg, None)?;
            let spectral = BuildConfig { interp: Interp::Spectral, ..cfg.clone() };
            let mask = |xi: &[f64]| xi[0] == 0.0;
            let control = oplab::orthogonality_decay(&NumericGamma::line(), &k, &grid, o.jmax, &spectral, Some(&mask))?;
            let mut tab = Table::new("decay", &["i", "j", "gap", "ti_tj_star", "ti_star_tj"]);
            for r in &t.rows {
                tab.push(vec![json!(r.i), json!(r.j), json!(r.gap), num(r.ti_tj_star), num(r.ti_star_tj)]);
            }
            tables.push(tab);
            let mut gaps = Table::new("by_gap", &["gap", "parabola", "line_control"]);
            for (a, b) in t.by_gap.iter().zip(&control.by_gap) {
                gaps.push(vec![json!(a.0), num(a.1), num(b.1)]);
            }
            tables.push(gaps);
            json!({
                "family": "parabola",
                "epsilon": t.epsilon,
                "monotone_from_gap2": t.monotone_from_gap2,
                "under_resolved": t.under_resolved,
                "tj_norms": t.tj_norms,
                "interp": t.interp,
                "control_max": control.by_gap.iter().map(|p| p.1).fold(0.0, f64::max),
            })
        }
        Experiment::Maximal => {
            let grid = Grid::new(2, 4.0, g.min(128))?;
            let cfg = BuildConfig { interp: Interp::Linear, margin: 0.0, psi_radius: Some(1.0) };
            let radii = oplab::log_schedule(grid.spacing(0), o.kernel_a, 6);
            let one = vec![1.0; grid.len()];
            let c = oplab::maximal_fn(&NumericGamma::parabola(), &one, &grid, &radii, &cfg)?;
            let err = c
                .values
                .iter()
                .enumerate()
                .map(|(i, v)| (v - 2.0 * cfg_psi(&grid.coord(i))).abs())
                .fold(0.0, f64::max);
            let col = grid.sample(|x| if x[0].abs() < 0.07 && x[1].abs() < 0.07 { 1.0 } else { 0.0 });
            let p = oplab::maximal_fn(&NumericGamma::parabola(), &col, &grid, &radii, &cfg)?;
            json!({ "radii": radii, "constant_input_error": err, "column_l2_ratio": p.l2_ratio })
        }
        Experiment::Mollifier => {
            let m = oplab::Mollifier::default();
            let js: Vec<u32> = (1..=o.jmax + 2).collect();
            let mut tab = Table::new("defect", &["j", "defect"]);
            let mut d = Vec::new();
            for &j in &js {
                let v = oplab::mollifier_defect(None, &m, &o.mollifier_point, j)?;
                tab.push(vec![json!(j), num(v)]);
                d.push(v.abs());
            }
            tables.push(tab);
            let xs: Vec<f64> = js.iter().map(|&j| j as f64).collect();
            let ys: Vec<f64> = d.iter().map(|v| v.log2()).collect();
            json!({ "point": o.mollifier_point, "slope_log2": crate::fit::middle_half_slope(&xs, &ys), "mode": "euclidean" })
        }
        Experiment::Smoothing => {
            let kb = KernelSpec::bump(1, o.smoothing_a)?;
            let flat = NumericGamma::translation("flat_line", 2, 1, |t| vec![-t[0], 0.0]);
            let cfg = oplab::SmoothingConfig { s_list: o.s_list.clone(), delta_list: o.delta_list.clone(), n_aniso: o.n_aniso, ..Default::default() };
            let fr = oplab::smoothing_probe(&flat, &kb, &cfg)?;
            let ccfg = oplab::SmoothingConfig { n_aniso: 1, ..cfg };
            let cr = oplab::smoothing_probe(&NumericGamma::parabola(), &kb, &ccfg)?;
            let mut tab = Table::new("smoothing", &["family", "s", "delta", "ratio", "windowed_ratio"]);
            for (label, rep) in [("flat_line", &fr), ("parabola", &cr)] {
                for r in &rep.rows {
                    tab.push(vec![json!(label), num(r.s), num(r.delta), num(r.ratio), r.windowed_ratio.map(num).unwrap_or(Value::Null)]);
                }
            }
            tables.push(tab);
            json!({ "flat": fr.slopes, "curved": cr.slopes })
        }
        Experiment::Vdc => {
            let lambdas = oplab::log_schedule(o.lambda_min, o.lambda_max, o.lambda_count);
            let mut tab = Table::new("vdc", &["k", "lambda", "envelope"]);
            let mut fits = Vec::new();
            for &k in &o.vdc_powers {
                let f = move |t: f64| t.powi(k as i32);
                let r = oplab::vdc_decay(&f, k as f64, k, &lambdas, 8);
                for (l, e) in r.lambdas.iter().zip(&r.envelope) {
                    tab.push(vec![json!(k), num(*l), num(*e)]);
                }
                fits.push(json!({ "k": k, "exponent": r.exponent, "predicted": r.predicted }));
            }
            tables.push(tab);
            json!({ "phases": "tau^k on [0,1]", "fits": fits })
        }
        Experiment::Pushforward => {
            let cfg = oplab::PushforwardConfig { samples: o.samples, bins: o.bins, mass_bins: o.mass_bins, seed: settings.seed, ..Default::default() };
            let r = oplab::pushforward_density(&|t: &[f64]| vec![t[0] * t[0]], 1, 1, &|_| 1.0, &cfg)?;
            let l1 = oplab::l1_to_density(&r.mass_edges, &r.mass_heights, &|y: f64| y.powf(-0.5));
            let mut tab = Table::new("modulus", &["z", "omega"]);
            for (z, w) in &r.modulus {
                tab.push(vec![num(*z), num(*w)]);
            }
            tables.push(tab);
            let mut hist = Table::new("equal_mass_histogram", &["left", "right", "density"]);
            for (i, h) in r.mass_heights.iter().enumerate() {
                hist.push(vec![num(r.mass_edges[i]), num(r.mass_edges[i + 1]), num(*h)]);
            }
            tables.push(hist);
            json!({
                "map": "tau^2 on [-1,1]",
                "relative_l1": l1 / r.total_mass,
                "modulus_exponent": r.exponent,
                "degenerate": r.degenerate,
                "total_mass": r.total_mass,
            })
        }
    };
    let input = format!("oplab {}", serde_json::to_string(&exp).expect("serialises"));
    Ok(report("oplab", input, settings, Status::Complete, results, tables))
}

fn cfg_psi(x: &[f64]) -> f64 {
    oplab::chi(x.iter().map(|v| v * v).sum::<f64>().sqrt())
}

/// Parse, run and print; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(r) => {
            print!("{}", r.render());
            r.status.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// The family a report was computed for, re-parsed from its canonical input.
pub fn family_of(report: &Report) -> Result<GammaFamily, CliError> {
    Ok(parse_spec(&report.input)?.family(report.settings.order.max(report.settings.budget) + 1)?)
}
