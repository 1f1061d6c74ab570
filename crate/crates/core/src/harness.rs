//! Suite runner: fixed-order checks over every module, text and CSV reports.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cutoffs::{boundary_cutoff, interior_cutoff};
use crate::domains::{
    check_star_like, estimate_reach, lipschitz_cap, sample_lipschitz_constant, star_like_cap, Constants, DomainFile,
    DomainSpec,
};
use crate::fields::{lp_norm, partial, synth_field, synth_vector_field, Grid, ScalarField, Scheme, VectorField};
use crate::helmholtz::{epsilon_cap, project_half_space, project_whole_space};
use crate::seminorms::{ball_set, bmo_seminorm, BallPolicy};
use crate::whitney::{estimate_kstar, jones_extend, whitney_decompose, whitney_decompose_complement, Raster};
use crate::{Error, Point, Result};

/// Prefix of environment overrides, e.g. `VBMO_SEED=3`.
pub const ENV_PREFIX: &str = "VBMO_";

/// Modules in suite order.
pub const MODULES: [&str; 6] = ["fields", "domains", "cutoffs", "seminorms", "whitney", "helmholtz"];

/// Anchors each enabled module must cover.
const ANCHORS: [(&str, &[&str]); 6] = [
    ("fields", &["fields.spectral_derivative", "fields.synth_norm"]),
    ("domains", &["domains.reach", "domains.star_like", "domains.lipschitz"]),
    ("cutoffs", &["cutoffs.interior_plateau", "cutoffs.boundary_normal"]),
    ("seminorms", &["seminorms.lattice_vs_exhaustive"]),
    ("whitney", &["whitney.distance_condition", "whitney.neighbour_condition", "whitney.restriction"]),
    ("helmholtz", &["helmholtz.whole_space", "helmholtz.half_space_trace", "helmholtz.eps_cap"]),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SuiteConfig {
    /// Domain file; the flat half space when absent.
    pub domain: Option<PathBuf>,
    pub ndim: usize,
    /// Cells per axis for the grid-based checks, each at least 16.
    pub grid_sizes: Vec<usize>,
    /// Localisation scale; compared with the cap, not clamped.
    pub eps: f64,
    pub seed: u64,
    /// Random fields per check.
    pub fields: usize,
    pub constants: Constants,
    /// Enabled modules; empty runs nothing.
    pub suites: Vec<String>,
    /// Record wall-clock times (reports are then no longer reproducible).
    pub timings: bool,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            domain: None,
            ndim: 2,
            grid_sizes: vec![16, 32],
            eps: 0.05,
            seed: 1,
            fields: 4,
            constants: Constants::default(),
            suites: MODULES.iter().map(|s| s.to_string()).collect(),
            timings: false,
        }
    }
}

impl SuiteConfig {
    pub fn parse(text: &str) -> Result<SuiteConfig> {
        toml::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<SuiteConfig> {
        SuiteConfig::parse(&std::fs::read_to_string(path)?)
    }

    /// Applies `VBMO_*` overrides from `lookup` (normally `std::env::var`).
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.trim().parse().map_err(|_| Error::Config(format!("{ENV_PREFIX}{key}: cannot parse {v:?}")))
        }
        let get = |k: &str| lookup(&format!("{ENV_PREFIX}{k}"));
        if let Some(v) = get("DOMAIN") {
            self.domain = Some(PathBuf::from(v));
        }
        if let Some(v) = get("NDIM") {
            self.ndim = num("NDIM", &v)?;
        }
        if let Some(v) = get("GRID_SIZES") {
            self.grid_sizes = v.split(',').map(|s| num("GRID_SIZES", s)).collect::<Result<_>>()?;
        }
        if let Some(v) = get("EPS") {
            self.eps = num("EPS", &v)?;
        }
        if let Some(v) = get("SEED") {
            self.seed = num("SEED", &v)?;
        }
        if let Some(v) = get("FIELDS") {
            self.fields = num("FIELDS", &v)?;
        }
        if let Some(v) = get("C_STAR") {
            self.constants.c_star = num("C_STAR", &v)?;
        }
        if let Some(v) = get("C0") {
            self.constants.c0 = num("C0", &v)?;
        }
        if let Some(v) = get("C_HALF") {
            self.constants.c_half = Some(num("C_HALF", &v)?);
        }
        if let Some(v) = get("M0") {
            self.constants.m0 = num("M0", &v)?;
        }
        if let Some(v) = get("SUITES") {
            self.suites = v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect();
        }
        if let Some(v) = get("TIMINGS") {
            self.timings = num("TIMINGS", &v)?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=3).contains(&self.ndim) {
            return Err(Error::Config(format!("ndim = {} outside 2..=3", self.ndim)));
        }
        if let Some(&m) = self.grid_sizes.iter().find(|&&m| m < 16) {
            return Err(Error::Config(format!("grid size {m} below 16")));
        }
        if self.grid_sizes.is_empty() {
            return Err(Error::Config("no grid sizes".into()));
        }
        if let Some(s) = self.suites.iter().find(|s| !MODULES.contains(&s.as_str())) {
            return Err(Error::Config(format!("unknown suite {s:?}")));
        }
        if !(self.eps > 0.0) {
            return Err(Error::Config(format!("eps = {} must be positive", self.eps)));
        }
        Ok(())
    }

    fn enabled(&self, module: &str) -> bool {
        self.suites.iter().any(|s| s == module)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub id: String,
    pub module: String,
    pub value: f64,
    pub bound: f64,
    /// `le`, `ge` or `eq` between value and bound.
    pub relation: String,
    pub pass: bool,
    /// A failed hard check makes the suite fail.
    pub hard: bool,
    pub runtime_s: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub records: Vec<CheckRecord>,
}

impl SuiteReport {
    /// Every hard check passed.
    pub fn ok(&self) -> bool {
        self.records.iter().all(|r| r.pass || !r.hard)
    }

    pub fn failures(&self) -> Vec<&CheckRecord> {
        self.records.iter().filter(|r| !r.pass && r.hard).collect()
    }
}

struct Outcome {
    value: f64,
    bound: f64,
    relation: &'static str,
}

fn le(value: f64, bound: f64) -> Outcome {
    Outcome { value, bound, relation: "le" }
}

fn ge(value: f64, bound: f64) -> Outcome {
    Outcome { value, bound, relation: "ge" }
}

fn eq(value: f64, bound: f64) -> Outcome {
    Outcome { value, bound, relation: "eq" }
}

struct Runner<'a> {
    cfg: &'a SuiteConfig,
    records: Vec<CheckRecord>,
}

impl Runner<'_> {
    fn check(&mut self, module: &str, id: &str, hard: bool, f: impl FnOnce() -> Result<Outcome>) {
        let start = Instant::now();
        let out = f();
        let runtime_s = if self.cfg.timings { start.elapsed().as_secs_f64() } else { 0.0 };
        let rec = match out {
            Ok(o) => {
                let pass = match o.relation {
                    "le" => o.value <= o.bound,
                    "ge" => o.value >= o.bound,
                    _ => o.value == o.bound,
                };
                CheckRecord {
                    id: id.into(),
                    module: module.into(),
                    value: o.value,
                    bound: o.bound,
                    relation: o.relation.into(),
                    pass,
                    hard,
                    runtime_s,
                    error: None,
                }
            }
            Err(e) => CheckRecord {
                id: id.into(),
                module: module.into(),
                value: f64::NAN,
                bound: f64::NAN,
                relation: "eq".into(),
                pass: false,
                hard,
                runtime_s,
                error: Some(e.to_string()),
            },
        };
        self.records.push(rec);
    }
}

fn load_domain(cfg: &SuiteConfig) -> Result<(DomainSpec, Constants)> {
    match &cfg.domain {
        Some(p) => {
            let file = DomainFile::load(p)?;
            Ok((file.domain.build()?, file.constants))
        }
        None => {
            let n = cfg.ndim;
            let mut lo = [0.0; 3];
            let mut hi = [0.0; 3];
            lo[..n].fill(-1.0);
            hi[..n].fill(1.0);
            Ok((DomainSpec::half_space(n, (lo, hi))?, cfg.constants.clone()))
        }
    }
}

/// A boundary point of `spec` near the middle of its sample set.
fn pick_boundary_point(spec: &DomainSpec) -> Result<Point> {
    let pts = spec.boundary_samples(16);
    pts.get(pts.len() / 2).copied().ok_or_else(|| Error::Empty("no boundary samples".into()))
}

fn fields_checks(r: &mut Runner) {
    let n = r.cfg.ndim;
    let m = r.cfg.grid_sizes[0];
    r.check("fields", "fields.spectral_derivative", true, || {
        let g = Grid::unit_torus(n, m)?;
        let u = ScalarField::from_fn(&g, |x| (2.0 * std::f64::consts::PI * x[0]).sin());
        let du = partial(&u, 0, Scheme::Spectral)?;
        let exact = ScalarField::from_fn(&g, |x| 2.0 * std::f64::consts::PI * (2.0 * std::f64::consts::PI * x[0]).cos());
        Ok(le(lp_norm(&du.zip(&exact, |a, b| a - b), f64::INFINITY, None)?, 1e-10))
    });
    let seed = r.cfg.seed;
    r.check("fields", "fields.synth_norm", true, || {
        let g = Grid::unit_torus(n, m)?;
        Ok(le((lp_norm(&synth_field(&g, 1.0, seed), 2.0, None)? - 1.0).abs(), 1e-12))
    });
}

fn domain_checks(r: &mut Runner, spec: &Result<(DomainSpec, Constants)>) {
    let get = || spec.as_ref().map_err(|e| Error::Config(e.to_string()));
    r.check("domains", "domains.reach", true, || {
        let (s, _) = get()?;
        let rep = estimate_reach(s, 32)?;
        Ok(eq(rep.flagged as u8 as f64, 0.0))
    });
    r.check("domains", "domains.star_like", true, || {
        let (s, _) = get()?;
        let z0 = pick_boundary_point(s)?;
        let rho = 0.5 * star_like_cap(s).min(0.5);
        Ok(eq(check_star_like(s, &z0, rho, 32)?.failures as f64, 0.0))
    });
    r.check("domains", "domains.lipschitz", true, || {
        let (s, _) = get()?;
        let z0 = pick_boundary_point(s)?;
        let rho = 0.5 * lipschitz_cap(s).min(0.5);
        let a = sample_lipschitz_constant(s, &z0, rho, 16)?;
        Ok(eq(a.pass as u8 as f64, 1.0))
    });
}

fn cutoff_checks(r: &mut Runner, spec: &Result<(DomainSpec, Constants)>) {
    let n = r.cfg.ndim;
    let eps = r.cfg.eps;
    r.check("cutoffs", "cutoffs.interior_plateau", true, || {
        let x = [0.1; 3];
        let c = interior_cutoff(n, &x, eps)?;
        let mut worst = 0.0f64;
        for k in 0..200 {
            let t = 2.0 * eps * k as f64 / 200.0;
            let mut y = x;
            y[0] += t;
            let v = c.value(&y)?;
            if t <= eps {
                worst = worst.max((v - 1.0).abs());
            } else if t >= 1.5 * eps {
                worst = worst.max(v.abs());
            }
        }
        Ok(eq(worst, 0.0))
    });
    r.check("cutoffs", "cutoffs.boundary_normal", true, || {
        let (s, c) = spec.as_ref().map_err(|e| Error::Config(e.to_string()))?;
        let z0 = pick_boundary_point(s)?;
        let eps = eps.min(0.19 * s.reach().min(1.0));
        let cut = boundary_cutoff(s, &z0, eps, c)?;
        let mut worst = 0.0f64;
        let k = 8i64;
        let total = (2 * k + 1).pow(n as u32);
        for t in 0..total {
            let mut y = z0;
            let mut rem = t;
            for a in 0..n {
                y[a] += (rem % (2 * k + 1) - k) as f64 * 3.0 * eps / k as f64;
                rem /= 2 * k + 1;
            }
            let Some(loc) = s.locate(&y) else { continue };
            if loc.d.abs() < 3.0 * eps && !loc.ambiguous {
                let jet = cut.eval(&y)?;
                worst = worst.max(crate::linalg::dot(n, &loc.normal, &jet.grad).abs());
            }
        }
        Ok(le(worst, 1e-6))
    });
}

fn seminorm_checks(r: &mut Runner) {
    let n = r.cfg.ndim;
    let seed = r.cfg.seed;
    r.check("seminorms", "seminorms.lattice_vs_exhaustive", true, || {
        let m = if n == 2 { 16 } else { 8 };
        let g = Grid::unit_torus(n, m)?;
        let spec = DomainSpec::torus(n)?;
        let u = synth_field(&g, 1.0, seed);
        let full = bmo_seminorm(&u, &spec, &ball_set(&g, &spec, f64::INFINITY, &BallPolicy::Exhaustive)?)?.0;
        let lat = bmo_seminorm(&u, &spec, &ball_set(&g, &spec, f64::INFINITY, &BallPolicy::default())?)?.0;
        let ratio = lat / full;
        Ok(if ratio > 1.0 { le(ratio, 1.0) } else { ge(ratio, 0.9) })
    });
}

fn whitney_checks(r: &mut Runner) {
    let n = r.cfg.ndim;
    let level = if n == 2 { 6 } else { 4 };
    let ball = || Raster::from_fn(n, level, -1.0, 2.0, |x| (0..n).map(|a| x[a] * x[a]).sum::<f64>() < 0.6);
    r.check("whitney", "whitney.distance_condition", true, || {
        let w = whitney_decompose(&ball()?, level)?;
        Ok(eq(w.violations().0 as f64, 0.0))
    });
    r.check("whitney", "whitney.neighbour_condition", true, || {
        let w = whitney_decompose(&ball()?, level)?;
        Ok(eq(w.violations().1 as f64, 0.0))
    });
    let seed = r.cfg.seed;
    r.check("whitney", "whitney.restriction", true, || {
        let raster = ball()?;
        let w = whitney_decompose(&raster, level)?;
        let wc = whitney_decompose_complement(&raster, level)?;
        let grid = raster.grid();
        let g = synth_field(&grid, 1.0, seed);
        let kstar = estimate_kstar(&w, 32, seed)?.value;
        let ext = jones_extend(&g, 2.0, 0.5, &w, &wc, kstar, 64.0)?;
        let inside = raster.inside();
        let mismatched = (0..grid.len()).filter(|&i| inside[i] && ext.extended.values()[i].to_bits() != g.values()[i].to_bits()).count();
        Ok(eq(mismatched as f64, 0.0))
    });
}

fn helmholtz_checks(r: &mut Runner, spec: &Result<(DomainSpec, Constants)>) {
    let n = r.cfg.ndim;
    let sizes = r.cfg.grid_sizes.clone();
    let (seed, count) = (r.cfg.seed, r.cfg.fields.max(1));
    r.check("helmholtz", "helmholtz.whole_space", true, || {
        let mut worst = 0.0f64;
        for &m in &sizes {
            let g = Grid::unit_torus(n, m)?;
            for k in 0..count {
                let f = synth_vector_field(&g, 1.0, seed + k as u64);
                let d = project_whole_space(&f)?.diagnostics;
                worst = worst.max(d.div_residual).max(d.orthogonality).max(d.reconstruction_error);
            }
        }
        Ok(le(worst, 1e-10))
    });
    r.check("helmholtz", "helmholtz.half_space_trace", true, || {
        let trace = |m: usize| -> Result<f64> {
            let mut shape = vec![m; n];
            shape[n - 1] = m;
            let h = 1.0 / m as f64;
            let mut origin = vec![0.0; n];
            origin[n - 1] = 0.5 * h;
            let mut periodic = vec![true; n];
            periodic[n - 1] = false;
            let g = Grid::new(&shape, &vec![h; n], &origin, &periodic)?;
            let f = VectorField::from_fn(&g, |x| {
                let mut v = [0.0; 3];
                v[0] = (2.0 * std::f64::consts::PI * x[0]).sin() + 0.3;
                v[n - 1] = (2.0 * std::f64::consts::PI * x[0]).cos() * (1.0 + x[n - 1]) + 0.5;
                v
            });
            project_half_space(&f)?.diagnostics.normal_trace.ok_or_else(|| Error::Empty("trace".into()))
        };
        let m = sizes[0];
        Ok(ge(trace(m)? / trace(2 * m)?, 1.8))
    });
    let eps = r.cfg.eps;
    r.check("helmholtz", "helmholtz.eps_cap", false, || {
        let (s, c) = spec.as_ref().map_err(|e| Error::Config(e.to_string()))?;
        let z0 = pick_boundary_point(s)?;
        Ok(le(eps, epsilon_cap(s, &z0, c)?))
    });
}

fn completeness(r: &mut Runner) {
    let cfg = r.cfg;
    let missing = ANCHORS
        .iter()
        .filter(|(m, _)| cfg.enabled(m))
        .flat_map(|(_, ids)| ids.iter())
        .filter(|id| !r.records.iter().any(|rec| rec.id == **id))
        .count();
    r.check("harness", "harness.completeness", true, || Ok(eq(missing as f64, 0.0)));
}

/// Runs the enabled modules in dependency order.
pub fn run_suite(cfg: &SuiteConfig) -> Result<SuiteReport> {
    cfg.validate()?;
    if cfg.suites.is_empty() {
        return Ok(SuiteReport::default());
    }
    let mut r = Runner { cfg, records: Vec::new() };
    let needs_domain = ["domains", "cutoffs", "helmholtz"].iter().any(|m| cfg.enabled(m));
    let spec = if needs_domain { load_domain(cfg) } else { Err(Error::Config("unused".into())) };
    for module in MODULES {
        if !cfg.enabled(module) {
            continue;
        }
        match module {
            "fields" => fields_checks(&mut r),
            "domains" => domain_checks(&mut r, &spec),
            "cutoffs" => cutoff_checks(&mut r, &spec),
            "seminorms" => seminorm_checks(&mut r),
            "whitney" => whitney_checks(&mut r),
            _ => helmholtz_checks(&mut r, &spec),
        }
    }
    completeness(&mut r);
    Ok(SuiteReport { records: r.records })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Text,
    Csv,
}

pub fn write_text<W: Write>(w: &mut W, report: &SuiteReport) -> Result<()> {
    for rec in &report.records {
        let status = if rec.pass { "PASS" } else if rec.hard { "FAIL" } else { "WARN" };
        write!(w, "{status} {} value={} {} bound={}", rec.id, rec.value, rec.relation, rec.bound)?;
        if let Some(e) = &rec.error {
            write!(w, " error={e}")?;
        }
        writeln!(w)?;
    }
    let failed = report.failures().len();
    writeln!(w, "{} checks, {} failed", report.records.len(), failed)?;
    Ok(())
}

const CSV_HEADER: [&str; 9] = ["id", "module", "value", "bound", "relation", "pass", "hard", "runtime_s", "error"];

pub fn write_csv<W: Write>(w: W, report: &SuiteReport) -> Result<()> {
    let mut wr = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    let csv_err = |e: csv::Error| Error::Format(e.to_string());
    wr.write_record(CSV_HEADER).map_err(csv_err)?;
    for rec in &report.records {
        wr.serialize(rec).map_err(csv_err)?;
    }
    wr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<SuiteReport> {
    let mut rd = csv::Reader::from_reader(r);
    let header: Vec<String> = rd.headers().map_err(|e| Error::Format(e.to_string()))?.iter().map(String::from).collect();
    if header != CSV_HEADER {
        return Err(Error::Format(format!("unexpected header {header:?}")));
    }
    let records = rd.deserialize().collect::<std::result::Result<Vec<CheckRecord>, _>>().map_err(|e| Error::Format(e.to_string()))?;
    Ok(SuiteReport { records })
}

/// Writes `suite.txt` or `suite.csv` into `dir` and returns the path.
pub fn emit_report(report: &SuiteReport, format: ReportFormat, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(match format {
        ReportFormat::Text => "suite.txt",
        ReportFormat::Csv => "suite.csv",
    });
    let mut file = std::io::BufWriter::new(std::fs::File::create(&path)?);
    match format {
        ReportFormat::Text => write_text(&mut file, report)?,
        ReportFormat::Csv => write_csv(&mut file, report)?,
    }
    file.flush()?;
    Ok(path)
}
