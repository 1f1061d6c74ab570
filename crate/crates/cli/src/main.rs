//! `vbmo`: decompositions, seminorms, Whitney cubes, extensions, geometry audits and the check suite.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use vbmo::domains::{
    check_star_like, estimate_reach, lipschitz_cap, sample_lipschitz_constant, signed_distance, star_like_cap, Constants,
    DomainFile, DomainSpec,
};
use vbmo::fields::io::{load, save, FieldData};
use vbmo::fields::{synth_field, synth_vector_field, Grid};
use vbmo::harness::{emit_report, run_suite, write_text, ReportFormat, SuiteConfig};
use vbmo::helmholtz::{decompose, default_method, Method, SolverOptions};
use vbmo::seminorms::{
    ball_oscillation, ball_set, bmo_seminorm, grid_boundary_points, vbmo_norm, BallPolicy, BoundaryData,
};
use vbmo::whitney::{
    estimate_kstar, jones_extend, whitney_decompose, whitney_decompose_complement, Raster,
};
use vbmo::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "vbmo", version, about = "Helmholtz decompositions and vBMO instruments")]
struct Cli {
    /// Suite or domain constants file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, env = "VBMO_SEED")]
    seed: Option<u64>,
    /// Worker threads; all cores when absent.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Spectral,
    Reflect,
    Neumann,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PolicyArg {
    Exhaustive,
    Lattice,
    Random,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum SynthGrid {
    Torus,
    Box,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Split a vector field into f0 + grad p.
    Decompose {
        #[arg(long)]
        field: PathBuf,
        /// Domain file; the torus when absent.
        #[arg(long)]
        domain: Option<PathBuf>,
        #[arg(long, value_enum)]
        method: Option<MethodArg>,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Output prefix inside the output directory.
        #[arg(long, default_value = "out")]
        out: String,
    },
    /// BMO, b and vBMO seminorms of a field.
    Seminorm {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        domain: Option<PathBuf>,
        #[arg(long, default_value_t = f64::INFINITY)]
        mu: f64,
        #[arg(long, default_value_t = f64::INFINITY)]
        nu: f64,
        #[arg(long, value_enum, default_value = "lattice")]
        policy: PolicyArg,
        /// Per-ball CSV (centre, radius, oscillation).
        #[arg(long)]
        balls_csv: Option<PathBuf>,
    },
    /// Whitney cubes of a domain restricted to a dyadic box.
    Whitney {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, default_value_t = 6)]
        level: u32,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long, default_value_t = -1.0)]
        lo: f64,
        #[arg(long, default_value_t = 2.0)]
        side: f64,
        /// Decompose the complement inside the box instead.
        #[arg(long)]
        complement: bool,
        #[arg(long, default_value = "cubes.csv")]
        out: String,
    },
    /// Jones extension of a scalar field from the domain to its box.
    Extend {
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        delta: f64,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        #[arg(long, default_value = "extended.vbmo")]
        out: String,
    },
    /// Reach, star-likeness and Lipschitz audits at sampled boundary points.
    GeometryAudit {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long, default_value_t = 8)]
        points: usize,
        #[arg(long, default_value_t = 32)]
        rays: usize,
    },
    /// Run the check suite and write suite.txt and suite.csv.
    Verify,
    /// Write a seeded band-limited field.
    Synth {
        #[arg(long, value_enum, default_value = "torus")]
        grid: SynthGrid,
        #[arg(long, default_value_t = 2)]
        ndim: usize,
        #[arg(long, default_value_t = 32)]
        cells: usize,
        #[arg(long)]
        scalar: bool,
        #[arg(long, default_value = "field.vbmo")]
        out: String,
    },
}

fn domain_or_torus(path: Option<&Path>, grid: &Grid) -> Result<(DomainSpec, Constants)> {
    match path {
        Some(p) => {
            let file = DomainFile::load(p)?;
            Ok((file.domain.build()?, file.constants))
        }
        None if grid.fully_periodic() => Ok((DomainSpec::torus(grid.ndim())?, Constants::default())),
        None => Err(Error::Config("--domain is required for a non-periodic grid".into())),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let seed = cli.seed.unwrap_or(1);
    let out_dir = cli.out_dir;
    match cli.cmd {
        Command::Decompose { field, domain, method, tol, out } => {
            let f = load(&field)?.into_vector()?;
            let (spec, _) = domain_or_torus(domain.as_deref(), f.grid())?;
            let method = match method {
                Some(MethodArg::Spectral) => Method::Spectral,
                Some(MethodArg::Reflect) => Method::Reflect,
                Some(MethodArg::Neumann) => Method::Neumann,
                None => default_method(&spec),
            };
            let opts = SolverOptions { tol, ..SolverOptions::default() };
            let d = decompose(&f, &spec, method, &opts)?;
            std::fs::create_dir_all(&out_dir)?;
            save(out_dir.join(format!("{out}_f0.vbmo")), &d.f0)?;
            save(out_dir.join(format!("{out}_gradp.vbmo")), &d.grad_p)?;
            save(out_dir.join(format!("{out}_p.vbmo")), &d.p)?;
            let mut w = create(&out_dir.join(format!("{out}_diagnostics.txt")))?;
            let g = &d.diagnostics;
            writeln!(w, "method = {:?}", d.method)?;
            writeln!(w, "div_residual = {:e}", g.div_residual)?;
            writeln!(w, "orthogonality = {:e}", g.orthogonality)?;
            writeln!(w, "reconstruction_error = {:e}", g.reconstruction_error)?;
            if let Some(t) = g.normal_trace {
                writeln!(w, "normal_trace = {t:e}")?;
            }
            if let Some(s) = d.solve {
                writeln!(w, "iterations = {}\nsolver_residual = {:e}\nconverged = {}", s.iterations, s.residual, s.converged)?;
            }
            w.flush()?;
            println!("{:?}: div {:.3e}, orth {:.3e}, recon {:.3e}", d.method, g.div_residual, g.orthogonality, g.reconstruction_error);
            Ok(true)
        }
        Command::Seminorm { field, domain, mu, nu, policy, balls_csv } => {
            let data = load(&field)?;
            let grid = data.grid().clone();
            let (spec, _) = domain_or_torus(domain.as_deref(), &grid)?;
            let policy = match policy {
                PolicyArg::Exhaustive => BallPolicy::Exhaustive,
                PolicyArg::Lattice => BallPolicy::Lattice { levels: 4, spacing: 0.5, random: 256, seed },
                PolicyArg::Random => BallPolicy::Random { count: 4096, seed },
            };
            let set = ball_set(&grid, &spec, mu, &policy)?;
            let mask = spec.has_boundary().then(|| spec.mask(&grid));
            let osc = |b| match &data {
                FieldData::Scalar(u) => ball_oscillation(u, b, mask.as_deref()),
                FieldData::Vector(u) => ball_oscillation(u, b, mask.as_deref()),
            };
            match &data {
                FieldData::Scalar(u) => {
                    let (v, b) = bmo_seminorm(u, &spec, &set)?;
                    println!("bmo = {v}\nbmo_ball = {:?} r = {}\nballs = {}", b.center, b.radius, set.balls.len());
                }
                FieldData::Vector(u) => {
                    let sdf;
                    let pts;
                    let bd = if spec.has_boundary() {
                        sdf = signed_distance(&spec, &grid)?;
                        pts = grid_boundary_points(&spec, &grid, 256);
                        Some(BoundaryData { sdf: &sdf, points: &pts })
                    } else {
                        None
                    };
                    let r = vbmo_norm(u, mu, nu, &spec, &policy, bd)?;
                    println!("mu = {}\nnu = {}\nbmo = {}\nb = {}\nvbmo = {}\nl2 = {}\nballs = {}", r.mu, r.nu, r.bmo, r.b, r.vbmo, r.l2, r.balls);
                }
            }
            if let Some(path) = balls_csv {
                let path = out_dir.join(path);
                let mut w = create(&path)?;
                writeln!(w, "i,j,k,radius,oscillation")?;
                for b in &set.balls {
                    if let Some(v) = osc(b) {
                        writeln!(w, "{},{},{},{},{}", b.center[0], b.center[1], b.center[2], b.radius, v)?;
                    }
                }
                w.flush()?;
            }
            Ok(true)
        }
        Command::Whitney { domain, level, depth, lo, side, complement, out } => {
            let spec = DomainFile::load(&domain)?.domain.build()?;
            let raster = Raster::from_spec(&spec, level, lo, side)?;
            let depth = depth.unwrap_or(level);
            let w = if complement {
                whitney_decompose_complement(&raster, depth)?
            } else {
                whitney_decompose(&raster, depth)?
            };
            let (d, a) = w.violations();
            w.write_csv(create(&out_dir.join(&out))?)?;
            println!("cubes = {}\ndistance_violations = {d}\nneighbour_violations = {a}", w.len());
            Ok(d == 0 && a == 0)
        }
        Command::Extend { field, domain, delta, r, out } => {
            let g = load(&field)?.into_scalar()?;
            let file = DomainFile::load(&domain)?;
            let spec = file.domain.build()?;
            let raster = Raster::from_mask(g.grid(), &spec.mask(g.grid()))?;
            let depth = raster.level();
            let w = whitney_decompose(&raster, depth)?;
            let wc = whitney_decompose_complement(&raster, depth)?;
            let kstar = estimate_kstar(&w, 64, seed)?;
            let e = jones_extend(&g, r, delta, &w, &wc, kstar.value, file.constants.kstar_cap)?;
            std::fs::create_dir_all(&out_dir)?;
            save(out_dir.join(&out), &e.extended)?;
            println!(
                "kstar = {}\nn_prime_max = {}\nn_prime_bound = {}\nh_star_lr = {}\ng_lr = {}",
                kstar.value, e.n_prime_max, e.n_prime_bound, e.h_star_lr, e.g_lr
            );
            for warning in &e.warnings {
                println!("warning: {warning}");
            }
            Ok(e.n_prime_max as f64 <= e.n_prime_bound)
        }
        Command::GeometryAudit { domain, points, rays } => {
            let spec = DomainFile::load(&domain)?.domain.build()?;
            let reach = estimate_reach(&spec, 64)?;
            println!("reach = {}\nanalytic_lower = {}\nflagged = {}", reach.reach, reach.analytic, reach.flagged);
            let mut ok = !reach.flagged;
            let star_rho = 0.5 * star_like_cap(&spec).min(0.5);
            let lip_rho = 0.5 * lipschitz_cap(&spec).min(0.5);
            for z0 in spec.boundary_samples(points) {
                let star = check_star_like(&spec, &z0, star_rho, rays)?;
                let lip = sample_lipschitz_constant(&spec, &z0, lip_rho, 16)?;
                println!(
                    "z0 = {:?}: star failures {} of {}, lipschitz {:.4} (gamma {:.3}, sphere {:.3}, normal {:.3}) {}",
                    &z0[..spec.ndim()],
                    star.failures,
                    star.rays,
                    lip.constant,
                    lip.gamma_ratio,
                    lip.sphere_ratio,
                    lip.min_mixed_normal,
                    if lip.pass { "pass" } else { "fail" }
                );
                ok &= star.pass && lip.pass;
            }
            Ok(ok)
        }
        Command::Verify => {
            let mut cfg = match &cli.config {
                Some(p) => SuiteConfig::load(p)?,
                None => SuiteConfig::default(),
            };
            cfg.apply_env(|k| std::env::var(k).ok())?;
            if let Some(s) = cli.seed {
                cfg.seed = s;
            }
            let report = run_suite(&cfg)?;
            emit_report(&report, ReportFormat::Text, &out_dir)?;
            emit_report(&report, ReportFormat::Csv, &out_dir)?;
            write_text(&mut std::io::stdout().lock(), &report)?;
            Ok(report.ok())
        }
        Command::Synth { grid, ndim, cells, scalar, out } => {
            let g = match grid {
                SynthGrid::Torus => Grid::unit_torus(ndim, cells)?,
                SynthGrid::Box => Grid::cell_centered_box(ndim, cells, -1.0, 2.0)?,
            };
            std::fs::create_dir_all(&out_dir)?;
            let path = out_dir.join(&out);
            if scalar {
                save(&path, &synth_field(&g, 1.0, seed))?;
            } else {
                save(&path, &synth_vector_field(&g, 1.0, seed))?;
            }
            println!("{}", path.display());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
