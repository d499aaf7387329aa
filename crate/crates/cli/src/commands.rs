use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use atmgrit::problems::{Dahlquist, GrayScott, GrayScottSpec, Heat1D, Heat1DSpec};
use atmgrit::runtime::{run_parallel, RuntimeOptions};
use atmgrit::theory::{
    assemble_e_approx, assemble_e_exact, assemble_ecc, backward_euler_pairs, bound_terms,
    spectral_norm, EigenPair,
};
use atmgrit::{
    build_hierarchy, solve, Application, ConvergenceReport, CycleMode, Hierarchy, InitialGuess,
    Norm, Relaxation, SolverConfig, TimeGrid,
};
use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::config::{Config, ConfigError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] atmgrit::Error),
    #[error("cannot write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Solver(atmgrit::Error::Config(_)) => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

/// CSV text plus whether every solve converged.
pub struct Output {
    pub csv: String,
    pub converged: bool,
}

enum Problem {
    Dahlquist(Dahlquist, f64, f64),
    Heat(Heat1D),
    GrayScott(GrayScott),
}

impl Problem {
    fn from_config(c: &Config) -> Result<Problem> {
        let name: String = c.get_or("problem", "heat1d".to_string())?;
        Ok(match name.to_ascii_lowercase().as_str() {
            "dahlquist" => Problem::Dahlquist(
                Dahlquist::new(c.get_or("dahlquist.lambda", -1.0)?, c.get_or("dahlquist.u0", 1.0)?)?,
                c.get_or("dahlquist.t0", 0.0)?,
                c.get_or("dahlquist.tf", 1.0)?,
            ),
            "heat1d" | "heat" => Problem::Heat(heat_from_config(c)?),
            "grayscott" | "gray-scott" => {
                let d = GrayScottSpec::default();
                Problem::GrayScott(GrayScott::new(GrayScottSpec {
                    n: c.get_or("grayscott.n", d.n)?,
                    length: c.get_or("grayscott.length", d.length)?,
                    feed: c.get_or("grayscott.feed", d.feed)?,
                    kill: c.get_or("grayscott.kill", d.kill)?,
                    du: c.get_or("grayscott.du", d.du)?,
                    dv: c.get_or("grayscott.dv", d.dv)?,
                    reaction: c.get_or("grayscott.reaction", d.reaction)?,
                    t0: c.get_or("grayscott.t0", d.t0)?,
                    tf: c.get_or("grayscott.tf", d.tf)?,
                    newton_tol: c.get_or("grayscott.newton_tol", d.newton_tol)?,
                    max_newton: c.get_or("grayscott.max_newton", d.max_newton)?,
                    bound: c.get_or("grayscott.bound", d.bound)?,
                })?)
            }
            other => {
                return Err(ConfigError::Invalid(format!(
                    "unknown problem `{other}` (expected dahlquist, heat1d or grayscott)"
                ))
                .into())
            }
        })
    }

    fn interval(&self) -> (f64, f64) {
        match self {
            Problem::Dahlquist(_, t0, tf) => (*t0, *tf),
            Problem::Heat(h) => (h.spec().t0, h.spec().tf),
            Problem::GrayScott(g) => (g.spec().t0, g.spec().tf),
        }
    }

    fn default_points(&self) -> usize {
        match self {
            Problem::Dahlquist(..) => 65,
            Problem::Heat(_) => 16384,
            Problem::GrayScott(_) => 512,
        }
    }

    fn run(&self, h: &Hierarchy, cfg: &SolverConfig, workers: usize) -> Result<ConvergenceReport> {
        match self {
            Problem::Dahlquist(app, ..) => run_with(app, h, cfg, workers),
            Problem::Heat(app) => run_with(app, h, cfg, workers),
            Problem::GrayScott(app) => run_with(app, h, cfg, workers),
        }
    }
}

fn run_with<A: Application>(
    app: &A,
    h: &Hierarchy,
    cfg: &SolverConfig,
    workers: usize,
) -> Result<ConvergenceReport> {
    let (_, report) = if workers > 1 {
        run_parallel(app, h, cfg, &RuntimeOptions::new(workers))?
    } else {
        solve(app, h, cfg)?
    };
    Ok(report)
}

fn heat_from_config(c: &Config) -> Result<Heat1D> {
    let d = Heat1DSpec::default();
    Ok(Heat1D::new(Heat1DSpec {
        dof: c.get_or("heat.dof", d.dof)?,
        x0: c.get_or("heat.x0", d.x0)?,
        x1: c.get_or("heat.x1", d.x1)?,
        t0: c.get_or("heat.t0", d.t0)?,
        tf: c.get_or("heat.tf", d.tf)?,
        forcing: c.get_or("heat.forcing", d.forcing)?,
        folded: c.get_or("heat.folded", d.folded)?,
    })?)
}

fn solver_config(c: &Config) -> Result<SolverConfig> {
    let d = SolverConfig::default();
    let mode = c.choice(
        "solver.mode",
        d.mode,
        |s| match s {
            "two-level" | "twolevel" => Some(CycleMode::TwoLevel),
            "v-cycle" | "vcycle" | "v" => Some(CycleMode::VCycle),
            "nested" | "nested-v" | "nested-vcycle" => Some(CycleMode::NestedVCycle),
            _ => None,
        },
        "two-level, v-cycle, nested",
    )?;
    let nu: usize = c.get_or("solver.nu", 1)?;
    let relaxation = c.choice(
        "solver.relaxation",
        Relaxation::F,
        |s| match s {
            "f" => Some(Relaxation::F),
            "fcf" => Some(Relaxation::Fcf(nu)),
            _ => None,
        },
        "F, FCF",
    )?;
    if c.contains("solver.nu") && relaxation == Relaxation::F {
        return Err(ConfigError::Invalid("solver.nu needs solver.relaxation = FCF".into()).into());
    }
    let norm = c.choice(
        "solver.norm",
        d.norm,
        |s| match s {
            "residual" | "space-time-residual" => Some(Norm::SpaceTimeResidual),
            "functional" | "functional-change" => Some(Norm::FunctionalChange),
            _ => None,
        },
        "residual, functional",
    )?;
    let seed: u64 = c.get_or("solver.seed", 0)?;
    let value: f64 = c.get_or("solver.initial_value", 0.0)?;
    let initial_guess = c.choice(
        "solver.initial_guess",
        if c.contains("solver.seed") {
            InitialGuess::Random { seed }
        } else {
            InitialGuess::Constant(value)
        },
        |s| match s {
            "random" => Some(InitialGuess::Random { seed }),
            "constant" => Some(InitialGuess::Constant(value)),
            "replicate" => Some(InitialGuess::Replicate),
            _ => None,
        },
        "random, constant, replicate",
    )?;
    let cfg = SolverConfig {
        mode,
        relaxation,
        max_iters: c.get_or("solver.max_iters", d.max_iters)?,
        tol: c.get_or("solver.tol", d.tol)?,
        norm,
        initial_guess,
        coarse_substeps: c.get_or("solver.coarse_substeps", d.coarse_substeps)?,
    };
    cfg.validate()?;
    Ok(cfg)
}

/// `solver.k` is an integer or `full` (one window spanning the whole grid).
fn distance(c: &Config, coarsest_points: usize) -> Result<usize> {
    match c.get::<String>("solver.k")? {
        None => Ok(coarsest_points),
        Some(s) if s.eq_ignore_ascii_case("full") => Ok(coarsest_points),
        Some(_) => Ok(c.require("solver.k")?),
    }
}

fn grid(c: &Config, problem: &Problem) -> Result<TimeGrid> {
    let (t0, tf) = problem.interval();
    Ok(TimeGrid::new(t0, tf, c.get_or("grid.points", problem.default_points())?)?)
}

fn hierarchy(c: &Config, problem: &Problem) -> Result<Hierarchy> {
    let m: Vec<usize> = c.require_list("solver.m")?;
    if let Some(levels) = c.get::<usize>("solver.levels")? {
        if levels != m.len() + 1 {
            return Err(ConfigError::Invalid(format!(
                "solver.levels = {levels} but solver.m lists {} factors",
                m.len()
            ))
            .into());
        }
    }
    let h = build_hierarchy(grid(c, problem)?, &m, 1)?;
    let k = distance(c, h.coarsest_points())?;
    Ok(h.with_k(k)?)
}

pub fn workers(c: &Config, flag: Option<usize>) -> Result<usize> {
    match flag {
        Some(w) => Ok(w),
        None => Ok(c.get_or("run.workers", 1)?),
    }
}

pub fn output_path(c: &Config, flag: Option<PathBuf>) -> Result<Option<PathBuf>> {
    Ok(flag.or(c.get::<PathBuf>("output.path")?))
}

pub fn solve_cmd(c: &Config, workers: usize) -> Result<Output> {
    let problem = Problem::from_config(c)?;
    let h = hierarchy(c, &problem)?;
    let cfg = solver_config(c)?;
    if workers == 0 {
        return Err(ConfigError::Invalid("workers must be >= 1".into()).into());
    }
    let report = problem.run(&h, &cfg, workers)?;
    let mut csv = String::from("iter,residual_norm,seconds\n");
    for (i, (r, s)) in report
        .residual_norms
        .iter()
        .zip(&report.iteration_seconds)
        .enumerate()
    {
        writeln!(csv, "{},{:e},{:.6}", i + 1, r, s).unwrap();
    }
    csv.push_str("\nconverged,iterations,total_seconds\n");
    writeln!(
        csv,
        "{},{},{:.6}",
        report.converged, report.iterations, report.total_seconds
    )
    .unwrap();
    log::info!(
        "{} after {} iterations, final norm {:e}",
        if report.converged { "converged" } else { "not converged" },
        report.iterations,
        report.residual_norms.last().copied().unwrap_or(report.initial_residual)
    );
    Ok(Output {
        csv,
        converged: report.converged,
    })
}

pub fn sweep_k_cmd(c: &Config, workers: usize) -> Result<Output> {
    let problem = Problem::from_config(c)?;
    let cfg = solver_config(c)?;
    if cfg.mode == CycleMode::NestedVCycle || c.contains("solver.levels") {
        log::debug!("sweep uses two-level hierarchies with the configured cycle");
    }
    let ms: Vec<usize> = match c.list("sweep.m")? {
        Some(m) => m,
        None => c.require_list("solver.m")?,
    };
    let ks: Vec<usize> = c.require_list("sweep.k")?;
    if ks.contains(&0) {
        return Err(ConfigError::Invalid("sweep.k entries must be >= 1".into()).into());
    }
    let grid = grid(c, &problem)?;
    let hierarchies = ms
        .iter()
        .map(|&m| build_hierarchy(grid, &[m], 1))
        .collect::<std::result::Result<Vec<_>, _>>()?;

    let mut csv = String::from("m,k,k_over_ncpoints,iterations,variant\n");
    let mut converged = true;
    for (&m, base) in ms.iter().zip(&hierarchies) {
        let n_c = base.coarsest_points();
        for &k in &ks {
            let h = base.with_k(k)?;
            let report = problem.run(&h, &cfg, workers)?;
            converged &= report.converged;
            let variant = if h.is_global_coarse() { "parareal" } else { "at-mgrit" };
            writeln!(
                csv,
                "{m},{k},{:.6},{},{variant}",
                k as f64 / n_c as f64,
                report.iterations
            )
            .unwrap();
            log::info!("m={m} k={k}: {} iterations", report.iterations);
        }
    }
    Ok(Output { csv, converged })
}

pub fn theory_cmd(c: &Config) -> Result<Output> {
    let ms: Vec<usize> = c.require_list("theory.m")?;
    let ks: Vec<usize> = c.require_list("theory.k")?;
    let p_count: usize = c.get_or("theory.p", 32)?;
    let spectrum: Option<String> = c.get("theory.spectrum")?;

    let mut pairs_for_m: Vec<(usize, Vec<EigenPair>)> = Vec::new();
    match spectrum.as_deref().map(str::to_ascii_lowercase).as_deref() {
        Some("heat") => {
            let heat = heat_from_config(c)?;
            let spec = heat.spec();
            let points: usize = c.get_or("grid.points", 16384)?;
            let grid = TimeGrid::new(spec.t0, spec.tf, points)?;
            let xi = heat.laplacian_eigenvalues();
            for &m in &ms {
                pairs_for_m.push((m, backward_euler_pairs(&xi, grid.dt(), m)));
            }
        }
        Some(other) => {
            return Err(ConfigError::Invalid(format!(
                "unknown theory.spectrum `{other}` (expected heat)"
            ))
            .into())
        }
        None => {
            let lambdas: Vec<f64> = c.require_list("theory.lambda")?;
            let mus: Vec<f64> = c.require_list("theory.mu")?;
            let pairs: Vec<EigenPair> = lambdas
                .iter()
                .flat_map(|&l| mus.iter().map(move |&mu| EigenPair::real(l, mu)))
                .collect();
            for &m in &ms {
                pairs_for_m.push((m, pairs.clone()));
            }
        }
    }

    let mut csv = String::from("lambda,mu,m,k,norm_Ecc,bound,truncation_term\n");
    let mut skipped = 0;
    let mut violations = 0;
    for (m, pairs) in &pairs_for_m {
        for &k in &ks {
            for pair in pairs {
                let (first, truncation) = match bound_terms(pair, *m, k) {
                    Ok(terms) => terms,
                    Err(atmgrit::Error::Hypothesis(_)) => {
                        skipped += 1;
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                };
                let bound = first + truncation;
                let norm = spectral_norm(&assemble_ecc(pair.lambda, pair.mu, *m, k, p_count)?);
                if norm > bound + 1e-12 {
                    violations += 1;
                }
                writeln!(
                    csv,
                    "{:e},{:e},{m},{k},{norm:e},{bound:e},{truncation:e}",
                    pair.lambda.re, pair.mu.re
                )
                .unwrap();
            }
        }
    }
    if skipped > 0 {
        log::warn!("skipped {skipped} pairs with |mu| >= 1");
        eprintln!("warning: skipped {skipped} pairs with |mu| >= 1");
    }
    if violations > 0 {
        log::error!("{violations} rows with norm above the bound");
    }
    Ok(Output {
        csv,
        converged: true,
    })
}

pub fn propagator_cmd(c: &Config) -> Result<Output> {
    let kind: String = c.get_or("propagator.kind", "approx".to_string())?;
    let m: usize = c.require("propagator.m")?;
    let k: usize = c.require("propagator.k")?;
    let phi: f64 = c.require("propagator.phi")?;
    let matrix: DMatrix<f64> = match kind.to_ascii_lowercase().as_str() {
        "exact" => {
            let n_t: usize = c.require("propagator.n_t")?;
            assemble_e_exact(&DMatrix::from_element(1, 1, phi), m, k, n_t)?.matrix
        }
        "approx" => {
            let n_t: usize = c.require("propagator.n_t")?;
            let psi: f64 = c.require("propagator.psi")?;
            assemble_e_approx(
                &DMatrix::from_element(1, 1, phi),
                &DMatrix::from_element(1, 1, psi),
                m,
                k,
                n_t,
            )?
            .matrix
        }
        "ecc" => {
            let psi: f64 = c.require("propagator.psi")?;
            let p: usize = c.require("propagator.p")?;
            assemble_ecc(Complex64::new(phi, 0.0), Complex64::new(psi, 0.0), m, k, p)?.map(|z| z.re)
        }
        other => {
            return Err(ConfigError::Invalid(format!(
                "unknown propagator.kind `{other}` (expected exact, approx or ecc)"
            ))
            .into())
        }
    };
    let mut csv = String::new();
    for row in matrix.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        csv.push_str(&cells.join(","));
        csv.push('\n');
    }
    Ok(Output {
        csv,
        converged: true,
    })
}

pub fn write_output(path: Option<&Path>, csv: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, csv).map_err(|source| CliError::Write {
            path: p.display().to_string(),
            source,
        }),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}
