//! SOLVE, ESTIMATE, MARK, REFINE loop with CSV and VTK output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use thiserror::Error;

use crate::adapt::{mark, refine, RefineStats, RefinementConfig};
use crate::dfn::{builtin_problem, generate_synthetic_dfn, load_dfn, DfnError, ProblemSpec, SyntheticConfig};
use crate::estimator::{compute_estimator, EstimatorError, EstimatorReport};
use crate::mesh::{write_vtk, ConformingMesh, MeshError};
use crate::minimal_mesh::build_minimal_mesh;
use crate::solver::{default_max_iter, pcg, IncompleteCholesky, SolverError};
use crate::vem::{assemble, Discretization, VemError};

#[derive(Debug, Error)]
pub enum DriverError {
    #[error(transparent)]
    Dfn(#[from] DfnError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Vem(#[from] VemError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("need {needed} logged iterations, have {have}")]
    InsufficientData { needed: usize, have: usize },
    #[error("mesh audit failed: {0}")]
    Audit(String),
}

pub const CSV_HEADER: &str = "step,ncell,ndof,est,err,eff,pcg_it,ar_min,ar_mean,ar_max,wall_ms";

/// PCG relative residual tolerance.
pub const PCG_TOL: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Builtin(String),
    File(PathBuf),
    Synthetic(u64),
}

impl FromStr for ProblemSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Some(path) = s.strip_prefix("file:") {
            Ok(Self::File(PathBuf::from(path)))
        } else if let Some(seed) = s.strip_prefix("synthetic:") {
            seed.parse()
                .map(Self::Synthetic)
                .map_err(|_| format!("invalid synthetic seed '{seed}'"))
        } else if s.is_empty() {
            Err("empty problem name".into())
        } else {
            Ok(Self::Builtin(s.to_string()))
        }
    }
}

impl ProblemSource {
    pub fn load(&self) -> Result<ProblemSpec, DfnError> {
        match self {
            Self::Builtin(name) => builtin_problem(name),
            Self::File(path) => load_dfn(path),
            Self::Synthetic(seed) => generate_synthetic_dfn(&SyntheticConfig {
                seed: *seed,
                ..Default::default()
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub problem: ProblemSource,
    pub order: usize,
    pub refinement: RefinementConfig,
    /// Threshold on the estimated relative error.
    pub tol: f64,
    pub max_iter: usize,
    pub out_dir: Option<PathBuf>,
    pub vtk: bool,
    /// Audit the mesh after every refinement.
    pub audit: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: ProblemSource::Builtin("problem1".into()),
            order: 1,
            refinement: RefinementConfig::default(),
            tol: 0.05,
            max_iter: 60,
            out_dir: None,
            vtk: false,
            audit: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), DriverError> {
        if !(1..=4).contains(&self.order) {
            return Err(DriverError::InvalidConfig(format!("order must be in 1..=4, got {}", self.order)));
        }
        if !(self.tol > 0.0) {
            return Err(DriverError::InvalidConfig(format!("threshold must be positive, got {}", self.tol)));
        }
        self.refinement.validate().map_err(DriverError::InvalidConfig)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub ncell: usize,
    pub ndof: usize,
    pub est: f64,
    pub relative_est: f64,
    pub err: Option<f64>,
    pub eff: Option<f64>,
    pub pcg_it: usize,
    pub ar_min: f64,
    pub ar_mean: f64,
    pub ar_max: f64,
    /// `(min, mean, max)` aspect ratio per fracture.
    pub ar_fracture: Vec<(f64, f64, f64)>,
    pub wall_ms: f64,
}

impl StepRecord {
    pub fn csv_row(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
        format!(
            "{},{},{},{},{},{},{},{},{},{},{:.3}",
            self.step,
            self.ncell,
            self.ndof,
            self.est,
            opt(self.err),
            opt(self.eff),
            self.pcg_it,
            self.ar_min,
            self.ar_mean,
            self.ar_max,
            self.wall_ms
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Converged,
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct RunLog {
    pub records: Vec<StepRecord>,
    pub refinements: Vec<RefineStats>,
    pub outcome: RunOutcome,
}

impl RunLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(CSV_HEADER);
        s.push('\n');
        for r in &self.records {
            s.push_str(&r.csv_row());
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateQuantity {
    Est,
    Err,
}

/// Least-squares slope of `log(quantity)` against `log(NDOF)` over the last
/// `window` records.
pub fn fit_rate(log: &RunLog, window: usize, quantity: RateQuantity) -> Result<f64, DriverError> {
    let recs = &log.records;
    if window < 2 || recs.len() < window {
        return Err(DriverError::InsufficientData {
            needed: window.max(2),
            have: recs.len(),
        });
    }
    let pts: Vec<(f64, f64)> = recs[recs.len() - window..]
        .iter()
        .map(|r| {
            let q = match quantity {
                RateQuantity::Est => Some(r.est),
                RateQuantity::Err => r.err,
            };
            q.map(|q| ((r.ndof as f64).ln(), q.ln()))
        })
        .collect::<Option<_>>()
        .ok_or(DriverError::InsufficientData { needed: window, have: 0 })?;
    Ok(slope(&pts))
}

pub fn slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Solution of one SOLVE and ESTIMATE pass.
pub struct Solved {
    pub disc: Discretization,
    /// All DOFs, Dirichlet values included.
    pub u: Vec<f64>,
    pub pcg_iterations: usize,
    pub report: EstimatorReport,
}

pub fn solve_and_estimate(mesh: &ConformingMesh, problem: &ProblemSpec, k: usize) -> Result<Solved, DriverError> {
    let disc = assemble(mesh, problem, k)?;
    let ic = IncompleteCholesky::new(&disc.matrix)?;
    let (x, stats) = pcg(&disc.matrix, &disc.rhs, &ic, PCG_TOL, default_max_iter(disc.matrix.n()))?;
    let u = disc.dofmap.expand(&x);
    let report = compute_estimator(mesh, problem, &disc, &u)?;
    Ok(Solved {
        disc,
        u,
        pcg_iterations: stats.iterations,
        report,
    })
}

pub struct RunResult {
    pub log: RunLog,
    pub mesh: ConformingMesh,
}

/// Loads the problem and runs the adaptive loop.
pub fn run_adaptive(cfg: &RunConfig) -> Result<RunLog, DriverError> {
    let problem = cfg.problem.load()?;
    run_problem(&problem, cfg).map(|r| r.log)
}

/// Runs the adaptive loop on a loaded problem. At most `max_iter`
/// refinements are made, so the log holds at most `max_iter + 1` records.
pub fn run_problem(problem: &ProblemSpec, cfg: &RunConfig) -> Result<RunResult, DriverError> {
    cfg.validate()?;
    let mut mesh = build_minimal_mesh(&problem.dfn)?;
    let mut csv = match &cfg.out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let mut w = BufWriter::new(File::create(dir.join("log.csv"))?);
            writeln!(w, "{CSV_HEADER}")?;
            w.flush()?;
            Some(w)
        }
        None => None,
    };
    let mut records = Vec::new();
    let mut refinements = Vec::new();
    let mut outcome = RunOutcome::MaxIterations;
    for step in 0..=cfg.max_iter {
        let t0 = Instant::now();
        let solved = solve_and_estimate(&mesh, problem, cfg.order)?;
        let rep = &solved.report;
        let (ar_min, ar_mean, ar_max) = mesh.aspect_ratio_stats();
        let ar_fracture = mesh
            .fractures
            .iter()
            .map(|f| {
                let ars: Vec<f64> = f.alive_cells().map(|c| f.cells[c].aspect_ratio).collect();
                (
                    ars.iter().copied().fold(f64::INFINITY, f64::min),
                    ars.iter().sum::<f64>() / ars.len() as f64,
                    ars.iter().copied().fold(0.0, f64::max),
                )
            })
            .collect();
        let converged = rep.relative() <= cfg.tol;
        if let Some(dir) = cfg.out_dir.as_ref().filter(|_| cfg.vtk) {
            write_step_vtk(dir, step, &mesh, rep)?;
        }
        let record = StepRecord {
            step,
            ncell: mesh.num_cells(),
            ndof: solved.disc.dofmap.ndof,
            est: rep.est,
            relative_est: rep.relative(),
            err: rep.err,
            eff: rep.effectivity().ok(),
            pcg_it: solved.pcg_iterations,
            ar_min,
            ar_mean,
            ar_max,
            ar_fracture,
            wall_ms: t0.elapsed().as_secs_f64() * 1e3,
        };
        if converged || step == cfg.max_iter {
            if let Some(w) = csv.as_mut() {
                writeln!(w, "{}", record.csv_row())?;
                w.flush()?;
            }
            records.push(record);
            if converged {
                outcome = RunOutcome::Converged;
            }
            break;
        }
        let marked: Vec<(usize, usize)> = mark(&rep.per_cell, cfg.refinement.c)
            .into_iter()
            .map(|i| rep.cells[i])
            .collect();
        let stats = refine(&mut mesh, &marked, &cfg.refinement);
        let mut record = record;
        record.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        if let Some(w) = csv.as_mut() {
            writeln!(w, "{}", record.csv_row())?;
            w.flush()?;
        }
        records.push(record);
        refinements.push(stats?);
        if cfg.audit {
            let a = mesh.audit();
            if !a.is_ok() {
                return Err(DriverError::Audit(a.violations.join("; ")));
            }
        }
    }
    Ok(RunResult {
        log: RunLog {
            records,
            refinements,
            outcome,
        },
        mesh,
    })
}

fn write_step_vtk(dir: &Path, step: usize, mesh: &ConformingMesh, rep: &EstimatorReport) -> Result<(), DriverError> {
    let est: Vec<f64> = rep.per_cell.iter().map(|e| e.sqrt()).collect();
    let w = BufWriter::new(File::create(dir.join(format!("mesh_{step:03}.vtk")))?);
    write_vtk(mesh, &[("estimator", &est)], w)?;
    Ok(())
}
