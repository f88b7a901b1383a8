//! Command line driver: refinement tables, single solves, convergence studies
//! and solver benchmarks.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use tet_hybrid::analysis::{convergence_study, measure_level, ErrorReport, StudyOptions};
use tet_hybrid::assembly::assemble_system;
use tet_hybrid::io::{
    write_edges_csv, write_faces_csv, write_matrix_coo, write_mesh, write_vector,
};
use tet_hybrid::prelude::*;
use tet_hybrid::refinement::{LevelReport, DEFAULT_LEVEL_CAP};
use tet_hybrid::solver::solve;
use tet_hybrid::vtk::{write_faces_vtk, write_mesh_vtk};
use tet_hybrid::ErrorKind;

pub const EXIT_OK: i32 = 0;
pub const EXIT_OTHER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MESH: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;
pub const EXIT_IO: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "tet-hybrid",
    version,
    about = "Tetrahedral red refinement and primal hybrid FEM"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Refine the cube mesh, write every level and a counts/timings CSV.
    Refine(CommonArgs),
    /// Solve the manufactured problem on one level.
    Solve(CommonArgs),
    /// Run the convergence study for levels 1..=levels.
    Convergence(CommonArgs),
    /// Time refinement and all solvers, writing table-shaped CSVs.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Refinement level (refine: 3, solve: 2, convergence: 4, bench: 3).
    #[arg(short = 'l', long)]
    pub levels: Option<u32>,
    /// direct | schur | schur-parallel [default: schur]
    #[arg(long)]
    pub solver: Option<String>,
    /// Worker threads for schur-parallel [default: available cores].
    #[arg(long)]
    pub workers: Option<usize>,
    /// Relative residual tolerance [default: 1e-10].
    #[arg(long)]
    pub tol: Option<f64>,
    /// Output directory [default: out].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write legacy VTK files.
    #[arg(long)]
    pub vtk: bool,
    /// Add a nodal-average point field to the VTK output (smooths the jumps of u_h).
    #[arg(long)]
    pub point_average: bool,
    /// Write A, C (coordinate format) and B, b_D; refine also dumps edge/face CSVs.
    #[arg(long)]
    pub dump_matrices: bool,
    /// Allow levels above the default cap.
    #[arg(long)]
    pub force: bool,
    /// polynomial (u = x²y²z²) | linear (u = x + 2y + 3z + 4) [default: polynomial]
    #[arg(long)]
    pub problem: Option<String>,
    /// Load quadrature: degree5 | face-centroid [default: degree5]
    #[arg(long)]
    pub load: Option<String>,
    /// JSON file with any of the options above; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Highest level for the direct solver [default: 3].
    #[arg(long)]
    pub direct_max_level: Option<u32>,
}

/// Options accepted in the JSON config file.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub levels: Option<u32>,
    pub solver: Option<String>,
    pub workers: Option<usize>,
    pub tol: Option<f64>,
    pub out: Option<PathBuf>,
    pub vtk: Option<bool>,
    pub point_average: Option<bool>,
    pub dump_matrices: Option<bool>,
    pub force: Option<bool>,
    pub problem: Option<String>,
    pub load: Option<String>,
    pub direct_max_level: Option<u32>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub levels: u32,
    pub solver: SolverKind,
    pub workers: usize,
    pub tol: f64,
    pub out: PathBuf,
    pub vtk: bool,
    pub point_average: bool,
    pub dump_matrices: bool,
    pub force: bool,
    pub problem: ManufacturedProblem,
    pub load: LoadQuadrature,
    pub direct_max_level: u32,
}

fn config_error(msg: String) -> anyhow::Error {
    tet_hybrid::Error::InvalidArgument(msg).into()
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| config_error(format!("invalid config {}: {e}", path.display())))
}

/// Merge flags over the config file over defaults, validating before any work.
pub fn resolve(
    args: &CommonArgs,
    direct_max_level: Option<u32>,
    default_levels: u32,
) -> Result<Settings> {
    let cfg = match &args.config {
        Some(p) => load_config(p)?,
        None => RunConfig::default(),
    };
    let solver_name = args
        .solver
        .clone()
        .or(cfg.solver)
        .unwrap_or_else(|| "schur".into());
    let solver: SolverKind = solver_name.parse()?;
    let workers = args
        .workers
        .or(cfg.workers)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if workers == 0 {
        return Err(config_error("workers must be at least 1".into()));
    }
    let tol = args.tol.or(cfg.tol).unwrap_or(1e-10);
    if !(tol > 0.0 && tol < 1.0) {
        return Err(config_error(format!("tolerance {tol} must lie in (0, 1)")));
    }
    let force = args.force || cfg.force.unwrap_or(false);
    let levels = args.levels.or(cfg.levels).unwrap_or(default_levels);
    if levels > DEFAULT_LEVEL_CAP && !force {
        return Err(tet_hybrid::Error::LevelCap {
            level: levels,
            cap: DEFAULT_LEVEL_CAP,
        }
        .into());
    }
    let problem = match args.problem.clone().or(cfg.problem).as_deref() {
        None | Some("polynomial") => ManufacturedProblem::Polynomial,
        Some("linear") => ManufacturedProblem::linear_patch(),
        Some(other) => {
            return Err(config_error(format!(
                "unknown problem '{other}' (expected polynomial or linear)"
            )))
        }
    };
    let load = match args.load.clone().or(cfg.load) {
        Some(s) => s.parse()?,
        None => LoadQuadrature::default(),
    };
    Ok(Settings {
        levels,
        solver,
        workers,
        tol,
        out: args
            .out
            .clone()
            .or(cfg.out)
            .unwrap_or_else(|| PathBuf::from("out")),
        vtk: args.vtk || cfg.vtk.unwrap_or(false),
        point_average: args.point_average || cfg.point_average.unwrap_or(false),
        dump_matrices: args.dump_matrices || cfg.dump_matrices.unwrap_or(false),
        force,
        problem,
        load,
        direct_max_level: direct_max_level.or(cfg.direct_max_level).unwrap_or(3),
    })
}

impl Settings {
    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.tol,
            workers: self.workers,
            ..SolverOptions::default()
        }
    }

    fn study_options(&self, solver: SolverKind) -> StudyOptions {
        StudyOptions {
            solver,
            solver_options: self.solver_options(),
            load: self.load,
            force: self.force,
            ..StudyOptions::default()
        }
    }
}

/// Exit code for an error, from the first library error in its chain.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<tet_hybrid::Error>() {
            return match e.kind() {
                ErrorKind::Config => EXIT_CONFIG,
                ErrorKind::Mesh => EXIT_MESH,
                ErrorKind::Solver => EXIT_SOLVER,
                ErrorKind::Io => EXIT_IO,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some()
            || cause.downcast_ref::<csv::Error>().is_some()
        {
            return EXIT_IO;
        }
    }
    EXIT_OTHER
}

fn create_dir(p: &Path) -> Result<()> {
    fs::create_dir_all(p)
        .map_err(|e| tet_hybrid::Error::Io {
            path: p.to_path_buf(),
            source: e,
        })
        .map_err(Into::into)
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))
}

fn secs(t: f64) -> String {
    format!("{t:.4}")
}

pub const REFINE_HEADER: [&str; 9] = [
    "level",
    "nE",
    "nC",
    "nEd",
    "nF",
    "t_faceup",
    "t_numedges",
    "t_edge2tetra",
    "t_redrefine",
];

pub fn write_refine_csv(path: &Path, rows: &[LevelReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(REFINE_HEADER)?;
    for r in rows {
        w.write_record(&[
            r.level.to_string(),
            r.n_elems.to_string(),
            r.n_nodes.to_string(),
            r.n_edges.to_string(),
            r.n_faces.to_string(),
            secs(r.t_faceup),
            secs(r.t_numedges),
            secs(r.t_edge2tetra),
            secs(r.t_redrefine),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub const CONVERGENCE_HEADER: [&str; 14] = [
    "level",
    "nE",
    "nC",
    "nEd",
    "nF",
    "N",
    "L",
    "h",
    "err_u_Y",
    "order_u",
    "err_kappa_h",
    "order_kappa",
    "solver",
    "seconds",
];

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_default()
}

pub fn write_convergence_csv(path: &Path, rows: &[ErrorReport]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(CONVERGENCE_HEADER)?;
    for r in rows {
        w.write_record(&[
            r.level.to_string(),
            r.n_elems.to_string(),
            r.n_nodes.to_string(),
            r.n_edges.to_string(),
            r.n_faces.to_string(),
            r.n.to_string(),
            r.l.to_string(),
            format!("{:.6}", r.h),
            format!("{:.6}", r.err_u_y),
            opt(r.order_u),
            format!("{:.6}", r.err_kappa_h),
            opt(r.order_kappa),
            r.solver.clone(),
            secs(r.seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_refine(s: &Settings) -> Result<Vec<LevelReport>> {
    create_dir(&s.out)?;
    let (_, rows) = refine_with_report(s.levels, s.force, |mesh| {
        let p = s.out.join(format!("mesh_level{}.txt", mesh.level));
        write_mesh(&p, mesh)?;
        if s.vtk {
            write_mesh_vtk(
                &s.out.join(format!("mesh_level{}.vtk", mesh.level)),
                mesh,
                None,
                false,
            )?;
        }
        if s.dump_matrices {
            let c = Connectivity::build(mesh)?;
            write_edges_csv(
                &s.out.join(format!("edges_level{}.csv", mesh.level)),
                &c.edges,
            )?;
            write_faces_csv(
                &s.out.join(format!("faces_level{}.csv", mesh.level)),
                &c.faces,
            )?;
        }
        Ok(())
    })
    .context("refine")?;
    write_refine_csv(&s.out.join("refine.csv"), &rows)?;
    Ok(rows)
}

pub fn cmd_solve(s: &Settings) -> Result<Solution> {
    create_dir(&s.out)?;
    let mesh = refinement_stage(s.levels, s.force)?;
    let conn = Connectivity::build(&mesh).context("connectivity")?;
    let sys = assemble_system(&mesh, &conn.faces, &s.problem, s.load).context("assemble")?;
    if s.dump_matrices {
        write_matrix_coo(&s.out.join("A.coo"), &sys.a)?;
        write_matrix_coo(&s.out.join("C.coo"), &sys.c)?;
        write_vector(&s.out.join("B.txt"), &sys.b)?;
        write_vector(&s.out.join("bD.txt"), &sys.b_d)?;
    }
    let sol = solve(&sys, s.solver, &s.solver_options()).context("solve")?;
    write_vector(&s.out.join("u.txt"), &sol.u)?;
    write_vector(&s.out.join("lambda.txt"), &sol.lambda)?;
    let stats = serde_json::to_string_pretty(&sol.stats)?;
    let p = s.out.join("stats.json");
    fs::write(&p, format!("{stats}\n"))
        .map_err(|e| tet_hybrid::Error::Io { path: p, source: e })?;
    if s.vtk {
        write_mesh_vtk(
            &s.out.join("solution.vtk"),
            &mesh,
            Some(&sol),
            s.point_average,
        )?;
        write_faces_vtk(
            &s.out.join("multipliers.vtk"),
            &mesh,
            &conn.faces,
            &sol.lambda,
        )?;
    }
    Ok(sol)
}

fn refinement_stage(level: u32, force: bool) -> Result<Mesh> {
    let (mesh, _) = refine_with_report(level, force, |_| Ok(())).context("refine")?;
    Ok(mesh)
}

pub fn cmd_convergence(s: &Settings) -> Result<Vec<ErrorReport>> {
    create_dir(&s.out)?;
    let rows = convergence_study(s.levels, &s.problem, &s.study_options(s.solver))
        .context("convergence study")?;
    write_convergence_csv(&s.out.join("convergence.csv"), &rows)?;
    if s.vtk {
        let mesh = refinement_stage(s.levels, s.force)?;
        let (_, conn, sol) = measure_level(&mesh, &s.problem, &s.study_options(s.solver))?;
        write_mesh_vtk(
            &s.out.join("solution.vtk"),
            &mesh,
            Some(&sol),
            s.point_average,
        )?;
        write_faces_vtk(
            &s.out.join("multipliers.vtk"),
            &mesh,
            &conn.faces,
            &sol.lambda,
        )?;
    }
    Ok(rows)
}

/// One row of the solver comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct SolverBenchRow {
    pub level: u32,
    pub n: usize,
    pub l: usize,
    pub direct: Option<f64>,
    pub schur: f64,
    pub schur_parallel: f64,
    pub workers: usize,
    /// Size of the monolithic saddle-point system, `N + L`.
    pub block_dim: usize,
    /// Size of the largest system the Schur path solves.
    pub schur_dim: usize,
}

pub const SOLVER_HEADER: [&str; 10] = [
    "level",
    "N",
    "L",
    "t_direct",
    "t_schur",
    "t_schur_parallel",
    "workers",
    "block_dim",
    "schur_dim",
    "block_over_schur",
];

pub fn cmd_bench(s: &Settings) -> Result<(Vec<LevelReport>, Vec<SolverBenchRow>)> {
    create_dir(&s.out)?;
    // warm-up, not reported
    let _ = refine_with_report(1, false, |_| Ok(()))?;
    {
        let mesh = refinement_stage(1, false)?;
        let c = Connectivity::build(&mesh)?;
        let sys = assemble_system(&mesh, &c.faces, &s.problem, s.load)?;
        solve(&sys, SolverKind::Schur, &s.solver_options())?;
    }

    let mut meshes = Vec::new();
    let (_, refine_rows) = refine_with_report(s.levels, s.force, |m| {
        if m.level >= 1 {
            meshes.push(m.clone());
        }
        Ok(())
    })?;
    write_refine_csv(&s.out.join("bench_refine.csv"), &refine_rows)?;

    let mut rows = Vec::new();
    for mesh in &meshes {
        let c = Connectivity::build(mesh)?;
        let sys = assemble_system(mesh, &c.faces, &s.problem, s.load)?;
        let opts = s.solver_options();
        let time = |kind| -> Result<f64> {
            let clock = Instant::now();
            solve(&sys, kind, &opts).with_context(|| format!("level {} {kind}", mesh.level))?;
            Ok(clock.elapsed().as_secs_f64())
        };
        let direct = if mesh.level <= s.direct_max_level {
            Some(time(SolverKind::Direct)?)
        } else {
            None
        };
        rows.push(SolverBenchRow {
            level: mesh.level,
            n: sys.n(),
            l: sys.l(),
            direct,
            schur: time(SolverKind::Schur)?,
            schur_parallel: time(SolverKind::SchurParallel)?,
            workers: s.workers,
            block_dim: sys.n() + sys.l(),
            schur_dim: sys.l(),
        });
    }

    let mut w = csv_writer(&s.out.join("bench_dims.csv"))?;
    w.write_record(["level", "N", "L"])?;
    for r in &rows {
        w.write_record(&[r.level.to_string(), r.n.to_string(), r.l.to_string()])?;
    }
    w.flush()?;

    let mut w = csv_writer(&s.out.join("bench_solvers.csv"))?;
    w.write_record(SOLVER_HEADER)?;
    for r in &rows {
        w.write_record(&[
            r.level.to_string(),
            r.n.to_string(),
            r.l.to_string(),
            r.direct.map(secs).unwrap_or_else(|| "NA".into()),
            secs(r.schur),
            secs(r.schur_parallel),
            r.workers.to_string(),
            r.block_dim.to_string(),
            r.schur_dim.to_string(),
            format!("{:.4}", r.block_dim as f64 / r.schur_dim as f64),
        ])?;
    }
    w.flush()?;
    Ok((refine_rows, rows))
}

fn print_csv(path: &Path) {
    if let Ok(text) = fs::read_to_string(path) {
        print!("{text}");
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Refine(a) => {
            let s = resolve(&a, None, 3)?;
            cmd_refine(&s)?;
            print_csv(&s.out.join("refine.csv"));
        }
        Command::Solve(a) => {
            let s = resolve(&a, None, 2)?;
            let sol = cmd_solve(&s)?;
            println!("{}", serde_json::to_string(&sol.stats)?);
        }
        Command::Convergence(a) => {
            let s = resolve(&a, None, 4)?;
            cmd_convergence(&s)?;
            print_csv(&s.out.join("convergence.csv"));
        }
        Command::Bench(b) => {
            let s = resolve(&b.common, b.direct_max_level, 3)?;
            cmd_bench(&s)?;
            print_csv(&s.out.join("bench_refine.csv"));
            print_csv(&s.out.join("bench_solvers.csv"));
        }
    }
    Ok(())
}
