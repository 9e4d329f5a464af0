//! Command-line pipeline. Each subcommand is a stage that reads the shared
//! experiment configuration, rebuilds the (deterministic) geometry it needs,
//! and reads/writes artifacts under the output directory:
//!
//! ```text
//! out/
//!   mesh.txt                  generate
//!   fine/                     solve-fine: trajectory.csv, summary.txt,
//!                             timing.txt, optional VTK snapshots
//!   coarse_s<σ>/              upscale: R.txt, Abar.txt, Mbar.txt, Fbar.txt,
//!                             dofmap.txt, summary.txt (+ basis/ dumps);
//!                             solve-coarse adds trajectory.csv
//!   report.txt, report.csv    compare
//! ```
//!
//! Stages are idempotent: re-running one with unchanged inputs rewrites
//! byte-identical artifacts. Wall times go to separate `timing*.txt` files so
//! they never break that property.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::fvm::{self, BlockSystem, SourceSpec};
use crate::geometry::{
    build_coarse_grid, generate_fractures_dfm, generate_fractures_efm, generate_structured_mesh,
    label_networks_with_hints, read_celldata, read_mesh, write_mesh, CoarseGrid, FineMesh,
    FractureDofs, FractureGeometry, FractureMode, GeneratorParams, Segment,
};
use crate::io::config::{read_config, ExperimentConfig};
use crate::io::report::{format_report, read_report_csv, write_report_csv, ReportRow};
use crate::io::{dump, vtk};
use crate::nlmc::{self, CoarseDofId, MassMode};
use crate::sim::{self, Trajectory};
use crate::{Error, Result};

#[derive(Parser)]
#[command(
    name = "nlmc-flow",
    version,
    about = "Fine-grid DFM/EFM flow in fractured media and NLMC upscaling"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate the fracture geometry and write the mesh artifact.
    Generate(CommonOpts),
    /// Assemble and time-step the fine-grid model.
    SolveFine(CommonOpts),
    /// Build multiscale bases and the coarse model for each layer count.
    Upscale(CommonOpts),
    /// Time-step the stored coarse models.
    SolveCoarse(CommonOpts),
    /// Compare coarse against fine trajectories and write the report.
    Compare(CommonOpts),
    /// Print the stored report and solve timings.
    Report(CommonOpts),
}

#[derive(Args)]
struct CommonOpts {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated oversampling layer counts (overrides the config).
    #[arg(long, value_delimiter = ',')]
    layers: Option<Vec<usize>>,
    /// Fracture model: dfm or efm (overrides the config).
    #[arg(long)]
    model: Option<String>,
    /// Coarse mass matrix: galerkin or diagonal (overrides the config).
    #[arg(long)]
    mass: Option<String>,
    /// Fracture generator seed (overrides the config).
    #[arg(long)]
    seed: Option<u64>,
}

/// Entry point for the binary; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let (opts, stage): (&CommonOpts, fn(&ExperimentConfig) -> Result<()>) = match &cli.cmd {
        Cmd::Generate(o) => (o, cmd_generate),
        Cmd::SolveFine(o) => (o, cmd_solve_fine),
        Cmd::Upscale(o) => (o, cmd_upscale),
        Cmd::SolveCoarse(o) => (o, cmd_solve_coarse),
        Cmd::Compare(o) => (o, cmd_compare),
        Cmd::Report(o) => (o, cmd_report),
    };
    let result = load_config(opts).and_then(|cfg| stage(&cfg));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load_config(opts: &CommonOpts) -> Result<ExperimentConfig> {
    let mut cfg = read_config(&opts.config)?;
    if let Some(out) = &opts.out {
        cfg.output.dir = out.display().to_string();
    }
    if let Some(layers) = &opts.layers {
        cfg.upscale.layers = layers.clone();
    }
    if let Some(model) = &opts.model {
        cfg.geometry.model = match model.as_str() {
            "dfm" => FractureMode::Dfm,
            "efm" => FractureMode::Efm,
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        };
    }
    if let Some(mass) = &opts.mass {
        cfg.upscale.mass = match mass.as_str() {
            "galerkin" => MassMode::Galerkin,
            "diagonal" => MassMode::Diagonal,
            other => return Err(Error::Config(format!("unknown mass mode `{other}`"))),
        };
    }
    if let Some(seed) = opts.seed {
        cfg.geometry.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Prefixes message-carrying errors with stage context.
fn prefixed(e: Error, prefix: &str) -> Error {
    match e {
        Error::Config(m) => Error::Config(format!("{prefix}: {m}")),
        Error::Geometry(m) => Error::Geometry(format!("{prefix}: {m}")),
        Error::Solver(m) => Error::Solver(format!("{prefix}: {m}")),
        other => other,
    }
}

struct Geometry {
    mesh: FineMesh,
    fractures: FractureGeometry,
    fdofs: FractureDofs,
    grid: CoarseGrid,
}

/// Rebuilds the experiment geometry from the configuration. Every stage goes
/// through here, so the stages agree without passing meshes between them.
fn build_geometry(cfg: &ExperimentConfig) -> Result<Geometry> {
    let g = &cfg.geometry;
    let (mesh, specs) = match &g.mesh_file {
        Some(path) => read_mesh(Path::new(path))?,
        None => {
            let mesh = generate_structured_mesh(g.fine.0, g.fine.1, g.domain)?;
            let params = GeneratorParams {
                n_fractures: g.n_fractures,
                min_length: g.min_length,
                max_length: g.max_length,
                seed: g.seed,
            };
            let specs = match g.model {
                FractureMode::Efm => generate_fractures_efm(&g.domain, &params)?,
                FractureMode::Dfm => generate_fractures_dfm(&g.domain, g.fine.0, g.fine.1, &params)?,
            };
            (mesh, specs)
        }
    };
    let (segments, hints): (Vec<Segment>, Vec<Option<usize>>) = specs
        .iter()
        .map(|s| (Segment::new(s.a, s.b), s.network_hint))
        .unzip();
    let fractures = if segments.is_empty() {
        FractureGeometry {
            mode: g.model,
            segments: Vec::new(),
            network_id: Vec::new(),
            n_networks: 0,
        }
    } else {
        label_networks_with_hints(segments, &hints, g.model)?
    };
    let fdofs = if fractures.segments.is_empty() {
        FractureDofs::empty(g.model)
    } else {
        FractureDofs::build(&mesh, &fractures)?
    };
    let grid = build_coarse_grid(&mesh, &fdofs, g.coarse.0, g.coarse.1)?;
    Ok(Geometry {
        mesh,
        fractures,
        fdofs,
        grid,
    })
}

/// Assembles the fine block system with material parameters and sources.
fn assemble_system(cfg: &ExperimentConfig, geo: &Geometry) -> Result<BlockSystem> {
    let k_m_field = match &cfg.params.k_m_file {
        Some(path) => Some(read_celldata(Path::new(path), geo.mesh.n_cells())?),
        None => None,
    };
    let params = cfg.params.material(geo.fractures.n_networks, k_m_field)?;
    let mut system = fvm::assemble(&geo.mesh, &geo.fractures, &geo.fdofs, &params)?;
    if !cfg.sources.terms.is_empty() {
        let spec = SourceSpec {
            terms: cfg.sources.terms.clone(),
        };
        let report = fvm::apply_sources(&mut system, &spec, &geo.mesh, &geo.fdofs)?;
        for &term in &report.empty_terms {
            eprintln!("warning: source term {} hits no entity", term + 1);
        }
        if cfg.sources.balance {
            fvm::balance_rhs(&mut system.f);
        }
    }
    Ok(system)
}

fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    PathBuf::from(&cfg.output.dir)
}

fn coarse_dir(cfg: &ExperimentConfig, layers: usize) -> PathBuf {
    out_dir(cfg).join(format!("coarse_s{layers}"))
}

fn require(path: &Path, stage: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "missing artifact {}; run `{stage}` first",
            path.display()
        )))
    }
}

fn cmd_generate(cfg: &ExperimentConfig) -> Result<()> {
    let geo = build_geometry(cfg)?;
    let out = out_dir(cfg);
    std::fs::create_dir_all(&out)?;
    let specs: Vec<crate::geometry::FractureSpec> = geo
        .fractures
        .segments
        .iter()
        .zip(&geo.fractures.network_id)
        .map(|(s, &net)| crate::geometry::FractureSpec {
            a: s.a,
            b: s.b,
            network_hint: Some(net),
        })
        .collect();
    let path = out.join("mesh.txt");
    write_mesh(&path, &geo.mesh, &specs)?;
    println!(
        "wrote {} ({} cells, {} fracture segments in {} networks)",
        path.display(),
        geo.mesh.n_cells(),
        geo.fractures.segments.len(),
        geo.fractures.n_networks
    );
    Ok(())
}

fn cmd_solve_fine(cfg: &ExperimentConfig) -> Result<()> {
    let geo = build_geometry(cfg)?;
    let t0 = Instant::now();
    let system = assemble_system(cfg, &geo)?;
    let t_assemble = t0.elapsed().as_secs_f64();
    if system.f.iter().all(|&v| v == 0.0) {
        eprintln!("warning: zero right-hand side; the solution stays at p0");
    }

    let t0 = Instant::now();
    let traj = sim::run_fine(&system, &cfg.time)?;
    let t_solve = t0.elapsed().as_secs_f64();

    let dir = out_dir(cfg).join("fine");
    std::fs::create_dir_all(&dir)?;
    dump::write_trajectory_csv(&dir.join("trajectory.csv"), &traj)?;
    let summary = format!(
        "dof_matrix = {}\ndof_fracture = {}\ndof_fine = {}\nn_networks = {}\nn_steps = {}\n",
        system.n_m,
        system.n_f,
        system.n_total(),
        geo.fractures.n_networks,
        cfg.time.n_steps
    );
    std::fs::write(dir.join("summary.txt"), summary)?;
    dump::write_timing(
        &dir.join("timing.txt"),
        &[
            ("assemble".to_string(), t_assemble),
            ("solve".to_string(), t_solve),
        ],
    )?;
    if cfg.output.vtk {
        for &snap in &cfg.output.snapshots {
            let state = &traj.states[snap];
            vtk::write_matrix_vtk(
                &dir.join(format!("matrix_{snap:04}.vtk")),
                &geo.mesh,
                &state[..system.n_m],
            )?;
            if system.n_f > 0 {
                vtk::write_fracture_vtk(
                    &dir.join(format!("fracture_{snap:04}.vtk")),
                    &geo.fdofs,
                    &state[system.n_m..],
                )?;
            }
        }
    }
    println!(
        "fine model solved: {} unknowns ({} matrix + {} fracture), {} steps in {:.3}s",
        system.n_total(),
        system.n_m,
        system.n_f,
        cfg.time.n_steps,
        t_solve
    );
    Ok(())
}

fn write_dofmap(path: &Path, dof_map: &[CoarseDofId]) -> Result<()> {
    use std::fmt::Write as _;
    let mut s = String::new();
    for (i, id) in dof_map.iter().enumerate() {
        match id {
            CoarseDofId::Cell(c) => {
                let _ = writeln!(s, "{i} cell {c}");
            }
            CoarseDofId::Fragment {
                cell,
                network,
                fragment,
            } => {
                let _ = writeln!(s, "{i} frag {cell} {network} {fragment}");
            }
        }
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn cmd_upscale(cfg: &ExperimentConfig) -> Result<()> {
    let geo = build_geometry(cfg)?;
    let system = assemble_system(cfg, &geo)?;
    for &s in &cfg.upscale.layers {
        let t0 = Instant::now();
        let bases = nlmc::build_all_bases(
            &system,
            &geo.mesh,
            &geo.fdofs,
            &geo.grid,
            s,
            cfg.upscale.parallel,
        )
        .map_err(|e| prefixed(e, &format!("layers {s}")))?;
        let t_basis = t0.elapsed().as_secs_f64();

        let t0 = Instant::now();
        let proj = nlmc::assemble_projection(&bases, &geo.grid, &system)
            .map_err(|e| prefixed(e, &format!("layers {s}")))?;
        let model = nlmc::build_coarse_model(
            &proj,
            &system,
            &geo.grid,
            cfg.upscale.mass,
            cfg.upscale.rhs,
        )
        .map_err(|e| prefixed(e, &format!("layers {s}")))?;
        let t_model = t0.elapsed().as_secs_f64();

        let dir = coarse_dir(cfg, s);
        std::fs::create_dir_all(&dir)?;
        dump::write_matrix(&dir.join("R.txt"), &proj.r)?;
        dump::write_matrix(&dir.join("Abar.txt"), &model.a)?;
        dump::write_matrix(&dir.join("Mbar.txt"), &model.m)?;
        dump::write_vector(&dir.join("Fbar.txt"), &model.f)?;
        write_dofmap(&dir.join("dofmap.txt"), &model.dof_map)?;
        let summary = format!(
            "layers = {s}\ndof_coarse = {}\nn_cells = {}\nn_fragments = {}\nmass = {}\nrhs = {}\n",
            proj.n_coarse(),
            geo.grid.n_cells(),
            geo.grid.n_fragments(),
            match cfg.upscale.mass {
                MassMode::Galerkin => "galerkin",
                MassMode::Diagonal => "diagonal",
            },
            match cfg.upscale.rhs {
                nlmc::RhsMode::Galerkin => "galerkin",
                nlmc::RhsMode::Direct => "direct",
            }
        );
        std::fs::write(dir.join("summary.txt"), summary)?;
        dump::write_timing(
            &dir.join("timing-upscale.txt"),
            &[
                ("basis".to_string(), t_basis),
                ("model".to_string(), t_model),
            ],
        )?;
        if cfg.upscale.dump_basis {
            let bdir = dir.join("basis");
            std::fs::create_dir_all(&bdir)?;
            for b in &bases {
                let network = match b.kind {
                    nlmc::BasisKind::Matrix => 0,
                    nlmc::BasisKind::Fracture { fragment } => geo.grid.fragments[fragment].network,
                };
                dump::write_basis(&bdir, b, network)?;
            }
        }
        let worst = bases
            .iter()
            .map(|b| b.constraint_residual)
            .fold(0.0f64, f64::max);
        println!(
            "s = {s}: {} bases, coarse model with {} unknowns, max constraint residual {:.2e} ({:.3}s)",
            bases.len(),
            proj.n_coarse(),
            worst,
            t_basis + t_model
        );
    }
    Ok(())
}

fn cmd_solve_coarse(cfg: &ExperimentConfig) -> Result<()> {
    for &s in &cfg.upscale.layers {
        let dir = coarse_dir(cfg, s);
        for name in ["Abar.txt", "Mbar.txt", "Fbar.txt"] {
            require(&dir.join(name), "upscale")?;
        }
        let a = dump::read_matrix(&dir.join("Abar.txt"))?;
        let m = dump::read_matrix(&dir.join("Mbar.txt"))?;
        let f = dump::read_vector(&dir.join("Fbar.txt"))?;
        let t0 = Instant::now();
        let traj = sim::run_system(&m, &a, &f, &cfg.time)
            .map_err(|e| prefixed(e, &format!("layers {s}")))?;
        let t_solve = t0.elapsed().as_secs_f64();
        dump::write_trajectory_csv(&dir.join("trajectory.csv"), &traj)?;
        dump::write_timing(
            &dir.join("timing-solve.txt"),
            &[("solve".to_string(), t_solve)],
        )?;
        println!(
            "s = {s}: coarse model with {} unknowns, {} steps in {:.3}s",
            a.nrows(),
            cfg.time.n_steps,
            t_solve
        );
    }
    Ok(())
}

/// Splits a trajectory state into continuum blocks and checks its size.
fn check_len(state: &[f64], expect: usize, what: &str, redo: &str) -> Result<()> {
    if state.len() == expect {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "stored {what} trajectory has {} unknowns but the configured geometry yields {expect}; re-run `{redo}`",
            state.len()
        )))
    }
}

fn cmd_compare(cfg: &ExperimentConfig) -> Result<()> {
    let geo = build_geometry(cfg)?;
    let n_m = geo.mesh.n_cells();
    let n_cells = geo.grid.n_cells();

    let fine_path = out_dir(cfg).join("fine").join("trajectory.csv");
    require(&fine_path, "solve-fine")?;
    let fine = dump::read_trajectory_csv(&fine_path)?;
    check_len(&fine.states[0], n_m + geo.fdofs.dofs.len(), "fine", "solve-fine")?;
    let dof_fine = n_m + geo.fdofs.dofs.len();
    let dof_coarse = geo.grid.n_coarse_dofs();

    let mut rows = Vec::new();
    for &s in &cfg.upscale.layers {
        let coarse_path = coarse_dir(cfg, s).join("trajectory.csv");
        require(&coarse_path, "solve-coarse")?;
        let coarse = dump::read_trajectory_csv(&coarse_path)?;
        check_len(&coarse.states[0], dof_coarse, "coarse", "upscale` and `solve-coarse")?;
        if coarse.states.len() != fine.states.len() {
            return Err(Error::Config(format!(
                "fine trajectory has {} states but the coarse one for s = {s} has {}; re-run with one time spec",
                fine.states.len(),
                coarse.states.len()
            )));
        }
        for &snap in &cfg.output.snapshots {
            let pf = &fine.states[snap];
            let pc = &coarse.states[snap];
            let err_matrix_pct =
                sim::relative_error(&pf[..n_m], &pc[..n_cells], &geo.grid, &geo.mesh.cell_area)?;
            let err_fracture_pct = if geo.grid.n_fragments() > 0 {
                Some(sim::relative_error_fracture(
                    &pf[n_m..],
                    &pc[n_cells..],
                    &geo.grid,
                    &geo.fdofs,
                )?)
            } else {
                None
            };
            rows.push(ReportRow {
                layers: s,
                step: snap,
                time: fine.times[snap],
                err_matrix_pct,
                err_fracture_pct,
                dof_fine,
                dof_coarse,
            });
        }
    }
    let out = out_dir(cfg);
    write_report_csv(&out.join("report.csv"), &rows)?;
    let table = format_report(&rows);
    std::fs::write(out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn cmd_report(cfg: &ExperimentConfig) -> Result<()> {
    let out = out_dir(cfg);
    let csv = out.join("report.csv");
    require(&csv, "compare")?;
    let rows = read_report_csv(&csv)?;
    print!("{}", format_report(&rows));

    let fine_timing = out.join("fine").join("timing.txt");
    if let Ok(entries) = dump::read_timing(&fine_timing) {
        if let Some((_, fine_solve)) = entries.iter().find(|(n, _)| n == "solve") {
            println!("\nfine solve: {fine_solve:.3}s");
            for &s in &cfg.upscale.layers {
                let path = coarse_dir(cfg, s).join("timing-solve.txt");
                let Ok(entries) = dump::read_timing(&path) else {
                    continue;
                };
                if let Some((_, coarse_solve)) = entries.iter().find(|(n, _)| n == "solve") {
                    let speedup = if *coarse_solve > 0.0 {
                        fine_solve / coarse_solve
                    } else {
                        f64::INFINITY
                    };
                    println!("s = {s}: coarse solve {coarse_solve:.3}s ({speedup:.0}x speedup)");
                }
            }
        }
    }
    Ok(())
}

/// Full in-process pipeline for one layer count; used by tests and kept here
/// so the CLI and library agree on the experiment semantics.
pub fn run_experiment(cfg: &ExperimentConfig, layers: usize) -> Result<(Trajectory, Trajectory)> {
    let geo = build_geometry(cfg)?;
    let system = assemble_system(cfg, &geo)?;
    let fine = sim::run_fine(&system, &cfg.time)?;
    let bases = nlmc::build_all_bases(
        &system,
        &geo.mesh,
        &geo.fdofs,
        &geo.grid,
        layers,
        cfg.upscale.parallel,
    )?;
    let proj = nlmc::assemble_projection(&bases, &geo.grid, &system)?;
    let model = nlmc::build_coarse_model(&proj, &system, &geo.grid, cfg.upscale.mass, cfg.upscale.rhs)?;
    let coarse = sim::run_coarse(&model, &cfg.time)?;
    Ok((fine, coarse))
}
