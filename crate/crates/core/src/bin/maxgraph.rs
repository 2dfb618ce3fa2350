//! Command-line front end: builds meshes, solves singularity configurations,
//! verifies solved fields, runs moduli experiments, and exposes the 1D
//! shooting oracle. Every run echoes its manifest into the output directory
//! so artifacts alone suffice to reproduce it.

use clap::{Args, Parser, Subcommand};
use maxgraph::analysis::verify;
use maxgraph::io;
use maxgraph::mesh::{build_sphere, build_torus, SurfaceMesh};
use maxgraph::moduli::{continuity_probe, openness_probe, sample_configs, shift_equivariance};
use maxgraph::oracle::shoot;
use maxgraph::solver::{solve_singular, SingularMaximalGraph, SolverSettings};
use maxgraph::{MgError, Result};
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

#[derive(Parser)]
#[command(
    name = "maxgraph",
    version,
    about = "Singular maximal graphs over compact surfaces: solve and verify"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Surface to mesh: `sphere:<level>` or `torus:<nx>x<ny>:<Lx>x<Ly>`
    #[arg(long)]
    surface: String,
    /// Output directory (created if absent)
    #[arg(long)]
    out: PathBuf,
    /// Worker pool size for multi-configuration workloads
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Seed for any sampling done by the command
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solver settings JSON; defaults apply when omitted
    #[arg(long)]
    settings: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build a surface mesh and export OBJ plus a topology sidecar
    Mesh {
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Solve a singularity configuration to a maximal graph
    Solve {
        #[command(flatten)]
        common: CommonArgs,
        /// Singularity configuration JSON
        #[arg(long)]
        config: PathBuf,
    },
    /// Verify a solved field against the structural claims
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Singularity configuration JSON
        #[arg(long)]
        config: PathBuf,
        /// Per-vertex field CSV produced by `solve`
        #[arg(long)]
        field: PathBuf,
    },
    /// Run a sampled moduli experiment from a manifest
    Moduli {
        #[command(flatten)]
        common: CommonArgs,
        /// Experiment manifest JSON: {"m": …, "count": …, "seed": …, "deltas": […]}
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Solve the rotationally symmetric antipodal profile by shooting
    Oracle {
        /// Height gap between the two poles
        #[arg(long)]
        tau: f64,
        /// Inner colatitude of the reduced boundary value problem
        #[arg(long, default_value_t = 1e-9)]
        theta0: f64,
        /// Outer colatitude; defaults to the antipodal mirror of theta0
        #[arg(long)]
        theta1: Option<f64>,
        /// Number of profile samples to print
        #[arg(long, default_value_t = 33)]
        samples: usize,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // clap's own exit codes don't distinguish usage errors from
            // runtime failures; print its rendering and use the sysexits
            // usage code
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(64)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_domain_error() {
                ExitCode::from(1)
            } else {
                ExitCode::from(2)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Mesh { common } => cmd_mesh(&common),
        Command::Solve { common, config } => cmd_solve(&common, &config),
        Command::Verify {
            common,
            config,
            field,
        } => cmd_verify(&common, &config, &field),
        Command::Moduli { common, manifest } => cmd_moduli(&common, &manifest),
        Command::Oracle {
            tau,
            theta0,
            theta1,
            samples,
        } => cmd_oracle(tau, theta0, theta1, samples),
    }
}

/// Parses `sphere:<level>` or `torus:<nx>x<ny>:<Lx>x<Ly>`.
fn parse_surface(spec: &str) -> Result<SurfaceMesh> {
    let bad = |msg: &str| MgError::InvalidConfig(format!("surface `{spec}`: {msg}"));
    match spec.split_once(':') {
        Some(("sphere", level)) => {
            let level: u32 = level
                .parse()
                .map_err(|_| bad("level must be an integer"))?;
            build_sphere(level)
        }
        Some(("torus", rest)) => {
            let (grid, extent) = rest
                .split_once(':')
                .ok_or_else(|| bad("expected torus:<nx>x<ny>:<Lx>x<Ly>"))?;
            let (nx, ny) = grid
                .split_once('x')
                .ok_or_else(|| bad("grid must be <nx>x<ny>"))?;
            let (lx, ly) = extent
                .split_once('x')
                .ok_or_else(|| bad("extent must be <Lx>x<Ly>"))?;
            let nx: u32 = nx.parse().map_err(|_| bad("nx must be an integer"))?;
            let ny: u32 = ny.parse().map_err(|_| bad("ny must be an integer"))?;
            let lx: f64 = lx.parse().map_err(|_| bad("Lx must be a number"))?;
            let ly: f64 = ly.parse().map_err(|_| bad("Ly must be a number"))?;
            build_torus(nx, ny, lx, ly)
        }
        _ => Err(bad("expected sphere:<level> or torus:<nx>x<ny>:<Lx>x<Ly>")),
    }
}

fn load_settings_or_default(path: &Option<PathBuf>) -> Result<SolverSettings> {
    match path {
        Some(p) => io::load_settings(p),
        None => Ok(SolverSettings::default()),
    }
}

fn prepare_out_dir(common: &CommonArgs, command: &str, config: Option<&Path>) -> Result<()> {
    std::fs::create_dir_all(&common.out)?;
    let manifest = io::RunManifest {
        command: command.to_string(),
        surface: common.surface.clone(),
        config_path: config.map(|p| p.display().to_string()),
        settings_path: common.settings.as_ref().map(|p| p.display().to_string()),
        out_dir: common.out.display().to_string(),
        seed: common.seed,
        threads: common.threads,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    io::write_run_manifest(&manifest, &common.out.join("manifest.json"))
}

fn cmd_mesh(common: &CommonArgs) -> Result<()> {
    let mesh = parse_surface(&common.surface)?;
    prepare_out_dir(common, "mesh", None)?;
    io::write_mesh_obj(
        &mesh,
        &common.out.join("mesh.obj"),
        &common.out.join("mesh.json"),
    )?;
    println!(
        "mesh: {} vertices, {} triangles, mesh size {:.6}",
        mesh.vertex_count(),
        mesh.triangle_count(),
        mesh.mesh_size()
    );
    Ok(())
}

fn cmd_solve(common: &CommonArgs, config_path: &Path) -> Result<()> {
    let mesh = Arc::new(parse_surface(&common.surface)?);
    let config = io::load_config(config_path)?;
    let settings = load_settings_or_default(&common.settings)?;
    prepare_out_dir(common, "solve", Some(config_path))?;

    let graph = solve_singular(&mesh, &config, &settings)?;
    io::write_field_csv(&graph.values, &common.out.join("u.csv"))?;
    io::write_history_csv(&graph.cauchy_history, &common.out.join("history.csv"))?;
    io::write_vtk(&mesh, &graph.values, "u", &common.out.join("u.vtk"))?;
    println!(
        "solve: area {:.9}, residual {:.3e}, max |grad u| {:.6}, {} levels, stop {:?}",
        graph.area, graph.residual_sup, graph.max_gradient, graph.levels_used, graph.stop_reason
    );
    Ok(())
}

fn cmd_verify(common: &CommonArgs, config_path: &Path, field_path: &Path) -> Result<()> {
    let mesh = Arc::new(parse_surface(&common.surface)?);
    let config = io::load_config(config_path)?;
    let values = io::read_field_csv(field_path, mesh.vertex_count())?;
    prepare_out_dir(common, "verify", Some(config_path))?;

    let graph = SingularMaximalGraph::from_values(&mesh, &config, values)?;
    let report = verify(&graph);
    io::write_report_json(&report, &common.out.join("report.json"))?;
    io::write_cone_csv(&report.cone_profiles, &common.out.join("cones.csv"))?;
    io::write_moduli_csv(&report.end_moduli, &common.out.join("end_moduli.csv"))?;
    let ok = report.notes.is_empty();
    println!(
        "verify: {}; harmonicity residual {:.3e}, max |grad u| off pins {:.6}",
        if ok { "all checks passed" } else { "FINDINGS" },
        report.harmonicity_residual,
        report.max_gradient_off_pins
    );
    for note in &report.notes {
        println!("  - {note}");
    }
    if !ok {
        return Err(MgError::InvalidConfig(
            "verification found violations; see report.json".into(),
        ));
    }
    Ok(())
}

fn cmd_moduli(common: &CommonArgs, manifest_path: &Path) -> Result<()> {
    let mesh = Arc::new(parse_surface(&common.surface)?);
    let settings = load_settings_or_default(&common.settings)?;
    let manifest = io::load_moduli_manifest(manifest_path)?;
    prepare_out_dir(common, "moduli", Some(manifest_path))?;

    let configs = sample_configs(&mesh, manifest.m, manifest.count, manifest.seed)?;
    for (i, cfg) in configs.iter().enumerate() {
        io::save_config(cfg, &common.out.join(format!("config_{i:03}.json")))?;
    }

    // worker pool: configurations are independent, and collecting results in
    // sample order keeps every output byte-identical across thread counts
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(common.threads.max(1))
        .build()
        .map_err(|e| MgError::ResourceLimit(format!("thread pool: {e}")))?;
    type Probe = (usize, maxgraph::moduli::ContinuityTable, f64, f64, bool);
    let rows: Vec<Result<Probe>> = pool.install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, cfg)| {
                let table = continuity_probe(&mesh, cfg, &manifest.deltas, &settings)?;
                let shift = shift_equivariance(&mesh, cfg, &settings, 0.37)?;
                let openness = openness_probe(
                    &mesh,
                    cfg,
                    &settings,
                    0.5 * manifest.deltas.last().copied().unwrap_or(0.01),
                    manifest.seed.wrapping_add(i as u64),
                )?;
                Ok((i, table, shift, openness.min_terminal, openness.all_detected))
            })
            .collect()
    });

    let mut continuity = String::from("config,delta,change,ratio,skipped\n");
    let mut summary = String::from("config,shift_deviation,openness_min_terminal,all_detected\n");
    for row in rows {
        let (i, table, shift, min_terminal, detected) = row?;
        for r in &table.rows {
            let change = r.change.map(|c| c.to_string()).unwrap_or_default();
            let ratio = r.ratio.map(|x| x.to_string()).unwrap_or_default();
            writeln!(continuity, "{i},{},{change},{ratio},{}", r.delta, r.skipped).unwrap();
        }
        writeln!(summary, "{i},{shift},{min_terminal},{detected}").unwrap();
    }
    std::fs::write(common.out.join("continuity.csv"), continuity)?;
    std::fs::write(common.out.join("summary.csv"), summary)?;
    println!(
        "moduli: {} configs sampled (m = {}), tables written",
        configs.len(),
        manifest.m
    );
    Ok(())
}

fn cmd_oracle(tau: f64, theta0: f64, theta1: Option<f64>, samples: usize) -> Result<()> {
    let theta1 = theta1.unwrap_or(std::f64::consts::PI - theta0);
    let profile = shoot(tau, theta0, theta1)?;
    println!("c = {}", profile.c);
    println!("rise_residual = {:e}", profile.rise_residual());
    println!("theta,u");
    let n = samples.max(2);
    for k in 0..n {
        let theta = theta0 + (theta1 - theta0) * k as f64 / (n - 1) as f64;
        println!("{theta},{}", profile.value(theta));
    }
    Ok(())
}
