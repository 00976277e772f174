//! `tangent-llg`: mesh generation/inspection, single simulation runs, and
//! parameter sweeps.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime (solver) error,
//! 3 I/O error.

// `!(x > 0.0)` validation guards intentionally reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};

use tangent_llg::config::{build_mesh, parse_config_verbose, MeshSource, SimConfig};
use tangent_llg::integrators::{run, Severity};
use tangent_llg::mesh::{analyze_mesh, generate_type1, generate_type2, load_mesh, save_mesh};
use tangent_llg::output::{write_timeseries_csv, write_vtk};

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "tangent-llg",
    version,
    about = "Tangent plane integrators for LLG with DMI"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mesh utilities.
    #[command(subcommand)]
    Mesh(MeshCommand),
    /// Run one simulation from a config file.
    Run(RunArgs),
    /// Run a list of simulations varying one parameter.
    Sweep(SweepArgs),
}

#[derive(Subcommand)]
enum MeshCommand {
    /// Generate a structured box mesh (type 1 or 2).
    Gen(MeshGenArgs),
    /// Load a mesh file and report quality measures.
    Check { file: PathBuf },
}

#[derive(Args)]
struct MeshGenArgs {
    /// Mesh type: 1 (six tets per cube, angle condition holds) or 2
    /// (twelve tets per cube, angle condition fails).
    #[arg(long = "type")]
    mesh_type: u8,
    #[arg(long)]
    nx: usize,
    #[arg(long)]
    ny: usize,
    #[arg(long)]
    nz: usize,
    /// Box dimensions as X,Y,Z.
    #[arg(long)]
    size: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output_dir from the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    config: PathBuf,
    /// Parameter to vary: 'k' (time-step size) or 'h' (integer refinement
    /// factors applied to a generated mesh).
    #[arg(long)]
    vary: String,
    /// Comma-separated list of values.
    #[arg(long)]
    values: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: msg.into(),
        }
    }

    fn runtime(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            message: msg.into(),
        }
    }

    fn io(msg: impl Into<String>) -> Self {
        Self {
            code: EXIT_IO,
            message: msg.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let _ = e.print();
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Mesh(MeshCommand::Gen(args)) => mesh_gen(args),
        Command::Mesh(MeshCommand::Check { file }) => mesh_check(&file),
        Command::Run(args) => run_command(args),
        Command::Sweep(args) => sweep_command(args),
    }
}

fn parse_size(s: &str) -> Result<[f64; 3], Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(Failure::config(format!("--size expects X,Y,Z, got '{s}'")));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p
            .parse()
            .map_err(|e| Failure::config(format!("bad --size component '{p}': {e}")))?;
    }
    Ok(out)
}

fn mesh_gen(args: MeshGenArgs) -> Result<(), Failure> {
    let lengths = parse_size(&args.size)?;
    let nx = [args.nx, args.ny, args.nz];
    let mesh = match args.mesh_type {
        1 => generate_type1(nx, lengths),
        2 => generate_type2(nx, lengths),
        other => {
            return Err(Failure::config(format!(
                "--type must be 1 or 2, got {other}"
            )))
        }
    }
    .map_err(|e| Failure::config(e.to_string()))?;
    save_mesh(&mesh, &args.out).map_err(|e| Failure::io(e.to_string()))?;
    println!(
        "wrote {} ({} vertices, {} cells)",
        args.out.display(),
        mesh.vertex_count(),
        mesh.cell_count()
    );
    Ok(())
}

fn mesh_check(file: &Path) -> Result<(), Failure> {
    let mesh = load_mesh(file).map_err(|e| Failure::config(e.to_string()))?;
    let report = analyze_mesh(&mesh);
    println!("vertices:        {}", mesh.vertex_count());
    println!("cells:           {}", mesh.cell_count());
    println!("volume:          {:.16e}", mesh.total_volume());
    println!("h_max:           {:.16e}", report.h_max);
    println!("h_min:           {:.16e}", report.h_min);
    println!("angle condition: {}", report.angle_condition_holds);
    println!("worst offdiag:   {:.16e}", report.worst_offdiag);
    println!("offending pairs: {}", report.offending_pairs);
    Ok(())
}

fn load_config(path: &Path) -> Result<SimConfig, Failure> {
    let (cfg, notes) = parse_config_verbose(path).map_err(|e| Failure::config(e.to_string()))?;
    for note in notes {
        eprintln!("note: {note}");
    }
    Ok(cfg)
}

fn prepare_out_dir(cfg: &SimConfig, cli_out: Option<&Path>) -> Result<PathBuf, Failure> {
    let dir = cli_out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn run_one(cfg: &SimConfig, dir: &Path, label: &str) -> Result<String, Failure> {
    let mesh = build_mesh(&cfg.mesh_source).map_err(|e| Failure::config(e.to_string()))?;
    for d in tangent_llg::integrators::validate_config(cfg, &mesh) {
        match d.severity {
            Severity::Error => eprintln!("{label}error: {}", d.message),
            Severity::Warning => eprintln!("{label}warning: {}", d.message),
            Severity::Info => eprintln!("{label}info: {}", d.message),
        }
    }
    let csv_path = dir.join(format!("{label}timeseries.csv"));
    match run(cfg, &mesh) {
        Ok(out) => {
            write_timeseries_csv(&out.series, &csv_path).map_err(|e| Failure::io(e.to_string()))?;
            let vtk_path = dir.join(format!("{label}final.vtk"));
            write_vtk(&mesh, &out.final_state.m, &vtk_path)
                .map_err(|e| Failure::io(e.to_string()))?;
            let last = out.series.samples.last().expect("run records samples");
            Ok(format!(
                "{} steps, E = {:.6e}, <m3> = {:+.5}, |I[|m|^2]-1|_L1 = {:.3e} -> {}",
                out.final_state.step,
                last.e_total,
                last.avg_m[2],
                last.constraint_l1,
                csv_path.display()
            ))
        }
        Err(failure) => {
            // write whatever was recorded before the failure
            if !failure.partial.samples.is_empty() {
                let _ = write_timeseries_csv(&failure.partial, &csv_path);
            }
            use tangent_llg::integrators::IntegratorError;
            let make = match failure.error {
                IntegratorError::ConfigRejected(_)
                | IntegratorError::Initial(_)
                | IntegratorError::InvalidArgument(_)
                | IntegratorError::Ellipticity { .. } => Failure::config,
                _ => Failure::runtime,
            };
            Err(make(failure.error.to_string()))
        }
    }
}

fn run_command(args: RunArgs) -> Result<(), Failure> {
    let cfg = load_config(&args.config)?;
    let dir = prepare_out_dir(&cfg, args.out.as_deref())?;
    let summary = run_one(&cfg, &dir, "")?;
    println!("{summary}");
    Ok(())
}

fn worker_count(jobs: usize) -> usize {
    let available = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("TANGENT_LLG_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n >= 1)
        .unwrap_or(available);
    cap.min(jobs).max(1)
}

fn sweep_command(args: SweepArgs) -> Result<(), Failure> {
    let base = load_config(&args.config)?;
    let dir = prepare_out_dir(&base, args.out.as_deref())?;
    let values: Vec<&str> = args
        .values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect();
    if values.is_empty() {
        return Err(Failure::config("--values must list at least one value"));
    }
    let mut jobs: Vec<(String, SimConfig)> = Vec::new();
    match args.vary.as_str() {
        "k" => {
            for v in &values {
                let k: f64 = v
                    .parse()
                    .map_err(|e| Failure::config(format!("bad k value '{v}': {e}")))?;
                if !(k > 0.0) {
                    return Err(Failure::config(format!("k must be positive, got {k}")));
                }
                let mut cfg = base.clone();
                cfg.k = k;
                jobs.push((format!("sweep_k_{v}_"), cfg));
            }
        }
        "h" => {
            for v in &values {
                let factor: usize = v
                    .parse()
                    .map_err(|e| Failure::config(format!("bad refinement factor '{v}': {e}")))?;
                if factor == 0 {
                    return Err(Failure::config("refinement factor must be >= 1"));
                }
                let mut cfg = base.clone();
                cfg.mesh_source = match cfg.mesh_source {
                    MeshSource::Type1 { nx, lengths } => MeshSource::Type1 {
                        nx: [nx[0] * factor, nx[1] * factor, nx[2] * factor],
                        lengths,
                    },
                    MeshSource::Type2 { nx, lengths } => MeshSource::Type2 {
                        nx: [nx[0] * factor, nx[1] * factor, nx[2] * factor],
                        lengths,
                    },
                    MeshSource::File(_) => {
                        return Err(Failure::config(
                            "varying h requires a generated (type1/type2) mesh",
                        ))
                    }
                };
                jobs.push((format!("sweep_h_{v}_"), cfg));
            }
        }
        other => {
            return Err(Failure::config(format!(
                "--vary must be 'k' or 'h', got '{other}'"
            )))
        }
    }

    type PointResult = Mutex<Option<Result<String, Failure>>>;
    let n_workers = worker_count(jobs.len());
    let next_job = AtomicUsize::new(0);
    let results: Vec<PointResult> = jobs.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..n_workers {
            scope.spawn(|| loop {
                let i = next_job.fetch_add(1, Ordering::Relaxed);
                if i >= jobs.len() {
                    break;
                }
                let (label, cfg) = &jobs[i];
                let result = run_one(cfg, &dir, label);
                *results[i].lock().unwrap() = Some(result);
            });
        }
    });

    let mut worst: u8 = 0;
    for (i, cell) in results.iter().enumerate() {
        let (label, _) = &jobs[i];
        match cell.lock().unwrap().take() {
            Some(Ok(summary)) => println!("{label}: {summary}"),
            Some(Err(f)) => {
                eprintln!("{label}: error: {}", f.message);
                worst = worst.max(f.code);
            }
            None => {
                eprintln!("{label}: not executed");
                worst = worst.max(EXIT_RUNTIME);
            }
        }
    }
    if worst > 0 {
        return Err(Failure {
            code: worst,
            message: "one or more sweep points failed".to_string(),
        });
    }
    Ok(())
}
