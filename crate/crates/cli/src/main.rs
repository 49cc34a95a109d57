use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bsturing_core::driver::{
    config_keys, parameter_scan, parse_config, parse_override, run, scan_csv, ScanGrid, SimConfig,
};
use bsturing_core::mesh::{generate_ball_mesh, mesh_stats, write_text, write_vtk_volume};
use bsturing_core::stability::{
    classify_regime, dispersion_csv, dispersion_scan_for, report_csv, report_text,
};
use bsturing_core::{kinetics::ensure_compatible, Error};
use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand};

/// Turing instability analysis and simulation for a coupled bulk-surface
/// reaction-diffusion system on the unit ball.
#[derive(Debug, Parser)]
#[command(name = "bsturing", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (`key = value` lines, optional `[section]` headers)
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override a configuration key; later values win
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Random seed of the initial perturbation (same as --set run.seed=N)
    #[arg(long)]
    seed: Option<u64>,
    /// Suppress progress and summary output on stdout
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Stability report: homogeneous and diffusion-driven conditions,
    /// critical diffusion ratios and the predicted regime
    Analyze {
        #[command(flatten)]
        common: Common,
    },
    /// Growth rates of the spherical-harmonic modes l = 0..=lmax as CSV
    Dispersion {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50)]
        lmax: u32,
        /// Include the exchange terms in the surface kinetics
        #[arg(long)]
        coupled: bool,
    },
    /// Generate the ball mesh at `mesh.level` and print its statistics
    Mesh {
        #[command(flatten)]
        common: Common,
    },
    /// Run the nonlinear simulation and report the pattern verdict
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// Predict (and optionally simulate) the regime over a parameter grid
    Scan {
        #[command(flatten)]
        common: Common,
        /// Bulk diffusion ratios, comma separated
        #[arg(long, value_delimiter = ',', default_value = "1,20")]
        d_bulk: Vec<f64>,
        /// Surface diffusion ratios, comma separated
        #[arg(long, value_delimiter = ',', default_value = "1,20")]
        d_surf: Vec<f64>,
        /// Reaction scales applied to bulk and surface, comma separated
        #[arg(long, value_delimiter = ',')]
        gamma: Vec<f64>,
        /// Run a simulation for every grid point
        #[arg(long)]
        simulate: bool,
    },
}

fn keys_help() -> String {
    let mut s = String::from("Configuration keys (section may be omitted when unambiguous):\n");
    for k in config_keys() {
        s.push_str(&format!("  {:<26} {}\n", k.name, k.help));
    }
    s
}

fn load(common: &Common) -> Result<SimConfig, Error> {
    let text = match &common.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::Config {
            line: 0,
            msg: format!("cannot read {}: {e}", p.display()),
        })?,
        None => String::new(),
    };
    let mut overrides = common
        .set
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = common.seed {
        overrides.push(("run.seed".into(), seed.to_string()));
    }
    let mut cfg = parse_config(&text, &overrides)?;
    if common.out.is_some() {
        cfg.output_dir.clone_from(&common.out);
    }
    Ok(cfg)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Error> {
    fs::create_dir_all(dir)?;
    let path = dir.join(name);
    fs::write(&path, contents)?;
    Ok(path)
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter { .. }
        | Error::Degenerate(_)
        | Error::Incompatible { .. }
        | Error::SteadyStateExchange { .. }
        | Error::Precondition(_)
        | Error::RefinementTooDeep { .. }
        | Error::Config { .. }
        | Error::UnknownKey(_)
        | Error::Parse(_) => 2,
        Error::LinearSolver { .. } | Error::NewtonDiverged { .. } | Error::Breakdown(_) => 3,
        _ => 1,
    }
}

fn execute(cmd: Command) -> Result<(), Error> {
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cmd {
        Command::Analyze { common } => {
            let cfg = load(&common)?;
            let report = classify_regime(&cfg.params)?;
            if !common.quiet {
                write!(out, "{}", report_text(&report))?;
            }
            let csv = report_csv(&report);
            match &common.out {
                Some(dir) => {
                    let p = write_file(dir, "report.csv", &csv)?;
                    if !common.quiet {
                        writeln!(out, "wrote {}", p.display())?;
                    }
                }
                None if !common.quiet => write!(out, "\n{csv}")?,
                None => {}
            }
        }
        Command::Dispersion {
            common,
            lmax,
            coupled,
        } => {
            let cfg = load(&common)?;
            cfg.params.validate()?;
            ensure_compatible(&cfg.params)?;
            let csv = dispersion_csv(&dispersion_scan_for(&cfg.params, coupled, lmax)?);
            match &common.out {
                Some(dir) => {
                    write_file(dir, "dispersion.csv", &csv)?;
                }
                None => write!(out, "{csv}")?,
            }
        }
        Command::Mesh { common } => {
            let cfg = load(&common)?;
            let mesh = generate_ball_mesh(cfg.level)?;
            let s = mesh_stats(&mesh);
            if !common.quiet {
                writeln!(
                    out,
                    "level {}: {} vertices, {} tets, {} surface vertices, {} surface triangles",
                    cfg.level, s.vertices, s.tets, s.surface_vertices, s.surface_tris
                )?;
                writeln!(
                    out,
                    "h in [{:.4e}, {:.4e}], volume {:.6}, area {:.6}",
                    s.h_min, s.h_max, s.volume, s.area
                )?;
            }
            if let Some(dir) = &common.out {
                fs::create_dir_all(dir)?;
                let mut w = BufWriter::new(fs::File::create(dir.join("mesh.txt"))?);
                write_text(&mesh, &mut w)?;
                w.flush()?;
                let mut w = BufWriter::new(fs::File::create(dir.join("mesh.vtk"))?);
                write_vtk_volume(&mesh, &[], &mut w)?;
                w.flush()?;
            }
        }
        Command::Simulate { common } => {
            let cfg = load(&common)?;
            let o = run(&cfg)?;
            let m = o.metrics;
            if !common.quiet {
                writeln!(
                    out,
                    "t = {:.6} after {} steps{}",
                    o.state.t,
                    o.steps,
                    if o.early_stopped { " (early stop)" } else { "" }
                )?;
                writeln!(
                    out,
                    "rel_dev_bulk {:.6e}  rel_dev_surf {:.6e}  outer {:.6e}  inner {:.6e}",
                    m.rel_dev_bulk, m.rel_dev_surf, m.amp_shell_outer, m.amp_shell_inner
                )?;
                writeln!(out, "boundary layer: {}", m.boundary_layer)?;
                writeln!(out, "verdict: {}", m.verdict)?;
            }
        }
        Command::Scan {
            common,
            d_bulk,
            d_surf,
            gamma,
            simulate,
        } => {
            let cfg = load(&common)?;
            let grid = ScanGrid {
                d_bulk,
                d_surf,
                gamma,
            };
            let csv = scan_csv(&parameter_scan(&cfg, &grid, simulate)?);
            match &common.out {
                Some(dir) => {
                    let p = write_file(dir, "scan.csv", &csv)?;
                    if !common.quiet {
                        writeln!(out, "wrote {}", p.display())?;
                    }
                }
                None => write!(out, "{csv}")?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let keys = keys_help();
    let matches = Cli::command()
        .after_help(keys.clone())
        .mut_subcommands(|c| c.after_help(keys.clone()))
        .get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
