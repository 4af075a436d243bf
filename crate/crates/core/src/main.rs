use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use phasefield_core::app::{build_mesh, run};
use phasefield_core::config::{parse_config, parse_override, RunConfig};
use phasefield_core::mesh::write_mesh;
use phasefield_core::selfcheck::run_checks;

/// Phase-field fracture with a dynamic L-scheme.
#[derive(Parser)]
#[command(name = "pfl", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation; writes a CSV series and VTK snapshots.
    Run {
        config: PathBuf,
        /// `--section.key=value` overrides
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Build the mesh of a configuration and write it to a file.
    Mesh {
        config: PathBuf,
        /// output path (default: <output dir>/<prefix>.mesh)
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        overrides: Vec<String>,
    },
    /// Run the built-in property checks.
    Check,
}

fn load(config: &PathBuf, overrides: &[String]) -> Result<RunConfig, String> {
    let ov = overrides
        .iter()
        .map(|o| parse_override(o))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    parse_config(config, &ov).map_err(|e| e.to_string())
}

fn execute(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Run { config, overrides } => {
            let cfg = load(&config, &overrides)?;
            let summary = run(&cfg).map_err(|e| e.to_string())?;
            let max_iter = summary.reports.iter().map(|r| r.outer_iterations).max().unwrap_or(0);
            println!(
                "{} steps, max outer iterations {max_iter}, {} not converged",
                summary.reports.len(),
                summary.unconverged_steps()
            );
            println!("series: {}", summary.csv.display());
            for v in &summary.vtk {
                println!("snapshot: {}", v.display());
            }
            Ok(())
        }
        Command::Mesh { config, output, overrides } => {
            let cfg = load(&config, &overrides)?;
            let mesh = build_mesh(&cfg.mesh).map_err(|e| e.to_string())?;
            let path = match output {
                Some(p) => p,
                None => {
                    std::fs::create_dir_all(&cfg.output.dir)
                        .map_err(|e| format!("cannot create {}: {e}", cfg.output.dir.display()))?;
                    cfg.output.dir.join(format!("{}.mesh", cfg.output.prefix))
                }
            };
            write_mesh(&mesh, &path).map_err(|e| e.to_string())?;
            println!("{} nodes, {} cells -> {}", mesh.num_nodes(), mesh.num_cells(), path.display());
            Ok(())
        }
        Command::Check => {
            let results = run_checks();
            let passed = results.iter().filter(|r| r.passed).count();
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            println!("{passed}/{} checks passed", results.len());
            if passed == results.len() {
                Ok(())
            } else {
                Err("some checks failed".into())
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
