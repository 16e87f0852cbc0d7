//! `mpxa` command-line driver.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mpxa::MpxaError;

#[derive(Parser, Debug)]
#[command(name = "mpxa", version, about = "Multi-point flux and stress finite volumes on 2D polygonal grids")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Mesh utilities.
    Mesh {
        #[command(subcommand)]
        cmd: MeshCmd,
    },
    /// Assemble the discretization of a config and dump its matrices.
    Discretize {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Solve one problem and write cell values as CSV.
    Run(commands::RunArgs),
    /// Refinement study of an analytic case.
    Convergence(commands::ConvergenceArgs),
    /// Check the Darcy system matrix for monotonicity.
    CheckMonotone(commands::MonotoneArgs),
}

#[derive(Subcommand, Debug)]
enum MeshCmd {
    /// Generate a unit-square mesh and save it as JSON.
    Gen {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0.0)]
        perturbation: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Numerical failures exit with 2, everything else with 1.
fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(m) = cause.downcast_ref::<MpxaError>() {
            return match m {
                MpxaError::SingularLocalSystem { .. }
                | MpxaError::RankDeficientKkt { .. }
                | MpxaError::SingularMatrix(_)
                | MpxaError::ResidualTooLarge { .. }
                | MpxaError::NonConvergence { .. }
                | MpxaError::RootFinding(_) => 2,
                _ => 1,
            };
        }
    }
    1
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Mesh { cmd: MeshCmd::Gen { kind, n, perturbation, seed, out } } => {
            commands::mesh_gen(&kind, n, perturbation, seed, &out)
        }
        Cmd::Discretize { config, out_dir } => commands::discretize(&config, &out_dir),
        Cmd::Run(args) => commands::run(args),
        Cmd::Convergence(args) => commands::convergence(args),
        Cmd::CheckMonotone(args) => commands::check_monotone(args),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return ExitCode::SUCCESS;
            }
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("error: invalid arguments"));
            return ExitCode::from(1);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", format!("{e:#}").replace('\n', " "));
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use config::PhysicsKind;

    #[test]
    fn solver_errors_exit_with_two() {
        let e = anyhow::Error::new(MpxaError::SingularMatrix("x".into()));
        assert_eq!(exit_code(&e), 2);
        let e = anyhow::Error::new(MpxaError::InvalidParameter("x".into())).context("loading");
        assert_eq!(exit_code(&e), 1);
        assert_eq!(exit_code(&anyhow::anyhow!("plain")), 1);
    }

    #[test]
    fn physics_flag_parses() {
        let cli = Cli::try_parse_from(["mpxa", "run", "--physics", "darcy", "--mesh", "m.json"]).unwrap();
        match cli.cmd {
            Cmd::Run(a) => assert_eq!(a.physics, Some(PhysicsKind::Darcy)),
            _ => panic!(),
        }
    }
}
