use std::path::PathBuf;
use std::process::ExitCode;

use afmhd::diagnostics::ConvergenceRow;
use afmhd::solver::convergence_command;
use afmhd::{run, RunConfig, RunSummary, SolverError};
use clap::{Args, Parser, Subcommand};
use log::error;

/// Positivity-preserving Active Flux solver for 2D ideal MHD.
#[derive(Parser, Debug)]
#[command(name = "afmhd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one configuration to its final time.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run a problem with an exact solution on several meshes and report L1 errors and rates.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// Cells per direction, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        meshes: Vec<usize>,
        /// Directory for convergence.csv (defaults to the configured output directory).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a user-defined 1D Riemann problem.
    Riemann {
        /// Left primitive state rho,v1,v2,v3,B1,B2,B3,p.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        left: Vec<f64>,
        /// Right primitive state rho,v1,v2,v3,B1,B2,B3,p.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required = true)]
        right: Vec<f64>,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        tend: f64,
        /// Interface position in [0, 1].
        #[arg(long, default_value_t = 0.5)]
        x0: f64,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args, Debug, Default)]
struct Overrides {
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long)]
    cfl: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    /// Output directory for field dumps and diagnostics.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl Overrides {
    fn apply(self, c: &mut RunConfig) -> Result<(), SolverError> {
        c.mesh.nx = self.nx.or(c.mesh.nx);
        c.mesh.ny = self.ny.or(c.mesh.ny);
        if let Some(cfl) = self.cfl {
            c.solver.cfl = cfl;
        }
        c.solver.kappa = self.kappa.or(c.solver.kappa);
        c.output.dir = self.out.or(c.output.dir.take());
        c.validate()
    }
}

fn to_state(v: &[f64]) -> Result<[f64; 8], SolverError> {
    v.try_into().map_err(|_| SolverError::Config(format!("expected 8 values, got {}", v.len())))
}

fn print_summary(s: &RunSummary) {
    println!(
        "steps {}  t {}  wall {:.2}s  min_rho {:e}  min_p {:e}  retries {} ({} steps)  rejected {}",
        s.steps, s.t, s.wall_time, s.min_rho, s.min_p, s.retry_count, s.retry_steps, s.rejected_steps
    );
}

fn print_rows(rows: &[ConvergenceRow]) {
    println!("{:>12} {:>14} {:>8}", "h", "L1(rho)", "rate");
    for r in rows {
        let rate = r.rate.map(|q| format!("{q:.3}")).unwrap_or_else(|| "-".into());
        println!("{:>12.5e} {:>14.6e} {:>8}", r.h, r.error, rate);
    }
}

fn execute(cli: Cli) -> Result<(), SolverError> {
    match cli.command {
        Command::Run { config, overrides } => {
            let mut c = RunConfig::load(&config)?;
            overrides.apply(&mut c)?;
            print_summary(&run(&c)?);
        }
        Command::Convergence { config, meshes, out } => {
            let c = RunConfig::load(&config)?;
            let dir = out.or_else(|| c.output.dir.clone()).unwrap_or_else(|| PathBuf::from("."));
            let (path, rows) = convergence_command(&c, &meshes, &dir)?;
            print_rows(&rows);
            println!("wrote {}", path.display());
        }
        Command::Riemann { left, right, gamma, tend, x0, overrides } => {
            let mut c = RunConfig::for_problem("riemann");
            let p = &mut c.problem.params;
            p.left = Some(to_state(&left)?);
            p.right = Some(to_state(&right)?);
            p.gamma = Some(gamma);
            p.t_end = Some(tend);
            p.x0 = Some(x0);
            overrides.apply(&mut c)?;
            print_summary(&run(&c)?);
        }
    }
    Ok(())
}

fn exit_code(e: &SolverError) -> u8 {
    if e.is_positivity_failure() {
        2
    } else if e.is_config_error() {
        3
    } else {
        1
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use afmhd::Location;

    #[test]
    fn exit_codes() {
        let pp = SolverError::PpViolation { location: Location::Point, detail: String::new() };
        assert_eq!(exit_code(&pp), 2);
        let wrapped = SolverError::Aborted { step: 3, stage: 2, time: 0.1, source: Box::new(pp) };
        assert_eq!(exit_code(&wrapped), 2);
        assert_eq!(exit_code(&SolverError::Config("x".into())), 3);
        assert_eq!(exit_code(&SolverError::UnknownProblem("x".into())), 3);
    }

    #[test]
    fn overrides_apply_and_validate() {
        let mut c = RunConfig::for_problem("sine");
        let o = Overrides { nx: Some(8), cfl: Some(0.2), ..Default::default() };
        o.apply(&mut c).unwrap();
        assert_eq!((c.mesh.nx, c.mesh.ny, c.solver.cfl), (Some(8), None, 0.2));
        let bad = Overrides { cfl: Some(2.0), ..Default::default() };
        assert!(bad.apply(&mut c).unwrap_err().is_config_error());
    }

    #[test]
    fn parses_riemann_states() {
        let cli = Cli::try_parse_from([
            "afmhd", "riemann", "--left", "1,0,0,0,0.75,1,0,1", "--right", "0.125,0,0,0,0.75,-1,0,0.1", "--gamma", "2",
            "--tend", "0.1",
        ])
        .unwrap();
        match cli.command {
            Command::Riemann { left, right, .. } => {
                assert_eq!(left.len(), 8);
                assert_eq!(right[5], -1.0);
            }
            _ => panic!("wrong subcommand"),
        }
    }
}
