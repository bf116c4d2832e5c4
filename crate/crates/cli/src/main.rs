use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use nematic::dynamics::Dynamics;
use nematic::io::{self, IoError, Start};
use nematic::potential::potential_table;
use nematic::verify::{self, Check};

#[derive(Parser)]
#[command(name = "nematic", version, about = "Q-tensor / Navier-Stokes simulator with the Ball-Majumdar potential")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation described by a config file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Continue from a snapshot written by an earlier run.
        #[arg(long)]
        restart: Option<PathBuf>,
        /// Overrides `output_dir` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the comparison certificate along a stored trajectory.
    Certify {
        #[arg(long)]
        trajectory: PathBuf,
        #[arg(long = "N", default_value_t = 16)]
        n_reg: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate psi, multipliers and log Z over the physical triangle.
    PotentialTable {
        #[arg(long, default_value_t = 2)]
        dim: usize,
        #[arg(long, default_value_t = 32)]
        resolution: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run property suites and print a JSON summary.
    Verify {
        suite: Suite,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// 2D Taylor-Green vortex against its exact decay.
    TaylorGreen {
        #[arg(long, default_value_t = 0.1)]
        nu: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        t_final: f64,
        #[arg(long, default_value_t = 64)]
        n: usize,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
    /// Spatially homogeneous relaxation against a scalar ODE integration.
    Homogeneous {
        #[arg(long, default_value_t = 6.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 0.1)]
        r0: f64,
        #[arg(long = "T", default_value_t = 1.0)]
        t_final: f64,
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Suite {
    Potential,
    Spectral,
    Dynamics,
    All,
}

const ORACLE_TOL: f64 = 1e-6;

enum Failure {
    Usage(String),
    Check(String),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Parse { .. } | IoError::Validation(_) => Failure::Usage(e.to_string()),
            IoError::Io(ref inner) if inner.kind() == std::io::ErrorKind::NotFound => Failure::Usage(e.to_string()),
            _ => Failure::Check(e.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn write_file(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::from(IoError::from(e)))
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Simulate { config, restart, out } => {
            if !config.is_file() {
                return Err(Failure::Usage(format!("cli_io: config file {} not found", config.display())));
            }
            let cfg = io::parse_config(&config)?;
            let dir = out.unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
            let start = match restart {
                Some(path) => {
                    let dynm = Dynamics::new(cfg.clone()).map_err(IoError::from)?;
                    Start::Restart(io::read_snapshot(&path)?.to_state(&dynm.grid)?)
                }
                None => Start::Random,
            };
            let res = io::simulate(&cfg, &dir, start)?;
            let last = res.records.last().expect("at least one record");
            println!(
                "t = {:.6}, E = {:.9e}, F = {:.6e}, margin = {:.4e}; outputs in {}",
                last.t,
                last.e,
                last.f,
                last.margin,
                res.dir.display()
            );
            Ok(())
        }
        Command::Certify { trajectory, n_reg, out } => {
            let rep = io::certify_trajectory(&trajectory, n_reg)?;
            if let Some(path) = out {
                write_file(&path, &rep.csv())?;
            }
            let (cfg, _, _) = io::load_trajectory(&trajectory)?;
            let hc = rep.hc_bound_holds(cfg.t_final, 1e-3);
            println!(
                "max defect {:.3e} (tolerance {:.3e}); Hc bound {}",
                rep.max_defect(),
                rep.tolerance(),
                if hc { "holds" } else { "violated" }
            );
            if rep.passes() && hc {
                Ok(())
            } else {
                Err(Failure::Check("comparison: certificate failed".into()))
            }
        }
        Command::PotentialTable { dim, resolution, out } => {
            if !(dim == 2 || dim == 3) || resolution == 0 {
                return Err(Failure::Usage("singular_potential: need dim in {2, 3} and resolution >= 1".into()));
            }
            let csv = potential_table(dim, resolution).map_err(|e| Failure::Check(e.to_string()))?;
            write_file(&out, &csv)?;
            println!("wrote {} rows to {}", csv.lines().count() - 1, out.display());
            Ok(())
        }
        Command::Verify { suite, samples, seed } => {
            let mut checks: Vec<Check> = Vec::new();
            if matches!(suite, Suite::Potential | Suite::All) {
                checks.extend(verify::potential_suite(2, samples, seed));
                checks.extend(verify::potential_suite(3, samples.div_ceil(4), seed));
            }
            if matches!(suite, Suite::Spectral | Suite::All) {
                checks.extend(verify::spectral_suite(seed));
            }
            if matches!(suite, Suite::Dynamics | Suite::All) {
                checks.extend(verify::dynamics_suite(seed));
            }
            for c in &checks {
                eprintln!("{:<18} {}  {}", c.id, if c.passed { "pass" } else { "FAIL" }, c.detail);
            }
            println!("{}", verify::summary_json(&checks));
            if checks.iter().all(|c| c.passed) {
                Ok(())
            } else {
                Err(Failure::Check("verification failed".into()))
            }
        }
        Command::TaylorGreen { nu, t_final, n, dt } => {
            let r = verify::taylor_green_scenario(nu, t_final, n, dt).map_err(|e| Failure::Usage(e.to_string()))?;
            println!(
                "measured decay {:.12}, analytic {:.12}, relative error {:.3e}",
                r.measured, r.reference, r.rel_error
            );
            oracle_verdict(r.rel_error)
        }
        Command::Homogeneous {
            kappa,
            theta,
            gamma,
            r0,
            t_final,
            dt,
        } => {
            let r = verify::homogeneous_scenario(kappa, theta, gamma, r0, t_final, dt)
                .map_err(|e| Failure::Usage(e.to_string()))?;
            println!(
                "Q11(T) spectral {:.12}, scalar ODE {:.12}, relative error {:.3e}",
                r.measured, r.reference, r.rel_error
            );
            oracle_verdict(r.rel_error)
        }
    }
}

fn oracle_verdict(err: f64) -> Result<(), Failure> {
    if err <= ORACLE_TOL {
        Ok(())
    } else {
        Err(Failure::Check(format!("dynamics: relative error {err:e} exceeds {ORACLE_TOL:e}")))
    }
}
