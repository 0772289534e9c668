use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use theta_wave::analysis::weak::verify_peakon;
use theta_wave::config::{parse_config, parse_sweep, parse_theta, OutputSpec};
use theta_wave::dynamics::ThetaParam;
use theta_wave::io::write_text;
use theta_wave::runner::{convergence, run, sweep, transform_run, RunStatus};
use theta_wave::{Error, Result};

#[derive(Parser)]
#[command(name = "theta-wave", version, about = "Pseudospectral laboratory for the theta-equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation. Exit status: 0 completed, 2 blow-up detected, 1 error.
    Run { config: PathBuf },
    /// Run the same scenario over a list of theta values and tabulate the outcomes.
    Sweep { config: PathBuf },
    /// Check the weak formulation for the peakon `c exp(-|x - theta c t|)`.
    VerifyPeakon {
        #[arg(long, allow_hyphen_values = true)]
        c: f64,
        /// Comma-separated list; entries may be `p/q`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        theta: Vec<String>,
        #[arg(long, default_value_t = 1.0)]
        t_end: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
    },
    /// Map a finished run into the b-equation frame.
    TransformB {
        run_dir: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        c0: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        alpha: f64,
    },
    /// Spatial and temporal convergence study for a run config.
    Convergence { config: PathBuf },
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or("-".into(), |x| format!("{x:.6}"))
}

fn execute(command: Command) -> Result<u8> {
    match command {
        Command::Run { config } => {
            let manifest = parse_config(&read(&config)?)?;
            let out = run(&manifest)?;
            let r = &out.report;
            println!("status: {:?}", r.status);
            println!("steps: {}, t_last: {:.6}, max|u_x|: {:.6}", r.steps, r.t_last, r.peak_slope);
            if let Some(b) = out.trajectory.blowup() {
                println!(
                    "blow-up: t_detect {:.6} ({:?}, {:?}), bound {}",
                    b.t_detect,
                    b.cause,
                    b.direction,
                    opt(b.theoretical_bound)
                );
            }
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            println!("outputs: {}", manifest.outputs.root().display());
            if r.status == RunStatus::Failed {
                eprintln!("error: the state became non-finite before the slope detector fired");
            }
            Ok(r.status.exit_code())
        }
        Command::Sweep { config } => {
            let spec = parse_sweep(&read(&config)?)?;
            let (rows, path) = sweep(&spec)?;
            for r in &rows {
                println!(
                    "theta {:<10} {:<13} t_detect {:<10} t_star {:<10} {}",
                    r.theta,
                    r.outcome.tag(),
                    opt(r.t_detect),
                    opt(r.t_star),
                    r.detail
                );
            }
            println!("table: {}", path.display());
            Ok(0)
        }
        Command::VerifyPeakon { c, theta, t_end, tol } => {
            if theta.is_empty() {
                return Err(Error::Config {
                    path: "--theta".into(),
                    message: "at least one value is required".into(),
                });
            }
            let thetas = theta
                .iter()
                .map(|s| {
                    let v = parse_theta(s).map_err(|message| Error::Config {
                        path: "--theta".into(),
                        message,
                    })?;
                    ThetaParam::new(v)
                })
                .collect::<Result<Vec<_>>>()?;
            let report = verify_peakon(c, &thetas, t_end, tol, 1e-3)?;
            for (tv, fake) in report.thetas.iter().zip(&report.impostor_max) {
                let worst = tv.residuals.iter().map(|r| r.residual.abs()).fold(0.0, f64::max);
                println!(
                    "theta {:<20} max|residual| {worst:.3e}  impostor max {fake:.3e}  {}",
                    tv.theta,
                    if tv.pass { "ok" } else { "FAIL" }
                );
            }
            let path = OutputSpec::in_dir("peakon").root().join("report.json");
            write_text(&path, &serde_json::to_string_pretty(&report)?)?;
            println!("report: {}", path.display());
            Ok(if report.pass { 0 } else { 1 })
        }
        Command::TransformB { run_dir, c0, gamma, alpha } => {
            let s = transform_run(&run_dir, c0, gamma, alpha)?;
            println!(
                "b = {}, shift A = {}, drift V = {}, snapshots {}",
                s.b, s.shift, s.drift, s.snapshots
            );
            match s.residual {
                Some(r) => println!("b-equation residual: {r:.3e}"),
                None => println!("b-equation residual: needs at least five snapshots"),
            }
            println!("outputs: {}", run_dir.join("b-transform").display());
            Ok(0)
        }
        Command::Convergence { config } => {
            let manifest = parse_config(&read(&config)?)?;
            let (report, path) = convergence(&manifest)?;
            for r in &report.rows {
                println!(
                    "{:<5} n {:<6} dt {:<10.3e} error {:.3e} ratio {}",
                    r.kind,
                    r.n,
                    r.dt,
                    r.error,
                    r.ratio.map_or("-".into(), |x| format!("{x:.2}"))
                );
            }
            println!("temporal order: {:.3}", report.temporal_order);
            println!("table: {}", path.display());
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
