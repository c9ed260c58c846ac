use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Parser, Subcommand};

use fcs_microgrid::config::load_config;
use fcs_microgrid::io::write_trace_csv;
use fcs_microgrid::metrics::{compute_metrics, evaluate, evaluate_droop_compare, SummaryReport};
use fcs_microgrid::pv::mpp_oracle;
use fcs_microgrid::scenarios::{builtin, droop_compare};
use fcs_microgrid::sim::{run, SimulationConfig};
use fcs_microgrid::Error;

/// FCS-MPC simulator for an islanded hybrid AC/DC microgrid.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration file.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// DC load step and irradiance step.
    Case1 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// PCC load steps with 1:2 sharing.
    Case2 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sharing ratio change to 8/7.
    Case3 {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The case2 timeline under FCS-MPC and under droop control.
    DroopCompare {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration file without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Reference values.
    Oracle {
        #[command(subcommand)]
        what: Oracle,
    },
}

#[derive(Subcommand)]
enum Oracle {
    /// Maximum power point of the default array.
    Mpp {
        #[arg(long)]
        irradiance: f64,
        #[arg(long, default_value_t = 25.0)]
        temperature: f64,
    },
}

/// Exit status for an error: 2 for configuration problems, 1 otherwise.
fn failure(err: &Error) -> ExitCode {
    eprintln!("error: {err}");
    match err {
        Error::ConfigInvalid(_) | Error::Parse { .. } | Error::ControlSetTooLarge { .. } => ExitCode::from(2),
        _ => ExitCode::from(1),
    }
}

fn out_dir(out: Option<PathBuf>, name: &str) -> PathBuf {
    out.unwrap_or_else(|| Path::new("out").join(name.replace('/', "-")))
}

fn create_dir(dir: &Path) -> Result<(), Error> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Run, write the trace, and compute the report.
fn simulate(cfg: &SimulationConfig, dir: &Path) -> Result<SummaryReport, Error> {
    let output = run(cfg)?;
    create_dir(dir)?;
    write_trace_csv(&output.trace, &dir.join("trace.csv"))?;
    compute_metrics(&output.trace, cfg)
}

fn single(cfg: SimulationConfig, out: Option<PathBuf>) -> Result<bool, Error> {
    let dir = out_dir(out, &cfg.name);
    let mut report = simulate(&cfg, &dir)?;
    report.set_criteria(evaluate(&report));
    let text = report.to_string();
    write_text(&dir.join("summary.txt"), &text)?;
    print!("{text}");
    println!("\nwrote {}", dir.display());
    Ok(!report.failed())
}

fn compare(out: Option<PathBuf>) -> Result<bool, Error> {
    let dir = out_dir(out, "droop-compare");
    let (mpc_cfg, droop_cfg) = droop_compare();
    let (mpc, droop) = thread::scope(|s| {
        let mpc = s.spawn(|| simulate(&mpc_cfg, &dir.join("fcs-mpc")));
        let droop = s.spawn(|| simulate(&droop_cfg, &dir.join("droop")));
        (
            mpc.join().expect("simulation thread panicked"),
            droop.join().expect("simulation thread panicked"),
        )
    });
    let (mut mpc, mut droop) = (mpc?, droop?);
    let criteria = evaluate_droop_compare(&mpc, &droop);
    mpc.set_criteria(criteria.clone());
    droop.set_criteria(criteria);
    let text = format!("{mpc}\n{droop}");
    write_text(&dir.join("summary.txt"), &text)?;
    print!("{text}");
    println!("\nwrote {}", dir.display());
    Ok(!mpc.failed())
}

fn execute(command: Command) -> Result<bool, Error> {
    match command {
        Command::Run { config, out } => single(load_config(&config)?, out),
        Command::Case1 { out } => single(builtin("case1").expect("built-in"), out),
        Command::Case2 { out } => single(builtin("case2").expect("built-in"), out),
        Command::Case3 { out } => single(builtin("case3").expect("built-in"), out),
        Command::DroopCompare { out } => compare(out),
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            println!(
                "{}: ok ({} inverters, {} events, {} control steps)",
                config.display(),
                cfg.vsi.len(),
                cfg.events.len(),
                cfg.control_steps()
            );
            Ok(true)
        }
        Command::Oracle {
            what: Oracle::Mpp {
                irradiance,
                temperature,
            },
        } => {
            if !(irradiance > 0.0 && irradiance.is_finite()) {
                return Err(Error::ConfigInvalid(format!(
                    "irradiance must be positive, got {irradiance}"
                )));
            }
            let cfg = SimulationConfig::default();
            let (v, p) = mpp_oracle(irradiance, temperature, &cfg.pv);
            println!("irradiance {irradiance} W/m2, temperature {temperature} C: V_mpp {v:.3} V, P_mpp {p:.1} W");
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => failure(&e),
    }
}
