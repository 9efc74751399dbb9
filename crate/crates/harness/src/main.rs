use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vardiff::estimators::fit_slope;
use vardiff::exec::Executor;
use vardiff::integrators::MethodKind;
use vardiff::stability::{linspace, scan_region};
use vardiff_harness::experiment::{write_problem_grid, write_region};
use vardiff_harness::{read_records, run_experiment, run_reference, write_outputs, ExperimentConfig, HarnessError};

/// Sampling experiments for Brownian dynamics with position-dependent diffusion.
///
/// The worker count is read from VARDIFF_THREADS (1 runs sequentially).
#[derive(Debug, Parser)]
#[command(name = "vardiff", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a convergence study and write its CSV (plus a `.meta` sidecar).
    Run {
        config: PathBuf,
        /// Overrides `out` from the config.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the reference value of a config's observable.
    Reference {
        config: PathBuf,
        /// Also write `x,V,Sigma` samples of a 1D problem for plotting.
        #[arg(long)]
        grid_out: Option<PathBuf>,
        #[arg(long, default_value_t = 401)]
        grid_points: usize,
        #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
        grid_lo: f64,
        #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
        grid_hi: f64,
    },
    /// Scan the mean-square stability region over the (p, q²) plane.
    Stability {
        #[arg(long)]
        method: String,
        #[arg(long, default_value_t = -4.0, allow_hyphen_values = true)]
        pmin: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        pmax: f64,
        #[arg(long, default_value_t = 4.0)]
        q2max: f64,
        /// Grid points per axis.
        #[arg(long, default_value_t = 400)]
        res: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit log-log convergence slopes per method from a run CSV.
    Slope { csv: PathBuf },
}

fn run(cli: Cli) -> Result<(), HarnessError> {
    let exec = Executor::from_env();
    match cli.command {
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = out
                .or_else(|| cfg.out.clone())
                .ok_or_else(|| HarnessError::usage("no output path: set `out` in the config or pass --out"))?;
            let output = run_experiment(&cfg, &exec)?;
            write_outputs(&cfg, &output, &out)?;
            println!("wrote {} records to {}", output.records.len(), out.display());
        }
        Command::Reference {
            config,
            grid_out,
            grid_points,
            grid_lo,
            grid_hi,
        } => {
            let cfg = ExperimentConfig::load(&config)?;
            run_reference(&cfg.problem, cfg.observable, &mut std::io::stdout().lock())?;
            if let Some(path) = grid_out {
                write_problem_grid(&cfg.problem, grid_lo, grid_hi, grid_points, &path)?;
            }
        }
        Command::Stability {
            method,
            pmin,
            pmax,
            q2max,
            res,
            out,
        } => {
            let kind: MethodKind = method.parse().map_err(|e: vardiff::Error| HarnessError::usage(e.to_string()))?;
            if res < 1 || !(pmin <= pmax) || !(q2max >= 0.0) {
                return Err(HarnessError::usage("need res >= 1, pmin <= pmax and q2max >= 0"));
            }
            let cells = scan_region(kind, &linspace(pmin, pmax, res), &linspace(0.0, q2max, res), &exec)
                .map_err(|e| HarnessError::usage(e.to_string()))?;
            write_region(&out, &cells)?;
            let stable = cells.iter().filter(|c| c.stable).count();
            println!("{kind}: {stable} of {} cells stable, wrote {}", cells.len(), out.display());
        }
        Command::Slope { csv } => {
            let records = read_records(&csv)?;
            let mut methods: Vec<&str> = Vec::new();
            for r in &records {
                if !methods.contains(&r.method.as_str()) {
                    methods.push(&r.method);
                }
            }
            let mut fitted = 0;
            for m in methods {
                let subset: Vec<_> = records.iter().filter(|r| r.method == m).cloned().collect();
                match fit_slope(&subset) {
                    Ok(f) => {
                        fitted += 1;
                        println!("{m}: slope {:.4} from {} points", f.slope, f.used);
                    }
                    Err(e) => println!("{m}: {e}"),
                }
            }
            if fitted == 0 {
                return Err(vardiff::Error::InsufficientData("no method could be fitted".into()).into());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
