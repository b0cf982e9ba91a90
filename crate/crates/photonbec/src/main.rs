//! Command-line front end. Log level is controlled by the `RUST_LOG`
//! environment variable only (e.g. `RUST_LOG=info`).

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use photonbec::cli::{
    build_model, figure_data, parse_config, run_sweep, FigureId, SweepConfig,
};
use photonbec::coherence::coherence_analysis;
use photonbec::dynamics::{calibrate_peak_rate, clamp_diagnostics, eq6_residual, solve_steady};
use photonbec::Result;

#[derive(Parser)]
#[command(name = "photonbec", version, about = "Multimode photon condensate simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config file; omitted keys use logged defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for CSV files.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads for per-point analysis (0 = all cores).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Steady-state residual tolerance override.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one steady state and print a summary.
    Steady {
        #[command(flatten)]
        common: Common,
        /// Pump rate in units of Γ↓ (default: sweep.pump_max).
        #[arg(long)]
        pump: Option<f64>,
    },
    /// Run the full pump sweep and write sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
    },
    /// Compute coherence traces at one pump point and write coherence.csv.
    Coherence {
        #[command(flatten)]
        common: Common,
        /// Pump rate in units of Γ↓ (default: sweep.pump_max).
        #[arg(long)]
        pump: Option<f64>,
    },
    /// Run a sweep and write the column subset for one figure.
    Figure {
        #[command(flatten)]
        common: Common,
        /// One of: fig1, fig2, fig3a, fig3b.
        #[arg(long)]
        id: String,
    },
    /// Print the calibrated peak per-molecule rate for the config geometry.
    Calibrate {
        #[command(flatten)]
        common: Common,
    },
}

fn load_config(common: &Common) -> Result<SweepConfig> {
    let mut cfg = match &common.config {
        Some(path) => parse_config(path)?,
        None => {
            log::info!("no --config given, using built-in defaults");
            SweepConfig::default()
        }
    };
    if let Some(tol) = common.tol {
        cfg.tol = tol;
    }
    Ok(cfg)
}

fn effective_workers(workers: usize) -> usize {
    if workers == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        workers
    }
}

fn run_steady(common: &Common, pump: Option<f64>) -> Result<()> {
    let cfg = load_config(common)?;
    let pump = pump.unwrap_or(cfg.pump_max);
    let params = build_model(&cfg, pump)?;
    let ss = solve_steady(&params, None, cfg.tol, cfg.max_iterations)?;
    let clamp = clamp_diagnostics(&ss, &params);
    println!("pump_over_gdown = {pump}");
    println!("iterations = {}", ss.iterations);
    println!("residual_norm = {:e}", ss.residual_norm);
    for p in 0..cfg.n_modes {
        println!("n_{p} = {:e}", ss.n_matrix[(p, p)]);
    }
    println!("clamp_ratio = {}", clamp.clamp_ratio);
    println!("f00 = {:e}", ss.overlaps.f[(0, 0)]);
    println!("eq6_residual = {:e}", eq6_residual(&ss, &params));
    Ok(())
}

fn run_coherence(common: &Common, pump: Option<f64>) -> Result<()> {
    let cfg = load_config(common)?;
    let pump = pump.unwrap_or(cfg.pump_max);
    let params = build_model(&cfg, pump)?;
    let ss = solve_steady(&params, None, cfg.tol, cfg.max_iterations)?;
    let coh = coherence_analysis(&params, &ss, cfg.coherence_t_max_factor, cfg.coherence_samples)?;

    std::fs::create_dir_all(&common.out)?;
    let mut out = String::new();
    let _ = writeln!(out, "# photonbec v{}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# config_sha256 = {}", cfg.sha256());
    let _ = writeln!(out, "# pump_over_gdown = {pump}");
    out.push_str("t_ps");
    for p in 0..cfg.n_modes {
        let _ = write!(out, ",g1_{p}");
    }
    out.push('\n');
    for (k, t) in coh.times.iter().enumerate() {
        let _ = write!(out, "{t:.17e}");
        for p in 0..cfg.n_modes {
            let _ = write!(out, ",{:.17e}", coh.traces[p][k]);
        }
        out.push('\n');
    }
    let path = common.out.join("coherence.csv");
    std::fs::write(&path, out)?;

    for p in 0..cfg.n_modes {
        println!("tau_{p}_ps = {} (closed form {})", coh.tau[p], coh.tau_closed[p]);
    }
    println!("phase_lock = {}", coh.phase_lock);
    println!("wrote {}", path.display());
    Ok(())
}

fn run_calibrate(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let params = build_model(&cfg, 0.0)?;
    let peak = calibrate_peak_rate(
        &params.basis,
        &params.profiles,
        cfg.zpl_thz,
        cfg.temperature_k,
        cfg.bandwidth_thz,
        cfg.kappa_thz,
        cfg.calibration_ratio,
    )?;
    println!("peak_rate_thz = {peak:e}");
    println!("target A0*h00/kappa = {}", cfg.calibration_ratio);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Steady { common, pump } => run_steady(&common, pump),
        Command::Sweep { common } => {
            let cfg = load_config(&common)?;
            run_sweep(&cfg, &common.out, effective_workers(common.workers)).map(|_| ())
        }
        Command::Coherence { common, pump } => run_coherence(&common, pump),
        Command::Figure { common, id } => {
            let cfg = load_config(&common)?;
            let which: FigureId = id.parse()?;
            figure_data(&cfg, which, &common.out, effective_workers(common.workers))
        }
        Command::Calibrate { common } => run_calibrate(&common),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
