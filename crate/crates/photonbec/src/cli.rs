//! Configuration parsing, pump-sweep orchestration, and CSV emission.
//!
//! Configs are TOML with sections [cavity], [dye], [pump], [sweep],
//! [numerics]; unknown keys fail closed, every applied default is echoed to
//! the run log at info level. Pump rates are expressed in units of Γ↓
//! throughout inputs and outputs.
//!
//! Determinism: steady states are solved as a strictly serial warm-start
//! chain in pump order (low to high); the worker pool parallelizes only the
//! pure per-point coherence analysis, so the CSV is bit-identical for any
//! worker count.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coherence::{coherence_analysis, CoherenceResult};
use crate::dye::{build_profiles, ks_rates, load_rate_table, DensityShape, RateSet};
use crate::dynamics::{
    calibrate_peak_rate, clamp_diagnostics, eq6_residual, solve_steady, ClampDiagnostics,
    ModelParams, SteadyState,
};
use crate::modes::build_basis;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

macro_rules! apply_default {
    ($raw:expr, $field:ident, $default:expr, $section:literal) => {
        match $raw.$field {
            Some(v) => v,
            None => {
                let d = $default;
                log::info!(
                    "config: [{}] {} not set, using default {:?}",
                    $section,
                    stringify!($field),
                    d
                );
                d
            }
        }
    };
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    #[serde(default)]
    cavity: RawCavity,
    #[serde(default)]
    dye: RawDye,
    #[serde(default)]
    pump: RawPump,
    #[serde(default)]
    sweep: RawSweep,
    #[serde(default)]
    numerics: RawNumerics,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCavity {
    omega0_thz: Option<f64>,
    delta_omega_thz: Option<f64>,
    kappa_thz: Option<f64>,
    n_modes: Option<usize>,
    mode_width_um: Option<f64>,
    grid_extent_um: Option<f64>,
    grid_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDye {
    zpl_thz: Option<f64>,
    temperature_k: Option<f64>,
    bandwidth_thz: Option<f64>,
    calibration_ratio: Option<f64>,
    peak_rate_thz: Option<f64>,
    rate_table: Option<String>,
    n_mol: Option<f64>,
    density_shape: Option<String>,
    density_width_um: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPump {
    center_um: Option<f64>,
    width_um: Option<f64>,
    decay_rate_thz: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    pump_min: Option<f64>,
    pump_max: Option<f64>,
    pump_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNumerics {
    tol: Option<f64>,
    max_iterations: Option<usize>,
    coherence_samples: Option<usize>,
    coherence_t_max_factor: Option<f64>,
}

/// Fully resolved configuration (all defaults applied).
#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub omega0_thz: f64,
    pub delta_omega_thz: f64,
    pub kappa_thz: f64,
    pub n_modes: usize,
    pub mode_width_um: f64,
    pub grid_extent_um: f64,
    pub grid_points: usize,

    pub zpl_thz: f64,
    pub temperature_k: f64,
    pub bandwidth_thz: f64,
    pub calibration_ratio: f64,
    pub peak_rate_thz: Option<f64>,
    pub rate_table: Option<String>,
    pub n_mol: f64,
    pub density_shape: String,
    pub density_width_um: Option<f64>,

    pub pump_center_um: f64,
    pub pump_width_um: f64,
    pub decay_rate_thz: f64,

    /// Sweep bounds in units of Γ↓.
    pub pump_min: f64,
    pub pump_max: f64,
    pub pump_points: usize,

    pub tol: f64,
    pub max_iterations: usize,
    pub coherence_samples: usize,
    pub coherence_t_max_factor: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig::from_toml_str("").expect("empty config is valid")
    }
}

impl SweepConfig {
    /// Parses and validates a TOML config string, applying (and logging)
    /// defaults for every missing key.
    pub fn from_toml_str(text: &str) -> Result<SweepConfig> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;

        let cfg = SweepConfig {
            omega0_thz: apply_default!(raw.cavity, omega0_thz, 535.0, "cavity"),
            delta_omega_thz: apply_default!(raw.cavity, delta_omega_thz, 1.7, "cavity"),
            kappa_thz: apply_default!(raw.cavity, kappa_thz, 0.2, "cavity"),
            n_modes: apply_default!(raw.cavity, n_modes, 6, "cavity"),
            mode_width_um: apply_default!(raw.cavity, mode_width_um, 10.0, "cavity"),
            grid_extent_um: apply_default!(raw.cavity, grid_extent_um, 80.0, "cavity"),
            grid_points: apply_default!(raw.cavity, grid_points, 512, "cavity"),

            zpl_thz: apply_default!(raw.dye, zpl_thz, 542.0, "dye"),
            temperature_k: apply_default!(raw.dye, temperature_k, 120.0, "dye"),
            bandwidth_thz: apply_default!(raw.dye, bandwidth_thz, 15.0, "dye"),
            calibration_ratio: apply_default!(raw.dye, calibration_ratio, 15.0, "dye"),
            peak_rate_thz: raw.dye.peak_rate_thz,
            rate_table: raw.dye.rate_table,
            n_mol: apply_default!(raw.dye, n_mol, 2e9, "dye"),
            density_shape: apply_default!(raw.dye, density_shape, "uniform".to_string(), "dye"),
            density_width_um: raw.dye.density_width_um,

            pump_center_um: apply_default!(raw.pump, center_um, 0.0, "pump"),
            pump_width_um: apply_default!(raw.pump, width_um, 12.5, "pump"),
            decay_rate_thz: apply_default!(raw.pump, decay_rate_thz, 3e-5, "pump"),

            pump_min: apply_default!(raw.sweep, pump_min, 0.12, "sweep"),
            pump_max: apply_default!(raw.sweep, pump_max, 2.9, "sweep"),
            pump_points: apply_default!(raw.sweep, pump_points, 60, "sweep"),

            tol: apply_default!(raw.numerics, tol, 1e-9, "numerics"),
            max_iterations: apply_default!(raw.numerics, max_iterations, 200, "numerics"),
            coherence_samples: apply_default!(raw.numerics, coherence_samples, 2048, "numerics"),
            coherence_t_max_factor: apply_default!(
                raw.numerics,
                coherence_t_max_factor,
                8.0,
                "numerics"
            ),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let positive: [(&str, f64); 11] = [
            ("cavity.kappa_thz", self.kappa_thz),
            ("cavity.delta_omega_thz", self.delta_omega_thz),
            ("cavity.mode_width_um", self.mode_width_um),
            ("cavity.grid_extent_um", self.grid_extent_um),
            ("dye.temperature_k", self.temperature_k),
            ("dye.bandwidth_thz", self.bandwidth_thz),
            ("dye.n_mol", self.n_mol),
            ("pump.width_um", self.pump_width_um),
            ("pump.decay_rate_thz", self.decay_rate_thz),
            ("numerics.tol", self.tol),
            ("numerics.coherence_t_max_factor", self.coherence_t_max_factor),
        ];
        for (key, v) in positive {
            if v <= 0.0 {
                return Err(Error::Config(format!("key `{key}` must be positive, got {v}")));
            }
        }
        if self.pump_min < 0.0 {
            return Err(Error::Config(format!(
                "key `sweep.pump_min` must be non-negative, got {}",
                self.pump_min
            )));
        }
        if self.pump_min >= self.pump_max {
            return Err(Error::Config(format!(
                "keys `sweep.pump_min` ({}) and `sweep.pump_max` ({}) must satisfy pump_min < pump_max",
                self.pump_min, self.pump_max
            )));
        }
        if self.pump_points < 2 {
            return Err(Error::Config(format!(
                "key `sweep.pump_points` must be >= 2, got {}",
                self.pump_points
            )));
        }
        if self.n_modes < 1 {
            return Err(Error::Config("key `cavity.n_modes` must be >= 1".into()));
        }
        match self.density_shape.as_str() {
            "uniform" => {}
            "gaussian" => {
                if self.density_width_um.is_none() {
                    return Err(Error::Config(
                        "key `dye.density_width_um` is required when `dye.density_shape` is \"gaussian\"".into(),
                    ));
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "key `dye.density_shape` must be \"uniform\" or \"gaussian\", got \"{other}\""
                )));
            }
        }
        if let Some(r) = self.calibration_ratio_checked() {
            if r <= 0.0 {
                return Err(Error::Config("key `dye.calibration_ratio` must be positive".into()));
            }
        }
        Ok(())
    }

    fn calibration_ratio_checked(&self) -> Option<f64> {
        if self.peak_rate_thz.is_none() && self.rate_table.is_none() {
            Some(self.calibration_ratio)
        } else {
            None
        }
    }

    /// Stable hash of the resolved configuration for CSV metadata.
    pub fn sha256(&self) -> String {
        let canon = toml::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(canon.as_bytes());
        let out = h.finalize();
        out.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Parses a config file (see module docs for the schema).
pub fn parse_config(path: &Path) -> Result<SweepConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    SweepConfig::from_toml_str(&text)
}

/// Builds model parameters at the given pump rate (in units of Γ↓).
pub fn build_model(cfg: &SweepConfig, pump_over_gdown: f64) -> Result<ModelParams> {
    let basis = build_basis(
        cfg.n_modes,
        cfg.mode_width_um,
        cfg.grid_extent_um,
        cfg.grid_points,
        cfg.omega0_thz,
        cfg.delta_omega_thz,
    )?;
    let shape = match cfg.density_shape.as_str() {
        "uniform" => DensityShape::Uniform,
        _ => DensityShape::Gaussian(cfg.density_width_um.expect("validated")),
    };
    let profiles = build_profiles(
        &basis,
        cfg.n_mol,
        shape,
        cfg.pump_center_um,
        cfg.pump_width_um,
        pump_over_gdown * cfg.decay_rate_thz,
        cfg.decay_rate_thz,
    )?;
    let rates = resolve_rates(cfg, &basis, &profiles)?;
    Ok(ModelParams { kappa: cfg.kappa_thz, rates, profiles, basis })
}

fn resolve_rates(
    cfg: &SweepConfig,
    basis: &crate::modes::ModeBasis,
    profiles: &crate::dye::SpatialProfiles,
) -> Result<RateSet> {
    if let Some(table) = &cfg.rate_table {
        return load_rate_table(Path::new(table), &basis.frequencies);
    }
    let peak = match cfg.peak_rate_thz {
        Some(p) => p,
        None => calibrate_peak_rate(
            basis,
            profiles,
            cfg.zpl_thz,
            cfg.temperature_k,
            cfg.bandwidth_thz,
            cfg.kappa_thz,
            cfg.calibration_ratio,
        )?,
    };
    ks_rates(&basis.frequencies, cfg.zpl_thz, cfg.temperature_k, peak, cfg.bandwidth_thz)
}

// ---------------------------------------------------------------------------
// Sweep
// ---------------------------------------------------------------------------

/// One fully analyzed sweep point.
#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub pump_over_gdown: f64,
    pub state: SteadyState,
    pub converged: bool,
    pub coherence: CoherenceResult,
    pub clamp: ClampDiagnostics,
    pub eq6: f64,
}

/// Sweep pump grid in units of Γ↓.
pub fn pump_grid(cfg: &SweepConfig) -> Vec<f64> {
    let n = cfg.pump_points;
    (0..n)
        .map(|i| cfg.pump_min + (cfg.pump_max - cfg.pump_min) * i as f64 / (n - 1) as f64)
        .collect()
}

/// Runs the sweep: serial warm-start chain of steady solves (low to high
/// pump), then parallel per-point coherence analysis. Returns all points;
/// non-converged points are flagged, not dropped.
pub fn sweep_points(cfg: &SweepConfig, workers: usize) -> Result<Vec<SweepPoint>> {
    let pumps = pump_grid(cfg);
    let base = build_model(cfg, 0.0)?;

    let mut states: Vec<(f64, SteadyState, bool)> = Vec::with_capacity(pumps.len());
    let mut prev: Option<SteadyState> = None;
    for &pump in &pumps {
        let mut params = base.clone();
        params.profiles.pump_rate = pump * cfg.decay_rate_thz;
        let (state, converged) =
            match solve_steady(&params, prev.as_ref(), cfg.tol, cfg.max_iterations) {
                Ok(ss) => (ss, true),
                Err(Error::NonConverged { state, .. }) => {
                    log::warn!("pump {pump:.4} Γ↓: steady solve did not converge");
                    (*state, false)
                }
                Err(e) => return Err(e),
            };
        prev = Some(state.clone());
        states.push((pump, state, converged));
    }

    let analyze_point = |(pump, state, converged): &(f64, SteadyState, bool)| -> Result<SweepPoint> {
        let mut params = base.clone();
        params.profiles.pump_rate = pump * cfg.decay_rate_thz;
        let coherence = coherence_analysis(
            &params,
            state,
            cfg.coherence_t_max_factor,
            cfg.coherence_samples,
        )?;
        Ok(SweepPoint {
            pump_over_gdown: *pump,
            state: state.clone(),
            converged: *converged,
            coherence,
            clamp: clamp_diagnostics(state, &params),
            eq6: eq6_residual(state, &params),
        })
    };

    if workers <= 1 {
        states.iter().map(analyze_point).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::Numerical(format!("thread pool: {e}")))?;
        pool.install(|| states.par_iter().map(analyze_point).collect())
    }
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

fn fmt(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{v:.17e}")
    }
}

fn metadata_lines(cfg: &SweepConfig) -> String {
    format!(
        "# photonbec v{}\n# config_sha256 = {}\n# pump in units of gamma_down = {} THz\n",
        env!("CARGO_PKG_VERSION"),
        cfg.sha256(),
        fmt(cfg.decay_rate_thz),
    )
}

fn idx(point: &SweepPoint, p: usize, q: usize) -> f64 {
    let n = &point.state.n_matrix;
    if p < n.nrows() && q < n.ncols() { n[(p, q)] } else { 0.0 }
}

fn fraction(point: &SweepPoint, p: usize) -> f64 {
    point.coherence.fractions.get(p).copied().unwrap_or(0.0)
}

/// Renders the sweep CSV. The `converged` column is appended only when some
/// point failed, so a fully converged sweep matches the published schema
/// exactly.
pub fn sweep_csv(cfg: &SweepConfig, points: &[SweepPoint]) -> String {
    let m = cfg.n_modes;
    let all_converged = points.iter().all(|p| p.converged);
    let mut out = metadata_lines(cfg);
    out.push_str("pump_over_gdown");
    for p in 0..m {
        let _ = write!(out, ",n_{p}");
    }
    out.push_str(
        ",tau0_ps,tau0_closed_ps,clamp_ratio,f00,f02,ne,nc,n02,p0,p2,p4,eq6_residual,iterations",
    );
    if !all_converged {
        out.push_str(",converged");
    }
    out.push('\n');
    for pt in points {
        let (ne, nc) = pt.coherence.ne_nc.unwrap_or((f64::NAN, f64::NAN));
        let f = &pt.state.overlaps.f;
        let f02 = if m >= 3 { f[(0, 2)] } else { 0.0 };
        let _ = write!(out, "{}", fmt(pt.pump_over_gdown));
        for p in 0..m {
            let _ = write!(out, ",{}", fmt(idx(pt, p, p)));
        }
        let _ = write!(
            out,
            ",{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt(pt.coherence.tau[0]),
            fmt(pt.coherence.tau_closed[0]),
            fmt(pt.clamp.clamp_ratio),
            fmt(f[(0, 0)]),
            fmt(f02),
            fmt(ne),
            fmt(nc),
            fmt(idx(pt, 0, 2.min(m - 1))),
            fmt(fraction(pt, 0)),
            fmt(fraction(pt, 2)),
            fmt(fraction(pt, 4)),
            fmt(pt.eq6),
            pt.state.iterations,
        );
        if !all_converged {
            let _ = write!(out, ",{}", if pt.converged { 1 } else { 0 });
        }
        out.push('\n');
    }
    out
}

/// Runs the sweep and writes `sweep.csv` into `out_dir`. Errors (after
/// writing the partial CSV with its `converged` column) if any point failed.
pub fn run_sweep(cfg: &SweepConfig, out_dir: &Path, workers: usize) -> Result<Vec<SweepPoint>> {
    let points = sweep_points(cfg, workers)?;
    std::fs::create_dir_all(out_dir)?;
    let csv = sweep_csv(cfg, &points);
    let path = out_dir.join("sweep.csv");
    std::fs::write(&path, csv)?;
    log::info!("wrote {}", path.display());
    if points.iter().all(|p| p.converged) {
        Ok(points)
    } else {
        let n_bad = points.iter().filter(|p| !p.converged).count();
        Err(Error::Numerical(format!(
            "{n_bad} sweep point(s) did not converge; partial CSV retained at {}",
            path.display()
        )))
    }
}

/// Figure identifiers for [`figure_csv`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FigureId {
    Fig1,
    Fig2,
    Fig3a,
    Fig3b,
}

impl std::str::FromStr for FigureId {
    type Err = Error;
    fn from_str(s: &str) -> Result<FigureId> {
        match s {
            "fig1" => Ok(FigureId::Fig1),
            "fig2" => Ok(FigureId::Fig2),
            "fig3a" => Ok(FigureId::Fig3a),
            "fig3b" => Ok(FigureId::Fig3b),
            other => Err(Error::Config(format!(
                "unknown figure id `{other}` (expected fig1, fig2, fig3a, fig3b)"
            ))),
        }
    }
}

/// Renders the per-figure column subset from completed sweep points.
pub fn figure_csv(cfg: &SweepConfig, points: &[SweepPoint], which: FigureId) -> String {
    let m = cfg.n_modes;
    let mut out = metadata_lines(cfg);
    match which {
        FigureId::Fig1 => {
            out.push_str("pump_over_gdown,tau0_ps");
            for p in 0..m {
                let _ = write!(out, ",n_{p}");
            }
            out.push('\n');
            for pt in points {
                let _ = write!(out, "{},{}", fmt(pt.pump_over_gdown), fmt(pt.coherence.tau[0]));
                for p in 0..m {
                    let _ = write!(out, ",{}", fmt(idx(pt, p, p)));
                }
                out.push('\n');
            }
        }
        FigureId::Fig2 => {
            out.push_str("pump_over_gdown,clamp_value,threshold_value\n");
            for pt in points {
                let _ = writeln!(
                    out,
                    "{},{},{}",
                    fmt(pt.pump_over_gdown),
                    fmt(pt.clamp.clamp_value),
                    fmt(pt.clamp.threshold_value)
                );
            }
        }
        FigureId::Fig3a => {
            out.push_str("pump_over_gdown,n_0,ne,nc\n");
            for pt in points {
                let (ne, nc) = pt.coherence.ne_nc.unwrap_or((f64::NAN, f64::NAN));
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    fmt(pt.pump_over_gdown),
                    fmt(idx(pt, 0, 0)),
                    fmt(ne),
                    fmt(nc)
                );
            }
        }
        FigureId::Fig3b => {
            out.push_str("pump_over_gdown,n_0,n_2,abs_n02,sqrt_n0_n2\n");
            for pt in points {
                let n0 = idx(pt, 0, 0);
                let n2 = idx(pt, 2, 2);
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    fmt(pt.pump_over_gdown),
                    fmt(n0),
                    fmt(n2),
                    fmt(idx(pt, 0, 2).abs()),
                    fmt((n0 * n2).sqrt())
                );
            }
        }
    }
    out
}

/// Runs (or reuses) a sweep and writes the figure CSV into `out_dir`.
pub fn figure_data(
    cfg: &SweepConfig,
    which: FigureId,
    out_dir: &Path,
    workers: usize,
) -> Result<()> {
    let points = sweep_points(cfg, workers)?;
    std::fs::create_dir_all(out_dir)?;
    let name = match which {
        FigureId::Fig1 => "fig1.csv",
        FigureId::Fig2 => "fig2.csv",
        FigureId::Fig3a => "fig3a.csv",
        FigureId::Fig3b => "fig3b.csv",
    };
    let path = out_dir.join(name);
    std::fs::write(&path, figure_csv(cfg, &points, which))?;
    log::info!("wrote {}", path.display());
    Ok(())
}
