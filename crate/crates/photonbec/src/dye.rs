//! Per-mode dye absorption/emission rates and spatial profiles.
//!
//! Rates come either from the analytic Kennard-Stepanov model ([`ks_rates`])
//! or from a tabulated spectrum ([`load_rate_table`]). All THz values are
//! ordinary frequencies; the KS exponent uses h·Δν/k_BT with k_BT/h = 6.25 THz
//! at T = 300 K.

use crate::modes::ModeBasis;
use crate::{Error, Result};

/// k_B·T expressed as an ordinary frequency in THz.
pub fn kb_t_thz(temperature_k: f64) -> f64 {
    6.25 * temperature_k / 300.0
}

/// Per-mode absorption A_p and emission E_p rates (THz per molecule).
#[derive(Debug, Clone)]
pub struct RateSet {
    pub absorption: Vec<f64>,
    pub emission: Vec<f64>,
}

impl RateSet {
    /// All-zero rates for bare-cavity diagnostics (photons decay at κ only).
    /// The analytic model never produces zeros; this constructor exists for
    /// tests and the bare-cavity coherence check.
    pub fn zeroed(n_modes: usize) -> Self {
        RateSet {
            absorption: vec![0.0; n_modes],
            emission: vec![0.0; n_modes],
        }
    }

    pub fn len(&self) -> usize {
        self.absorption.len()
    }

    pub fn is_empty(&self) -> bool {
        self.absorption.is_empty()
    }
}

/// Analytic Kennard-Stepanov rates:
/// E_p = peak_rate · exp(−(ω_p − ω_ZPL)² / 2·bandwidth²),
/// A_p = E_p · exp((ω_p − ω_ZPL) / k_BT) (frequencies in THz).
pub fn ks_rates(
    frequencies: &[f64],
    zpl: f64,
    temperature_k: f64,
    peak_rate: f64,
    bandwidth: f64,
) -> Result<RateSet> {
    if temperature_k <= 0.0 {
        return Err(Error::InvalidParameter("temperature must be positive".into()));
    }
    if peak_rate <= 0.0 {
        return Err(Error::InvalidParameter("peak_rate must be positive".into()));
    }
    if bandwidth <= 0.0 {
        return Err(Error::InvalidParameter("bandwidth must be positive".into()));
    }
    let kbt = kb_t_thz(temperature_k);
    let emission: Vec<f64> = frequencies
        .iter()
        .map(|&w| {
            let d = w - zpl;
            peak_rate * (-d * d / (2.0 * bandwidth * bandwidth)).exp()
        })
        .collect();
    let absorption: Vec<f64> = frequencies
        .iter()
        .zip(&emission)
        .map(|(&w, &e)| e * ((w - zpl) / kbt).exp())
        .collect();
    Ok(RateSet { absorption, emission })
}

/// Loads per-mode rates from a CSV table with header
/// `omega_THz,absorption_THz,emission_THz`, rows sorted by frequency,
/// `#`-prefixed comment lines ignored. Rates at each ω_p are obtained by
/// linear interpolation; frequencies outside the table range are an error
/// (no extrapolation).
pub fn load_rate_table(path: &std::path::Path, frequencies: &[f64]) -> Result<RateSet> {
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<(f64, f64, f64)> = Vec::new();
    let mut saw_header = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_header {
            if line != "omega_THz,absorption_THz,emission_THz" {
                return Err(Error::RateTable(format!(
                    "line {}: expected header `omega_THz,absorption_THz,emission_THz`, got `{line}`",
                    lineno + 1
                )));
            }
            saw_header = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::RateTable(format!(
                "line {}: expected 3 comma-separated fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::RateTable(format!("line {}: bad number `{s}`", lineno + 1)))
        };
        rows.push((parse(fields[0])?, parse(fields[1])?, parse(fields[2])?));
    }
    if !saw_header {
        return Err(Error::RateTable("missing header row".into()));
    }
    if rows.len() < 2 {
        return Err(Error::RateTable("need at least two data rows".into()));
    }
    if rows.windows(2).any(|w| w[1].0 <= w[0].0) {
        return Err(Error::RateTable("rows must be sorted by strictly increasing frequency".into()));
    }

    let lo = rows[0].0;
    let hi = rows[rows.len() - 1].0;
    let mut absorption = Vec::with_capacity(frequencies.len());
    let mut emission = Vec::with_capacity(frequencies.len());
    for &w in frequencies {
        if w < lo || w > hi {
            return Err(Error::RateTable(format!(
                "mode frequency {w} THz outside table range [{lo}, {hi}] (no extrapolation)"
            )));
        }
        let j = rows.partition_point(|r| r.0 <= w).min(rows.len() - 1).max(1);
        let (w0, a0, e0) = rows[j - 1];
        let (w1, a1, e1) = rows[j];
        let t = (w - w0) / (w1 - w0);
        absorption.push(a0 + t * (a1 - a0));
        emission.push(e0 + t * (e1 - e0));
    }
    Ok(RateSet { absorption, emission })
}

/// Shape of the molecular density profile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityShape {
    Uniform,
    /// Gaussian with the given standard deviation in µm.
    Gaussian(f64),
}

/// Spatial profiles on the mode-basis grid: molecular density μ(x), pump
/// shape g(x) (max 1), pump rate Γ↑ and molecular decay rate Γ↓ (THz).
#[derive(Debug, Clone)]
pub struct SpatialProfiles {
    pub density: Vec<f64>,
    pub pump_shape: Vec<f64>,
    pub pump_rate: f64,
    pub decay_rate: f64,
}

/// Builds μ normalized to `n_mol` over the grid and a Gaussian pump shape
/// g(x) = exp(−(x − center)²/2σ²).
pub fn build_profiles(
    basis: &ModeBasis,
    n_mol: f64,
    density_shape: DensityShape,
    pump_center: f64,
    pump_width: f64,
    pump_rate: f64,
    decay_rate: f64,
) -> Result<SpatialProfiles> {
    if n_mol <= 0.0 {
        return Err(Error::InvalidParameter("n_mol must be positive".into()));
    }
    if pump_width <= 0.0 {
        return Err(Error::InvalidParameter("pump_width must be positive".into()));
    }
    if decay_rate <= 0.0 {
        return Err(Error::InvalidParameter("decay_rate must be positive".into()));
    }
    if pump_rate < 0.0 {
        return Err(Error::InvalidParameter("pump_rate must be non-negative".into()));
    }
    if let DensityShape::Gaussian(w) = density_shape {
        if w <= 0.0 {
            return Err(Error::InvalidParameter("density width must be positive".into()));
        }
    }

    let grid = &basis.grid;
    let mut density: Vec<f64> = match density_shape {
        DensityShape::Uniform => vec![1.0; grid.len()],
        DensityShape::Gaussian(w) => grid
            .points
            .iter()
            .map(|&x| (-x * x / (2.0 * w * w)).exp())
            .collect(),
    };
    let total: f64 = density
        .iter()
        .zip(&grid.weights)
        .map(|(d, w)| d * w)
        .sum();
    for d in &mut density {
        *d *= n_mol / total;
    }

    let pump_shape = grid
        .points
        .iter()
        .map(|&x| {
            let d = x - pump_center;
            (-d * d / (2.0 * pump_width * pump_width)).exp()
        })
        .collect();

    Ok(SpatialProfiles { density, pump_shape, pump_rate, decay_rate })
}
