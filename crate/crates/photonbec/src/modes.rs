//! Cavity mode basis: 1D Hermite-Gaussian mode functions on a uniform spatial
//! grid and the equally spaced ladder of mode frequencies.
//!
//! The modes are labeled by a single index with uniform spacing Δω, matching a
//! 1D harmonic ladder; dimensionality is an inference from that ladder
//! structure, not a statement about mirror geometry. The basis is real, so all
//! downstream matrices (h, f, N, generator) are real.

use crate::{Error, Result};

/// Uniform 1D spatial grid on [-extent, extent] with trapezoid quadrature
/// weights (endpoints halved).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    /// Half-extent L in µm; the grid covers [-L, L].
    pub extent: f64,
    /// Grid nodes, strictly increasing, symmetric about 0.
    pub points: Vec<f64>,
    /// Trapezoid quadrature weights matching `points`.
    pub weights: Vec<f64>,
}

impl Grid {
    pub fn new(extent: f64, n_points: usize) -> Self {
        let dx = 2.0 * extent / (n_points - 1) as f64;
        // Mirror the second half so the grid is bitwise symmetric about 0;
        // parity identities downstream then hold exactly.
        let mut points = vec![0.0; n_points];
        for i in 0..n_points / 2 {
            let x = -extent + i as f64 * dx;
            points[i] = x;
            points[n_points - 1 - i] = -x;
        }
        let mut weights = vec![dx; n_points];
        weights[0] *= 0.5;
        weights[n_points - 1] *= 0.5;
        Grid { extent, points, weights }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Hermite-Gaussian mode basis: ψ_p(x) tables, frequencies ω_p = ω₀ + p·Δω.
#[derive(Debug, Clone)]
pub struct ModeBasis {
    pub n_modes: usize,
    /// Gaussian envelope length scale w in µm.
    pub width: f64,
    pub grid: Grid,
    /// psi[p][g] = ψ_p(x_g), units µm^(-1/2).
    pub psi: Vec<Vec<f64>>,
    /// ω_p in THz (ordinary frequency).
    pub frequencies: Vec<f64>,
}

/// Builds the mode basis.
///
/// ψ_0 = π^(-1/4) e^(-ξ²/2) / √w with ξ = x/w, and the stable two-term
/// recurrence ψ_{p+1} = √(2/(p+1)) ξ ψ_p − √(p/(p+1)) ψ_{p-1}, which keeps the
/// functions unit-normalized.
///
/// Errors if the grid cannot represent the highest mode: the tail check
/// requires |ψ_{M−1}(±L)| < 1e-6 of its peak.
pub fn build_basis(
    n_modes: usize,
    width: f64,
    grid_extent: f64,
    grid_points: usize,
    omega0: f64,
    delta_omega: f64,
) -> Result<ModeBasis> {
    if n_modes < 1 {
        return Err(Error::InvalidParameter("n_modes must be >= 1".into()));
    }
    if grid_points < 64 {
        return Err(Error::InvalidParameter("grid_points must be >= 64".into()));
    }
    if width <= 0.0 || grid_extent <= 0.0 {
        return Err(Error::InvalidParameter(
            "width and grid_extent must be positive".into(),
        ));
    }
    if delta_omega <= 0.0 {
        return Err(Error::InvalidParameter("delta_omega must be positive".into()));
    }

    let grid = Grid::new(grid_extent, grid_points);
    let g = grid.len();
    let mut psi = vec![vec![0.0; g]; n_modes];
    let norm0 = std::f64::consts::PI.powf(-0.25) / width.sqrt();
    for i in 0..g {
        let xi = grid.points[i] / width;
        psi[0][i] = norm0 * (-xi * xi / 2.0).exp();
    }
    if n_modes > 1 {
        for i in 0..g {
            let xi = grid.points[i] / width;
            psi[1][i] = std::f64::consts::SQRT_2 * xi * psi[0][i];
        }
    }
    for p in 2..n_modes {
        let a = (2.0 / p as f64).sqrt();
        let b = ((p - 1) as f64 / p as f64).sqrt();
        for i in 0..g {
            let xi = grid.points[i] / width;
            psi[p][i] = a * xi * psi[p - 1][i] - b * psi[p - 2][i];
        }
    }

    let top = &psi[n_modes - 1];
    let peak = top.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let tail = top[0].abs().max(top[g - 1].abs());
    if tail >= 1e-6 * peak {
        return Err(Error::InvalidParameter(format!(
            "grid_extent {grid_extent} too small: mode {} tail {:.3e} exceeds 1e-6 of peak {:.3e}",
            n_modes - 1,
            tail,
            peak
        )));
    }

    let frequencies = (0..n_modes)
        .map(|p| omega0 + p as f64 * delta_omega)
        .collect();

    Ok(ModeBasis { n_modes, width, grid, psi, frequencies })
}

/// Evaluates ψ_p at an arbitrary position by linear interpolation of the
/// stored table; exact at grid nodes up to rounding in the index arithmetic.
pub fn mode_value(basis: &ModeBasis, p: usize, x: f64) -> Result<f64> {
    if p >= basis.n_modes {
        return Err(Error::OutOfRange(format!(
            "mode index {p} >= n_modes {}",
            basis.n_modes
        )));
    }
    let l = basis.grid.extent;
    if !(-l..=l).contains(&x) {
        return Err(Error::OutOfRange(format!("position {x} outside [-{l}, {l}]")));
    }
    let pts = &basis.grid.points;
    let dx = pts[1] - pts[0];
    let t = (x + l) / dx;
    let i = (t.floor() as usize).min(pts.len() - 2);
    let frac = t - i as f64;
    Ok(basis.psi[p][i] * (1.0 - frac) + basis.psi[p][i + 1] * frac)
}
