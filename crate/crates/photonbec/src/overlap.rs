//! Overlap matrices by trapezoid quadrature: the geometry matrix
//! h_pq = ∫ μ(x) ψ_p(x) ψ_q(x) dx and the excitation-weighted matrix
//! f_pq = ∫ μ(x) ψ_p(x) ψ_q(x) f(x) dx.
//!
//! The measure dμ is interpreted as μ(x)dx, so h₀₀ is the effective molecule
//! number seen by the ground mode. Reductions run in fixed grid order per
//! element, so results are deterministic regardless of caller parallelism.

use nalgebra::DMatrix;

use crate::dye::SpatialProfiles;
use crate::modes::ModeBasis;
use crate::{Error, Result};

/// h and f matrices at a given excitation field.
#[derive(Debug, Clone)]
pub struct OverlapMatrices {
    pub h: DMatrix<f64>,
    pub f: DMatrix<f64>,
}

fn check_grids(basis: &ModeBasis, profiles: &SpatialProfiles) -> Result<()> {
    if profiles.density.len() != basis.grid.len() || profiles.pump_shape.len() != basis.grid.len()
    {
        return Err(Error::GridMismatch(format!(
            "profiles have {} points, basis grid has {}",
            profiles.density.len(),
            basis.grid.len()
        )));
    }
    Ok(())
}

fn weighted_gram(basis: &ModeBasis, weight: &[f64]) -> DMatrix<f64> {
    let m = basis.n_modes;
    let g = basis.grid.len();
    let mut out = DMatrix::zeros(m, m);
    for p in 0..m {
        for q in p..m {
            let mut s = 0.0;
            for i in 0..g {
                s += weight[i] * basis.psi[p][i] * basis.psi[q][i];
            }
            out[(p, q)] = s;
            out[(q, p)] = s;
        }
    }
    out
}

/// Computes h_pq = Σ_g μ ψ_p ψ_q Δx (trapezoid weights).
pub fn compute_h(basis: &ModeBasis, profiles: &SpatialProfiles) -> Result<DMatrix<f64>> {
    check_grids(basis, profiles)?;
    let weight: Vec<f64> = profiles
        .density
        .iter()
        .zip(&basis.grid.weights)
        .map(|(d, w)| d * w)
        .collect();
    Ok(weighted_gram(basis, &weight))
}

/// Computes f_pq = Σ_g μ ψ_p ψ_q f Δx. Requires 0 ≤ f(x) ≤ 1 everywhere.
pub fn compute_f(
    basis: &ModeBasis,
    profiles: &SpatialProfiles,
    excitation: &[f64],
) -> Result<DMatrix<f64>> {
    check_grids(basis, profiles)?;
    if excitation.len() != basis.grid.len() {
        return Err(Error::GridMismatch(format!(
            "excitation has {} points, basis grid has {}",
            excitation.len(),
            basis.grid.len()
        )));
    }
    if let Some(bad) = excitation.iter().find(|f| !(0.0..=1.0).contains(*f)) {
        return Err(Error::InvalidParameter(format!(
            "excitation value {bad} outside [0, 1]"
        )));
    }
    let weight: Vec<f64> = profiles
        .density
        .iter()
        .zip(&basis.grid.weights)
        .zip(excitation)
        .map(|((d, w), f)| d * w * f)
        .collect();
    Ok(weighted_gram(basis, &weight))
}

/// Convenience: both matrices at once.
pub fn compute_overlaps(
    basis: &ModeBasis,
    profiles: &SpatialProfiles,
    excitation: &[f64],
) -> Result<OverlapMatrices> {
    Ok(OverlapMatrices {
        h: compute_h(basis, profiles)?,
        f: compute_f(basis, profiles, excitation)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dye::{build_profiles, DensityShape};
    use crate::modes::build_basis;

    fn setup() -> (ModeBasis, SpatialProfiles) {
        let b = build_basis(6, 10.0, 80.0, 512, 535.0, 1.7).unwrap();
        let p = build_profiles(&b, 1e9, DensityShape::Uniform, 0.0, 12.0, 0.0, 3e-5).unwrap();
        (b, p)
    }

    #[test]
    fn uniform_density_gives_scaled_identity() {
        let (b, p) = setup();
        let h = compute_h(&b, &p).unwrap();
        let rho = 1e9 / 160.0;
        for i in 0..6 {
            for j in 0..6 {
                let want = if i == j { rho } else { 0.0 };
                assert!((h[(i, j)] - want).abs() < 1e-8 * rho, "h[{i}][{j}]");
            }
        }
    }

    #[test]
    fn parity_zeroes_odd_pairs() {
        let b = build_basis(6, 10.0, 80.0, 512, 535.0, 1.7).unwrap();
        let p = build_profiles(&b, 1e9, DensityShape::Gaussian(25.0), 0.0, 12.0, 0.0, 3e-5)
            .unwrap();
        let h = compute_h(&b, &p).unwrap();
        let scale = h[(0, 0)];
        for i in 0..6 {
            for j in 0..6 {
                if (i + j) % 2 == 1 {
                    assert!(h[(i, j)].abs() < 1e-12 * scale, "h[{i}][{j}] = {}", h[(i, j)]);
                }
            }
        }
    }

    #[test]
    fn constant_excitation_factorizes() {
        let (b, p) = setup();
        let h = compute_h(&b, &p).unwrap();
        let f = compute_f(&b, &p, &vec![0.3; b.grid.len()]).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert!((f[(i, j)] - 0.3 * h[(i, j)]).abs() <= 1e-12 * h[(0, 0)]);
            }
        }
        let z = compute_f(&b, &p, &vec![0.0; b.grid.len()]).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn excitation_of_one_equals_h_bitwise() {
        let (b, p) = setup();
        let h = compute_h(&b, &p).unwrap();
        let f = compute_f(&b, &p, &vec![1.0; b.grid.len()]).unwrap();
        assert_eq!(h, f);
    }

    #[test]
    fn rejects_out_of_range_excitation_and_grid_mismatch() {
        let (b, p) = setup();
        let mut exc = vec![0.5; b.grid.len()];
        exc[17] = 1.5;
        assert!(compute_f(&b, &p, &exc).is_err());
        assert!(compute_f(&b, &p, &vec![0.5; 100]).is_err());
    }

    #[test]
    fn cauchy_schwarz_and_diagonal_bounds() {
        let (b, p) = setup();
        let exc: Vec<f64> = b
            .grid
            .points
            .iter()
            .map(|&x| 0.8 * (-x * x / 200.0).exp())
            .collect();
        let h = compute_h(&b, &p).unwrap();
        let f = compute_f(&b, &p, &exc).unwrap();
        for i in 0..6 {
            assert!(f[(i, i)] >= 0.0 && f[(i, i)] <= h[(i, i)] + 1e-12 * h[(i, i)]);
            for j in 0..6 {
                let bound = (f[(i, i)] * f[(j, j)]).sqrt();
                assert!(f[(i, j)].abs() <= bound + 1e-10 * h[(0, 0)]);
            }
        }
    }
}
