//! The closed nonequilibrium model: equal-time correlation matrix N coupled
//! to the molecular excitation field f(x), its steady-state solver, and
//! clamping/balance diagnostics.
//!
//! Model (h and f matrices recomputed from the current field each evaluation):
//!
//! dn_pq/dt = −κ n_pq − ½Σ_j A_j (h_pj n_jq + n_pj h_jq)
//!            + ½Σ_j (A_j+E_j)(f_pj n_jq + n_pj f_jq) + √(E_p E_q) f_pq
//!
//! df(x)/dt = Γ↑ g(x)(1−f) − Γ↓ f
//!            + (1−f) Σ_pq √(A_p A_q) ψ_p ψ_q n_pq
//!            − f Σ_pq √(E_p E_q) ψ_p ψ_q (n_pq + δ_pq)
//!
//! The solver exploits the κ/Γ↓ scale separation by eliminating the fast
//! variables quasi-statically: the field equation is solved pointwise for
//! f*(x) given N, and a damped Newton iteration drives the coupled algebraic
//! system (photon balance + field-consistent f-matrix) to its root. The
//! returned state is always verified against the full rhs: max-norm of the
//! rhs must be below tol·max(κ, Γ↓)·scale(state), with scale = max(1, |N|_max)
//! on the photon block and 1 on the field block (f is dimensionless in [0,1]).

use nalgebra::{DMatrix, DVector};

use crate::coherence::generator_matrix;
use crate::dye::{RateSet, SpatialProfiles};
use crate::modes::ModeBasis;
use crate::overlap::{compute_h, OverlapMatrices};
use crate::{Error, Result};

/// Everything the model needs: cavity loss, rates, profiles, basis.
#[derive(Debug, Clone)]
pub struct ModelParams {
    /// Cavity loss κ (THz).
    pub kappa: f64,
    pub rates: RateSet,
    pub profiles: SpatialProfiles,
    pub basis: ModeBasis,
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.kappa <= 0.0 {
            return Err(Error::InvalidParameter("kappa must be positive".into()));
        }
        if self.rates.len() != self.basis.n_modes {
            return Err(Error::InvalidParameter(format!(
                "rate set has {} modes, basis has {}",
                self.rates.len(),
                self.basis.n_modes
            )));
        }
        if self.rates.absorption.iter().chain(&self.rates.emission).any(|&r| r < 0.0) {
            return Err(Error::InvalidParameter("rates must be non-negative".into()));
        }
        Ok(())
    }
}

/// Converged (or last-iterate) state of the coupled system.
#[derive(Debug, Clone)]
pub struct SteadyState {
    /// Equal-time correlation matrix, n_pq = c_pq(0).
    pub n_matrix: DMatrix<f64>,
    /// Excitation fraction f(x_g) on the basis grid.
    pub excitation: Vec<f64>,
    /// h and f matrices at the converged excitation.
    pub overlaps: OverlapMatrices,
    /// max-norm of the full rhs at acceptance (scaled; see module docs).
    pub residual_norm: f64,
    /// Newton iterations spent.
    pub iterations: usize,
}

/// Time derivative of the coupled state.
#[derive(Debug, Clone)]
pub struct StateDerivative {
    pub dn: DMatrix<f64>,
    pub df: Vec<f64>,
}

fn sqrt_outer(v: &[f64]) -> DMatrix<f64> {
    let m = v.len();
    DMatrix::from_fn(m, m, |p, q| (v[p] * v[q]).sqrt())
}

/// f-matrix from an arbitrary field (no [0,1] check; solver-internal).
fn f_matrix_raw(basis: &ModeBasis, profiles: &SpatialProfiles, field: &[f64]) -> DMatrix<f64> {
    let m = basis.n_modes;
    let g = basis.grid.len();
    let mut out = DMatrix::zeros(m, m);
    for p in 0..m {
        for q in p..m {
            let mut s = 0.0;
            for i in 0..g {
                s += profiles.density[i]
                    * basis.grid.weights[i]
                    * basis.psi[p][i]
                    * basis.psi[q][i]
                    * field[i];
            }
            out[(p, q)] = s;
            out[(q, p)] = s;
        }
    }
    out
}

/// Evaluates the model rhs exactly as specified, recomputing h and the
/// f-matrix from the current field. Errors on non-finite output with a
/// diagnostic dump of the offending state.
pub fn rhs(n: &DMatrix<f64>, field: &[f64], params: &ModelParams) -> Result<StateDerivative> {
    let m = params.basis.n_modes;
    let h = compute_h(&params.basis, &params.profiles)?;
    let fm = f_matrix_raw(&params.basis, &params.profiles, field);
    let a = &params.rates.absorption;
    let e = &params.rates.emission;

    let mut dn = DMatrix::zeros(m, m);
    for p in 0..m {
        for q in 0..m {
            let mut s = -params.kappa * n[(p, q)];
            for j in 0..m {
                s -= 0.5 * a[j] * (h[(p, j)] * n[(j, q)] + n[(p, j)] * h[(j, q)]);
                s += 0.5 * (a[j] + e[j]) * (fm[(p, j)] * n[(j, q)] + n[(p, j)] * fm[(j, q)]);
            }
            s += (e[p] * e[q]).sqrt() * fm[(p, q)];
            dn[(p, q)] = s;
        }
    }

    let gup = params.profiles.pump_rate;
    let gdown = params.profiles.decay_rate;
    let g = params.basis.grid.len();
    let mut df = vec![0.0; g];
    for i in 0..g {
        let mut gain = 0.0; // Σ √(A_p A_q) ψ_p ψ_q n_pq
        let mut loss = 0.0; // Σ √(E_p E_q) ψ_p ψ_q (n_pq + δ_pq)
        for p in 0..m {
            for q in 0..m {
                let geom = params.basis.psi[p][i] * params.basis.psi[q][i];
                gain += (a[p] * a[q]).sqrt() * geom * n[(p, q)];
                let npq = n[(p, q)] + if p == q { 1.0 } else { 0.0 };
                loss += (e[p] * e[q]).sqrt() * geom * npq;
            }
        }
        let f = field[i];
        df[i] = gup * params.profiles.pump_shape[i] * (1.0 - f) - gdown * f
            + (1.0 - f) * gain
            - f * loss;
    }

    if dn.iter().any(|v| !v.is_finite()) || df.iter().any(|v| !v.is_finite()) {
        let nmax = n.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let fmax = field.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        return Err(Error::Numerical(format!(
            "non-finite rhs: |N|_max = {nmax:.3e}, |f|_max = {fmax:.3e}, pump = {gup:.3e}"
        )));
    }
    Ok(StateDerivative { dn, df })
}

// ---------------------------------------------------------------------------
// Steady-state solver
// ---------------------------------------------------------------------------

struct Packing {
    m: usize,
    pairs: Vec<(usize, usize)>,
}

impl Packing {
    fn new(m: usize) -> Self {
        let mut pairs = Vec::with_capacity(m * (m + 1) / 2);
        for p in 0..m {
            for q in p..m {
                pairs.push((p, q));
            }
        }
        Packing { m, pairs }
    }

    fn len(&self) -> usize {
        self.pairs.len()
    }

    fn unpack(&self, v: &[f64]) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, self.m);
        for (k, &(p, q)) in self.pairs.iter().enumerate() {
            out[(p, q)] = v[k];
            out[(q, p)] = v[k];
        }
        out
    }

    fn pack_into(&self, mat: &DMatrix<f64>, out: &mut [f64]) {
        for (k, &(p, q)) in self.pairs.iter().enumerate() {
            out[k] = mat[(p, q)];
        }
    }
}

/// Pointwise root of df/dt = 0 given N: f*(x) = a/(a+b) with
/// a = Γ↑g + Σ√(A_pA_q)ψψ n_pq and b = Γ↓ + Σ√(E_pE_q)ψψ n_pq + Σ_p E_p ψ_p².
fn slaved_field(n: &DMatrix<f64>, params: &ModelParams, out: &mut [f64]) {
    let m = params.basis.n_modes;
    let a = &params.rates.absorption;
    let e = &params.rates.emission;
    let gup = params.profiles.pump_rate;
    let gdown = params.profiles.decay_rate;
    for i in 0..out.len() {
        let mut pa = 0.0;
        let mut pe = 0.0;
        let mut qe = 0.0;
        for p in 0..m {
            let psip = params.basis.psi[p][i];
            qe += e[p] * psip * psip;
            for q in 0..m {
                let geom = psip * params.basis.psi[q][i];
                pa += (a[p] * a[q]).sqrt() * geom * n[(p, q)];
                pe += (e[p] * e[q]).sqrt() * geom * n[(p, q)];
            }
        }
        let num = gup * params.profiles.pump_shape[i] + pa;
        let den = num + gdown + pe + qe;
        out[i] = if den > 0.0 { num / den } else { 0.0 };
    }
}

struct Residual<'a> {
    params: &'a ModelParams,
    pk: Packing,
    h: DMatrix<f64>,
    sqe: DMatrix<f64>,
    field_buf: Vec<f64>,
}

impl<'a> Residual<'a> {
    fn new(params: &'a ModelParams) -> Result<Self> {
        let h = compute_h(&params.basis, &params.profiles)?;
        Ok(Residual {
            params,
            pk: Packing::new(params.basis.n_modes),
            h,
            sqe: sqrt_outer(&params.rates.emission),
            field_buf: vec![0.0; params.basis.grid.len()],
        })
    }

    /// z = [N upper triangle, f-matrix upper triangle].
    /// R1 = GᵀN + NG − S (= −dN/dt), R2 = f-matrix − quadrature(μψψ f*(N)).
    fn eval(&mut self, z: &[f64], r: &mut [f64]) {
        let k = self.pk.len();
        let n = self.pk.unpack(&z[..k]);
        let fm = self.pk.unpack(&z[k..]);
        let gmat = generator_matrix(self.params.kappa, &self.params.rates, &self.h, &fm);
        let s = self.sqe.component_mul(&fm);
        let r1 = gmat.transpose() * &n + &n * &gmat - s;
        slaved_field(&n, self.params, &mut self.field_buf);
        let fm_star = f_matrix_raw(&self.params.basis, &self.params.profiles, &self.field_buf);
        let r2 = &fm - &fm_star;
        self.pk.pack_into(&r1, &mut r[..k]);
        self.pk.pack_into(&r2, &mut r[k..]);
    }

    /// Scaled max-norm combining the two residual blocks.
    fn norm(&self, z: &[f64], r: &[f64]) -> f64 {
        let k = self.pk.len();
        let nmax = z[..k].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let fmax = z[k..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let sc1 = (self.params.kappa * nmax.max(1.0)).max(1e-300);
        let sc2 = fmax.max(1e-300);
        let r1 = r[..k].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        let r2 = r[k..].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        (r1 / sc1).max(r2 / sc2)
    }
}

/// Cold-start iterate: pump-only field balance, pulled back until the photon
/// generator is stable, then one Lyapunov solve for N.
fn cold_start(res: &mut Residual, params: &ModelParams) -> Vec<f64> {
    let gup = params.profiles.pump_rate;
    let gdown = params.profiles.decay_rate;
    let field: Vec<f64> = params
        .profiles
        .pump_shape
        .iter()
        .map(|&g| gup * g / (gup * g + gdown))
        .collect();
    let mut fm = f_matrix_raw(&params.basis, &params.profiles, &field);
    let mut gmat = generator_matrix(params.kappa, &params.rates, &res.h, &fm);
    for _ in 0..200 {
        if min_real_eig(&gmat) > 1e-13 {
            break;
        }
        fm *= 0.7;
        gmat = generator_matrix(params.kappa, &params.rates, &res.h, &fm);
    }
    let s = res.sqe.component_mul(&fm);
    let n = solve_lyapunov(&gmat, &s).unwrap_or_else(|| DMatrix::zeros(fm.nrows(), fm.ncols()));
    let k = res.pk.len();
    let mut z = vec![0.0; 2 * k];
    let (zn, zf) = z.split_at_mut(k);
    res.pk.pack_into(&n, zn);
    res.pk.pack_into(&fm, zf);
    z
}

fn min_real_eig(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|c| c.re).fold(f64::INFINITY, f64::min)
}

/// Solves GᵀN + NG = S for symmetric N by Kronecker vectorization + LU.
/// Returns None if the operator is singular.
fn solve_lyapunov(gmat: &DMatrix<f64>, s: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let m = gmat.nrows();
    let mm = m * m;
    // vec(GᵀN + NG) = (I⊗Gᵀ + Gᵀ⊗I) vec(N), column-major vec.
    let mut op = DMatrix::zeros(mm, mm);
    for col in 0..m {
        for row in 0..m {
            let ri = col * m + row;
            for j in 0..m {
                op[(ri, col * m + j)] += gmat[(j, row)]; // (Gᵀ)_{row j}
                op[(ri, j * m + row)] += gmat[(j, col)]; // G_{j col} acting from the right
            }
        }
    }
    let bvec = DVector::from_fn(mm, |i, _| s[(i % m, i / m)]);
    let lu = op.lu();
    let x = lu.solve(&bvec)?;
    let mut n = DMatrix::from_fn(m, m, |r, c| x[c * m + r]);
    let nt = n.transpose();
    n = (n + nt) * 0.5;
    Some(n)
}

/// Drives the coupled system to steady state.
///
/// `tol` controls the final full-rhs acceptance test (see module docs);
/// `max_iterations` bounds the Newton outer loop. Warm start from `init` when
/// given. On failure, returns [`Error::NonConverged`] carrying the last state
/// and the residual history.
pub fn solve_steady(
    params: &ModelParams,
    init: Option<&SteadyState>,
    tol: f64,
    max_iterations: usize,
) -> Result<SteadyState> {
    params.validate()?;
    if tol <= 0.0 {
        return Err(Error::InvalidParameter("tol must be positive".into()));
    }
    let m = params.basis.n_modes;

    // Unpumped dark state: exact zero fixed point.
    if params.profiles.pump_rate == 0.0 {
        let field = vec![0.0; params.basis.grid.len()];
        let overlaps = OverlapMatrices {
            h: compute_h(&params.basis, &params.profiles)?,
            f: DMatrix::zeros(m, m),
        };
        return Ok(SteadyState {
            n_matrix: DMatrix::zeros(m, m),
            excitation: field,
            overlaps,
            residual_norm: 0.0,
            iterations: 0,
        });
    }

    let mut res = Residual::new(params)?;
    let k = res.pk.len();
    let dim = 2 * k;

    let mut z = match init {
        Some(ss) => {
            let mut z = vec![0.0; dim];
            let (zn, zf) = z.split_at_mut(k);
            res.pk.pack_into(&ss.n_matrix, zn);
            res.pk.pack_into(&ss.overlaps.f, zf);
            z
        }
        None => cold_start(&mut res, params),
    };

    let newton_tol = 1e-12;
    let mut r = vec![0.0; dim];
    let mut rp = vec![0.0; dim];
    let mut trace = Vec::new();
    let mut iterations = 0;
    let mut converged = false;

    for _ in 0..max_iterations {
        iterations += 1;
        res.eval(&z, &mut r);
        let rn = res.norm(&z, &r);
        trace.push(rn);
        if rn < newton_tol {
            converged = true;
            break;
        }

        // Forward-difference Jacobian.
        let zn_scale = z[..k].iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let zf_scale = z[k..].iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        let mut jac = DMatrix::zeros(dim, dim);
        for col in 0..dim {
            let base = if col < k { zn_scale } else { zf_scale };
            let eps = 1e-7 * z[col].abs().max(1e-6 * base);
            let saved = z[col];
            z[col] = saved + eps;
            res.eval(&z, &mut rp);
            z[col] = saved;
            for row in 0..dim {
                jac[(row, col)] = (rp[row] - r[row]) / eps;
            }
        }

        let rvec = DVector::from_column_slice(&r);
        let dz = match jac.lu().solve(&(-rvec)) {
            Some(d) => d,
            None => {
                return Err(Error::Numerical(
                    "singular Jacobian in steady-state Newton iteration".into(),
                ))
            }
        };

        // Halving line search on the scaled residual norm.
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..50 {
            let zt: Vec<f64> = z.iter().zip(dz.iter()).map(|(a, d)| a + step * d).collect();
            res.eval(&zt, &mut rp);
            if res.norm(&zt, &rp) < rn {
                z = zt;
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            // Creep along the Newton direction; keeps progress near kinks.
            for (a, d) in z.iter_mut().zip(dz.iter()) {
                *a += 1e-4 * d;
            }
        }
    }

    // Assemble the state and verify it against the full rhs.
    let n = res.pk.unpack(&z[..k]);
    slaved_field(&n, params, &mut res.field_buf);
    let mut field = res.field_buf.clone();
    for f in &mut field {
        *f = f.clamp(0.0, 1.0);
    }
    let fm = f_matrix_raw(&params.basis, &params.profiles, &field);
    let overlaps = OverlapMatrices { h: res.h.clone(), f: fm };

    let deriv = rhs(&n, &field, params)?;
    let scale_n = n.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    let rn_photon = deriv.dn.iter().fold(0.0_f64, |m, v| m.max(v.abs())) / scale_n;
    let rn_field = deriv.df.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let residual_norm = rn_photon.max(rn_field);

    let state = SteadyState { n_matrix: n, excitation: field, overlaps, residual_norm, iterations };

    let accept = tol * params.kappa.max(params.profiles.decay_rate);
    if converged && residual_norm < accept {
        Ok(state)
    } else {
        Err(Error::NonConverged {
            residual: residual_norm,
            iterations,
            state: Box::new(state),
            residual_trace: trace,
        })
    }
}

// ---------------------------------------------------------------------------
// Diagnostics
// ---------------------------------------------------------------------------

/// Gain-clamping diagnostics for the ground mode.
#[derive(Debug, Clone, Copy)]
pub struct ClampDiagnostics {
    /// (A₀+E₀)f₀₀ — the clamped quantity.
    pub clamp_value: f64,
    /// κ + A₀h₀₀ — the loss it clamps to.
    pub threshold_value: f64,
    pub clamp_ratio: f64,
}

pub fn clamp_diagnostics(ss: &SteadyState, params: &ModelParams) -> ClampDiagnostics {
    let a0 = params.rates.absorption[0];
    let e0 = params.rates.emission[0];
    let clamp_value = (a0 + e0) * ss.overlaps.f[(0, 0)];
    let threshold_value = params.kappa + a0 * ss.overlaps.h[(0, 0)];
    ClampDiagnostics {
        clamp_value,
        threshold_value,
        clamp_ratio: clamp_value / threshold_value,
    }
}

/// Ground-state balance residual in the diagonal-h approximation:
/// |n₀₀(κ + A₀h₀₀ − (A₀+E₀)f₀₀) − E₀f₀₀ − Σ_{j≠0}(E_j+A_j)f₀ⱼn_j₀| / max-term.
pub fn eq6_residual(ss: &SteadyState, params: &ModelParams) -> f64 {
    let a = &params.rates.absorption;
    let e = &params.rates.emission;
    let h00 = ss.overlaps.h[(0, 0)];
    let f = &ss.overlaps.f;
    let n = &ss.n_matrix;
    let lhs = n[(0, 0)] * (params.kappa + a[0] * h00 - (a[0] + e[0]) * f[(0, 0)]);
    let spont = e[0] * f[(0, 0)];
    let mut corr = 0.0;
    let mut max_term = lhs.abs().max(spont.abs());
    for j in 1..params.basis.n_modes {
        let t = (e[j] + a[j]) * f[(0, j)] * n[(j, 0)];
        corr += t;
        max_term = max_term.max(t.abs());
    }
    if max_term == 0.0 {
        return 0.0;
    }
    (lhs - spont - corr).abs() / max_term
}

/// First pump value at which n_pp crosses `n_threshold`, linearly
/// interpolated between sweep points. `sweep` must be sorted by pump rate.
pub fn threshold_scan(
    sweep: &[(f64, SteadyState)],
    mode: usize,
    n_threshold: f64,
) -> Option<f64> {
    let mut prev: Option<(f64, f64)> = None;
    for (pump, ss) in sweep {
        let n = ss.n_matrix[(mode, mode)];
        if n >= n_threshold {
            return Some(match prev {
                Some((p0, n0)) if n > n0 => p0 + (pump - p0) * (n_threshold - n0) / (n - n0),
                _ => *pump,
            });
        }
        prev = Some((*pump, n));
    }
    None
}

/// Peak per-molecule emission rate such that A₀h₀₀ = target_ratio·κ at the
/// given geometry and Kennard-Stepanov parameters.
pub fn calibrate_peak_rate(
    basis: &ModeBasis,
    profiles: &SpatialProfiles,
    zpl: f64,
    temperature_k: f64,
    bandwidth: f64,
    kappa: f64,
    target_ratio: f64,
) -> Result<f64> {
    let h = compute_h(basis, profiles)?;
    let h00 = h[(0, 0)];
    if h00 <= 0.0 {
        return Err(Error::InvalidParameter("h00 must be positive for calibration".into()));
    }
    let d = basis.frequencies[0] - zpl;
    let gauss = (-d * d / (2.0 * bandwidth * bandwidth)).exp();
    let ks = (d / crate::dye::kb_t_thz(temperature_k)).exp();
    Ok(target_ratio * kappa / (gauss * ks * h00))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dye::{build_profiles, ks_rates, DensityShape, RateSet};
    use crate::modes::build_basis;

    fn bare_params(m: usize, pump: f64) -> ModelParams {
        let basis = build_basis(m, 10.0, 80.0, 512, 535.0, 1.7).unwrap();
        let profiles =
            build_profiles(&basis, 1e9, DensityShape::Uniform, 0.0, 12.0, pump, 3e-5).unwrap();
        ModelParams { kappa: 0.2, rates: RateSet::zeroed(m), profiles, basis }
    }

    #[test]
    fn bare_cavity_rhs_is_pure_decay() {
        let params = bare_params(3, 0.0);
        let n0 = DMatrix::from_fn(3, 3, |p, q| 1.0 / (1.0 + (p + q) as f64));
        let field = vec![0.25; params.basis.grid.len()];
        let d = rhs(&n0, &field, &params).unwrap();
        for p in 0..3 {
            for q in 0..3 {
                assert!((d.dn[(p, q)] + 0.2 * n0[(p, q)]).abs() < 1e-14);
            }
        }
        for v in &d.df {
            assert!((v + 3e-5 * 0.25).abs() < 1e-18);
        }
    }

    #[test]
    fn unpumped_state_is_dark() {
        let params = bare_params(2, 0.0);
        let ss = solve_steady(&params, None, 1e-9, 200).unwrap();
        assert_eq!(ss.n_matrix, DMatrix::zeros(2, 2));
        assert!(ss.excitation.iter().all(|&f| f == 0.0));
        assert_eq!(ss.residual_norm, 0.0);
        let cd = clamp_diagnostics(&ss, &params);
        assert_eq!(cd.clamp_ratio, 0.0);
    }

    #[test]
    fn threshold_scan_linear_crossing() {
        let basis = build_basis(1, 10.0, 80.0, 512, 535.0, 1.7).unwrap();
        let mk = |n: f64| SteadyState {
            n_matrix: DMatrix::from_element(1, 1, n),
            excitation: vec![0.0; basis.grid.len()],
            overlaps: OverlapMatrices {
                h: DMatrix::zeros(1, 1),
                f: DMatrix::zeros(1, 1),
            },
            residual_norm: 0.0,
            iterations: 0,
        };
        // n(Γ) = Γ/Γ₀ with Γ₀ = 2.0: crossing of 1.0 at pump 2.0.
        let sweep: Vec<(f64, SteadyState)> =
            [0.5, 1.0, 1.5, 2.5, 3.0].iter().map(|&p| (p, mk(p / 2.0))).collect();
        let t = threshold_scan(&sweep, 0, 1.0).unwrap();
        assert!((t - 2.0).abs() < 1e-12);
        assert!(threshold_scan(&sweep, 0, 10.0).is_none());
    }

    #[test]
    fn calibration_pins_a0_h00() {
        let basis = build_basis(6, 10.0, 80.0, 512, 535.0, 1.7).unwrap();
        let profiles =
            build_profiles(&basis, 4e9, DensityShape::Uniform, 0.0, 12.0, 0.0, 3e-5).unwrap();
        let peak =
            calibrate_peak_rate(&basis, &profiles, 542.0, 96.0, 15.0, 0.2, 15.0).unwrap();
        let rates = ks_rates(&basis.frequencies, 542.0, 96.0, peak, 15.0).unwrap();
        let h = compute_h(&basis, &profiles).unwrap();
        assert!((rates.absorption[0] * h[(0, 0)] / (15.0 * 0.2) - 1.0).abs() < 1e-10);
    }

    #[test]
    fn lyapunov_solver_matches_direct_check() {
        let g = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, -0.2, 2.0]);
        let s = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.1, 0.5]);
        let n = solve_lyapunov(&g, &s).unwrap();
        let back = g.transpose() * &n + &n * &g;
        for i in 0..2 {
            for j in 0..2 {
                assert!((back[(i, j)] - s[(i, j)]).abs() < 1e-12);
            }
        }
    }
}
