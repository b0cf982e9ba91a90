//! Property tests for the structural invariants: basis orthonormality and
//! parity over parameter ranges, detailed balance, physical bounds on solved
//! states, matrix-exponential consistency, and τ extraction on synthetic
//! exponentials.

#![allow(clippy::needless_range_loop)]

use nalgebra::DMatrix;
use proptest::prelude::*;

use photonbec::cli::{build_model, SweepConfig};
use photonbec::coherence::{expm, expm_pade, tau_from_trace};
use photonbec::dye::{kb_t_thz, ks_rates};
use photonbec::dynamics::solve_steady;
use photonbec::modes::build_basis;

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    /// ⟨ψ_p|ψ_q⟩ = δ_pq on the grid for any reasonable geometry, as long as
    /// the modes fit well inside the box (extent ≳ 7 mode widths).
    #[test]
    fn basis_is_orthonormal(
        width in 4.0_f64..16.0,
        extent_factor in 7.0_f64..11.0,
        n_modes in 1_usize..8,
        grid_points in 256_usize..1024,
    ) {
        let extent = extent_factor * width;
        let basis = build_basis(n_modes, width, extent, grid_points, 535.0, 1.7).unwrap();
        for p in 0..n_modes {
            for q in 0..n_modes {
                let dot: f64 = (0..basis.grid.len())
                    .map(|i| basis.grid.weights[i] * basis.psi[p][i] * basis.psi[q][i])
                    .sum();
                let want = if p == q { 1.0 } else { 0.0 };
                prop_assert!((dot - want).abs() < 1e-6, "<psi_{p}|psi_{q}> = {dot}");
            }
        }
    }

    /// ψ_p(−x) = (−1)^p ψ_p(x) exactly (the grid is bitwise symmetric).
    #[test]
    fn basis_has_exact_parity(
        width in 4.0_f64..16.0,
        n_modes in 1_usize..8,
        grid_points in 256_usize..1024,
    ) {
        let basis = build_basis(n_modes, width, 8.0 * width, grid_points, 535.0, 1.7).unwrap();
        let g = basis.grid.len();
        for p in 0..n_modes {
            let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
            for i in 0..g {
                prop_assert_eq!(basis.psi[p][i], sign * basis.psi[p][g - 1 - i]);
            }
        }
    }

    /// A_p/E_p follows the Boltzmann factor for any positive temperature and
    /// peak rate, and A_p is monotone in frequency across the ZPL.
    #[test]
    fn ks_detailed_balance_holds(
        temperature_k in 50.0_f64..400.0,
        peak_rate in 1e-4_f64..1.0,
        bandwidth in 5.0_f64..40.0,
        zpl in 536.0_f64..550.0,
    ) {
        let freqs: Vec<f64> = (0..6).map(|p| 535.0 + 1.7 * p as f64).collect();
        let rates = ks_rates(&freqs, zpl, temperature_k, peak_rate, bandwidth).unwrap();
        let kbt = kb_t_thz(temperature_k);
        for p in 0..6 {
            let want = ((freqs[p] - zpl) / kbt).exp();
            let got = rates.absorption[p] / rates.emission[p];
            prop_assert!((got / want - 1.0).abs() < 1e-12);
            prop_assert!(rates.emission[p] > 0.0 && rates.absorption[p] > 0.0);
        }
        // Below the ZPL, higher modes are closer to it: A_{p+1}/E_{p+1} ratio grows.
        for p in 0..5 {
            prop_assert!(
                rates.absorption[p + 1] / rates.emission[p + 1]
                    > rates.absorption[p] / rates.emission[p]
            );
        }
    }

    /// expm agrees with the raw Padé route on random stable matrices.
    #[test]
    fn expm_routes_agree(
        seed in proptest::collection::vec(-1.0_f64..1.0, 16),
        scale in 0.01_f64..5.0,
    ) {
        let mut a = DMatrix::from_fn(4, 4, |i, j| seed[4 * i + j] * scale);
        // Shift toward stability so neither route overflows.
        for i in 0..4 {
            a[(i, i)] -= 2.0 * scale;
        }
        let e1 = expm(&a, 1.0);
        let e2 = expm_pade(&a);
        let norm = e2.iter().fold(1e-300_f64, |m, v| m.max(v.abs()));
        let diff = (&e1 - &e2).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        prop_assert!(diff < 1e-8 * norm, "expm routes differ by {diff:.2e}");
    }

    /// τ extraction recovers the rate of a pure exponential to 0.5% whenever
    /// the window covers the 1/e point with reasonable sampling.
    #[test]
    fn tau_recovers_pure_exponential(
        tau in 0.5_f64..200.0,
        window_factor in 3.0_f64..10.0,
        samples in 512_usize..4096,
    ) {
        let t_max = window_factor * tau;
        let dt = t_max / (samples - 1) as f64;
        let trace: Vec<f64> = (0..samples).map(|k| (-(k as f64) * dt / tau).exp()).collect();
        let got = tau_from_trace(&trace, dt).unwrap();
        prop_assert!((got / tau - 1.0).abs() < 5e-3, "tau {got} vs {tau}");
    }
}

proptest! {
    // Steady solves are expensive; keep the case count small.
    #![proptest_config(ProptestConfig { cases: 6, failure_persistence: None, ..ProptestConfig::default() })]

    /// Solved states are physical across the pump range: N is PSD within
    /// roundoff, f ∈ [0, 1], and both matrices satisfy Cauchy–Schwarz.
    /// Solves are warm-chained from low pump, as in production; cold starts
    /// at high pump can converge to a different, unphysical root.
    #[test]
    fn solved_states_are_physical(pump in 0.15_f64..2.5) {
        let cfg = SweepConfig::default();
        let mut warm = None;
        let steps = 12;
        for k in 0..=steps {
            let p = cfg.pump_min + (pump - cfg.pump_min) * k as f64 / steps as f64;
            let params = build_model(&cfg, p).unwrap();
            warm = Some(solve_steady(&params, warm.as_ref(), cfg.tol, cfg.max_iterations).unwrap());
        }
        let ss = warm.unwrap();
        let n = &ss.n_matrix;
        let scale = n.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        let eig = nalgebra::SymmetricEigen::new(n.clone());
        for &l in eig.eigenvalues.iter() {
            prop_assert!(l > -1e-10 * scale, "negative eigenvalue {l:.3e}");
        }
        for &f in &ss.excitation {
            prop_assert!((0.0..=1.0).contains(&f));
        }
        let fm = &ss.overlaps.f;
        for p in 0..cfg.n_modes {
            for q in 0..cfg.n_modes {
                prop_assert!(
                    n[(p, q)].abs() <= (n[(p, p)] * n[(q, q)]).sqrt() + 1e-8 * scale
                );
                prop_assert!(
                    fm[(p, q)].abs()
                        <= (fm[(p, p)] * fm[(q, q)]).sqrt() + 1e-8 * fm[(0, 0)].abs()
                );
            }
        }
    }
}
