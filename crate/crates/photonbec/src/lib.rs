//! Simulator for multimode photon Bose-Einstein condensates in a dye-filled
//! microcavity.
//!
//! The model couples an equal-time photon correlation matrix `N` (entries
//! `n_pq = <a_p^† a_q>`) to a spatial molecular excitation fraction `f(x)`
//! through overlap matrices `h` and `f` built from 1D Hermite-Gaussian mode
//! functions. Steady states, gain-clamping diagnostics, two-time coherence
//! traces and coherence times are computed across a pump sweep.
//!
//! Modules follow the pipeline order: [`modes`] (basis), [`dye`] (rates and
//! spatial profiles), [`overlap`] (h/f matrices), [`dynamics`] (steady-state
//! solver and diagnostics), [`coherence`] (two-time propagation and
//! correlation analysis), [`cli`] (config, sweep orchestration, CSV output).

// Numeric kernels index several parallel arrays with one loop variable;
// iterator zips would obscure the formulas.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod coherence;
pub mod dye;
pub mod dynamics;
pub mod modes;
pub mod overlap;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("rate table: {0}")]
    RateTable(String),

    #[error("config: {0}")]
    Config(String),

    /// The steady-state solver stopped before reaching the residual target.
    /// Carries the last iterate and the residual history so callers can
    /// inspect or flag the point.
    #[error("steady-state solve did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConverged {
        residual: f64,
        iterations: usize,
        state: Box<dynamics::SteadyState>,
        residual_trace: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
