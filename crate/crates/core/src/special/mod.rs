//! Scalar special functions: log-gamma, Coulomb phase, Gamow factor, the
//! hypergeometric series behind the Nicholson integrand, h(η), E₁ and K_ν.

mod bessel;
mod expint;
mod gamma;
mod heta;
mod hyper;

pub use bessel::{bessel_k, bessel_k_pair, bessel_k_scaled, bessel_k_scaled_pair};
pub use expint::e1;
pub use gamma::{digamma, ln_gamma, ln_gamma_real};
pub use heta::{dh_deta, h_eta, h_eta_digamma, HMethod};
pub use hyper::{hyper_f, hyper_f_closed_at_one, hyper_f_series, HyperSeriesResult};
pub(crate) use hyper::hyper_f_with_eta_derivative;

use num_complex::Complex64;
use std::f64::consts::{LN_2, PI};

use crate::error::{domain, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Coulomb phase shift σ_ℓ(η) = arg Γ(1+ℓ+iη), continuous in η.
pub fn coulomb_phase_sigma(l: f64, eta: f64) -> Result<f64> {
    if !eta.is_finite() || !l.is_finite() {
        return Err(domain("non-finite argument to coulomb_phase_sigma"));
    }
    Ok(ln_gamma(Complex64::new(1.0 + l, eta))?.im)
}

/// dσ_ℓ/dη = Re ψ(1+ℓ+iη).
pub fn dsigma_deta(l: f64, eta: f64) -> Result<f64> {
    Ok(digamma(Complex64::new(1.0 + l, eta))?.re)
}

/// ln C_ℓ(η).
pub fn ln_gamow_c(l: f64, eta: f64) -> Result<f64> {
    if l <= -1.0 {
        return Err(domain(format!("Gamow factor needs l > -1, got {l}")));
    }
    let re = ln_gamma(Complex64::new(l + 1.0, eta))?.re;
    Ok(l * LN_2 - 0.5 * PI * eta + re - ln_gamma_real(2.0 * l + 2.0)?)
}

/// Gamow factor C_ℓ(η).
pub fn gamow_c(l: f64, eta: f64) -> Result<f64> {
    Ok(ln_gamow_c(l, eta)?.exp())
}
