//! F(t) = ₂F₁(−ℓ−iη, −ℓ+iη; 1; t), real for real ℓ and η.

use std::f64::consts::{LN_2, PI};

use super::{ln_gamma_real, ln_gamow_c};
use crate::error::{domain, Error, Result};

const TERM_TOL: f64 = 1e-16;
const TERM_CAP: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperSeriesResult {
    pub value: f64,
    pub terms_used: usize,
    /// Magnitude of the first term not added.
    pub truncation_estimate: f64,
}

fn check(t: f64, l: f64, eta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(domain(format!("F(t) needs t in [0, 1], got {t}")));
    }
    if !(l.is_finite() && eta.is_finite()) || l < 0.0 {
        return Err(domain(format!("F(t) needs finite l >= 0 and eta, got l = {l}, eta = {eta}")));
    }
    Ok(())
}

/// Direct summation, including at t = 1.
pub fn hyper_f_series(t: f64, l: f64, eta: f64) -> Result<HyperSeriesResult> {
    check(t, l, eta)?;
    let mut d = 1.0;
    let mut tn = 1.0;
    let mut sum = 1.0;
    let mut comp = 0.0;
    let growth_end = l + eta.abs();
    for n in 0..TERM_CAP {
        let nf = n as f64;
        d *= (eta * eta + (nf - l).powi(2)) / ((nf + 1.0) * (nf + 1.0));
        tn *= t;
        let term = d * tn;
        if term == 0.0 || (term <= TERM_TOL * sum && nf + 1.0 > growth_end) {
            return Ok(HyperSeriesResult { value: sum + comp, terms_used: n + 1, truncation_estimate: term });
        }
        // Neumaier summation; terms are all non-negative but there are many.
        let s = sum + term;
        comp += (sum - s) + term;
        sum = s;
    }
    let next = d * tn;
    Err(Error::Truncation { terms: TERM_CAP, estimate: next })
}

/// F(1) in closed form.
pub fn hyper_f_closed_at_one(l: f64, eta: f64) -> Result<f64> {
    check(1.0, l, eta)?;
    let ln_c = ln_gamow_c(l, eta)?;
    let ln = 2.0 * l * LN_2 - PI * eta - 2.0 * ln_c - 2.0 * (2.0 * l + 1.0).ln() - ln_gamma_real(2.0 * l + 1.0)?;
    Ok(ln.exp())
}

/// F(t), using the closed form at t = 1.
pub fn hyper_f(t: f64, l: f64, eta: f64) -> Result<HyperSeriesResult> {
    check(t, l, eta)?;
    if t == 1.0 {
        return Ok(HyperSeriesResult { value: hyper_f_closed_at_one(l, eta)?, terms_used: 0, truncation_estimate: 0.0 });
    }
    hyper_f_series(t, l, eta)
}

/// (F, dF/dt, ∂F/∂η, ∂²F/∂t∂η) for small t, where the series converges
/// geometrically.
pub(crate) fn hyper_f_with_eta_derivative(t: f64, l: f64, eta: f64) -> Result<(f64, f64, f64, f64)> {
    if !(0.0..0.9).contains(&t) {
        return Err(domain(format!("small-t series used outside its range: t = {t}")));
    }
    let (mut d, mut de) = (1.0, 0.0);
    let (mut f, mut ft, mut fe, mut fte) = (1.0, 0.0, 0.0, 0.0);
    let mut tn = 1.0;
    let growth_end = l.abs() + eta.abs();
    for n in 0..10_000 {
        let nf = n as f64;
        let den = (nf + 1.0) * (nf + 1.0);
        let r = (eta * eta + (nf - l).powi(2)) / den;
        de = de * r + d * 2.0 * eta / den;
        d *= r;
        // d/dt of t^{n+1} is (n+1) t^n
        ft += (nf + 1.0) * d * tn;
        fte += (nf + 1.0) * de * tn;
        tn *= t;
        let term = d * tn;
        f += term;
        fe += de * tn;
        if term.abs() <= 1e-17 * f && (de * tn).abs() <= 1e-17 * fe.abs().max(1e-300) && nf + 1.0 > growth_end {
            return Ok((f, ft, fe, fte));
        }
        if term == 0.0 && de == 0.0 && nf + 1.0 > growth_end {
            return Ok((f, ft, fe, fte));
        }
    }
    Err(Error::Truncation { terms: 10_000, estimate: d * tn })
}
