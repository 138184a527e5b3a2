//! Complex log-gamma and digamma by upward recurrence plus Stirling series.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::error::{domain, Result};

// B_{2k} / (2k (2k-1)), k = 1..10
const STIRLING: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 360.0,
    1.0 / 1260.0,
    -1.0 / 1680.0,
    1.0 / 1188.0,
    -691.0 / 360_360.0,
    1.0 / 156.0,
    -3617.0 / 122_400.0,
    43_867.0 / 244_188.0,
    -174_611.0 / 125_400.0,
];

// B_{2k} / (2k), k = 1..10
const DIGAMMA: [f64; 10] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32_760.0,
    1.0 / 12.0,
    -3617.0 / 8160.0,
    43_867.0 / 14_364.0,
    -174_611.0 / 6600.0,
];

const SHIFT_TO: f64 = 15.0;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

fn check_pole(z: Complex64) -> Result<()> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(domain(format!("non-finite gamma argument {z}")));
    }
    if z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round() {
        return Err(domain(format!("gamma pole at {}", z.re)));
    }
    Ok(())
}

fn shift_count(z: Complex64) -> usize {
    if z.norm() >= SHIFT_TO || z.re >= SHIFT_TO {
        0
    } else {
        (SHIFT_TO - z.re).ceil().max(0.0) as usize
    }
}

fn stirling(z: Complex64) -> Complex64 {
    let zi = z.inv();
    let zi2 = zi * zi;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut p = zi;
    for c in STIRLING {
        acc += p * c;
        p *= zi2;
    }
    (z - 0.5) * z.ln() - z + LN_SQRT_2PI + acc
}

/// Log-gamma; the branch is the one continuous in `z` off the negative real
/// axis, which makes `Im ln Γ(1 + ℓ + iη)` continuous in η.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    check_pole(z)?;
    if z.re < 0.5 {
        // Γ(z)Γ(1-z) = π / sin(πz)
        let s = (z * PI).sin();
        return Ok(Complex64::new(PI.ln(), 0.0) - s.ln() - ln_gamma(Complex64::new(1.0, 0.0) - z)?);
    }
    let n = shift_count(z);
    let mut corr = Complex64::new(0.0, 0.0);
    for k in 0..n {
        corr += (z + k as f64).ln();
    }
    Ok(stirling(z + n as f64) - corr)
}

pub fn ln_gamma_real(x: f64) -> Result<f64> {
    Ok(ln_gamma(Complex64::new(x, 0.0))?.re)
}

/// Digamma ψ(z).
pub fn digamma(z: Complex64) -> Result<Complex64> {
    check_pole(z)?;
    if z.re < 0.5 {
        // ψ(1-z) - ψ(z) = π cot(πz)
        let w = z * PI;
        return Ok(digamma(Complex64::new(1.0, 0.0) - z)? - w.cos() / w.sin() * PI);
    }
    let n = shift_count(z);
    let mut corr = Complex64::new(0.0, 0.0);
    for k in 0..n {
        corr += (z + k as f64).inv();
    }
    let w = z + n as f64;
    let wi2 = (w * w).inv();
    let mut acc = Complex64::new(0.0, 0.0);
    let mut p = wi2;
    for c in DIGAMMA {
        acc += p * c;
        p *= wi2;
    }
    Ok(w.ln() - w.inv() * 0.5 - acc - corr)
}
