//! h(η) = Re ψ(iη) − ln η for η > 0, and its derivative.

use num_complex::Complex64;
use std::f64::consts::PI;

use super::{digamma, e1, EULER_GAMMA};
use crate::error::{domain, Result};
use crate::quad;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HMethod {
    Series,
    Integral,
}

fn check(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(domain(format!("h(eta) needs finite eta > 0, got {eta}")));
    }
    Ok(())
}

fn terms(eta: f64) -> usize {
    (40.0 * eta).clamp(1000.0, 4.0e6) as usize
}

#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let s = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - s) + x;
        } else {
            self.comp += (x - s) + self.sum;
        }
        self.sum = s;
    }
    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

// n-th derivatives of f(x) = η²/(x(x²+η²)) = 1/x − Re 1/(x−iη) for n = 1, 3.
fn f_derivs(x: f64, eta: f64) -> (f64, f64) {
    let w = Complex64::new(x, -eta).inv();
    let f1 = -eta * eta * (3.0 * x * x + eta * eta) / (x * x * (x * x + eta * eta).powi(2));
    let f3 = -6.0 / x.powi(4) + 6.0 * w.powi(4).re;
    (f1, f3)
}

// g(x) = 2ηx/(x²+η²)² = Im 1/(x−iη)², derivatives n = 1, 3.
fn g_derivs(x: f64, eta: f64) -> (f64, f64) {
    let w = Complex64::new(x, -eta).inv();
    (-2.0 * w.powi(3).im, -24.0 * w.powi(5).im)
}

fn h_series(eta: f64) -> f64 {
    let n = terms(eta);
    let e2 = eta * eta;
    let mut acc = Neumaier::default();
    acc.add(-eta.ln());
    acc.add(-EULER_GAMMA);
    for k in (1..=n).rev() {
        let kf = k as f64;
        acc.add(e2 / (kf * (kf * kf + e2)));
    }
    // Midpoint Euler–Maclaurin tail from a = N + 1/2.
    let a = n as f64 + 0.5;
    let (f1, f3) = f_derivs(a, eta);
    acc.add(0.5 * (e2 / (a * a)).ln_1p() + f1 / 24.0 - 7.0 * f3 / 5760.0);
    acc.value()
}

// 1/t − 1/(2 tan(t/2))
fn kernel(t: f64) -> f64 {
    if t < 0.05 {
        let t2 = t * t;
        t * (1.0 / 12.0 + t2 * (1.0 / 720.0 + t2 * (1.0 / 30240.0 + t2 / 1_209_600.0)))
    } else {
        1.0 / t - 0.5 / (0.5 * t).tan()
    }
}

fn h_integral(eta: f64) -> Result<f64> {
    let i1 = quad::integrate(|t| kernel(t) * (-eta * t).exp(), 0.0, PI, 1e-300, 1e-13, 400)?.value;
    let i2 = e1(PI * eta)?;
    // e^{−πη} sinh(ηt)/sinh(ηπ) = e^{η(t−2π)} (1 − e^{−2ηt}) / (1 − e^{−2ηπ})
    let den = -(-2.0 * eta * PI).exp_m1();
    let i3 = quad::integrate(
        |t| {
            let half_cot = 0.5 / (0.5 * t).tan();
            half_cot * (eta * (t - 2.0 * PI)).exp() * (-(-2.0 * eta * t).exp_m1()) / den
        },
        0.0,
        PI,
        1e-300,
        1e-13,
        400,
    )?
    .value;
    Ok(i1 + i2 + i3)
}

/// h(η) by the series with a resummed tail, or by the integral
/// representation I₁ + I₂ + e^{−πη} I₃.
pub fn h_eta(eta: f64, method: HMethod) -> Result<f64> {
    check(eta)?;
    match method {
        HMethod::Series => Ok(h_series(eta)),
        HMethod::Integral => h_integral(eta),
    }
}

/// Independent route through the complex digamma function.
pub fn h_eta_digamma(eta: f64) -> Result<f64> {
    check(eta)?;
    Ok(digamma(Complex64::new(1.0, eta))?.re - eta.ln())
}

/// dh/dη from the term-wise differentiated series.
pub fn dh_deta(eta: f64) -> Result<f64> {
    check(eta)?;
    let n = terms(eta);
    let e2 = eta * eta;
    let mut acc = Neumaier::default();
    for k in (1..=n).rev() {
        let kf = k as f64;
        let d = kf * kf + e2;
        acc.add(2.0 * eta * kf / (d * d));
    }
    let a = n as f64 + 0.5;
    let (g1, g3) = g_derivs(a, eta);
    acc.add(eta / (a * a + e2) + g1 / 24.0 - 7.0 * g3 / 5760.0);
    acc.add(-1.0 / eta);
    Ok(acc.value())
}
