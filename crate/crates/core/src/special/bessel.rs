//! Modified Bessel function K_ν(x) for real ν ≥ 0 and x > 0.
//!
//! Temme's series below x = 2, Steed's continued fraction above, then upward
//! recurrence from the reduced order |μ| ≤ 1/2.

use std::f64::consts::PI;

use crate::error::{domain, numerical, Result};

// Taylor coefficients of 1/Γ(z) about 0, z^1 .. z^28.
const RGAMMA: [f64; 28] = [
    1.0,
    0.577_215_664_901_532_860_61,
    -0.655_878_071_520_253_881_08,
    -0.042_002_635_034_095_235_529,
    0.166_538_611_382_291_489_5,
    -0.042_197_734_555_544_336_748,
    -0.009_621_971_527_876_973_562_1,
    0.007_218_943_246_663_099_542_4,
    -0.001_165_167_591_859_065_112_1,
    -0.000_215_241_674_114_950_972_82,
    0.000_128_050_282_388_116_186_15,
    -0.000_020_134_854_780_788_238_656,
    -1.250_493_482_142_670_657_3e-6,
    1.133_027_231_981_695_882_4e-6,
    -2.056_338_416_977_607_103_5e-7,
    6.116_095_104_481_415_817_9e-9,
    5.002_007_644_469_222_930_1e-9,
    -1.181_274_570_487_020_144_6e-9,
    1.043_426_711_691_100_510_5e-10,
    7.782_263_439_905_071_254e-12,
    -3.696_805_618_642_205_708_2e-12,
    5.100_370_287_454_475_979e-13,
    -2.058_326_053_566_506_783_2e-14,
    -5.348_122_539_423_017_982_4e-15,
    1.226_778_628_238_260_790_2e-15,
    -1.181_259_301_697_458_769_5e-16,
    1.186_692_254_751_600_332_6e-18,
    1.412_380_655_318_031_781_6e-18,
];

/// (Γ₁, Γ₂, 1/Γ(1+μ), 1/Γ(1−μ)) for |μ| ≤ 1/2.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let m2 = mu * mu;
    let mut even = 0.0; // c1 + c3 μ² + c5 μ⁴ + ...
    let mut odd = 0.0; // c2 + c4 μ² + c6 μ⁴ + ...
    for j in (0..14).rev() {
        even = even * m2 + RGAMMA[2 * j];
        odd = odd * m2 + RGAMMA[2 * j + 1];
    }
    let gampl = even + mu * odd;
    let gammi = even - mu * odd;
    (-odd, even, gampl, gammi)
}

// Returns (e^x K_μ(x), e^x K_{μ+1}(x)) for |μ| ≤ 1/2.
fn reduced_scaled(mu: f64, x: f64) -> Result<(f64, f64)> {
    let eps = 1e-16;
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < 1e-15 { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < 1e-15 { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        let m2 = mu * mu;
        let mut converged = false;
        for i in 1..500 {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - m2);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * eps {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(numerical("Temme series for K did not converge"));
        }
        let s = x.exp();
        Ok((sum * s, sum1 * 2.0 / x * s))
    } else {
        let a1 = 0.25 - mu * mu;
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let (mut q1, mut q2) = (0.0, 1.0);
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        let mut converged = false;
        for i in 2..10_000 {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh *= b * d - 1.0;
            h += delh;
            let dels = q * delh;
            s += dels;
            if (dels / s).abs() < eps {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(numerical("Steed continued fraction for K did not converge"));
        }
        let h = a1 * h;
        let kmu = (PI / (2.0 * x)).sqrt() / s;
        let k1 = kmu * (mu + x + 0.5 - h) / x;
        Ok((kmu, k1))
    }
}

fn check(nu: f64, x: f64) -> Result<()> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("K_nu(x) needs finite x > 0, got {x}")));
    }
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(domain(format!("K_nu(x) needs finite nu >= 0, got {nu}")));
    }
    Ok(())
}

/// (e^x K_ν(x), e^x K_{ν+1}(x)).
pub fn bessel_k_scaled_pair(nu: f64, x: f64) -> Result<(f64, f64)> {
    check(nu, x)?;
    let nl = (nu + 0.5).floor();
    let mu = nu - nl;
    let (mut k0, mut k1) = reduced_scaled(mu, x)?;
    for i in 1..=(nl as usize) {
        let next = (mu + i as f64) * 2.0 / x * k1 + k0;
        k0 = k1;
        k1 = next;
    }
    if !(k0.is_finite() && k1.is_finite()) {
        return Err(crate::error::Error::Range(format!("K_{nu}({x}) overflows")));
    }
    Ok((k0, k1))
}

pub fn bessel_k_pair(nu: f64, x: f64) -> Result<(f64, f64)> {
    let (a, b) = bessel_k_scaled_pair(nu, x)?;
    let s = (-x).exp();
    Ok((a * s, b * s))
}

/// e^x K_ν(x).
pub fn bessel_k_scaled(nu: f64, x: f64) -> Result<f64> {
    Ok(bessel_k_scaled_pair(nu, x)?.0)
}

pub fn bessel_k(nu: f64, x: f64) -> Result<f64> {
    Ok(bessel_k_pair(nu, x)?.0)
}
