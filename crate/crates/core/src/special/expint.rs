use super::EULER_GAMMA;
use crate::error::{domain, numerical, Result};

/// Exponential integral E₁(x) for x > 0.
pub fn e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(domain(format!("E1 needs finite x > 0, got {x}")));
    }
    if x <= 1.0 {
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let d = term / k as f64;
            sum += d;
            if d.abs() < 1e-17 * sum.abs().max(1e-300) {
                break;
            }
        }
        return Ok(-EULER_GAMMA - x.ln() - sum);
    }
    // Modified Lentz on the continued fraction.
    let tiny = 1e-300;
    let mut b = x + 1.0;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..1000 {
        let an = -((i * i) as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            return Ok(h * (-x).exp());
        }
    }
    Err(numerical("E1 continued fraction did not converge"))
}
