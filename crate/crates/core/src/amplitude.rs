//! Squared amplitude A² = F² + G² from the Nicholson-type Laplace integral
//! and from its large-ρ asymptotic series.
//!
//! The integrand is e^{−2ρz} Q(z) with
//! Q(z) = exp(2η·atan z) (1+z²)^ℓ F(z²/(1+z²)). Near the origin F comes from
//! its power series; beyond z = 1/2 the logarithm of F is carried by a
//! Riccati equation in z, and the Laplace integrals ride along as extra
//! components of the same ODE.

use serde::Serialize;

use crate::error::{invalid, numerical, Error, Result};
use crate::frames::WaveParams;
use crate::ode::{Control, Dop853};
use crate::quad;
use crate::special::hyper_f_with_eta_derivative;

const Z_SPLIT: f64 = 0.5;
const TAIL_TOL: f64 = 1e-17;

/// Q(z) and its derivatives in z and η.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QValue {
    pub q: f64,
    pub dq_dz: f64,
    pub dq_deta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NicholsonForm {
    Direct,
    ByParts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NicholsonResult {
    pub a2: f64,
    pub abs_error_estimate: f64,
    /// Upper z cutoff where the remaining tail dropped below 1e-17 of the result.
    pub z_truncation: f64,
    pub nodes_used: usize,
    /// Set for attractive fields, where A² is not completely monotonic.
    pub no_cm_guarantee: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NicholsonDerivative {
    pub value: f64,
    pub abs_error_estimate: f64,
}

// Log-space pieces of Q at small z from the hypergeometric series.
struct SmallZ {
    ln_q: f64,
    dlnq_dz: f64,
    dlnq_deta: f64,
    // y = ln F, p = y', w = ∂y/∂η, v = w'
    y: f64,
    p: f64,
    w: f64,
    v: f64,
}

fn small_z(z: f64, l: f64, eta: f64) -> Result<SmallZ> {
    let z2 = z * z;
    let t = z2 / (1.0 + z2);
    let dt = 2.0 * z / ((1.0 + z2) * (1.0 + z2));
    let (f, ft, fe, fte) = hyper_f_with_eta_derivative(t, l, eta)?;
    let y = f.ln();
    let p = ft / f * dt;
    let w = fe / f;
    let v = (fte / f - ft * fe / (f * f)) * dt;
    let at = z.atan();
    Ok(SmallZ {
        ln_q: 2.0 * eta * at + l * z2.ln_1p() + y,
        dlnq_dz: 2.0 * (eta + l * z) / (1.0 + z2) + p,
        dlnq_deta: 2.0 * at + w,
        y,
        p,
        w,
        v,
    })
}

fn check_lz(l: f64, eta: f64) -> Result<()> {
    if !(l >= 0.0 && l.is_finite()) {
        return Err(invalid(format!("l must be >= 0, got {l}")));
    }
    if !eta.is_finite() {
        return Err(invalid("eta must be finite"));
    }
    Ok(())
}

// Riccati system in z for the state [y, p, w, v] plus `extra` accumulators.
fn riccati(z: f64, s: &[f64], l: f64, eta: f64) -> [f64; 4] {
    let z2 = z * z;
    let one = 1.0 + z2;
    let c = (1.0 + (4.0 * l + 3.0) * z2) / (z * one);
    let k = 4.0 * (l * l + eta * eta) / (one * one);
    let (p, v) = (s[1], s[3]);
    [p, k - c * p - p * p, v, 8.0 * eta / (one * one) - c * v - 2.0 * p * v]
}

fn ln_q_parts(z: f64, s: &[f64], l: f64, eta: f64) -> (f64, f64, f64) {
    let z2 = z * z;
    let at = z.atan();
    (
        2.0 * eta * at + l * z2.ln_1p() + s[0],
        2.0 * (eta + l * z) / (1.0 + z2) + s[1],
        2.0 * at + s[2],
    )
}

fn overflow(what: &str) -> Error {
    Error::Range(format!("{what} overflows"))
}

/// Q(z) with dQ/dz and ∂Q/∂η.
pub fn q_of_z(z: f64, l: f64, eta: f64) -> Result<QValue> {
    check_lz(l, eta)?;
    if !(z >= 0.0 && z.is_finite()) {
        return Err(invalid(format!("z must be >= 0, got {z}")));
    }
    let (ln_q, dz, de) = if z <= Z_SPLIT {
        let s = small_z(z, l, eta)?;
        (s.ln_q, s.dlnq_dz, s.dlnq_deta)
    } else {
        let s0 = small_z(Z_SPLIT, l, eta)?;
        let o = Dop853::with_tol(1e-13, 1e-15).integrate(
            |zz, s: &[f64; 4]| riccati(zz, s, l, eta),
            Z_SPLIT,
            [s0.y, s0.p, s0.w, s0.v],
            z,
            None,
            |_, _| Control::Continue,
        )?;
        ln_q_parts(z, &o.y, l, eta)
    };
    let q = ln_q.exp();
    if !q.is_finite() {
        return Err(overflow("Q(z)"));
    }
    Ok(QValue { q, dq_dz: q * dz, dq_deta: q * de })
}

/// All three Laplace integrals from one pass.
#[derive(Debug, Clone, Copy)]
struct Laplace {
    direct: f64,
    by_parts: f64,
    deta: f64,
    quad_err: f64,
    z_end: f64,
    nodes: usize,
}

fn laplace(l: f64, eta: f64, rho: f64) -> Result<Laplace> {
    check_lz(l, eta)?;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(invalid(format!("rho must be positive, got {rho}")));
    }
    let two_rho = 2.0 * rho;
    let q_small = |z: f64| -> (f64, f64, f64) {
        match small_z(z, l, eta) {
            Ok(s) => {
                let e = (s.ln_q - two_rho * z).exp();
                (two_rho * e, e * s.dlnq_dz, two_rho * e * s.dlnq_deta)
            }
            Err(_) => (f64::NAN, f64::NAN, f64::NAN),
        }
    };
    let zs = Z_SPLIT;
    let g1 = quad::integrate(|z| q_small(z).0, 0.0, zs, 0.0, 1e-13, 200)?;
    let g2 = quad::integrate(|z| q_small(z).1, 0.0, zs, 0.0, 1e-13, 200)?;
    let g3 = quad::integrate(|z| q_small(z).2, 0.0, zs, 0.0, 1e-13, 200)?;
    let mut nodes = g1.evals + g2.evals + g3.evals;
    let quad_err = g1.abs_err + g2.abs_err + 2.0 * g3.abs_err;

    let s0 = small_z(zs, l, eta)?;
    let tail_small = |ln_q: f64, dz: f64, de: f64, z: f64, acc: [f64; 3]| -> Option<[f64; 3]> {
        let decay = two_rho - dz;
        if decay < 0.5 * two_rho {
            return None;
        }
        let e = (ln_q - two_rho * z).exp();
        let t = [two_rho * e / decay, e * dz / decay, two_rho * e * de.abs() / decay];
        let ok = t[0] <= TAIL_TOL * acc[0].abs()
            && t[1] <= TAIL_TOL * acc[1].abs().max(acc[0].abs())
            && t[2] <= TAIL_TOL * acc[2].abs().max(1e-300);
        if ok {
            Some(t)
        } else {
            None
        }
    };
    let acc0 = [g1.value, 1.0 + g2.value, g3.value];
    if let Some(t) = tail_small(s0.ln_q, s0.dlnq_dz, s0.dlnq_deta, zs, acc0) {
        let de_sign = if s0.dlnq_deta >= 0.0 { 1.0 } else { -1.0 };
        return Ok(Laplace {
            direct: acc0[0] + t[0],
            by_parts: acc0[1] + t[1],
            deta: acc0[2] + de_sign * t[2],
            quad_err,
            z_end: zs,
            nodes,
        });
    }

    let rhs = |z: f64, s: &[f64; 7]| -> [f64; 7] {
        let r = riccati(z, s, l, eta);
        let (ln_q, dz, de) = ln_q_parts(z, s, l, eta);
        let e = (ln_q - two_rho * z).exp();
        [r[0], r[1], r[2], r[3], two_rho * e, e * dz, two_rho * e * de]
    };
    let init = [s0.y, s0.p, s0.w, s0.v, acc0[0], acc0[1], acc0[2]];
    let mut tail = [0.0; 3];
    let mut z_end = zs;
    let mut integ = Dop853::with_tol(1e-13, 1e-15);
    integ.max_steps = 1_000_000;
    let o = integ.integrate(rhs, zs, init, 1e12, None, |z, s| {
        let (ln_q, dz, de) = ln_q_parts(z, s, l, eta);
        if let Some(t) = tail_small(ln_q, dz, de, z, [s[4], s[5], s[6]]) {
            tail = [t[0], t[1], if de >= 0.0 { t[2] } else { -t[2] }];
            z_end = z;
            return Control::Stop;
        }
        Control::Continue
    })?;
    nodes += o.stats.evals;
    if !o.stopped {
        return Err(numerical("Nicholson integrand tail never became negligible"));
    }
    let y = o.y;
    if !(y[4].is_finite() && y[5].is_finite() && y[6].is_finite()) {
        return Err(overflow("Nicholson integral"));
    }
    Ok(Laplace { direct: y[4] + tail[0], by_parts: y[5] + tail[1], deta: y[6] + tail[2], quad_err, z_end, nodes })
}

fn nicholson_error(lp: &Laplace) -> f64 {
    let scale = lp.direct.abs().max(lp.by_parts.abs());
    (lp.direct - lp.by_parts).abs() + lp.quad_err + 1e-13 * scale
}

/// A² by the Nicholson integral in the chosen form. The error estimate is the
/// disagreement between the two forms plus quadrature and ODE tolerances.
pub fn a2_nicholson(p: &WaveParams, form: NicholsonForm) -> Result<NicholsonResult> {
    let lp = laplace(p.l, p.eta, p.rho)?;
    let a2 = match form {
        NicholsonForm::Direct => lp.direct,
        NicholsonForm::ByParts => lp.by_parts,
    };
    Ok(NicholsonResult {
        a2,
        abs_error_estimate: nicholson_error(&lp),
        z_truncation: lp.z_end,
        nodes_used: lp.nodes,
        no_cm_guarantee: p.eta < 0.0,
    })
}

/// ∂A²/∂η by differentiating the Nicholson integrand.
pub fn da2_deta_nicholson(p: &WaveParams) -> Result<NicholsonDerivative> {
    let lp = laplace(p.l, p.eta, p.rho)?;
    let rel = nicholson_error(&lp) / lp.direct.abs();
    Ok(NicholsonDerivative { value: lp.deta, abs_error_estimate: rel * lp.deta.abs() + lp.quad_err })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticCoeffs {
    pub a: Vec<f64>,
    pub l: f64,
    pub eta: f64,
}

/// Coefficients of A² ~ Σ a_k ρ^{−k}, k = 0..=K.
pub fn asymptotic_coeffs(l: f64, eta: f64, k_max: usize) -> AsymptoticCoeffs {
    let mut a = Vec::with_capacity(k_max + 1);
    a.push(1.0);
    if k_max >= 1 {
        a.push(eta);
    }
    for k in 1..k_max {
        let kf = k as f64;
        let next = eta * (2.0 * kf + 1.0) / (kf + 1.0) * a[k]
            + kf * (2.0 * l + kf + 1.0) * (2.0 * l - kf + 1.0) / (4.0 * (kf + 1.0)) * a[k - 1];
        a.push(next);
    }
    AsymptoticCoeffs { a, l, eta }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Truncation {
    Fixed(usize),
    Optimal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticResult {
    pub a2: f64,
    /// dA²/dρ from the same truncation.
    pub da2_drho: f64,
    /// Magnitude of the first two omitted terms (0 when the series terminated).
    pub err: f64,
    pub terms_used: usize,
    pub terminated: bool,
}

const ASYM_KMAX: usize = 400;

/// Large-ρ series for A². With `Optimal` the sum stops before the smallest
/// pair of adjacent terms. If `tol` is given and the error estimate exceeds
/// `tol·A²`, an accuracy error carrying the best value is returned.
pub fn a2_asymptotic(p: &WaveParams, trunc: Truncation, tol: Option<f64>) -> Result<AsymptoticResult> {
    let r = asymptotic_sum(p.l, p.eta, p.rho, trunc);
    if let Some(tol) = tol {
        if r.err > tol * r.a2.abs() {
            return Err(Error::Accuracy { value: r.a2, estimate: r.err, target: tol * r.a2.abs() });
        }
    }
    Ok(r)
}

pub(crate) fn asymptotic_sum(l: f64, eta: f64, rho: f64, trunc: Truncation) -> AsymptoticResult {
    let k_max = match trunc {
        Truncation::Fixed(k) => k,
        Truncation::Optimal => ASYM_KMAX,
    };
    let c = asymptotic_coeffs(l, eta, k_max + 2);
    let x = 1.0 / rho;
    let mut terms = Vec::with_capacity(k_max + 2);
    let mut xp = 1.0;
    for &ak in &c.a {
        terms.push(ak * xp);
        xp *= x;
    }
    // Exact termination: two consecutive zero coefficients.
    let mut stop = None;
    for k in 1..c.a.len() {
        if c.a[k] == 0.0 && c.a[k - 1] == 0.0 {
            stop = Some(k - 1);
            break;
        }
    }
    let (m, terminated) = match (trunc, stop) {
        (Truncation::Fixed(k), Some(s)) if s <= k + 1 => (s, true),
        (Truncation::Fixed(k), _) => (k + 1, false),
        (Truncation::Optimal, Some(s)) => (s, true),
        (Truncation::Optimal, None) => {
            // The terms oscillate in pairs and single terms can dip far below
            // the true error, so truncation is judged on adjacent pairs.
            let mut best = 1;
            let mut best_mag = f64::INFINITY;
            for k in 1..terms.len() - 1 {
                let mag = terms[k].abs() + terms[k + 1].abs();
                if !mag.is_finite() {
                    break;
                }
                if mag < best_mag {
                    best_mag = mag;
                    best = k;
                } else if mag > 1e6 * best_mag {
                    break;
                }
            }
            (best, false)
        }
    };
    let mut sum = 0.0;
    let mut dsum = 0.0;
    for (k, t) in terms.iter().enumerate().take(m) {
        sum += t;
        dsum -= k as f64 * t * x;
    }
    let err = if terminated { 0.0 } else { terms.get(m).map_or(0.0, |t| t.abs()) + terms.get(m + 1).map_or(0.0, |t| t.abs()) };
    AsymptoticResult { a2: sum, da2_drho: dsum, err, terms_used: m, terminated }
}

/// Closed form for η = 0 and integer ℓ: the terminating ₃F₀(−ℓ, ℓ+1, ½; −ρ⁻²).
pub fn a2_neutral(l: u32, rho: f64) -> f64 {
    let lf = l as f64;
    let x = -1.0 / (rho * rho);
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 0..l {
        let kf = k as f64;
        term *= (-lf + kf) * (lf + 1.0 + kf) * (0.5 + kf) / (kf + 1.0) * x;
        sum += term;
    }
    sum
}

/// Uniformly spaced samples of a function of ρ.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    pub rho0: f64,
    pub step: f64,
    pub values: Vec<f64>,
}

/// Maximum residual of the Appell operator
/// w‴ + 4[1 − 2η/ρ − ℓ(ℓ+1)/ρ²]w′ + 2[2η/ρ² + 2ℓ(ℓ+1)/ρ³]w
/// over the interior points, each divided by the sum of the magnitudes of the
/// three terms so the figure is scale free. Derivatives come from 7-point
/// central stencils.
pub fn appell_residual(w: &Samples, l: f64, eta: f64) -> Result<f64> {
    let n = w.values.len();
    if n < 7 || !(w.step > 0.0) {
        return Err(invalid("Appell residual needs at least 7 uniformly spaced samples"));
    }
    let h = w.step;
    let ll = l * (l + 1.0);
    let v = &w.values;
    let mut worst: f64 = 0.0;
    for i in 3..n - 3 {
        let rho = w.rho0 + i as f64 * h;
        let d1 = (-v[i - 3] + 9.0 * v[i - 2] - 45.0 * v[i - 1] + 45.0 * v[i + 1] - 9.0 * v[i + 2] + v[i + 3]) / (60.0 * h);
        let d3 = (v[i - 3] - 8.0 * v[i - 2] + 13.0 * v[i - 1] - 13.0 * v[i + 1] + 8.0 * v[i + 2] - v[i + 3]) / (8.0 * h * h * h);
        let t1 = 4.0 * (1.0 - 2.0 * eta / rho - ll / (rho * rho)) * d1;
        let t2 = 2.0 * (2.0 * eta / (rho * rho) + 2.0 * ll / rho.powi(3)) * v[i];
        let scale = d3.abs() + t1.abs() + t2.abs();
        if scale > 0.0 {
            worst = worst.max((d3 + t1 + t2).abs() / scale);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wp(l: f64, eta: f64, rho: f64) -> WaveParams {
        WaveParams::positive(l, eta, rho).unwrap()
    }

    #[test]
    fn q_examples() {
        for (l, eta) in [(0.0, 0.0), (1.0, 2.0), (2.5, -1.0)] {
            assert!((q_of_z(0.0, l, eta).unwrap().q - 1.0).abs() < 1e-15);
        }
        for z in [0.1, 0.5, 1.0, 3.0, 20.0] {
            assert!((q_of_z(z, 0.0, 0.0).unwrap().q - 1.0).abs() < 1e-12);
            let q = q_of_z(z, 1.0, 0.0).unwrap();
            assert!((q.q - (1.0 + 2.0 * z * z)).abs() < 1e-11 * q.q, "z {z}");
            assert!((q.dq_dz - 4.0 * z).abs() < 1e-10 * q.dq_dz);
        }
    }

    #[test]
    fn q_ode_matches_series_across_split() {
        // t = 0.39 at z = 0.8 is still well inside the series' disc.
        let (l, eta) = (1.7, 0.9);
        let z: f64 = 0.8;
        let t = z * z / (1.0 + z * z);
        let f = crate::special::hyper_f_series(t, l, eta).unwrap().value;
        let exact = (2.0 * eta * z.atan()).exp() * (1.0 + z * z).powf(l) * f;
        let q = q_of_z(z, l, eta).unwrap();
        assert!((q.q - exact).abs() < 1e-12 * exact);
    }

    #[test]
    fn neutral_values() {
        for rho in [0.3, 1.0, 4.0, 40.0] {
            let r = a2_nicholson(&wp(0.0, 0.0, rho), NicholsonForm::Direct).unwrap();
            assert!((r.a2 - 1.0).abs() < 1e-12, "rho {rho}: {}", r.a2);
            let exact = 1.0 + 1.0 / (rho * rho);
            for form in [NicholsonForm::Direct, NicholsonForm::ByParts] {
                let r = a2_nicholson(&wp(1.0, 0.0, rho), form).unwrap();
                assert!((r.a2 - exact).abs() < 1e-11 * exact, "rho {rho} {form:?}: {}", r.a2);
            }
        }
    }

    #[test]
    fn forms_agree() {
        for (l, eta, rho) in [(0.0, 1.0, 5.0), (2.0, 1.0, 1.0), (3.0, 5.0, 0.2), (1.0, 0.5, 30.0), (0.0, -1.0, 1.0)] {
            let d = a2_nicholson(&wp(l, eta, rho), NicholsonForm::Direct).unwrap();
            let b = a2_nicholson(&wp(l, eta, rho), NicholsonForm::ByParts).unwrap();
            assert!((d.a2 - b.a2).abs() <= d.abs_error_estimate);
            assert!(d.abs_error_estimate < 1e-10 * d.a2, "{l} {eta} {rho}: {}", d.abs_error_estimate / d.a2);
            assert_eq!(d.no_cm_guarantee, eta < 0.0);
        }
    }

    #[test]
    fn eta_derivative() {
        let p = wp(0.0, 1.0, 3.0);
        let d = da2_deta_nicholson(&p).unwrap().value;
        let h = 1e-4;
        let up = a2_nicholson(&wp(0.0, 1.0 + h, 3.0), NicholsonForm::Direct).unwrap().a2;
        let dn = a2_nicholson(&wp(0.0, 1.0 - h, 3.0), NicholsonForm::Direct).unwrap().a2;
        assert!((d - (up - dn) / (2.0 * h)).abs() < 1e-7 * d.abs());
        let far = da2_deta_nicholson(&wp(0.0, 1e-6, 500.0)).unwrap().value;
        assert!((far * 500.0 - 1.0).abs() < 1e-2);
    }

    #[test]
    fn coefficients() {
        let c = asymptotic_coeffs(1.3, 0.7, 6);
        assert_eq!(c.a[0], 1.0);
        assert_eq!(c.a[1], 0.7);
        let ll = 1.3 * 2.3;
        assert!((c.a[2] - (3.0 * 0.49 + ll) / 2.0).abs() < 1e-15);
        let e: f64 = 0.7;
        assert!((c.a[3] - (5.0 * e.powi(3) + 3.0 * e * ll - e) / 2.0).abs() < 1e-14);
        let n = asymptotic_coeffs(1.0, 0.0, 10);
        assert_eq!(n.a[2], 1.0);
        assert!(n.a.iter().skip(3).all(|&a| a == 0.0));
        let odd = asymptotic_coeffs(2.5, 0.0, 9);
        assert!(odd.a.iter().skip(1).step_by(2).all(|&a| a == 0.0));
    }

    #[test]
    fn asymptotic_examples() {
        let r = a2_asymptotic(&wp(0.0, 0.0, 3.0), Truncation::Optimal, None).unwrap();
        assert_eq!(r.a2, 1.0);
        assert!(r.terminated);
        let r = a2_asymptotic(&wp(1.0, 0.0, 2.0), Truncation::Optimal, None).unwrap();
        assert_eq!(r.a2, 1.25);
        assert_eq!(r.err, 0.0);
        let r = a2_asymptotic(&wp(0.0, 1.0, 20.0), Truncation::Optimal, None).unwrap();
        let n = a2_nicholson(&wp(0.0, 1.0, 20.0), NicholsonForm::Direct).unwrap();
        assert!((r.a2 - n.a2).abs() <= r.err + n.abs_error_estimate);
        assert!(a2_asymptotic(&wp(2.0, 3.0, 1.0), Truncation::Optimal, Some(1e-12)).is_err());
    }

    #[test]
    fn neutral_closed_forms() {
        for rho in [0.5, 2.0, 9.0] {
            assert_eq!(a2_neutral(0, rho), 1.0);
            assert!((a2_neutral(1, rho) - (1.0 + 1.0 / (rho * rho))).abs() < 1e-15);
            // ℓ = 2: 1 + 3/ρ² + 9/ρ⁴
            let r2 = rho * rho;
            assert!((a2_neutral(2, rho) - (1.0 + 3.0 / r2 + 9.0 / (r2 * r2))).abs() < 1e-14 * a2_neutral(2, rho));
            let s = asymptotic_sum(2.0, 0.0, rho, Truncation::Optimal);
            assert!((s.a2 - a2_neutral(2, rho)).abs() < 1e-14 * s.a2);
        }
    }

    #[test]
    fn appell_on_closed_forms() {
        let h = 1e-3;
        let mk = |f: &dyn Fn(f64) -> f64| Samples { rho0: 1.0, step: h, values: (0..=2000).map(|i| f(1.0 + i as f64 * h)).collect() };
        assert_eq!(appell_residual(&mk(&|_| 1.0), 0.0, 0.0).unwrap(), 0.0);
        let r = appell_residual(&mk(&|r| 1.0 + 1.0 / (r * r)), 1.0, 0.0).unwrap();
        assert!(r < 1e-6, "{r}");
        let short = Samples { rho0: 1.0, step: h, values: vec![1.0; 5] };
        assert!(appell_residual(&short, 0.0, 0.0).is_err());
    }
}
