//! Derivatives of S, P, A² and φ with respect to E, ℓ and η, by finite
//! differences and by the oscillatory integral relations; the inequality
//! harness; complete-monotonicity probes; and the negative-energy formulas.
//!
//! Energy derivatives are always taken at fixed radius, through
//! ∂/∂E = (ρ/2E)∂/∂ρ − (η/2E)∂/∂η. The ρ-derivatives are analytic from
//! the Milne state, so only η and ℓ are ever differenced.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::coulomb::{amplitude_phase_raw, check_l, whittaker_w, Accumulate, AmplitudePhase, FarSeed, Milne, MILNE_N};
use crate::error::{invalid, numerical, Error, Result};
use crate::frames::{weights, EnergySign, WaveParams};
use crate::ode::Control;
use crate::quad;
use crate::special::dsigma_deta;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Quantity {
    S,
    P,
    A2,
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    E,
    L,
    Eta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivMethod {
    FiniteDifference,
    IntegralRelation,
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeResult {
    pub quantity: Quantity,
    pub param: Param,
    pub value: f64,
    pub method: DerivMethod,
    pub err: f64,
}

/// Finite-difference steps: h_η = `h_eta`·max(1, |η|), h_ℓ = `h_l`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FdConfig {
    pub h_eta: f64,
    pub h_l: f64,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { h_eta: 1e-2, h_l: 1e-2 }
    }
}

const QUANTITIES: [Quantity; 4] = [Quantity::S, Quantity::P, Quantity::A2, Quantity::Phi];

/// All twelve derivatives at one point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivativeSet {
    pub l: f64,
    pub eta: f64,
    pub rho: f64,
    pub energy: f64,
    pub base: AmplitudePhase,
    pub items: Vec<DerivativeResult>,
}

impl DerivativeSet {
    pub fn get(&self, q: Quantity, param: Param) -> DerivativeResult {
        *self.items.iter().find(|d| d.quantity == q && d.param == param).expect("all twelve derivatives present")
    }
}

fn values(ap: &AmplitudePhase) -> [f64; 4] {
    [ap.s, ap.p, ap.a2, ap.phi]
}

// Five-point central difference at h and h/2 with one Richardson step.
// `floor` is the absolute noise level of each component.
fn fd5<F>(f: F, x: f64, h: f64, floor: [f64; 4]) -> Result<([f64; 4], [f64; 4])>
where
    F: Fn(f64) -> Result<[f64; 4]>,
{
    let offs = [-2.0, -1.0, -0.5, 0.5, 1.0, 2.0];
    let ev: Vec<[f64; 4]> = offs.iter().map(|&o| f(x + o * h)).collect::<Result<_>>()?;
    let (m2, m1, mh, ph, p1, p2) = (ev[0], ev[1], ev[2], ev[3], ev[4], ev[5]);
    let mut val = [0.0; 4];
    let mut err = [0.0; 4];
    for i in 0..4 {
        let d1 = (-p2[i] + 8.0 * p1[i] - 8.0 * m1[i] + m2[i]) / (12.0 * h);
        let d2 = (-p1[i] + 8.0 * ph[i] - 8.0 * mh[i] + m1[i]) / (6.0 * h);
        val[i] = d2 + (d2 - d1) / 15.0;
        let big = ev.iter().map(|e| e[i].abs()).fold(0.0, f64::max);
        err[i] = 2.0 * (d2 - d1).abs() / 15.0 + 3.0 * (1e-12 * big + floor[i]) / h;
    }
    Ok((val, err))
}

// Small phases come from tan φ = F/G with relative accuracy; larger ones
// from the integrated phase, accurate to a fraction of the far radius.
fn noise_floor(rho: f64, phi: f64) -> [f64; 4] {
    let fphi = if phi.abs() < 0.5 { 1e-12 * phi.abs() } else { 1e-13 * rho.max(60.0) };
    [1e-13 * rho, 0.0, 0.0, fphi]
}

/// All twelve derivatives by finite differences in η and ℓ at fixed ρ,
/// with analytic ρ-derivatives feeding the energy chain rule.
pub fn fd_derivatives(p: &WaveParams, energy: f64, cfg: FdConfig) -> Result<DerivativeSet> {
    if p.energy_sign != EnergySign::Positive {
        return Err(invalid("finite-difference derivatives here are for positive energy"));
    }
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(invalid("energy must be positive and finite"));
    }
    fd_derivatives_raw(p.l, p.eta, p.rho, energy, cfg)
}

pub(crate) fn fd_derivatives_raw(l: f64, eta: f64, rho: f64, energy: f64, cfg: FdConfig) -> Result<DerivativeSet> {
    if !(cfg.h_eta > 0.0 && cfg.h_l > 0.0) {
        return Err(invalid("finite-difference steps must be positive"));
    }
    let base = amplitude_phase_raw(l, eta, rho)?;
    let floor = noise_floor(rho, base.phi);
    let he = cfg.h_eta * eta.abs().max(1.0);
    let (de, ee) = fd5(|x| Ok(values(&amplitude_phase_raw(l, x, rho)?)), eta, he, floor)?;
    let hl = cfg.h_l.min(0.2 * (l + 0.5));
    let (dl, el) = fd5(|x| Ok(values(&amplitude_phase_raw(x, eta, rho)?)), l, hl, floor)?;
    let dr = [base.ds_drho(rho), base.dp_drho(rho), base.da2_drho(), 1.0 / base.a2];
    let (wr, we) = weights(rho, eta, energy);
    let mut items = Vec::with_capacity(12);
    for (i, &q) in QUANTITIES.iter().enumerate() {
        let rel_r = 1e-11 * dr[i].abs() + floor[i];
        items.push(DerivativeResult {
            quantity: q,
            param: Param::E,
            value: wr * dr[i] + we * de[i],
            method: DerivMethod::FiniteDifference,
            err: wr.abs() * rel_r + we.abs() * ee[i],
        });
        items.push(DerivativeResult { quantity: q, param: Param::L, value: dl[i], method: DerivMethod::FiniteDifference, err: el[i] });
        items.push(DerivativeResult { quantity: q, param: Param::Eta, value: de[i], method: DerivMethod::FiniteDifference, err: ee[i] });
    }
    Ok(DerivativeSet { l, eta, rho, energy, base, items })
}

/// ∂L/∂E, ∂L/∂ℓ and ∂L/∂η (L = S + iP) from the oscillatory integral relations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralRelations {
    pub de: Complex64,
    pub dl: Complex64,
    pub deta: Complex64,
    /// Absolute error estimates for the three complex values.
    pub err: [f64; 3],
}

// ∫_R^∞ g e^{iΨ} dΨ by repeated integration by parts, given g and its first
// two ρ-derivatives and A², (A²)′ at R (dΨ/dρ = 2/A²).
fn by_parts_tail(psi_r: f64, w: f64, w1: f64, g: [f64; 3]) -> (Complex64, f64) {
    let g_psi = 0.5 * w * g[1];
    let g_psipsi = 0.5 * w * (0.5 * w1 * g[1] + 0.5 * w * g[2]);
    let i = Complex64::i();
    let v = Complex64::from_polar(1.0, psi_r) * (i * g[0] - g_psi - i * g_psipsi);
    let est = g_psipsi.abs() * (g_psipsi.abs() / g_psi.abs().max(1e-300)).min(1.0);
    (v, est)
}

// g = u·A²/2 for the three weights, with ρ-derivatives, from the far seed.
fn tail_weights(seed: &FarSeed, r: f64) -> [[f64; 3]; 3] {
    let [w, w1, w2, w3] = seed.w;
    let ge = [w * w * w1, 2.0 * w * w1 * w1 + w * w * w2, 2.0 * w1.powi(3) + 6.0 * w * w1 * w2 + w * w * w3];
    let pow = |n: f64| {
        let c = [0.5 * r.powf(-n), -0.5 * n * r.powf(-n - 1.0), 0.5 * n * (n + 1.0) * r.powf(-n - 2.0)];
        [
            w * w * c[0],
            2.0 * w * w1 * c[0] + w * w * c[1],
            2.0 * (w1 * w1 + w * w2) * c[0] + 4.0 * w * w1 * c[1] + w * w * c[2],
        ]
    };
    [ge, pow(2.0), pow(1.0)]
}

struct RawIntegrals {
    a2: f64,
    j: [Complex64; 3],
    tail_err: [f64; 3],
}

fn raw_integrals(l: f64, eta: f64, rho: f64, r_min: f64) -> Result<RawIntegrals> {
    let m = Milne::new(l, eta, r_min)?;
    let y = m.states(&[rho], Accumulate::All)?[0];
    let seed = m.seed;
    let psi_r = 2.0 * seed.phi;
    let g = tail_weights(&seed, m.r_far);
    let rot = Complex64::from_polar(1.0, -2.0 * y[2]);
    let mut j = [Complex64::new(0.0, 0.0); 3];
    let mut tail_err = [0.0; 3];
    for k in 0..3 {
        let (t, e) = by_parts_tail(psi_r, seed.w[0], seed.w[1], g[k]);
        let inner = -Complex64::new(y[4 + 2 * k], y[5 + 2 * k]);
        j[k] = rot * (inner + t);
        tail_err[k] = e;
    }
    Ok(RawIntegrals { a2: y[0].exp(), j, tail_err })
}

/// Integral-relation derivatives at positive energy; needs η ≥ 0.
pub fn integral_relations(p: &WaveParams, energy: f64) -> Result<IntegralRelations> {
    if p.energy_sign != EnergySign::Positive || !(energy > 0.0) {
        return Err(invalid("integral relations are for positive energy"));
    }
    if p.eta < 0.0 {
        return Err(Error::Unsupported("integral relations need a repulsive or neutral field".into()));
    }
    let (l, eta, rho) = (p.l, p.eta, p.rho);
    let r1 = (rho + 200.0).max(400.0);
    let a = raw_integrals(l, eta, rho, r1)?;
    let b = raw_integrals(l, eta, rho, 1.5 * r1)?;
    let i = Complex64::i();
    let w = a.a2;
    let make = |r: &RawIntegrals| {
        [
            i * rho / (2.0 * energy * r.a2) * (r.a2 * r.a2 + r.j[0]),
            -(2.0 * l + 1.0) * rho / r.a2 * r.j[1],
            -2.0 * rho / r.a2 * r.j[2],
        ]
    };
    let va = make(&a);
    let vb = make(&b);
    let scale = [rho / (2.0 * energy * w), (2.0 * l + 1.0) * rho / w, 2.0 * rho / w];
    let mut err = [0.0; 3];
    for k in 0..3 {
        err[k] = (va[k] - vb[k]).norm() + scale[k] * (a.tail_err[k] + 1e-11 * (1.0 + a.j[k].norm()));
    }
    Ok(IntegralRelations { de: va[0], dl: va[1], deta: va[2], err })
}

/// Leading large-ρ forms of the derivatives.
fn asymptotic_derivative(l: f64, eta: f64, rho: f64, energy: f64, q: Quantity, param: Param) -> Result<(f64, f64)> {
    let ll = l * (l + 1.0);
    let r = rho;
    let f = r / (2.0 * energy);
    let (v, last) = match (q, param) {
        (Quantity::S, Param::E) => (f * (eta / (r * r) + (4.0 * eta * eta + ll) / r.powi(3)), f * (4.0 * eta * eta + ll) / r.powi(3)),
        (Quantity::P, Param::E) => (f * (1.0 + eta / r + (3.0 * eta * eta + ll) / (2.0 * r * r)), f * (3.0 * eta * eta + ll) / (2.0 * r * r)),
        (Quantity::A2, Param::E) => (f * (-2.0 * eta / (r * r) - (6.0 * eta * eta + ll) / r.powi(3)), f * (6.0 * eta * eta + ll) / r.powi(3)),
        (Quantity::Phi, Param::E) => {
            let sig_e = -eta / (2.0 * energy) * dsigma_deta(l, eta)?;
            let t = (3.0 * eta * eta + ll) / (2.0 * r * r);
            (f * (1.0 + eta / r * (2.0 * r).ln() - eta / r - t) + sig_e, f * t)
        }
        (Quantity::S, Param::L) => (-(2.0 * l + 1.0) / (2.0 * r * r), (2.0 * l + 1.0) / (2.0 * r * r)),
        (Quantity::S, Param::Eta) => (-0.5 / r - 2.0 * eta / (r * r), 2.0 * eta.abs().max(1.0) / (r * r)),
        (Quantity::P, Param::L) => (-(2.0 * l + 1.0) / (2.0 * r), (2.0 * l + 1.0) / (2.0 * r)),
        (Quantity::P, Param::Eta) => (-1.0 - eta / r, eta.abs().max(1.0) / r),
        _ => return Err(Error::Unsupported(format!("no large-rho form for d{q:?}/d{param:?}"))),
    };
    // The first dropped term is one power of ρ smaller than the last kept one.
    Ok((v, last.abs() * (1.0 + eta.abs() + l) / r))
}

/// ∂S and ∂P with respect to E, ℓ or η at positive energy.
pub fn dl_dparam(p: &WaveParams, energy: f64, param: Param, method: DerivMethod) -> Result<(DerivativeResult, DerivativeResult)> {
    if p.energy_sign != EnergySign::Positive {
        return Err(invalid("dl_dparam is for positive energy; use ds_negative_energy below threshold"));
    }
    let mk = |q, value, err| DerivativeResult { quantity: q, param, value, method, err };
    match method {
        DerivMethod::FiniteDifference => {
            let d = fd_derivatives(p, energy, FdConfig::default())?;
            Ok((d.get(Quantity::S, param), d.get(Quantity::P, param)))
        }
        DerivMethod::IntegralRelation => {
            let r = integral_relations(p, energy)?;
            let (v, e) = match param {
                Param::E => (r.de, r.err[0]),
                Param::L => (r.dl, r.err[1]),
                Param::Eta => (r.deta, r.err[2]),
            };
            Ok((mk(Quantity::S, v.re, e), mk(Quantity::P, v.im, e)))
        }
        DerivMethod::Asymptotic => {
            let (s, es) = asymptotic_derivative(p.l, p.eta, p.rho, energy, Quantity::S, param)?;
            let (pp, ep) = asymptotic_derivative(p.l, p.eta, p.rho, energy, Quantity::P, param)?;
            Ok((mk(Quantity::S, s, es), mk(Quantity::P, pp, ep)))
        }
    }
}

/// Large-ρ derivative forms for any of the twelve (quantity, parameter) pairs that have one.
pub fn asymptotic_form(p: &WaveParams, energy: f64, q: Quantity, param: Param) -> Result<DerivativeResult> {
    let (value, err) = asymptotic_derivative(p.l, p.eta, p.rho, energy, q, param)?;
    Ok(DerivativeResult { quantity: q, param, value, method: DerivMethod::Asymptotic, err })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    /// Equality case at η = 0 where the inequality is not strict.
    BoundaryPass,
    Indeterminate,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityRecord {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// Signed distance from violation: positive means satisfied.
    pub margin: f64,
    pub err: f64,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsReport {
    pub l: f64,
    pub eta: f64,
    pub rho: f64,
    pub energy: f64,
    pub records: Vec<InequalityRecord>,
}

impl BoundsReport {
    pub fn count(&self, s: CheckStatus) -> usize {
        self.records.iter().filter(|r| r.status == s).count()
    }
}

pub fn classify(margin: f64, err: f64, boundary_ok: bool) -> CheckStatus {
    if margin > 3.0 * err {
        CheckStatus::Pass
    } else if boundary_ok && margin.abs() <= 3.0 * err {
        CheckStatus::BoundaryPass
    } else if margin < -3.0 * err {
        CheckStatus::Fail
    } else {
        CheckStatus::Indeterminate
    }
}

fn record(name: &str, lhs: f64, rhs: f64, err: f64, boundary_ok: bool) -> InequalityRecord {
    // "lhs < rhs"
    let margin = rhs - lhs;
    InequalityRecord { name: name.to_string(), lhs, rhs, margin, err, status: classify(margin, err, boundary_ok) }
}

/// Every sign and two-sided bound for S, P, A² and φ at one point.
pub fn bounds_check(p: &WaveParams, energy: f64) -> Result<BoundsReport> {
    bounds_check_with(p, energy, FdConfig::default())
}

pub fn bounds_check_with(p: &WaveParams, energy: f64, cfg: FdConfig) -> Result<BoundsReport> {
    let d = fd_derivatives(p, energy, cfg)?;
    let (l, rho, e) = (p.l, p.rho, energy);
    let b = d.base;
    let (s, pp) = (b.s, b.p);
    let bnd = p.eta == 0.0;
    let g = |q, k| d.get(q, k);
    let mut r = Vec::with_capacity(18);
    let sign = |r: &mut Vec<InequalityRecord>, name: &str, x: DerivativeResult, positive: bool| {
        if positive {
            r.push(record(name, 0.0, x.value, x.err, bnd));
        } else {
            r.push(record(name, x.value, 0.0, x.err, bnd));
        }
    };
    sign(&mut r, "dS/dE > 0", g(Quantity::S, Param::E), true);
    sign(&mut r, "dP/dE > 0", g(Quantity::P, Param::E), true);
    sign(&mut r, "dS/dl < 0", g(Quantity::S, Param::L), false);
    sign(&mut r, "dP/dl < 0", g(Quantity::P, Param::L), false);
    sign(&mut r, "dS/deta < 0", g(Quantity::S, Param::Eta), false);
    sign(&mut r, "dP/deta < 0", g(Quantity::P, Param::Eta), false);
    sign(&mut r, "dA2/dE < 0", g(Quantity::A2, Param::E), false);
    sign(&mut r, "dA2/dl > 0", g(Quantity::A2, Param::L), true);
    sign(&mut r, "dA2/deta > 0", g(Quantity::A2, Param::Eta), true);
    sign(&mut r, "dphi/dE > 0", g(Quantity::Phi, Param::E), true);
    sign(&mut r, "dphi/dl < 0", g(Quantity::Phi, Param::L), false);
    sign(&mut r, "dphi/deta < 0", g(Quantity::Phi, Param::Eta), false);
    let bound_err = |x: DerivativeResult, v: f64| x.err + 1e-10 * v.abs();
    let se = g(Quantity::S, Param::E);
    let hi = -rho * rho * s / (e * pp * pp);
    r.push(record("dS/dE < -rho^2 S/(E P^2)", se.value, hi, bound_err(se, hi), bnd));
    let pe = g(Quantity::P, Param::E);
    let lo = pp / (2.0 * e);
    r.push(record("dP/dE > P/(2E)", lo, pe.value, bound_err(pe, lo), bnd));
    let hi = rho * rho / (2.0 * e * pp);
    r.push(record("dP/dE < rho^2/(2E P)", pe.value, hi, bound_err(pe, hi), bnd));
    let sl = g(Quantity::S, Param::L);
    let lo = (2.0 * l + 1.0) / (pp * pp) * (s - 0.5);
    r.push(record("dS/dl > (2l+1)(S-1/2)/P^2", lo, sl.value, bound_err(sl, lo), bnd));
    let pl = g(Quantity::P, Param::L);
    let lo = -(2.0 * l + 1.0) / (2.0 * pp);
    r.push(record("dP/dl > -(2l+1)/(2P)", lo, pl.value, bound_err(pl, lo), bnd));
    let sh = g(Quantity::S, Param::Eta);
    let lo = 2.0 * rho / (pp * pp) * (s - 0.25);
    r.push(record("dS/deta > 2 rho (S-1/4)/P^2", lo, sh.value, bound_err(sh, lo), bnd));
    let ph = g(Quantity::P, Param::Eta);
    let lo = -rho / pp;
    r.push(record("dP/deta > -rho/P", lo, ph.value, bound_err(ph, lo), bnd));
    Ok(BoundsReport { l, eta: p.eta, rho, energy, records: r })
}

/// The repulsive verification grid.
pub fn default_grid() -> Vec<(f64, f64, f64)> {
    let mut g = Vec::new();
    for l in 0..4 {
        for eta in [0.1, 0.5, 1.0, 2.0, 5.0] {
            for rho in [0.2, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0] {
                g.push((l as f64, eta, rho));
            }
        }
    }
    g
}

/// Bounds reports for many points, evaluated in parallel and returned in input order.
pub fn sign_battery(points: &[(f64, f64, f64)], energy: f64, cfg: FdConfig) -> Vec<Result<BoundsReport>> {
    points
        .par_iter()
        .map(|&(l, eta, rho)| {
            let p = WaveParams::positive(l, eta, rho)?;
            bounds_check_with(&p, energy, cfg)
        })
        .collect()
}

/// ∂S/∂X below threshold from the W²-weighted integrals over [ρ, ∞).
pub fn ds_negative_energy(param: Param, l: f64, eta: f64, rho: f64, energy: f64) -> Result<f64> {
    if !(energy < 0.0 && energy.is_finite()) {
        return Err(invalid("negative-energy derivative needs E < 0"));
    }
    let w = whittaker_w(l, eta, rho)?;
    let t = w.tail_ratios;
    Ok(match param {
        Param::E => -rho * t[0] / energy,
        Param::L => -(2.0 * l + 1.0) * rho * t[2],
        Param::Eta => -2.0 * rho * t[1],
    })
}

/// The same derivative by differencing the Whittaker shift factor.
pub fn ds_negative_energy_fd(param: Param, l: f64, eta: f64, rho: f64, energy: f64, cfg: FdConfig) -> Result<DerivativeResult> {
    if !(energy < 0.0 && energy.is_finite()) {
        return Err(invalid("negative-energy derivative needs E < 0"));
    }
    check_l(l)?;
    let s_of = |l: f64, eta: f64| -> Result<[f64; 4]> { Ok([whittaker_w(l, eta, rho)?.s, 0.0, 0.0, 0.0]) };
    let floor = [1e-13 * rho.max(1.0), 0.0, 0.0, 0.0];
    let he = cfg.h_eta * eta.abs().max(1.0);
    let (value, err) = match param {
        Param::L => {
            let (v, e) = fd5(|x| s_of(x, eta), l, cfg.h_l.min(0.2 * (l + 0.5)), floor)?;
            (v[0], e[0])
        }
        Param::Eta => {
            let (v, e) = fd5(|x| s_of(l, x), eta, he, floor)?;
            (v[0], e[0])
        }
        Param::E => {
            let w = whittaker_w(l, eta, rho)?;
            let pw = w.s / rho;
            let q = 1.0 + 2.0 * eta / rho + l * (l + 1.0) / (rho * rho);
            let s_rho = pw + rho * (q - pw * pw);
            let (v, e) = fd5(|x| s_of(l, x), eta, he, floor)?;
            let (wr, we) = weights(rho, eta, energy);
            (wr * s_rho + we * v[0], wr.abs() * 1e-11 * s_rho.abs() + we.abs() * e[0])
        }
    };
    Ok(DerivativeResult { quantity: Quantity::S, param, value, method: DerivMethod::FiniteDifference, err })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmOrderReport {
    pub order: usize,
    /// Points where (−1)ⁿΔⁿf exceeds three times its rounding error.
    pub confirmed: usize,
    pub violations: usize,
    pub indeterminate: usize,
    /// Smallest signed margin divided by its error (negative on violation).
    pub worst_ratio: f64,
    /// Abscissa of the first violation, if any.
    pub first_violation: Option<f64>,
}

impl CmOrderReport {
    pub fn holds(&self) -> bool {
        self.violations == 0 && self.indeterminate == 0 && self.confirmed > 0
    }
}

/// Signs of the forward differences Δⁿf on a uniform grid, n = 1..=max_order.
/// A forward difference equals hⁿf⁽ⁿ⁾ at an interior point, so the sign test
/// carries no truncation error; only rounding plus `rel_noise` (relative
/// error of the samples) is budgeted.
pub fn cm_probe(x0: f64, step: f64, f: &[f64], max_order: usize, rel_noise: f64) -> Result<Vec<CmOrderReport>> {
    if !(step > 0.0) || f.len() < max_order + 2 || max_order == 0 || max_order > 4 {
        return Err(invalid("cm_probe needs a positive step, 1 <= max_order <= 4 and enough samples"));
    }
    if !(rel_noise >= 0.0) {
        return Err(invalid("rel_noise must be >= 0"));
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(invalid("cm_probe samples must be finite"));
    }
    let mut out = Vec::new();
    for n in 1..=max_order {
        let binom: Vec<f64> = (0..=n).map(|k| binomial(n, k) * if (n - k) % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let mut rep = CmOrderReport { order: n, confirmed: 0, violations: 0, indeterminate: 0, worst_ratio: f64::INFINITY, first_violation: None };
        let sgn = if n % 2 == 0 { 1.0 } else { -1.0 };
        for i in 0..f.len() - n {
            let mut d = 0.0;
            let mut mag = 0.0;
            for k in 0..=n {
                d += binom[k] * f[i + k];
                mag += (binom[k] * f[i + k]).abs();
            }
            let err = (4.0 * f64::EPSILON + rel_noise) * mag;
            let m = sgn * d;
            let ratio = if err > 0.0 { m / err } else if m > 0.0 { f64::INFINITY } else { -f64::INFINITY };
            rep.worst_ratio = rep.worst_ratio.min(ratio);
            match classify(m, err, false) {
                CheckStatus::Pass => rep.confirmed += 1,
                CheckStatus::Fail => {
                    rep.violations += 1;
                    rep.first_violation.get_or_insert(x0 + (i as f64 + 0.5 * n as f64) * step);
                }
                _ => rep.indeterminate += 1,
            }
        }
        out.push(rep);
    }
    Ok(out)
}

/// dⁿ(A²)/dρⁿ for n = 0..=4 from the Milne state, with an error estimate
/// for each (relative accuracy of the state times the term magnitudes).
pub fn a2_rho_derivatives(l: f64, eta: f64, rho: f64) -> Result<([f64; 5], [f64; 5])> {
    let ap = amplitude_phase_raw(l, eta, rho)?;
    let w = ap.a2;
    let (s, s1) = (ap.dln_a2, ap.d2ln_a2);
    let ll = l * (l + 1.0);
    let k1 = 2.0 * eta / (rho * rho) + 2.0 * ll / rho.powi(3);
    let k2 = -4.0 * eta / rho.powi(3) - 6.0 * ll / rho.powi(4);
    let e = 1.0 / (w * w);
    let s2 = -4.0 * s * e - 2.0 * k1 - s * s1;
    let s3 = -4.0 * s1 * e + 8.0 * s * s * e - 2.0 * k2 - s1 * s1 - s * s2;
    let t1 = [s];
    let t2 = [s1, s * s];
    let t3 = [s2, 3.0 * s * s1, s.powi(3)];
    let t4 = [s3, 4.0 * s * s2, 3.0 * s1 * s1, 6.0 * s * s * s1, s.powi(4)];
    let sum = |t: &[f64]| t.iter().sum::<f64>() * w;
    let mag = |t: &[f64]| t.iter().map(|x| x.abs()).sum::<f64>() * w;
    const REL: f64 = 1e-10;
    Ok((
        [w, sum(&t1), sum(&t2), sum(&t3), sum(&t4)],
        [REL * w, REL * mag(&t1), REL * mag(&t2), REL * mag(&t3), REL * mag(&t4)],
    ))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

/// ∫₀^{2πm} f(x) sin x dx for a positive decreasing f, after checking both
/// properties on a fine grid.
pub fn sine_lemma_check<F: Fn(f64) -> f64>(f: F, m: usize) -> Result<f64> {
    if m == 0 {
        return Err(invalid("need at least one period"));
    }
    let xmax = 2.0 * PI * m as f64;
    let n = 128 * m;
    let mut prev = f(0.0);
    if !(prev > 0.0) {
        return Err(invalid("f must be positive"));
    }
    for i in 1..=n {
        let v = f(xmax * i as f64 / n as f64);
        if !(v > 0.0) || v > prev {
            return Err(invalid("f must be positive and decreasing on the range"));
        }
        prev = v;
    }
    let mut total = 0.0;
    for k in 0..2 * m {
        let a = PI * k as f64;
        total += quad::integrate(|x| f(x) * x.sin(), a, a + PI, 1e-300, 1e-13, 100)?.value;
    }
    Ok(total)
}

/// The m-period partial sum ∫₀^{2πm} (−dA⁴/dψ) sin ψ dψ starting at ρ_a, and
/// the full integral 2E(A²/ρ)∂S/∂E it converges to (from the integral relation).
pub fn energy_integral_truncated(p: &WaveParams, m: usize) -> Result<(f64, f64)> {
    if p.energy_sign != EnergySign::Positive || p.eta < 0.0 {
        return Err(invalid("needs positive energy and eta >= 0"));
    }
    let (l, eta, rho_a) = (p.l, p.eta, p.rho);
    let mln = Milne::new(l, eta, (rho_a + 200.0).max(400.0))?;
    // Inward pass recording states; the crossing of φ = target is then refined.
    let mut track: Vec<(f64, [f64; MILNE_N])> = vec![(mln.r_far, mln.start())];
    let (_, yb) = mln.run_to(rho_a, Accumulate::All, |x, y| {
        track.push((x, *y));
        Control::Continue
    })?;
    let target = yb[2] + PI * m as f64;
    let k = track.iter().position(|(_, y)| y[2] <= target).ok_or_else(|| numerical("phase never reaches the requested number of periods"))?;
    if k == 0 {
        return Err(numerical("requested periods extend beyond the far radius"));
    }
    // f(ψ) = −dA⁴/dψ = −A⁶ s must be positive and decreasing in ψ over the window.
    let f_of = |y: &[f64; MILNE_N]| -(3.0 * y[0]).exp() * y[1];
    let mut prev = f64::INFINITY;
    for (_, y) in track[k..].iter().rev() {
        let v = f_of(y);
        if !(v > 0.0) || v > prev * (1.0 + 1e-12) {
            return Err(invalid("-dA^4/dpsi is not positive and decreasing on the window"));
        }
        prev = v;
    }
    let above = track[k - 1];
    let mut lo = track[k].0;
    let mut hi = above.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mln.advance(above.0, above.1, mid, Accumulate::All)?[2] > target {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    let ym = mln.advance(above.0, above.1, 0.5 * (lo + hi), Accumulate::All)?;
    // ∫_{ρa}^{ρm} u_E e^{2iφ} dρ, rotated by e^{−2iφa}.
    let rot = Complex64::from_polar(1.0, -2.0 * yb[2]);
    let jm = rot * Complex64::new(ym[4] - yb[4], ym[5] - yb[5]);
    let truncated = -jm.im;
    let full = integral_relations(p, 1.0)?;
    let a2 = yb[0].exp();
    Ok((truncated, 2.0 * a2 / rho_a * full.de.re))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LaneThomas {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// E[−(A²/ρ)∂S/∂E + 2∂φ/∂E] between ρ_a and ρ_b against ∫A² dρ.
pub fn lane_thomas_crosscheck(l: f64, eta: f64, rho_a: f64, rho_b: f64, energy: f64) -> Result<LaneThomas> {
    if !(rho_a > 0.0 && rho_b > rho_a) || !(energy > 0.0) || eta < 0.0 {
        return Err(invalid("needs 0 < rho_a < rho_b, E > 0 and eta >= 0"));
    }
    let cfg = FdConfig::default();
    let term = |rho: f64| -> Result<f64> {
        let d = fd_derivatives_raw(l, eta, rho, energy, cfg)?;
        let se = d.get(Quantity::S, Param::E).value;
        let pe = d.get(Quantity::Phi, Param::E).value;
        Ok(energy * (-(d.base.a2 / rho) * se + 2.0 * pe))
    };
    let lhs = term(rho_b)? - term(rho_a)?;
    let m = Milne::new(l, eta, rho_b)?;
    let ys = m.states(&[rho_b, rho_a], Accumulate::All)?;
    let rhs = ys[0][3] - ys[1][3];
    Ok(LaneThomas { lhs, rhs, residual: ((lhs - rhs) / rhs).abs() })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARAMS: [Param; 3] = [Param::E, Param::L, Param::Eta];

    fn wp(l: f64, eta: f64, rho: f64) -> WaveParams {
        WaveParams::positive(l, eta, rho).unwrap()
    }

    #[test]
    fn neutral_energy_derivatives() {
        let p = wp(0.0, 0.0, 1.7);
        let d = fd_derivatives(&p, 2.0, FdConfig::default()).unwrap();
        assert!(d.get(Quantity::S, Param::E).value.abs() < 1e-10);
        assert!((d.get(Quantity::P, Param::E).value - 1.7 / 4.0).abs() < 1e-10);
        let r = integral_relations(&p, 2.0).unwrap();
        assert!(r.de.re.abs() < 1e-12);
        assert!((r.de.im - 1.7 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn methods_agree() {
        for (l, eta, rho) in [(0.0, 1.0, 2.0), (2.0, 0.5, 5.0), (1.0, 2.0, 0.5)] {
            let p = wp(l, eta, rho);
            let fd = fd_derivatives(&p, 1.0, FdConfig::default()).unwrap();
            let ir = integral_relations(&p, 1.0).unwrap();
            let pairs = [
                (fd.get(Quantity::S, Param::E), ir.de.re, ir.err[0]),
                (fd.get(Quantity::P, Param::E), ir.de.im, ir.err[0]),
                (fd.get(Quantity::S, Param::L), ir.dl.re, ir.err[1]),
                (fd.get(Quantity::P, Param::L), ir.dl.im, ir.err[1]),
                (fd.get(Quantity::S, Param::Eta), ir.deta.re, ir.err[2]),
                (fd.get(Quantity::P, Param::Eta), ir.deta.im, ir.err[2]),
            ];
            for (f, v, e) in pairs {
                assert!((f.value - v).abs() <= 3.0 * (f.err + e) + 1e-9 * v.abs(), "{l} {eta} {rho} {:?}/{:?}: fd {} ({}) ir {} ({})", f.quantity, f.param, f.value, f.err, v, e);
            }
        }
    }

    #[test]
    fn bounds_at_reference_point() {
        let r = bounds_check(&wp(0.0, 1.0, 2.0), 1.0).unwrap();
        for rec in &r.records {
            assert_eq!(rec.status, CheckStatus::Pass, "{rec:?}");
        }
        assert_eq!(r.records.len(), 19);
    }

    #[test]
    fn neutral_bounds_collapse() {
        let r = bounds_check(&wp(0.0, 0.0, 2.0), 1.0).unwrap();
        let lo = r.records.iter().find(|x| x.name == "dP/dE > P/(2E)").unwrap();
        let hi = r.records.iter().find(|x| x.name == "dP/dE < rho^2/(2E P)").unwrap();
        assert_eq!(lo.status, CheckStatus::BoundaryPass);
        assert_eq!(hi.status, CheckStatus::BoundaryPass);
    }

    #[test]
    fn attractive_energy_slope_fails() {
        let r = bounds_check(&wp(0.0, -1.0, 0.5), 1.0).unwrap();
        let rec = r.records.iter().find(|x| x.name == "dS/dE > 0").unwrap();
        assert_eq!(rec.status, CheckStatus::Fail);
    }

    #[test]
    fn negative_energy_neutral() {
        let rho = 1.3;
        let v = ds_negative_energy(Param::E, 0.0, 0.0, rho, -2.0).unwrap();
        assert!((v - rho / 4.0).abs() < 1e-11);
    }

    #[test]
    fn negative_energy_integral_vs_fd() {
        for eta in [-1.0, 0.0, 1.0] {
            for param in PARAMS {
                let i = ds_negative_energy(param, 1.0, eta, 1.0, -1.0).unwrap();
                let f = ds_negative_energy_fd(param, 1.0, eta, 1.0, -1.0, FdConfig::default()).unwrap();
                assert!((i - f.value).abs() < 1e-6 * i.abs(), "{eta} {param:?}: {i} vs {}", f.value);
            }
        }
    }

    #[test]
    fn cm_probe_exponential() {
        let h = 0.05;
        let f: Vec<f64> = (0..200).map(|i| (-(i as f64) * h).exp()).collect();
        let r = cm_probe(0.0, h, &f, 4, 0.0).unwrap();
        assert!(r.iter().all(|o| o.holds()), "{r:?}");
        let g: Vec<f64> = (0..200).map(|i| (i as f64 * h).sin() + 2.0).collect();
        let r = cm_probe(0.0, h, &g, 2, 0.0).unwrap();
        assert!(r.iter().any(|o| o.violations > 0));
    }

    #[test]
    fn a2_derivatives_neutral_p_wave() {
        // A² = 1 + ρ⁻²
        let rho = 1.5f64;
        let (d, e) = a2_rho_derivatives(1.0, 0.0, rho).unwrap();
        let want = [1.0 + rho.powi(-2), -2.0 * rho.powi(-3), 6.0 * rho.powi(-4), -24.0 * rho.powi(-5), 120.0 * rho.powi(-6)];
        for n in 0..5 {
            assert!((d[n] - want[n]).abs() < 1e-9 * want[n].abs() && e[n] < 1e-8 * want[n].abs(), "{n}: {} {}", d[n], want[n]);
        }
    }

    #[test]
    fn sine_lemma_examples() {
        let v = sine_lemma_check(|x| 1.0 / (1.0 + x), 3).unwrap();
        let r = quad::integrate(|x: f64| x.sin() / (1.0 + x), 0.0, 6.0 * PI, 1e-300, 1e-13, 400).unwrap().value;
        assert!(v > 0.0 && (v - r).abs() < 1e-12);
        // ∫ e^{−x/10} sin x = [e^{−x/10}(−sin x/10 − cos x)]/(1 + 1/100)
        let v = sine_lemma_check(|x| (-x / 10.0).exp(), 5).unwrap();
        let x1 = 10.0 * PI;
        let exact = ((-x1 / 10.0).exp() * (-(x1.sin()) / 10.0 - x1.cos()) + 1.0) / 1.01;
        assert!((v - exact).abs() < 1e-12);
        assert!(sine_lemma_check(|x| 1.0 + x, 1).is_err());
    }

    #[test]
    fn truncated_energy_integral_converges() {
        let p = wp(0.0, 1.0, 1.0);
        let (t5, full) = energy_integral_truncated(&p, 5).unwrap();
        let (t20, _) = energy_integral_truncated(&p, 20).unwrap();
        assert!(t5 > 0.0 && t20 > 0.0 && full > 0.0);
        assert!((t20 - full).abs() < (t5 - full).abs());
    }

    #[test]
    fn lane_thomas_neutral_and_charged() {
        let r = lane_thomas_crosscheck(0.0, 0.0, 1.0, 4.0, 1.0).unwrap();
        assert!((r.rhs - 3.0).abs() < 1e-10 && r.residual < 1e-9);
        let r = lane_thomas_crosscheck(0.0, 1.0, 2.0, 10.0, 1.0).unwrap();
        assert!(r.residual < 1e-6, "{r:?}");
    }
}
