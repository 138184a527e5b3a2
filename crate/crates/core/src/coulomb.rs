//! Coulomb functions at positive energy in amplitude-phase form, the
//! decaying Whittaker solution at negative energy, and the zero-energy
//! shift factor.
//!
//! Positive energy uses two passes. The amplitude A² and phase φ come from
//! the Milne equation integrated inward from a radius where the large-ρ
//! series is accurate to roundoff; that direction is stable because any
//! admixture decays under the barrier. F is integrated outward from its power
//! series, and G follows from F, F′ and the logarithmic derivative of A.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::Serialize;

use crate::amplitude::{asymptotic_coeffs, asymptotic_sum, Truncation};
use crate::error::{invalid, numerical, Error, Result};
use crate::frames::{to_wave_params, EnergySign, PhysicalChannel, WaveParams, MIN_ENERGY};
use crate::ode::{Control, Dop853};
use crate::quad;
use crate::special::{bessel_k_scaled, coulomb_phase_sigma, ln_gamow_c};

const SERIES_TOL: f64 = 1e-15;
const FAR_CAP: f64 = 1e9;
const SMALL_PHASE: f64 = 1.0;
const PHASE_TOL: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoulombMethod {
    /// Power series for F with an inward Milne pass for A² and φ.
    Series,
    /// Outward ODE for F with an inward Milne pass for A² and φ.
    Ode,
    /// Large-ρ series only.
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CoulombEval {
    pub f: f64,
    pub fp: f64,
    pub g: f64,
    pub gp: f64,
    pub a2: f64,
    /// Continuous phase with F = A sin φ, G = A cos φ and φ → 0 as ρ → 0.
    pub phi: f64,
    pub theta: f64,
    pub s: f64,
    pub p: f64,
    pub method: CoulombMethod,
    /// Deviation of the Wronskian from −1 plus integrator tolerance.
    pub err: f64,
    pub no_cm_guarantee: bool,
}

impl CoulombEval {
    pub fn wronskian(&self) -> f64 {
        self.f * self.gp - self.fp * self.g
    }
}

/// A², its logarithmic ρ-derivatives and φ at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AmplitudePhase {
    pub a2: f64,
    /// (A²)′/A².
    pub dln_a2: f64,
    /// d/dρ of (A²)′/A².
    pub d2ln_a2: f64,
    pub phi: f64,
    pub s: f64,
    pub p: f64,
}

impl AmplitudePhase {
    fn from_state(rho: f64, l: f64, eta: f64, y: &[f64]) -> Self {
        let a2 = y[0].exp();
        let d2 = milne_s_prime(rho, l, eta, y[0], y[1]);
        AmplitudePhase { a2, dln_a2: y[1], d2ln_a2: d2, phi: y[2], s: 0.5 * rho * y[1], p: rho / a2 }
    }

    pub fn da2_drho(&self) -> f64 {
        self.a2 * self.dln_a2
    }

    pub fn ds_drho(&self, rho: f64) -> f64 {
        0.5 * self.dln_a2 + 0.5 * rho * self.d2ln_a2
    }

    pub fn dp_drho(&self, rho: f64) -> f64 {
        (1.0 - rho * self.dln_a2) / self.a2
    }
}

pub(crate) fn check_l(l: f64) -> Result<()> {
    if !(l > -0.5 && l.is_finite()) {
        return Err(invalid(format!("l must be > -1/2, got {l}")));
    }
    Ok(())
}

fn milne_k(rho: f64, l: f64, eta: f64) -> f64 {
    1.0 - 2.0 * eta / rho - l * (l + 1.0) / (rho * rho)
}

// With a = ln A² and s = a′ the Milne equation A″ + kA = A⁻³ becomes
// s′ = 2e^{−2a} − 2k − s²/2.
fn milne_s_prime(rho: f64, l: f64, eta: f64, a: f64, s: f64) -> f64 {
    2.0 * (-2.0 * a).exp() - 2.0 * milne_k(rho, l, eta) - 0.5 * s * s
}

pub(crate) fn theta(l: f64, eta: f64, rho: f64) -> Result<f64> {
    Ok(rho - eta * (2.0 * rho).ln() - l * FRAC_PI_2 + coulomb_phase_sigma(l, eta)?)
}

/// A² and its first three ρ-derivatives from the large-ρ series, with the
/// phase. None when the optimally truncated series misses roundoff accuracy.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FarSeed {
    pub w: [f64; 4],
    pub phi: f64,
}

pub(crate) fn far_seed(l: f64, eta: f64, rho: f64) -> Result<Option<FarSeed>> {
    let r = asymptotic_sum(l, eta, rho, Truncation::Optimal);
    if !(r.err <= SERIES_TOL * r.a2.abs()) || !(r.a2 > 0.0) {
        return Ok(None);
    }
    let m = r.terms_used.max(1);
    const NB: usize = 400;
    let a = asymptotic_coeffs(l, eta, NB).a;
    let x = 1.0 / rho;
    let mut w = [0.0; 4];
    let mut xp = 1.0;
    for (k, &ak) in a.iter().enumerate().take(m) {
        let kf = k as f64;
        w[0] += ak * xp;
        w[1] -= kf * ak * xp * x;
        w[2] += kf * (kf + 1.0) * ak * xp * x * x;
        w[3] -= kf * (kf + 1.0) * (kf + 2.0) * ak * xp * x * x * x;
        xp *= x;
    }
    // 1/A² = Σ b_k ρ^{−k}; integrate (1/A² − θ′) termwise from ρ to ∞,
    // stopping at the first negligible term.
    let mut b = vec![1.0; NB];
    let mut terms = Vec::with_capacity(NB);
    let mut xp = 1.0;
    let mut smallest = f64::INFINITY;
    for n in 1..NB {
        let mut acc = 0.0;
        for j in 1..=n {
            acc -= a[j] * b[n - j];
        }
        b[n] = acc;
        if n >= 2 {
            let t = acc * xp / (n as f64 - 1.0);
            if let Some(&last) = terms.last() {
                smallest = smallest.min(t.abs() + f64::abs(last));
            }
            terms.push(t);
            if t.abs() > 1e6 * smallest {
                break;
            }
        }
        xp *= x;
    }
    // Optimal truncation on pair sums: the terms oscillate and can vanish
    // individually, so a single small term says nothing.
    let (mut best, mut cut) = (f64::INFINITY, terms.len());
    for m in 0..terms.len().saturating_sub(1) {
        let pair = terms[m].abs() + terms[m + 1].abs();
        if pair < best {
            best = pair;
            cut = m;
        }
    }
    let done = best <= PHASE_TOL * rho.max(1.0);
    let corr: f64 = -terms[..cut].iter().sum::<f64>();
    if !done {
        return Ok(None);
    }
    Ok(Some(FarSeed { w, phi: theta(l, eta, rho)? + corr }))
}

/// Smallest radius ≥ `rho_min` (found by doubling) where the far seed is accurate.
pub(crate) fn far_radius(l: f64, eta: f64, rho_min: f64) -> Result<(f64, FarSeed)> {
    let mut r = rho_min.max(2.0 * (eta.abs() + l.abs() + 1.0) + 15.0);
    loop {
        if let Some(s) = far_seed(l, eta, r)? {
            return Ok((r, s));
        }
        r *= 2.0;
        if r > FAR_CAP {
            return Err(Error::Range(format!("large-rho series never converges for l = {l}, eta = {eta}")));
        }
    }
}

/// Which oscillatory integrals ride along with the Milne pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Accumulate {
    None,
    /// ∫A² and ∫u·e^{2iφ} for the E, ℓ and η weights.
    All,
}

pub(crate) const MILNE_N: usize = 10;

// State: [ln A², (A²)′/A², φ, ∫A², Re/Im ∫u_E e^{2iφ}, ℓ pair, η pair].
fn milne_rhs(rho: f64, y: &[f64; MILNE_N], l: f64, eta: f64, acc: Accumulate) -> [f64; MILNE_N] {
    let (a, s) = (y[0], y[1]);
    let mut d = [0.0; MILNE_N];
    d[0] = s;
    d[1] = milne_s_prime(rho, l, eta, a, s);
    d[2] = (-a).exp();
    if acc == Accumulate::All {
        let w = a.exp();
        let (sn, cs) = (2.0 * y[2]).sin_cos();
        d[3] = w;
        let ue = 2.0 * w * w * s;
        let ul = w / (rho * rho);
        let uh = w / rho;
        d[4] = ue * cs;
        d[5] = ue * sn;
        d[6] = ul * cs;
        d[7] = ul * sn;
        d[8] = uh * cs;
        d[9] = uh * sn;
    }
    d
}

pub(crate) struct Milne {
    pub l: f64,
    pub eta: f64,
    pub r_far: f64,
    pub seed: FarSeed,
}

impl Milne {
    pub fn new(l: f64, eta: f64, rho_min_far: f64) -> Result<Self> {
        check_l(l)?;
        if !eta.is_finite() {
            return Err(invalid("eta must be finite"));
        }
        let (r_far, seed) = far_radius(l, eta, rho_min_far)?;
        Ok(Milne { l, eta, r_far, seed })
    }

    pub fn start(&self) -> [f64; MILNE_N] {
        let w = self.seed.w;
        let mut y = [0.0; MILNE_N];
        y[0] = w[0].ln();
        y[1] = w[1] / w[0];
        y[2] = self.seed.phi;
        y
    }

    fn integrator(&self) -> Dop853 {
        let mut d = Dop853::with_tol(1e-13, 1e-14);
        d.max_steps = 2_000_000;
        d
    }

    /// States at the requested radii (each ≤ r_far, in any order).
    pub fn states(&self, rhos: &[f64], acc: Accumulate) -> Result<Vec<[f64; MILNE_N]>> {
        let mut order: Vec<usize> = (0..rhos.len()).collect();
        order.sort_by(|&i, &j| rhos[j].total_cmp(&rhos[i]));
        let xs: Vec<f64> = order.iter().map(|&i| rhos[i]).collect();
        if xs.iter().any(|&x| !(x > 0.0 && x <= self.r_far)) {
            return Err(invalid("Milne output radius outside (0, r_far]"));
        }
        let (l, eta) = (self.l, self.eta);
        let ys = self.integrator().integrate_points(|x, y| milne_rhs(x, y, l, eta, acc), self.r_far, self.start(), &xs)?;
        let mut out = vec![[0.0; MILNE_N]; rhos.len()];
        for (k, &i) in order.iter().enumerate() {
            let y = ys[k];
            if !y.iter().all(|v| v.is_finite()) {
                return Err(numerical(format!("Milne pass became non-finite near rho = {}", rhos[i])));
            }
            out[i] = y;
        }
        Ok(out)
    }

    /// Continue from an intermediate state (x0, y0) to x1.
    pub fn advance(&self, x0: f64, y0: [f64; MILNE_N], x1: f64, acc: Accumulate) -> Result<[f64; MILNE_N]> {
        let (l, eta) = (self.l, self.eta);
        Ok(self.integrator().integrate(|x, y| milne_rhs(x, y, l, eta, acc), x0, y0, x1, None, |_, _| Control::Continue)?.y)
    }

    /// Integrate inward to `rho` and keep going while `observe` allows.
    pub fn run_to<O>(&self, rho: f64, acc: Accumulate, observe: O) -> Result<(f64, [f64; MILNE_N])>
    where
        O: FnMut(f64, &[f64; MILNE_N]) -> Control,
    {
        let (l, eta) = (self.l, self.eta);
        let o = self.integrator().integrate(|x, y| milne_rhs(x, y, l, eta, acc), self.r_far, self.start(), rho, None, observe)?;
        Ok((o.x, o.y))
    }
}

pub(crate) fn amplitude_phase_raw(l: f64, eta: f64, rho: f64) -> Result<AmplitudePhase> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(invalid(format!("rho must be positive, got {rho}")));
    }
    let m = Milne::new(l, eta, rho)?;
    let y = if m.r_far == rho { m.start() } else { m.states(&[rho], Accumulate::None)?[0] };
    let mut ap = AmplitudePhase::from_state(rho, l, eta, &y);
    if ap.phi < SMALL_PHASE {
        // The integrated phase loses all relative accuracy under a barrier
        // (it is a difference of O(ρ_far) numbers); tan φ = F/G does not.
        let (u, up, _) = f_scaled(l, eta, rho)?;
        let ratio = u / (ap.a2 * (up - 0.5 * ap.dln_a2 * u));
        let base = ratio.atan();
        let turns = ((ap.phi - base) / PI).round();
        ap.phi = base + PI * turns;
    }
    Ok(ap)
}

/// A², φ, S and P without F and G. Positive energy only.
pub fn amplitude_phase(p: &WaveParams) -> Result<AmplitudePhase> {
    positive_only(p)?;
    amplitude_phase_raw(p.l, p.eta, p.rho)
}

/// A² sampled at arbitrary positive radii from a single inward pass.
pub fn a2_profile(l: f64, eta: f64, rhos: &[f64]) -> Result<Vec<f64>> {
    let top = rhos.iter().cloned().fold(0.0, f64::max);
    let m = Milne::new(l, eta, top)?;
    Ok(m.states(rhos, Accumulate::None)?.iter().map(|y| y[0].exp()).collect())
}

fn positive_only(p: &WaveParams) -> Result<()> {
    if p.energy_sign != EnergySign::Positive {
        return Err(invalid("positive-energy Coulomb functions need energy_sign = positive"));
    }
    Ok(())
}

/// ψ(ρ) = 2[φ(ρ) − φ(ρ_a)].
pub fn psi_of_rho(p: &WaveParams, rho_a: f64) -> Result<f64> {
    positive_only(p)?;
    if !(rho_a > 0.0 && p.rho >= rho_a) {
        return Err(invalid("psi needs rho >= rho_a > 0"));
    }
    if p.rho == rho_a {
        return Ok(0.0);
    }
    let m = Milne::new(p.l, p.eta, p.rho)?;
    let ys = m.states(&[p.rho, rho_a], Accumulate::None)?;
    Ok(2.0 * (ys[0][2] - ys[1][2]))
}

// Regular solution F/C_ℓ(η) = ρ^{ℓ+1} Σ A_k ρ^k and its derivative.
fn f_series_scaled(l: f64, eta: f64, rho: f64) -> Result<(f64, f64)> {
    let mut a_prev = 0.0;
    let mut a_cur = 1.0;
    let mut sum = 1.0;
    let mut dsum = (l + 1.0) * 1.0;
    let mut rk = 1.0;
    for k in 1..10_000 {
        let kf = k as f64;
        let a_next = (2.0 * eta * a_cur - a_prev) / (kf * (kf + 2.0 * l + 1.0));
        rk *= rho;
        let t = a_next * rk;
        sum += t;
        dsum += (kf + l + 1.0) * t;
        a_prev = a_cur;
        a_cur = a_next;
        if t.abs() <= 1e-17 * sum.abs() && (a_prev * rk / rho).abs() <= 1e-17 * sum.abs() && kf > 2.0 * eta.abs() * rho {
            let pw = rho.powf(l + 1.0);
            return Ok((pw * sum, pw * dsum / rho));
        }
    }
    Err(numerical("power series for F did not converge"))
}

pub(crate) fn seed_radius(l: f64, eta: f64) -> f64 {
    0.1f64.min(0.1 / (1.0 + eta.abs() + l))
}

// F and F′ at rho, divided by C_ℓ(η).
fn f_scaled(l: f64, eta: f64, rho: f64) -> Result<(f64, f64, CoulombMethod)> {
    let r0 = seed_radius(l, eta);
    if rho <= r0 {
        let (u, up) = f_series_scaled(l, eta, rho)?;
        return Ok((u, up, CoulombMethod::Series));
    }
    let (u0, up0) = f_series_scaled(l, eta, r0)?;
    let ll = l * (l + 1.0);
    let mut d = Dop853::with_tol(1e-13, 0.0);
    d.max_steps = 2_000_000;
    let o = d.integrate(
        |x, y: &[f64; 2]| [y[1], (2.0 * eta / x + ll / (x * x) - 1.0) * y[0]],
        r0,
        [u0, up0],
        rho,
        None,
        |_, _| Control::Continue,
    )?;
    if !(o.y[0].is_finite() && o.y[1].is_finite()) {
        return Err(Error::Range("outward integration of F overflowed".into()));
    }
    Ok((o.y[0], o.y[1], CoulombMethod::Ode))
}

/// F, G, their derivatives, A², φ, θ, S and P at positive energy.
pub fn evaluate_fg(p: &WaveParams) -> Result<CoulombEval> {
    positive_only(p)?;
    let (l, eta, rho) = (p.l, p.eta, p.rho);
    let m = Milne::new(l, eta, rho)?;
    let th = theta(l, eta, rho)?;
    if m.r_far == rho {
        let y = m.start();
        let ap = AmplitudePhase::from_state(rho, l, eta, &y);
        let amp = ap.a2.sqrt();
        let lam = 0.5 * ap.dln_a2;
        let (sn, cs) = ap.phi.sin_cos();
        let (f, g) = (amp * sn, amp * cs);
        let fp = lam * f + g / ap.a2;
        let gp = lam * g - f / ap.a2;
        let w = f * gp - fp * g;
        return Ok(CoulombEval {
            f,
            fp,
            g,
            gp,
            a2: ap.a2,
            phi: ap.phi,
            theta: th,
            s: ap.s,
            p: ap.p,
            method: CoulombMethod::Asymptotic,
            err: (w + 1.0).abs() + 1e-14 * rho,
            no_cm_guarantee: eta < 0.0,
        });
    }
    let y = m.states(&[rho], Accumulate::None)?[0];
    let ap = AmplitudePhase::from_state(rho, l, eta, &y);
    let (u, up, method) = f_scaled(l, eta, rho)?;
    let ln_c = ln_gamow_c(l, eta)?;
    let c = ln_c.exp();
    let (f, fp) = (c * u, c * up);
    if !(f.is_finite() && fp.is_finite()) || (c == 0.0 && u != 0.0) {
        return Err(Error::Range(format!("F out of range at l = {l}, eta = {eta}, rho = {rho}")));
    }
    let lam = 0.5 * ap.dln_a2;
    let g = ap.a2 * (fp - lam * f);
    let gp = lam * g - f / ap.a2;
    let base = f.atan2(g);
    let turns = ((ap.phi - base) / (2.0 * PI)).round();
    let phi = base + 2.0 * PI * turns;
    let w = f * gp - fp * g;
    Ok(CoulombEval {
        f,
        fp,
        g,
        gp,
        a2: ap.a2,
        phi,
        theta: th,
        s: ap.s,
        p: ap.p,
        method,
        err: (w + 1.0).abs() + 1e-13 * (1.0 + (phi - ap.phi).abs()),
        no_cm_guarantee: eta < 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WhittakerEval {
    /// W_{−η,ℓ+½}(2ρ), normalized as e^{−ρ}(2ρ)^{−η} at large ρ.
    pub w: f64,
    pub wp: f64,
    /// ln|W|, usable where W itself under- or overflows.
    pub ln_abs_w: f64,
    pub s: f64,
    pub rho: f64,
    pub eta: f64,
    pub l: f64,
    /// ∫_ρ^∞ W²t^{−k} dt / W(ρ)² for k = 0, 1, 2.
    pub tail_ratios: [f64; 3],
    /// Zeros of W on (ρ, ∞).
    pub nodes: usize,
}

// Large-ρ series of W: value factor Σ and (ln W)′.
fn whittaker_far(l: f64, eta: f64, rho: f64) -> Option<(f64, f64)> {
    let mut c = 1.0;
    let mut sum = 1.0;
    let mut dsum = 0.0;
    let mut best = f64::INFINITY;
    for n in 0..2000 {
        let nf = n as f64;
        let next = c * (l + 1.0 + eta + nf) * (eta - l + nf) / ((nf + 1.0) * (-2.0 * rho));
        let mag = next.abs();
        if mag == 0.0 {
            return Some((sum, -1.0 - eta / rho + dsum / (sum * rho)));
        }
        if mag > best {
            return None;
        }
        best = mag;
        sum += next;
        dsum -= (nf + 1.0) * next;
        c = next;
        if mag <= 1e-17 * sum.abs() {
            return Some((sum, -1.0 - eta / rho + dsum / (sum * rho)));
        }
    }
    None
}

/// Decaying solution of u″ = [1 + 2η/ρ + ℓ(ℓ+1)/ρ²]u and S = ρW′/W.
pub fn whittaker_w(l: f64, eta: f64, rho: f64) -> Result<WhittakerEval> {
    check_l(l)?;
    if !(rho > 0.0 && rho.is_finite()) || !eta.is_finite() {
        return Err(invalid("whittaker_w needs rho > 0 and finite eta"));
    }
    let ll = l * (l + 1.0);
    let q = |x: f64| 1.0 + 2.0 * eta / x + ll / (x * x);
    let mut r_far = (rho + 25.0).max(10.0 + 2.0 * (eta.abs() + l));
    let (sum, p_far) = loop {
        if let Some(v) = whittaker_far(l, eta, r_far) {
            if v.0 > 0.0 {
                break v;
            }
        }
        r_far *= 2.0;
        if r_far > FAR_CAP {
            return Err(Error::Range(format!("Whittaker series never converges for eta = {eta}")));
        }
    };
    let ln_w_far = -r_far - eta * (2.0 * r_far).ln() + sum.ln();
    // Below the outer turning point of an attractive field W can vanish.
    let rho_lin = if eta < 0.0 && eta * eta > ll { -eta + (eta * eta - ll).sqrt() } else { 0.0 };
    let stop = rho.max(rho_lin);
    let mut d = Dop853::with_tol(1e-13, 1e-15);
    d.max_steps = 2_000_000;
    let seed_ratio = |k: f64| r_far.powf(-k) / (-2.0 * p_far + k / r_far);
    let o = d.integrate(
        |x, y: &[f64; 5]| {
            let p = y[1];
            [p, q(x) - p * p, -1.0 - 2.0 * p * y[2], -1.0 / x - 2.0 * p * y[3], -1.0 / (x * x) - 2.0 * p * y[4]]
        },
        r_far,
        [0.0, p_far, seed_ratio(0.0), seed_ratio(1.0), seed_ratio(2.0)],
        stop,
        None,
        |_, _| Control::Continue,
    )?;
    let ya = o.y;
    if !ya.iter().all(|v| v.is_finite()) {
        return Err(numerical("Whittaker log-derivative pass failed"));
    }
    let ln_w_stop = ln_w_far + ya[0];
    if stop == rho {
        let p = ya[1];
        let w = ln_w_stop.exp();
        return Ok(WhittakerEval {
            w,
            wp: w * p,
            ln_abs_w: ln_w_stop,
            s: rho * p,
            rho,
            eta,
            l,
            tail_ratios: [ya[2], ya[3], ya[4]],
            nodes: 0,
        });
    }
    // Linear form through the oscillatory region, normalized to u = 1 at `stop`.
    let mut nodes = 0usize;
    let mut last_sign = 1.0;
    let ob = d.integrate(
        |x, y: &[f64; 5]| {
            let u2 = y[0] * y[0];
            [y[1], q(x) * y[0], -u2, -u2 / x, -u2 / (x * x)]
        },
        stop,
        [1.0, ya[1], ya[2], ya[3], ya[4]],
        rho,
        None,
        |_, y| {
            let sg = y[0].signum();
            if sg != last_sign && y[0] != 0.0 {
                nodes += 1;
                last_sign = sg;
            }
            Control::Continue
        },
    )?;
    let (u, up) = (ob.y[0], ob.y[1]);
    if u.signum() != last_sign && u != 0.0 {
        nodes += 1;
    }
    let s = rho * up / u;
    if !s.is_finite() || s.abs() > 1e10 {
        return Err(Error::Pole(format!("W vanishes at rho = {rho} (eta = {eta}, l = {l})")));
    }
    let ln_abs = ln_w_stop + u.abs().ln();
    let w = u.signum() * ln_abs.exp();
    let u2 = u * u;
    Ok(WhittakerEval {
        w,
        wp: w * up / u,
        ln_abs_w: ln_abs,
        s,
        rho,
        eta,
        l,
        tail_ratios: [ob.y[2] / u2, ob.y[3] / u2, ob.y[4] / u2],
        nodes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ZeroEnergy {
    pub s: f64,
    /// ∂S/∂E from the closed Bessel form, in units of 2μ/(ħ²α²).
    pub dsde_scaled: f64,
    /// The same slope from the positive-integrand quadrature.
    pub dsde_scaled_integral: f64,
}

/// Shift factor and its energy slope at E = 0 for a repulsive field.
pub fn zero_energy(l: f64, x0: f64) -> Result<ZeroEnergy> {
    if !(l >= 0.0 && l.is_finite()) {
        return Err(invalid(format!("l must be >= 0, got {l}")));
    }
    if !(x0 > 0.0 && x0.is_finite()) {
        return Err(invalid(format!("x0 must be positive, got {x0}")));
    }
    let n = 2.0 * l;
    let k: Vec<f64> = (0..5).map(|j| bessel_k_scaled(n + j as f64, x0)).collect::<Result<_>>()?;
    let s = -l - x0 * k[0] / (2.0 * k[1]);
    let closed = x0.powi(3) / (192.0 * k[1] * k[1])
        * (6.0 * (l + 1.0) * (k[1] * k[2] - k[0] * k[3]) + x0 * (k[0] * k[4] - k[1] * k[3]));
    let kx0 = k[1];
    let integrand = |x: f64| -> f64 {
        match bessel_k_scaled(n + 1.0, x) {
            Ok(kx) => {
                let r = x * kx / (x0 * kx0) * (-(x - x0)).exp();
                r * r * x
            }
            Err(_) => f64::NAN,
        }
    };
    // The integrand falls off like x³e^{−2(x−x₀)}; split so each panel is smooth.
    let upper = x0 + 40.0 + 2.0 * x0.ln().max(0.0);
    let mut edges = vec![x0];
    let mut e = x0;
    while e < upper {
        e = (e + (0.5 + 0.5 * e).min(4.0)).min(upper);
        edges.push(e);
    }
    let mut total = 0.0;
    for w in edges.windows(2) {
        total += quad::integrate(integrand, w[0], w[1], 1e-300, 1e-13, 200)?.value;
    }
    let integral = x0 * x0 / 32.0 * total;
    Ok(ZeroEnergy { s, dsde_scaled: closed, dsde_scaled_integral: integral })
}

/// Shift factor at any energy: positive, negative or (within `MIN_ENERGY`) zero.
pub fn shift_factor(ch: &PhysicalChannel) -> Result<f64> {
    ch.validate()?;
    if ch.energy.abs() < MIN_ENERGY {
        if ch.z1z2 == 0.0 {
            return Ok(-ch.l);
        }
        let x0 = ch.x0().map_err(|_| Error::Unsupported("zero-energy shift factor of an attractive field".into()))?;
        return Ok(zero_energy(ch.l, x0)?.s);
    }
    let p = to_wave_params(ch)?;
    match p.energy_sign {
        EnergySign::Positive => Ok(amplitude_phase(&p)?.s),
        _ => Ok(whittaker_w(p.l, p.eta, p.rho)?.s),
    }
}
