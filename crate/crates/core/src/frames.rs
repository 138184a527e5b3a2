//! Physical channel parameters and the dimensionless (ℓ, η, ρ) frame.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// ħc in MeV·fm.
pub const HBARC: f64 = 197.326_980_4;
/// e² in MeV·fm.
pub const E2: f64 = 1.439_96;
/// Nucleon-nucleon reduced mass (MeV/c²) used for the reference shift-factor figure.
pub const NUCLEON_NUCLEON_MU: f64 = 938.9183 / 2.0;
/// Energies closer to zero than this (MeV) are rejected by the conversion.
pub const MIN_ENERGY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergySign {
    Positive,
    Negative,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalChannel {
    /// Reduced mass, MeV/c².
    pub mu: f64,
    pub z1z2: f64,
    pub l: f64,
    /// Channel radius, fm.
    pub radius: f64,
    /// Center-of-mass energy, MeV.
    pub energy: f64,
}

impl PhysicalChannel {
    pub fn new(mu: f64, z1z2: f64, l: f64, radius: f64, energy: f64) -> Self {
        Self { mu, z1z2, l, radius, energy }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid(format!("reduced mass must be positive, got {}", self.mu)));
        }
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            return Err(invalid(format!("radius must be positive, got {}", self.radius)));
        }
        if !(self.l >= 0.0 && self.l.is_finite()) {
            return Err(invalid(format!("l must be >= 0, got {}", self.l)));
        }
        if !self.z1z2.is_finite() {
            return Err(invalid("charge product must be finite"));
        }
        Ok(())
    }

    /// α = ηk = Z₁Z₂e²μ/(ħc)², in fm⁻¹. Independent of energy.
    pub fn alpha(&self) -> f64 {
        self.z1z2 * E2 * self.mu / (HBARC * HBARC)
    }

    /// Energy-independent coordinate x₀ = √(8αr) for the zero-energy limit.
    pub fn x0(&self) -> Result<f64> {
        let a = self.alpha();
        if !(a > 0.0) {
            return Err(Error::Domain("x0 needs a repulsive field".into()));
        }
        Ok((8.0 * a * self.radius).sqrt())
    }

    /// Scale 2μ/(ħ²α²) in MeV⁻¹ that converts the dimensionless zero-energy slope.
    pub fn zero_energy_slope_scale(&self) -> f64 {
        let a = self.alpha();
        2.0 * self.mu / (HBARC * HBARC * a * a)
    }

    pub fn with_energy(&self, energy: f64) -> Self {
        Self { energy, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub l: f64,
    pub eta: f64,
    pub rho: f64,
    pub energy_sign: EnergySign,
}

impl WaveParams {
    pub fn new(l: f64, eta: f64, rho: f64, energy_sign: EnergySign) -> Result<Self> {
        if !(rho > 0.0 && rho.is_finite()) {
            return Err(invalid(format!("rho must be positive and finite, got {rho}")));
        }
        if !eta.is_finite() {
            return Err(invalid("eta must be finite"));
        }
        if !(l >= 0.0 && l.is_finite()) {
            return Err(invalid(format!("l must be >= 0, got {l}")));
        }
        Ok(Self { l, eta, rho, energy_sign })
    }

    pub fn positive(l: f64, eta: f64, rho: f64) -> Result<Self> {
        Self::new(l, eta, rho, EnergySign::Positive)
    }

    pub fn negative(l: f64, eta: f64, rho: f64) -> Result<Self> {
        Self::new(l, eta, rho, EnergySign::Negative)
    }

    /// x₀ = √(8ηρ); requires η > 0.
    pub fn x0(&self) -> Result<f64> {
        if !(self.eta > 0.0) {
            return Err(Error::Domain("x0 needs eta > 0".into()));
        }
        Ok((8.0 * self.eta * self.rho).sqrt())
    }
}

pub fn to_wave_params(ch: &PhysicalChannel) -> Result<WaveParams> {
    ch.validate()?;
    let e = ch.energy;
    if !e.is_finite() {
        return Err(invalid("energy must be finite"));
    }
    if e.abs() < MIN_ENERGY {
        return Err(invalid(format!("|E| = {} MeV is below {MIN_ENERGY}; use the zero-energy path", e.abs())));
    }
    let k = (2.0 * ch.mu * e.abs()).sqrt() / HBARC;
    if !k.is_finite() {
        return Err(Error::Range("wave number overflows".into()));
    }
    let rho = k * ch.radius;
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::Range(format!("rho = {rho} out of range")));
    }
    let eta = ch.alpha() / k;
    let sign = if e > 0.0 { EnergySign::Positive } else { EnergySign::Negative };
    WaveParams::new(ch.l, eta, rho, sign)
}

/// Recover (energy, radius) from (η, ρ) and the channel constants. Needs a
/// charged channel, because η = 0 carries no energy information.
pub fn energy_and_radius(p: &WaveParams, mu: f64, z1z2: f64) -> Result<(f64, f64)> {
    let alpha = z1z2 * E2 * mu / (HBARC * HBARC);
    if alpha == 0.0 || p.eta == 0.0 {
        return Err(invalid("energy cannot be recovered from eta in a neutral channel"));
    }
    let k = alpha / p.eta;
    if !(k > 0.0) {
        return Err(invalid("sign of eta inconsistent with the charge product"));
    }
    let mag = (HBARC * k).powi(2) / (2.0 * mu);
    let energy = match p.energy_sign {
        EnergySign::Positive => mag,
        EnergySign::Negative => -mag,
        EnergySign::Zero => return Err(invalid("zero energy has no finite wave number")),
    };
    Ok((energy, p.rho / k))
}

/// Weights (ρ/2E, −η/2E) with ∂X/∂E = w_ρ ∂X/∂ρ + w_η ∂X/∂η at fixed radius.
pub fn energy_derivative_weights(p: &WaveParams, energy: f64) -> Result<(f64, f64)> {
    if p.energy_sign != EnergySign::Positive {
        return Err(invalid("energy derivative weights are defined here for positive energy"));
    }
    if energy == 0.0 || !energy.is_finite() {
        return Err(invalid("energy must be nonzero and finite"));
    }
    Ok(weights(p.rho, p.eta, energy))
}

/// Same chain rule for either sign of E (ρ ∝ √|E|, η ∝ 1/√|E|).
pub(crate) fn weights(rho: f64, eta: f64, energy: f64) -> (f64, f64) {
    (rho / (2.0 * energy), -eta / (2.0 * energy))
}
