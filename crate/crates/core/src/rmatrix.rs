//! Thomas-approximation normalisation and observed partial widths for a
//! single R-matrix level.

use std::fmt;

use serde::Serialize;

use crate::coulomb::amplitude_phase;
use crate::error::{invalid, Error, Result};
use crate::frames::{to_wave_params, EnergySign, PhysicalChannel, MIN_ENERGY};
use crate::variation::{dl_dparam, ds_negative_energy, DerivMethod, Param};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelChannel {
    /// The channel's `energy` field is ignored; channels are evaluated at e_lambda.
    pub channel: PhysicalChannel,
    /// Reduced width γ², MeV.
    pub gamma2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Level {
    /// Level energy, MeV.
    pub e_lambda: f64,
    pub channels: Vec<LevelChannel>,
}

impl Level {
    pub fn validate(&self) -> Result<()> {
        if !self.e_lambda.is_finite() {
            return Err(invalid("e_lambda must be finite"));
        }
        for (i, c) in self.channels.iter().enumerate() {
            c.channel.validate().map_err(|e| invalid(format!("channel {i}: {e}")))?;
            if !(c.gamma2 >= 0.0 && c.gamma2.is_finite()) {
                return Err(invalid(format!("channel {i}: gamma2 must be >= 0, got {}", c.gamma2)));
            }
        }
        Ok(())
    }
}

/// ∂S/∂E (MeV⁻¹) for one channel at energy `e`.
pub fn channel_dsde(ch: &PhysicalChannel, e: f64, method: DerivMethod) -> Result<f64> {
    let ch = ch.with_energy(e);
    if e.abs() < MIN_ENERGY {
        return Err(Error::Unsupported("level energy at threshold".into()));
    }
    let p = to_wave_params(&ch)?;
    match p.energy_sign {
        EnergySign::Positive => Ok(dl_dparam(&p, e, Param::E, method)?.0.value),
        _ => ds_negative_energy(Param::E, p.l, p.eta, p.rho, e),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WidthReport {
    pub n: f64,
    /// ∂S_c/∂E per channel, MeV⁻¹.
    pub dsde: Vec<f64>,
    /// P_c per channel (0 for closed channels).
    pub penetrability: Vec<f64>,
    /// Γ_c = 2 N P_c γ²_c, MeV.
    pub widths: Vec<f64>,
    /// Set when N ≤ 0 or some channel lacks the ∂S/∂E > 0 guarantee.
    pub sign_warning: bool,
}

/// N = 1/(1 + Σ γ²_c ∂S_c/∂E).
pub fn n_factor(level: &Level, method: DerivMethod) -> Result<f64> {
    level.validate()?;
    let mut sum = 0.0;
    for c in &level.channels {
        if c.gamma2 > 0.0 {
            sum += c.gamma2 * channel_dsde(&c.channel, level.e_lambda, method)?;
        }
    }
    Ok(1.0 / (1.0 + sum))
}

/// Γ_c = 2 N P_c γ²_c for channel `c`; zero for a closed channel.
pub fn observed_width(level: &Level, c: usize, method: DerivMethod) -> Result<f64> {
    let ch = level.channels.get(c).ok_or_else(|| invalid(format!("no channel {c}")))?;
    let n = n_factor(level, method)?;
    width_with_n(ch, level.e_lambda, n)
}

fn width_with_n(ch: &LevelChannel, e: f64, n: f64) -> Result<f64> {
    if e <= 0.0 || ch.gamma2 == 0.0 {
        return Ok(0.0);
    }
    let p = amplitude_phase(&to_wave_params(&ch.channel.with_energy(e))?)?.p;
    Ok(2.0 * n * p * ch.gamma2)
}

/// N, every ∂S_c/∂E and every width in one pass.
pub fn width_report(level: &Level, method: DerivMethod) -> Result<WidthReport> {
    level.validate()?;
    let e = level.e_lambda;
    let mut dsde = Vec::with_capacity(level.channels.len());
    let mut pen = Vec::with_capacity(level.channels.len());
    let mut warn = false;
    let mut sum = 0.0;
    for c in &level.channels {
        let d = channel_dsde(&c.channel, e, method)?;
        sum += c.gamma2 * d;
        dsde.push(d);
        warn |= c.channel.z1z2 < 0.0;
        pen.push(if e > 0.0 { amplitude_phase(&to_wave_params(&c.channel.with_energy(e))?)?.p } else { 0.0 });
    }
    let n = 1.0 / (1.0 + sum);
    warn |= !(n > 0.0);
    let widths = level.channels.iter().zip(&pen).map(|(c, &p)| 2.0 * n * p * c.gamma2).collect();
    Ok(WidthReport { n, dsde, penetrability: pen, widths, sign_warning: warn })
}

/// A malformed level file, with the 1-based line that caused it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub msg: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.msg)
    }
}

impl std::error::Error for ParseError {}

#[derive(Default)]
struct PartialChannel {
    start: usize,
    mu: Option<f64>,
    z1z2: Option<f64>,
    l: Option<f64>,
    radius: Option<f64>,
    gamma2: Option<f64>,
}

impl PartialChannel {
    fn finish(self) -> std::result::Result<LevelChannel, ParseError> {
        let need = |v: Option<f64>, k: &str| v.ok_or_else(|| ParseError { line: self.start, msg: format!("[channel] is missing {k}") });
        let ch = PhysicalChannel::new(need(self.mu, "mu")?, need(self.z1z2, "z1z2")?, need(self.l, "l")?, need(self.radius, "radius")?, 0.0);
        let gamma2 = need(self.gamma2, "gamma2")?;
        ch.validate().map_err(|e| ParseError { line: self.start, msg: e.to_string() })?;
        if !(gamma2 >= 0.0) {
            return Err(ParseError { line: self.start, msg: format!("gamma2 must be >= 0, got {gamma2}") });
        }
        Ok(LevelChannel { channel: ch, gamma2 })
    }
}

/// Parse the `key = value` level format: one `[level]` section with
/// `e_lambda`, then one or more `[channel]` sections with `mu`, `z1z2`, `l`,
/// `radius` and `gamma2`. `#` starts a comment.
pub fn parse_level(text: &str) -> std::result::Result<Level, ParseError> {
    enum Section {
        None,
        Level,
        Channel,
    }
    let mut section = Section::None;
    let mut e_lambda: Option<f64> = None;
    let mut level_line = 0;
    let mut channels = Vec::new();
    let mut cur: Option<PartialChannel> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split('#').next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        let err = |msg: String| ParseError { line, msg };
        if s.starts_with('[') {
            if let Some(c) = cur.take() {
                channels.push(c.finish()?);
            }
            match s {
                "[level]" => {
                    if level_line != 0 {
                        return Err(err("second [level] section".into()));
                    }
                    level_line = line;
                    section = Section::Level;
                }
                "[channel]" => {
                    cur = Some(PartialChannel { start: line, ..Default::default() });
                    section = Section::Channel;
                }
                _ => return Err(err(format!("unknown section {s}"))),
            }
            continue;
        }
        let (k, v) = s.split_once('=').ok_or_else(|| err(format!("expected key = value, got '{s}'")))?;
        let (k, v) = (k.trim(), v.trim());
        let x: f64 = v.parse().map_err(|_| err(format!("'{v}' is not a number")))?;
        if !x.is_finite() {
            return Err(err(format!("{k} must be finite")));
        }
        let slot = match (&section, k) {
            (Section::Level, "e_lambda") => &mut e_lambda,
            (Section::Channel, key) => {
                let c = cur.as_mut().expect("channel section is open");
                match key {
                    "mu" => &mut c.mu,
                    "z1z2" => &mut c.z1z2,
                    "l" => &mut c.l,
                    "radius" => &mut c.radius,
                    "gamma2" => &mut c.gamma2,
                    _ => return Err(err(format!("unknown channel key {key}"))),
                }
            }
            (Section::Level, _) => return Err(err(format!("unknown level key {k}"))),
            (Section::None, _) => return Err(err("key outside any section".into())),
        };
        if slot.replace(x).is_some() {
            return Err(err(format!("duplicate key {k}")));
        }
    }
    if let Some(c) = cur.take() {
        channels.push(c.finish()?);
    }
    let last = text.lines().count().max(1);
    if level_line == 0 {
        return Err(ParseError { line: last, msg: "no [level] section".into() });
    }
    let e_lambda = e_lambda.ok_or(ParseError { line: level_line, msg: "[level] is missing e_lambda".into() })?;
    if channels.is_empty() {
        return Err(ParseError { line: last, msg: "no [channel] sections".into() });
    }
    Ok(Level { e_lambda, channels })
}
