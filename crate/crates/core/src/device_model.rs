//! Waveguide-level derived quantities.
//!
//! A slow-light waveguide is described by its geometry and optical
//! parameters ([`WaveguideSpec`]); this module derives the quantities the
//! pair-generation model actually consumes:
//!
//! * the linear attenuation coefficient `α = α_dB · ln(10)/10` (per meter),
//! * the effective interaction length `L_eff = (1 − exp(−αL))/α`,
//! * the slowdown factor `S = n_g / n`,
//! * the quadratic rescaling of the effective nonlinearity, `γ ∝ S²`.
//!
//! Sign conventions: efficiencies are stored as non-positive dB values
//! (−6 dB = 25.1 % transmission) and propagation loss as positive dB per
//! meter. Conversions happen at use sites, never in storage.

use crate::error::{Error, Result};

/// Geometry and optical parameters of one waveguide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveguideSpec {
    /// Physical length L in meters.
    pub length: f64,
    /// Propagation power loss in dB per meter (positive convention).
    pub alpha_db: f64,
    /// Group index n_g (dimensionless).
    pub group_index: f64,
    /// Phase index n (dimensionless).
    pub phase_index: f64,
    /// Effective nonlinear coefficient γ_eff in /W/m, slow-light
    /// enhancement included.
    pub gamma_eff: f64,
    /// One-facet coupling efficiency η_couple in dB (≤ 0).
    pub coupling_db: f64,
}

impl WaveguideSpec {
    /// Checks the structural invariants of the spec.
    pub fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::invalid(format!(
                "waveguide length must be positive and finite, got {}",
                self.length
            )));
        }
        if !(self.alpha_db >= 0.0 && self.alpha_db.is_finite()) {
            return Err(Error::invalid(format!(
                "waveguide loss must be a nonnegative dB/m value, got {}",
                self.alpha_db
            )));
        }
        if !(self.group_index >= self.phase_index && self.phase_index >= 1.0) {
            return Err(Error::invalid(format!(
                "indices must satisfy group_index >= phase_index >= 1, got n_g = {}, n = {}",
                self.group_index, self.phase_index
            )));
        }
        if !(self.gamma_eff >= 0.0 && self.gamma_eff.is_finite()) {
            return Err(Error::invalid(format!(
                "gamma_eff must be nonnegative and finite, got {}",
                self.gamma_eff
            )));
        }
        if !(self.coupling_db <= 0.0) {
            return Err(Error::invalid(format!(
                "coupling efficiency must be <= 0 dB, got {} dB",
                self.coupling_db
            )));
        }
        Ok(())
    }

    /// Derives the loss coefficient, effective length and slowdown factor.
    pub fn derive(&self) -> Result<DerivedDevice> {
        self.validate()?;
        let alpha_linear = attenuation_coefficient(self.alpha_db)?;
        Ok(DerivedDevice {
            alpha_linear,
            effective_length: effective_length(alpha_linear, self.length)?,
            slowdown: slowdown_factor(self.group_index, self.phase_index)?,
        })
    }
}

/// Quantities derived from a [`WaveguideSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedDevice {
    /// Attenuation coefficient α on the natural-log scale, per meter.
    pub alpha_linear: f64,
    /// Effective interaction length L_eff in meters (≤ physical length).
    pub effective_length: f64,
    /// Slowdown factor S = n_g / n (≥ 1).
    pub slowdown: f64,
}

/// Converts a dB power ratio to a linear fraction: `10^(db/10)`.
pub fn db_to_linear(db: f64) -> Result<f64> {
    if !db.is_finite() {
        return Err(Error::invalid(format!("dB value must be finite, got {db}")));
    }
    Ok(10f64.powf(db / 10.0))
}

/// Converts a dB-per-meter power loss to the natural-log attenuation
/// coefficient: `α = α_dB · ln(10)/10`, in /m.
pub fn attenuation_coefficient(alpha_db: f64) -> Result<f64> {
    if !(alpha_db >= 0.0 && alpha_db.is_finite()) {
        return Err(Error::invalid(format!(
            "loss must be a nonnegative dB/m value, got {alpha_db}"
        )));
    }
    Ok(alpha_db * std::f64::consts::LN_10 / 10.0)
}

/// Effective interaction length `L_eff = (1 − exp(−αL))/α` in meters.
///
/// Equals the integral of the power envelope `∫₀ᴸ exp(−αz) dz`; the lossless
/// case is special-cased to return `L` exactly rather than relying on
/// floating-point limits.
pub fn effective_length(alpha: f64, length: f64) -> Result<f64> {
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!(
            "attenuation coefficient must be nonnegative and finite, got {alpha}"
        )));
    }
    if !(length > 0.0 && length.is_finite()) {
        return Err(Error::invalid(format!(
            "length must be positive and finite, got {length}"
        )));
    }
    if alpha == 0.0 {
        return Ok(length);
    }
    Ok((-(-alpha * length).exp_m1()) / alpha)
}

/// Slowdown factor `S = n_g / n`.
pub fn slowdown_factor(group_index: f64, phase_index: f64) -> Result<f64> {
    if !(group_index >= phase_index && phase_index >= 1.0) {
        return Err(Error::invalid(format!(
            "indices must satisfy n_g >= n >= 1, got n_g = {group_index}, n = {phase_index}"
        )));
    }
    Ok(group_index / phase_index)
}

/// Rescales an effective nonlinearity between slowdown factors:
/// `γ' = γ · (S_target / S_base)²` (equal effective mode areas assumed).
pub fn rescale_gamma(gamma_base: f64, s_base: f64, s_target: f64) -> Result<f64> {
    if !(gamma_base > 0.0 && s_base > 0.0 && s_target > 0.0) {
        return Err(Error::invalid(format!(
            "rescale_gamma requires positive inputs, got gamma = {gamma_base}, \
             s_base = {s_base}, s_target = {s_target}"
        )));
    }
    let ratio = s_target / s_base;
    Ok(gamma_base * ratio * ratio)
}
