//! Forward model of photon generation at the waveguide output.
//!
//! A pulsed pump (average power P, repetition rate R, pulse width Δt) drives
//! spontaneous four-wave mixing; within the filter bandwidth Δν the mean
//! photon-pair number per pulse is
//!
//! ```text
//! μ_c = Δν·Δt · (γ_eff · P_peak · L_eff)²,   P_peak = P / (R·Δt)
//! ```
//!
//! valid only while the pump-to-signal detuning stays inside the four-wave
//! mixing gain band (checked as a hard error, not a warning). On top of the
//! pairs, each channel carries uncorrelated noise photons described by the
//! phenomenological polynomial `μ_s = a·P + b·P²` — the total singles rate;
//! the noise-only part is `μ_n = max(μ_s − μ_c, 0)`.

use crate::error::{Error, Result};

/// Pulsed pump description.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PumpSpec {
    /// Pump wavelength λ_p in meters.
    pub wavelength: f64,
    /// Coupled average power P in watts.
    pub avg_power: f64,
    /// Pulse repetition rate R in hertz.
    pub rep_rate: f64,
    /// Pulse width Δt (FWHM) in seconds.
    pub pulse_width: f64,
}

impl PumpSpec {
    /// Checks positivity and the sub-unity duty cycle `R·Δt < 1`.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("wavelength", self.wavelength),
            ("avg_power", self.avg_power),
            ("rep_rate", self.rep_rate),
            ("pulse_width", self.pulse_width),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!(
                    "pump {name} must be positive and finite, got {v}"
                )));
            }
        }
        if self.rep_rate * self.pulse_width >= 1.0 {
            return Err(Error::invalid(format!(
                "pump duty cycle R·Δt must be below one, got {}",
                self.rep_rate * self.pulse_width
            )));
        }
        Ok(())
    }
}

/// Signal/idler filter channel and the four-wave-mixing validity window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelSpec {
    /// Filter bandwidth Δν in hertz (per channel).
    pub bandwidth_hz: f64,
    /// Pump-to-signal detuning expressed in hertz.
    pub detuning_hz: f64,
    /// Half-width of the four-wave-mixing gain band in hertz.
    pub fwm_half_bandwidth_hz: f64,
}

impl ChannelSpec {
    /// Checks positivity and the in-band validity condition.
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::invalid(format!(
                "channel bandwidth must be positive and finite, got {}",
                self.bandwidth_hz
            )));
        }
        if !(self.detuning_hz >= 0.0 && self.fwm_half_bandwidth_hz > 0.0) {
            return Err(Error::invalid(format!(
                "detuning must be nonnegative and the gain half-bandwidth positive, \
                 got {} Hz and {} Hz",
                self.detuning_hz, self.fwm_half_bandwidth_hz
            )));
        }
        if self.detuning_hz > self.fwm_half_bandwidth_hz {
            return Err(Error::DetuningOutOfBand {
                detuning_hz: self.detuning_hz,
                half_bandwidth_hz: self.fwm_half_bandwidth_hz,
            });
        }
        Ok(())
    }
}

/// Phenomenological noise-photon channel: `μ_s = a·P + b·P²` per pulse.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Linear coefficient a, photons/pulse per watt.
    pub linear_coeff: f64,
    /// Quadratic coefficient b, photons/pulse per watt².
    pub quadratic_coeff: f64,
}

impl NoiseModel {
    /// Checks that both coefficients are nonnegative.
    pub fn validate(&self) -> Result<()> {
        if !(self.linear_coeff >= 0.0 && self.quadratic_coeff >= 0.0) {
            return Err(Error::invalid(format!(
                "noise coefficients must be nonnegative, got a = {}, b = {}",
                self.linear_coeff, self.quadratic_coeff
            )));
        }
        Ok(())
    }
}

/// Coupled pump peak power `P_peak = P / (R·Δt)` in watts.
pub fn peak_power(pump: &PumpSpec) -> Result<f64> {
    pump.validate()?;
    Ok(pump.avg_power / (pump.rep_rate * pump.pulse_width))
}

/// Mean photon-pair number per pulse from spontaneous four-wave mixing:
/// `μ_c = Δν·Δt·(γ_eff·P_peak·L_eff)²`.
///
/// Fails with [`Error::DetuningOutOfBand`] when the detuning exceeds the
/// gain half-bandwidth — outside that window the closed form does not hold.
pub fn pair_rate(
    gamma_eff: f64,
    p_peak: f64,
    l_eff: f64,
    channel: &ChannelSpec,
    pump: &PumpSpec,
) -> Result<f64> {
    channel.validate()?;
    pump.validate()?;
    if !(gamma_eff >= 0.0 && p_peak >= 0.0 && l_eff > 0.0) {
        return Err(Error::invalid(format!(
            "pair_rate requires gamma_eff >= 0, p_peak >= 0, l_eff > 0; \
             got {gamma_eff}, {p_peak}, {l_eff}"
        )));
    }
    let amplitude = gamma_eff * p_peak * l_eff;
    Ok(channel.bandwidth_hz * pump.pulse_width * amplitude * amplitude)
}

/// Total singles generation rate per pulse in one channel:
/// `μ_s = a·P + b·P²` photons/pulse.
pub fn singles_rate(mu_c: f64, noise: &NoiseModel, avg_power: f64) -> Result<f64> {
    noise.validate()?;
    if !(mu_c >= 0.0 && avg_power >= 0.0) {
        return Err(Error::invalid(format!(
            "singles_rate requires nonnegative mu_c and power, got {mu_c}, {avg_power}"
        )));
    }
    Ok(noise.linear_coeff * avg_power + noise.quadratic_coeff * avg_power * avg_power)
}

/// Noise-only generation rate: the singles total minus the pair
/// contribution, clamped at zero (`μ_n = max(μ_s − μ_c, 0)`).
pub fn noise_only_rate(mu_s: f64, mu_c: f64) -> f64 {
    (mu_s - mu_c).max(0.0)
}

/// Source efficiency metric `μ_c / (P_peak² · L² · Δλ)` in
/// pairs/pulse/W²/m²/nm, where L is the *physical* device length and Δλ the
/// filter bandwidth in nanometers.
pub fn pair_efficiency(mu_c: f64, p_peak: f64, length: f64, bandwidth_nm: f64) -> Result<f64> {
    if !(mu_c >= 0.0 && p_peak > 0.0 && length > 0.0 && bandwidth_nm > 0.0) {
        return Err(Error::invalid(format!(
            "pair_efficiency requires mu_c >= 0 and positive p_peak, length, bandwidth; \
             got {mu_c}, {p_peak}, {length}, {bandwidth_nm}"
        )));
    }
    Ok(mu_c / (p_peak * p_peak * length * length * bandwidth_nm))
}
