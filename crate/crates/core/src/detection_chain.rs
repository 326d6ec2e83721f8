//! Deterministic model of the measurement apparatus.
//!
//! Each channel passes an efficiency stack — fiber coupling, spectral
//! filter, detector quantum efficiency — into a gated single-photon
//! detector characterized by a dark-count probability per gate and a dead
//! time. The module provides:
//!
//! * the overall channel efficiency `η = η_couple·η_f·η_QE`,
//! * the active-gate fraction `η_gate = 1/(1 + p·d)` from renewal theory,
//!   where `d` gates are blanked after every detection and `p` is the
//!   per-active-gate firing probability,
//! * closed-form expected count rates (singles, same-gate coincidences,
//!   offset accidentals) to first order in the per-gate probabilities,
//! * the closed-form coincidence-to-accidental ratio
//!   `CAR = 1 + η²μ_c/(ημ_s + μ_d)²`.
//!
//! The first-order rate model deliberately fails (rather than degrading
//! silently) once any per-gate detection probability reaches 0.1.

use crate::error::{Error, Result};

/// Per-gate detection probability above which the first-order rate model
/// is refused.
pub const SATURATION_LIMIT: f64 = 0.1;

/// One detection channel: efficiency stack plus gated-detector parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionSpec {
    /// Fiber/chip coupling efficiency η_couple in dB (≤ 0).
    pub coupling_db: f64,
    /// Filter transmission η_f in dB (≤ 0).
    pub filter_db: f64,
    /// Detector quantum efficiency η_QE as a fraction in [0, 1].
    pub quantum_efficiency: f64,
    /// Gate repetition rate in hertz (synchronized to the pump).
    pub gate_rate: f64,
    /// Gate width in seconds.
    pub gate_width: f64,
    /// Dark-count probability μ_d per gate.
    pub dark_per_gate: f64,
    /// Dead time in seconds; a detection blanks the following
    /// `round(dead_time·gate_rate)` gates.
    pub dead_time: f64,
}

impl DetectionSpec {
    /// Checks the structural invariants of the spec.
    pub fn validate(&self) -> Result<()> {
        if !(self.coupling_db <= 0.0 && self.filter_db <= 0.0) {
            return Err(Error::invalid(format!(
                "coupling and filter efficiencies must be <= 0 dB, got {} dB and {} dB",
                self.coupling_db, self.filter_db
            )));
        }
        if !(0.0..=1.0).contains(&self.quantum_efficiency) {
            return Err(Error::invalid(format!(
                "quantum efficiency must lie in [0, 1], got {}",
                self.quantum_efficiency
            )));
        }
        if !(self.gate_rate > 0.0 && self.gate_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "gate rate must be positive and finite, got {}",
                self.gate_rate
            )));
        }
        if !(self.gate_width > 0.0 && self.gate_width * self.gate_rate <= 1.0) {
            return Err(Error::invalid(format!(
                "gate width must be positive with gate_width·gate_rate <= 1, got {} s at {} Hz",
                self.gate_width, self.gate_rate
            )));
        }
        if !(0.0..1.0).contains(&self.dark_per_gate) {
            return Err(Error::invalid(format!(
                "dark-count probability per gate must lie in [0, 1), got {}",
                self.dark_per_gate
            )));
        }
        if !(self.dead_time >= 0.0 && self.dead_time.is_finite()) {
            return Err(Error::invalid(format!(
                "dead time must be nonnegative and finite, got {}",
                self.dead_time
            )));
        }
        Ok(())
    }

    /// Number of gates blanked after each detection:
    /// `d = round(dead_time·gate_rate)`.
    pub fn blanked_gates_per_detection(&self) -> u64 {
        (self.dead_time * self.gate_rate).round() as u64
    }
}

/// Collapsed per-channel efficiencies consumed by the rate formulas.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EfficiencyStack {
    /// Overall photon detection efficiency η = η_couple·η_f·η_QE.
    pub eta: f64,
    /// Active-gate fraction η_gate in (0, 1].
    pub eta_gate: f64,
}

impl EfficiencyStack {
    /// Builds the stack for a detector with the given per-active-gate
    /// firing probability (which sets the dead-time duty factor).
    pub fn for_detector(spec: &DetectionSpec, fire_prob_per_gate: f64) -> Result<Self> {
        Ok(EfficiencyStack {
            eta: overall_efficiency(spec)?,
            eta_gate: gate_duty(fire_prob_per_gate, spec)?,
        })
    }
}

/// Expected count rates, all in events per second.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpectedRates {
    /// Signal-channel singles rate.
    pub singles_sig: f64,
    /// Idler-channel singles rate.
    pub singles_idl: f64,
    /// Same-gate coincidence rate (true + accidental).
    pub coinc: f64,
    /// Accidental coincidence rate measured one pump period away.
    pub accidental: f64,
}

/// Overall channel efficiency `η = η_couple·η_f·η_QE`.
pub fn overall_efficiency(spec: &DetectionSpec) -> Result<f64> {
    spec.validate()?;
    let coupling = crate::device_model::db_to_linear(spec.coupling_db)?;
    let filter = crate::device_model::db_to_linear(spec.filter_db)?;
    Ok(coupling * filter * spec.quantum_efficiency)
}

/// Active-gate fraction under dead time: `η_gate = 1/(1 + p·d)`.
///
/// `p` is the firing probability per *active* gate; `d` gates are blanked
/// after each firing, so one renewal cycle spans `1/p` active gates plus
/// `d` blanked ones.
pub fn gate_duty(fire_prob_per_gate: f64, spec: &DetectionSpec) -> Result<f64> {
    spec.validate()?;
    if !(0.0..1.0).contains(&fire_prob_per_gate) {
        return Err(Error::invalid(format!(
            "per-gate firing probability must lie in [0, 1), got {fire_prob_per_gate}"
        )));
    }
    let d = spec.blanked_gates_per_detection() as f64;
    Ok(1.0 / (1.0 + fire_prob_per_gate * d))
}

/// Closed-form expected count rates to first order in the per-gate
/// probabilities.
///
/// With per-gate firing probabilities `p_ch = η_ch·μ_s,ch + μ_d`:
///
/// ```text
/// singles/s     = R · η_gate,ch · p_ch
/// accidentals/s = R · η_gate,s · η_gate,i · p_s · p_i
/// coinc/s       = accidentals/s + R · η_gate,s · η_gate,i · η_s·η_i·μ_c
/// ```
///
/// Fails with [`Error::SaturationRegime`] once either `p_ch` reaches
/// [`SATURATION_LIMIT`]; beyond that the linearization is meaningless.
pub fn analytic_rates(
    mu_c: f64,
    mu_s_sig: f64,
    mu_s_idl: f64,
    eff_sig: &EfficiencyStack,
    eff_idl: &EfficiencyStack,
    dark: f64,
    rep_rate: f64,
) -> Result<ExpectedRates> {
    if !(mu_c >= 0.0 && mu_s_sig >= 0.0 && mu_s_idl >= 0.0 && dark >= 0.0 && rep_rate > 0.0) {
        return Err(Error::invalid(format!(
            "analytic_rates requires nonnegative rates and a positive repetition rate, \
             got mu_c = {mu_c}, mu_s = ({mu_s_sig}, {mu_s_idl}), dark = {dark}, R = {rep_rate}"
        )));
    }
    let p_sig = eff_sig.eta * mu_s_sig + dark;
    let p_idl = eff_idl.eta * mu_s_idl + dark;
    for p in [p_sig, p_idl] {
        if p >= SATURATION_LIMIT {
            return Err(Error::SaturationRegime { prob: p, limit: SATURATION_LIMIT });
        }
    }
    let pair_gate = eff_sig.eta_gate * eff_idl.eta_gate;
    let accidental = rep_rate * pair_gate * p_sig * p_idl;
    Ok(ExpectedRates {
        singles_sig: rep_rate * eff_sig.eta_gate * p_sig,
        singles_idl: rep_rate * eff_idl.eta_gate * p_idl,
        coinc: accidental + rep_rate * pair_gate * eff_sig.eta * eff_idl.eta * mu_c,
        accidental,
    })
}

/// Closed-form coincidence-to-accidental ratio
/// `CAR = 1 + η²μ_c/(ημ_s + μ_d)²`.
///
/// The active-gate fraction cancels between numerator and denominator, so
/// it does not appear; μ_s is the per-channel singles generation rate.
pub fn analytic_car(mu_c: f64, mu_s: f64, dark: f64, eta: f64) -> Result<f64> {
    if !(mu_c >= 0.0 && mu_s >= 0.0 && dark >= 0.0 && (0.0..=1.0).contains(&eta)) {
        return Err(Error::invalid(format!(
            "analytic_car requires nonnegative rates and eta in [0, 1], \
             got mu_c = {mu_c}, mu_s = {mu_s}, dark = {dark}, eta = {eta}"
        )));
    }
    let denom = eta * mu_s + dark;
    if denom <= 0.0 {
        return Err(Error::UndefinedCar(
            "accidental probability eta*mu_s + dark is zero".into(),
        ));
    }
    Ok(1.0 + eta * eta * mu_c / (denom * denom))
}
