//! Shared builders and test-side oracles for the integration tests.
//!
//! Everything here is deliberately independent of the library internals:
//! photon-number distributions are enumerated term by term and compared
//! against the event-driven simulation through its public API only.

// Each integration test binary compiles this module and uses its own
// subset of the helpers.
#![allow(dead_code)]

use pairsim_core::detection_chain::DetectionSpec;
use pairsim_core::device_model::WaveguideSpec;
use pairsim_core::montecarlo::{ExperimentSpec, MarginalStatistics};
use pairsim_core::source_model::{ChannelSpec, NoiseModel, PumpSpec};

/// Repetition rate shared by all synthetic test configurations.
pub const REP_RATE: f64 = 100e6;
/// Pulse width; with the 25 GHz channel this gives 3.25 time-bandwidth
/// modes, i.e. M = 3 for the multimode-thermal marginal.
pub const PULSE_WIDTH: f64 = 130e-12;
pub const BANDWIDTH: f64 = 25e9;

/// A detection chain with no passive losses: gate synchronized to the
/// pump, efficiency = quantum efficiency, configurable dark counts and
/// dead time (in gates).
pub fn bare_detector(quantum_efficiency: f64, dark_per_gate: f64, dead_gates: u64) -> DetectionSpec {
    DetectionSpec {
        coupling_db: 0.0,
        filter_db: 0.0,
        quantum_efficiency,
        gate_rate: REP_RATE,
        gate_width: 1e-9,
        dark_per_gate,
        dead_time: dead_gates as f64 / REP_RATE,
    }
}

/// A synthetic experiment tuned so the forward model produces exactly the
/// requested per-pulse pair number `mu_c` and noise-only rate `mu_n`
/// (lossless waveguide, so the nonlinearity is solved from the pair-rate
/// formula; the linear noise coefficient from `mu_n`).
pub fn tuned_spec(
    mu_c: f64,
    mu_n: f64,
    det_sig: DetectionSpec,
    det_idl: DetectionSpec,
    pulses: u64,
    seed: u64,
    marginal_statistics: MarginalStatistics,
) -> ExperimentSpec {
    let avg_power = 1e-4;
    let pump = PumpSpec {
        wavelength: 1550e-9,
        avg_power,
        rep_rate: REP_RATE,
        pulse_width: PULSE_WIDTH,
    };
    let channel = ChannelSpec {
        bandwidth_hz: BANDWIDTH,
        detuning_hz: 0.0,
        fwm_half_bandwidth_hz: 125e9,
    };
    let length = 420e-6;
    let peak = avg_power / (REP_RATE * PULSE_WIDTH);
    let modes_raw = BANDWIDTH * PULSE_WIDTH;
    // Invert μ_c = (Δν·Δt)·(γ·P_peak·L_eff)² with L_eff = L (zero loss).
    let gamma_eff = if mu_c > 0.0 { (mu_c / modes_raw).sqrt() / (peak * length) } else { 0.0 };
    // Total singles aP + bP² must come out to μ_n + μ_c.
    let noise = NoiseModel {
        linear_coeff: mu_n / avg_power,
        quadratic_coeff: if mu_c > 0.0 { mu_c / (avg_power * avg_power) } else { 0.0 },
    };
    ExperimentSpec {
        waveguide: WaveguideSpec {
            length,
            alpha_db: 0.0,
            group_index: 38.0,
            phase_index: 2.6,
            gamma_eff,
            coupling_db: -9.0,
        },
        pump,
        channel,
        noise,
        detection_sig: det_sig,
        detection_idl: det_idl,
        pulses,
        seed,
        marginal_statistics,
    }
}

/// Poisson probability mass `e^{−μ}·μⁿ/n!`, built up iteratively.
pub fn poisson_pmf(n: u64, mu: f64) -> f64 {
    let mut p = (-mu).exp();
    for k in 1..=n {
        p *= mu / k as f64;
    }
    p
}

/// Negative-binomial probability mass for the sum of `m` equal thermal
/// modes of total mean `mu`: `C(n+m−1, n)·(1+r)^{−m}·(r/(1+r))ⁿ`, r = μ/m.
pub fn nb_pmf(n: u64, mu: f64, m: u64) -> f64 {
    let r = mu / m as f64;
    let w = r / (1.0 + r);
    let mut p = (1.0 + r).powi(-(m as i32));
    for k in 0..n {
        p *= (k + m) as f64 / (k + 1) as f64 * w;
    }
    p
}

/// Brute-force expectation `Σ_n pmf(n)·keepⁿ` — the probability that none
/// of `n` photons survives an independent thinning with survival
/// probability `1 − keep`. Truncated where the tail is far below f64
/// resolution for the means used in these tests.
pub fn enumerated_silence(pmf: impl Fn(u64) -> f64, keep: f64) -> f64 {
    (0..=220).map(|n| pmf(n) * keep.powi(n as i32)).sum()
}

/// Standard deviation of the offset (+1 gate) coincidence count over
/// `gates` i.i.d. gates: the indicators `A_{g−1}·B_g` of neighbouring
/// gates share one gate, contributing covariance `p_a·p11·p_b − p²`.
pub fn offset_sigma(gates: f64, p_a: f64, p_b: f64, p11: f64) -> f64 {
    let p = p_a * p_b;
    let var_per_gate = p * (1.0 - p) + 2.0 * (p_a * p11 * p_b - p * p);
    (gates * var_per_gate).sqrt()
}

/// Binomial standard deviation for a per-gate probability.
pub fn binomial_sigma(gates: f64, p: f64) -> f64 {
    (gates * p * (1.0 - p)).sqrt()
}
