//! Dead-time handling vs. renewal theory.
//!
//! A detector that fires with probability `p` on each live gate and then
//! blanks the next `d` gates is a renewal process: one cycle is a
//! geometric wait (mean 1/p live gates) plus `d` blanked gates, so
//!
//! ```text
//! fires/gate  = p/(1 + p·d)      active fraction = 1/(1 + p·d)
//! ```
//!
//! exactly in the long-run limit. The first test validates those closed
//! forms against a plain gate-by-gate simulation written here (no shared
//! code with the engine); the second holds the event-driven engine to the
//! same prediction through its public API.

mod common;

use common::*;
use pairsim_core::detection_chain::gate_duty;
use pairsim_core::montecarlo::{simulate_pairs, MarginalStatistics};
use rand::{Rng, SeedableRng};

/// Long-run standard deviation of the number of renewals in `gates`
/// gates: `Var(N) ≈ gates·Var(cycle)/E[cycle]³` with a geometric wait.
fn renewal_fires_sigma(gates: f64, p: f64, d: f64) -> f64 {
    let mean_cycle = 1.0 / p + d;
    let var_cycle = (1.0 - p) / (p * p);
    (gates * var_cycle / mean_cycle.powi(3)).sqrt()
}

/// Dumb reference implementation: walk every gate, fire Bernoulli(p) when
/// live, blank the next `d` gates after each fire.
fn gate_by_gate(p: f64, d: u64, gates: u64, seed: u64) -> (u64, u64) {
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut fires = 0u64;
    let mut blank_until = 0u64;
    let mut blanked = 0u64;
    for g in 0..gates {
        if g < blank_until {
            blanked += 1;
            continue;
        }
        if rng.random::<f64>() < p {
            fires += 1;
            blank_until = g + 1 + d;
        }
    }
    (fires, gates - blanked)
}

#[test]
fn renewal_formula_validated_by_direct_simulation() {
    let gates: u64 = 40_000_000;
    let g = gates as f64;
    for (p, d, seed) in [(1e-3, 1000u64, 3u64), (1e-3, 100, 5), (0.02, 1000, 7), (0.02, 100, 9)] {
        let (fires, active) = gate_by_gate(p, d, gates, seed);
        let df = d as f64;
        let expected_fires = g * p / (1.0 + p * df);
        let sigma = renewal_fires_sigma(g, p, df);
        let dev = (fires as f64 - expected_fires).abs();
        assert!(
            dev <= 5.0 * sigma,
            "renewal fires at p = {p}, d = {d}: got {fires}, expected {expected_fires:.0} ± {sigma:.0}"
        );
        // Every fire blanks d gates (the last one may be clipped by the
        // end of the run), so the active tally is locked to the fires.
        let expected_active = g / (1.0 + p * df);
        let dev_active = (active as f64 - expected_active).abs();
        assert!(
            dev_active <= 5.0 * df * sigma + df,
            "renewal active gates at p = {p}, d = {d}: got {active}, expected {expected_active:.0}"
        );
    }
}

#[test]
fn engine_dead_time_matches_renewal_prediction() {
    // Noise-only Poisson channels (the source is off), 10 µs dead time at
    // a 100 MHz gate rate = 1000 blanked gates per detection. The firing
    // probability is pushed to p·d ≈ 1.7, deep in the throttled regime.
    let mu_n = 2.125e-3 / 0.8;
    let dark = 1e-5;
    let dead_gates = 1000u64;
    let pulses: u64 = 40_000_000;
    let spec = tuned_spec(
        0.0,
        mu_n,
        bare_detector(0.8, dark, dead_gates),
        bare_detector(0.8, dark, dead_gates),
        pulses,
        51,
        MarginalStatistics::Poisson,
    );
    let counts = simulate_pairs(&spec).unwrap();

    // Exact per-live-gate firing probability for a Poisson channel.
    let p = 1.0 - (-0.8 * mu_n).exp() * (1.0 - dark);
    let (g, d) = (pulses as f64, dead_gates as f64);
    assert!(p * d > 1.5, "test must probe a strongly throttled detector");

    let sigma = renewal_fires_sigma(g, p, d);
    for (label, fires, active) in [
        ("signal", counts.n_sig, counts.active_gates_sig),
        ("idler", counts.n_idl, counts.active_gates_idl),
    ] {
        let expected_fires = g * p / (1.0 + p * d);
        let dev = (fires as f64 - expected_fires).abs();
        assert!(
            dev <= 5.0 * sigma,
            "{label} fires: got {fires}, expected {expected_fires:.0} ± {sigma:.0}"
        );

        // Blanked gates are exactly d per registration except for a fire
        // within the last d gates of the run.
        let blanked = pulses - active;
        assert!(
            blanked >= (fires - 1) * dead_gates && blanked <= fires * dead_gates,
            "{label}: {blanked} blanked gates inconsistent with {fires} registrations"
        );

        // And the active fraction is the gate-duty factor the analytic
        // chain predicts from the same firing probability.
        let duty = gate_duty(p, &spec.detection_sig).unwrap();
        let dev_active = (active as f64 - g * duty).abs();
        assert!(
            dev_active <= 5.0 * d * sigma + d,
            "{label} active gates: got {active}, expected {:.0}",
            g * duty
        );
    }
}
