//! End-to-end closure: simulation → estimators → back to the model input.
//!
//! These tests run the event-driven simulation at inflated efficiency (so
//! counting statistics converge quickly), push the tallies through the
//! estimators, and require the round trip to land on the generation rates
//! the spec was tuned to — within five standard deviations plus an
//! explicit first-order allowance where the estimator itself is a
//! first-order construction.

mod common;

use common::*;
use pairsim_core::analysis::{
    car, fit_pure_quadratic, gamma_from_fit, net_pair_rate, net_singles_rate, FitPoint,
};
use pairsim_core::detection_chain::{analytic_car, analytic_rates, EfficiencyStack};
use pairsim_core::montecarlo::{model_rates, simulate_pairs, MarginalStatistics};

/// The analytic rate chain is a first-order model: its error against the
/// exact per-gate probabilities must shrink linearly with the firing
/// probability.
#[test]
fn analytic_rates_are_first_order_accurate() {
    for (mu_s, dark) in [(0.05, 1e-5), (0.005, 1e-6)] {
        let qe = 0.6;
        let det = bare_detector(qe, dark, 0);
        let eff = EfficiencyStack::for_detector(&det, qe * mu_s + dark).unwrap();
        let rates = analytic_rates(0.0, mu_s, mu_s, &eff, &eff, dark, REP_RATE).unwrap();

        // Exact per-gate probability for a Poisson channel.
        let p_exact = 1.0 - (-qe * mu_s).exp() * (1.0 - dark);
        let p_first = qe * mu_s + dark;
        let rel_singles = (rates.singles_sig / (REP_RATE * p_exact) - 1.0).abs();
        assert!(
            rel_singles <= 0.75 * p_first,
            "singles rate off by {rel_singles:.2e} at p = {p_first:.2e}: \
             not first-order accurate"
        );
        let rel_acc = (rates.accidental / (REP_RATE * p_exact * p_exact) - 1.0).abs();
        assert!(
            rel_acc <= 1.5 * p_first,
            "accidental rate off by {rel_acc:.2e} at p = {p_first:.2e}"
        );
    }
}

/// Pair and singles estimators must invert the detection chain: feeding
/// them simulated tallies recovers the per-pulse generation rates the
/// experiment was tuned to.
#[test]
fn estimators_recover_generation_rates() {
    let (mu_c, mu_n) = (2.2716e-3, 0.05 - 2.2716e-3);
    let qe = 0.2;
    let dark = 1e-5;
    let pulses: u64 = 200_000_000;
    let spec = tuned_spec(
        mu_c,
        mu_n,
        bare_detector(qe, dark, 0),
        bare_detector(qe, dark, 0),
        pulses,
        61,
        MarginalStatistics::Poisson,
    );
    let rates = model_rates(&spec).unwrap();
    let counts = simulate_pairs(&spec).unwrap();

    // Net pair rate: σ from the two Poisson-ish tallies, plus the
    // first-order allowance (the subtraction estimator is exact only to
    // leading order in the per-gate probabilities).
    let eta2 = rates.eta_sig * rates.eta_idl;
    let denominator = counts.duration * REP_RATE * eta2;
    let est = net_pair_rate(&counts, rates.eta_sig, 1.0, 1.0, REP_RATE).unwrap();
    let sigma = ((counts.d_c + counts.d_ca) as f64).sqrt() / denominator;
    let p_gate = qe * rates.mu_s + dark;
    let slack = 1.5 * p_gate * rates.mu_c;
    assert!(
        (est - rates.mu_c).abs() <= 5.0 * sigma + slack,
        "net pair rate {est:.4e} missed mu_c {:.4e} (σ {sigma:.2e})",
        rates.mu_c
    );

    // Net singles rate, same structure.
    let est_s =
        net_singles_rate(counts.n_sig, counts.duration, rates.eta_sig, 1.0, dark, REP_RATE)
            .unwrap();
    let sigma_s = (counts.n_sig as f64).sqrt() / (counts.duration * REP_RATE * rates.eta_sig);
    assert!(
        (est_s - rates.mu_s).abs() <= 5.0 * sigma_s + 0.75 * p_gate * rates.mu_s,
        "net singles rate {est_s:.4e} missed mu_s {:.4e}",
        rates.mu_s
    );

    // The measured CAR agrees with the closed form.
    let measured = car(&counts).unwrap();
    let predicted = analytic_car(rates.mu_c, rates.mu_s, dark, rates.eta_sig).unwrap();
    assert!(
        (measured.value - predicted).abs() <= 5.0 * measured.sigma + 0.05 * (predicted - 1.0),
        "CAR {:.3} ± {:.3} missed the closed form {predicted:.3}",
        measured.value,
        measured.sigma
    );
}

/// A three-point power sweep, pair rates estimated per point, must fit to
/// the quadratic coefficient (and hence the nonlinearity) the experiment
/// was built with.
#[test]
fn power_sweep_fit_recovers_nonlinearity() {
    let (mu_c_ref, mu_n_ref) = (2.0e-3, 0.03);
    let qe = 0.2;
    let dark = 1e-5;
    let base = tuned_spec(
        mu_c_ref,
        mu_n_ref,
        bare_detector(qe, dark, 0),
        bare_detector(qe, dark, 0),
        100_000_000,
        71,
        MarginalStatistics::Poisson,
    );
    // Coefficients are fixed at the reference power; only P varies.
    let c_true = mu_c_ref / (base.pump.avg_power * base.pump.avg_power);

    let mut points = Vec::new();
    for (i, power) in [5e-5, 1e-4, 2e-4].into_iter().enumerate() {
        let mut spec = base;
        spec.pump.avg_power = power;
        spec.seed = 71 + i as u64;
        let rates = model_rates(&spec).unwrap();
        let counts = simulate_pairs(&spec).unwrap();
        let est = net_pair_rate(&counts, rates.eta_sig, 1.0, 1.0, REP_RATE).unwrap();
        let sigma = ((counts.d_c + counts.d_ca) as f64).sqrt()
            / (counts.duration * REP_RATE * rates.eta_sig * rates.eta_idl);
        points.push(FitPoint { power, mu: est, sigma });
    }

    let fit = fit_pure_quadratic(&points).unwrap();
    let (c_fit, c_sigma) = fit.coefficients[0];
    assert!(
        (c_fit - c_true).abs() <= 5.0 * c_sigma + 0.03 * c_true,
        "fitted quadratic coefficient {c_fit:.4e} ± {c_sigma:.4e} missed {c_true:.4e}"
    );

    // Nonlinearity inversion: L_eff = L for the lossless test device.
    let gamma = gamma_from_fit(c_fit, &base.channel, &base.pump, base.waveguide.length).unwrap();
    let rel = (gamma / base.waveguide.gamma_eff - 1.0).abs();
    let rel_band = 5.0 * c_sigma / (2.0 * c_true) + 0.02;
    assert!(
        rel <= rel_band,
        "recovered nonlinearity {gamma:.1} is {rel:.3} away from {}",
        base.waveguide.gamma_eff
    );
}

/// Twice the pulses must give twice the duration exactly and twice every
/// expected tally statistically.
#[test]
fn counts_scale_linearly_with_run_length() {
    let (mu_c, mu_n) = (5e-3, 0.02);
    let make = |pulses: u64, seed: u64| {
        tuned_spec(
            mu_c,
            mu_n,
            bare_detector(0.3, 1e-5, 0),
            bare_detector(0.3, 1e-5, 0),
            pulses,
            seed,
            MarginalStatistics::Poisson,
        )
    };
    let short = simulate_pairs(&make(20_000_000, 81)).unwrap();
    let long = simulate_pairs(&make(40_000_000, 82)).unwrap();

    assert_eq!(short.duration, 20_000_000.0 / REP_RATE);
    assert_eq!(long.duration, 40_000_000.0 / REP_RATE);

    for (label, a, b) in [
        ("signal singles", short.n_sig, long.n_sig),
        ("coincidences", short.d_c, long.d_c),
        ("offset coincidences", short.d_ca, long.d_ca),
    ] {
        let ratio = b as f64 / a as f64;
        let sigma = ratio * (1.0 / a as f64 + 1.0 / b as f64).sqrt();
        assert!(
            (ratio - 2.0).abs() <= 5.0 * sigma,
            "{label}: doubling pulses scaled counts by {ratio:.4} ± {sigma:.4}"
        );
    }
}
