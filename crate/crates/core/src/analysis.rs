//! Estimators and fits that turn raw counts back into physics.
//!
//! The estimators invert the detection chain: net pair rate
//! `μ_c = (D_c − D_c,a) / (R·η²·η_gate,s·η_gate,i)`, net singles rate with
//! dark-count subtraction, the coincidence-to-accidental ratio with Poisson
//! error propagation, and the Zou-Wang-Mandel combination
//!
//! ```text
//! V = (D_c − D_c,a) − 2(D_s − D_s,a + D_i − D_i,a)
//! ```
//!
//! of per-second rates, whose variance treats the six raw counts as
//! independent Poisson variables (an assumption — cross-check against
//! [`empirical_estimate`] over seeds when in doubt). Any classical field
//! obeys V ≤ 0, so V > 0 beyond its uncertainty certifies non-classical
//! correlations.
//!
//! The fitting side provides the two weighted least-squares models used on
//! power sweeps — a pure quadratic `μ = c·P²` and a second-order polynomial
//! `μ = a·P + b·P²` without constant term — plus the inversion of the fitted
//! quadratic coefficient into an effective nonlinearity γ_eff.
//!
//! Estimates may legitimately come out negative on noisy data; they are
//! reported as-is because clamping would bias any fit built on top.

use crate::error::{Error, Result};
use crate::montecarlo::{RawCounts, SelfCorrCounts};
use crate::source_model::{ChannelSpec, PumpSpec};

/// A scalar estimate with its one-standard-deviation uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateWithError {
    /// Central value.
    pub value: f64,
    /// One standard deviation (≥ 0).
    pub sigma: f64,
}

impl EstimateWithError {
    /// Significance `value/σ`; zero when both vanish.
    pub fn significance(&self) -> f64 {
        if self.sigma > 0.0 {
            self.value / self.sigma
        } else {
            0.0
        }
    }
}

/// Which least-squares model produced a [`FitResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// `μ = c·P²` — one coefficient.
    PureQuadratic,
    /// `μ = a·P + b·P²` — two coefficients, no constant term.
    Poly2NoConstant,
}

/// Weighted least-squares result.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// Fitted coefficients as (value, sigma), in model order.
    pub coefficients: Vec<(f64, f64)>,
    /// Weighted L2 norm of the residuals, `sqrt(Σ w·(μ − fit)²)`.
    pub residual_norm: f64,
    /// The fitted model.
    pub model: FitModel,
}

/// One point of a power sweep handed to the fitting routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitPoint {
    /// Average pump power P in watts.
    pub power: f64,
    /// Measured rate μ in photons (or pairs) per pulse.
    pub mu: f64,
    /// One standard deviation of `mu`; a non-positive value means
    /// "unknown" and triggers the unit-weight fallback (all points must
    /// then be unknown).
    pub sigma: f64,
}

/// Net pair generation rate per pulse:
/// `μ_c = ((d_c − d_ca)/duration) / (R·η²·η_gate,s·η_gate,i)`.
///
/// `eta` is the per-channel overall efficiency (squared because two
/// detections make a coincidence); the gate fractions should come from the
/// run's measured active-gate tallies. The result can be negative on noisy
/// data and is returned unclamped.
pub fn net_pair_rate(
    counts: &RawCounts,
    eta: f64,
    eta_gate_sig: f64,
    eta_gate_idl: f64,
    rep_rate: f64,
) -> Result<f64> {
    if !(counts.duration > 0.0) {
        return Err(Error::invalid(format!(
            "run duration must be positive, got {}",
            counts.duration
        )));
    }
    if !(eta > 0.0 && eta_gate_sig > 0.0 && eta_gate_idl > 0.0 && rep_rate > 0.0) {
        return Err(Error::invalid(format!(
            "efficiencies and repetition rate must be positive, got eta = {eta}, \
             eta_gate = ({eta_gate_sig}, {eta_gate_idl}), R = {rep_rate}"
        )));
    }
    let net_rate = (counts.d_c as f64 - counts.d_ca as f64) / counts.duration;
    Ok(net_rate / (rep_rate * eta * eta * eta_gate_sig * eta_gate_idl))
}

/// Net singles generation rate per pulse: subtracts the expected dark
/// counts (`μ_d` per active gate) from the raw tally, then divides by
/// `R·η·η_gate`. Negative results are returned unclamped.
pub fn net_singles_rate(
    n_raw: u64,
    duration: f64,
    eta: f64,
    eta_gate: f64,
    dark: f64,
    rep_rate: f64,
) -> Result<f64> {
    if !(duration > 0.0) {
        return Err(Error::invalid(format!("run duration must be positive, got {duration}")));
    }
    if !(eta > 0.0 && eta_gate > 0.0 && rep_rate > 0.0 && dark >= 0.0) {
        return Err(Error::invalid(format!(
            "net_singles_rate needs positive eta, eta_gate, R and nonnegative dark; \
             got {eta}, {eta_gate}, {rep_rate}, {dark}"
        )));
    }
    let active_gates = eta_gate * rep_rate * duration;
    let net = n_raw as f64 - dark * active_gates;
    Ok(net / (rep_rate * duration * eta * eta_gate))
}

/// Coincidence-to-accidental ratio `d_c/d_ca` with Poisson propagation
/// `σ = CAR·sqrt(1/d_c + 1/d_ca)`.
pub fn car(counts: &RawCounts) -> Result<EstimateWithError> {
    if counts.d_ca == 0 {
        return Err(Error::UndefinedCar("no accidental coincidences recorded".into()));
    }
    let value = counts.d_c as f64 / counts.d_ca as f64;
    let sigma = if counts.d_c == 0 {
        0.0
    } else {
        value * (1.0 / counts.d_c as f64 + 1.0 / counts.d_ca as f64).sqrt()
    };
    Ok(EstimateWithError { value, sigma })
}

/// Zou-Wang-Mandel parameter from the three runs of one data point, with
/// all counts converted to per-second rates first (the runs have different
/// durations):
///
/// ```text
/// V   = (D_c − D_c,a) − 2(D_s − D_s,a + D_i − D_i,a)
/// σ²  = (C_c + C_c,a)/T_p² + 4(C_s + C_s,a)/T_s² + 4(C_i + C_i,a)/T_i²
/// ```
pub fn zwm_v(
    pairs: &RawCounts,
    self_sig: &SelfCorrCounts,
    self_idl: &SelfCorrCounts,
) -> Result<EstimateWithError> {
    for (name, t) in [
        ("pair", pairs.duration),
        ("signal self-correlation", self_sig.duration),
        ("idler self-correlation", self_idl.duration),
    ] {
        if !(t > 0.0) {
            return Err(Error::invalid(format!("{name} run duration must be positive, got {t}")));
        }
    }
    let tp = pairs.duration;
    let (ts, ti) = (self_sig.duration, self_idl.duration);
    let pair_term = (pairs.d_c as f64 - pairs.d_ca as f64) / tp;
    let sig_term = (self_sig.d_self as f64 - self_sig.d_self_a as f64) / ts;
    let idl_term = (self_idl.d_self as f64 - self_idl.d_self_a as f64) / ti;
    let value = pair_term - 2.0 * (sig_term + idl_term);
    let var = (pairs.d_c + pairs.d_ca) as f64 / (tp * tp)
        + 4.0 * (self_sig.d_self + self_sig.d_self_a) as f64 / (ts * ts)
        + 4.0 * (self_idl.d_self + self_idl.d_self_a) as f64 / (ti * ti);
    Ok(EstimateWithError { value, sigma: var.sqrt() })
}

/// Empirical mean and *per-sample* standard deviation of repeated
/// estimates (e.g. V over many seeds) — the cross-check for the Poisson
/// error propagation in [`zwm_v`]. The uncertainty of the mean itself is
/// `sigma/sqrt(n)`.
pub fn empirical_estimate(values: &[f64]) -> Result<EstimateWithError> {
    if values.len() < 2 {
        return Err(Error::invalid(format!(
            "an empirical spread needs at least two values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
    Ok(EstimateWithError { value: mean, sigma: (ss / (n - 1.0)).sqrt() })
}

/// Weighted least squares for `μ = c·P²`:
/// `c = Σ(w·μ·P²)/Σ(w·P⁴)`, `var(c) = 1/Σ(w·P⁴)`, `w = 1/σ²`.
///
/// When no point carries a positive σ the fit falls back to unit weights
/// (the reported coefficient σ then assumes σ_μ = 1 per point and is only
/// meaningful up to scale).
pub fn fit_pure_quadratic(points: &[FitPoint]) -> Result<FitResult> {
    let weights = fit_weights(points)?;
    let mut swp4 = 0.0;
    let mut swmp2 = 0.0;
    for (pt, w) in points.iter().zip(&weights) {
        let p2 = pt.power * pt.power;
        swp4 += w * p2 * p2;
        swmp2 += w * pt.mu * p2;
    }
    if !(swp4 > 0.0) {
        return Err(Error::invalid(
            "degenerate abscissae: fitting μ = c·P² needs at least one nonzero power",
        ));
    }
    let c = swmp2 / swp4;
    let residual_norm = points
        .iter()
        .zip(&weights)
        .map(|(pt, w)| {
            let r = pt.mu - c * pt.power * pt.power;
            w * r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(FitResult {
        coefficients: vec![(c, (1.0 / swp4).sqrt())],
        residual_norm,
        model: FitModel::PureQuadratic,
    })
}

/// Weighted least squares for `μ = a·P + b·P²` (no constant term) via the
/// 2×2 normal equations; coefficient sigmas come from the inverse normal
/// matrix diagonal.
pub fn fit_poly2(points: &[FitPoint]) -> Result<FitResult> {
    let weights = fit_weights(points)?;
    let distinct = {
        let mut powers: Vec<f64> = points.iter().map(|p| p.power).collect();
        powers.sort_by(f64::total_cmp);
        powers.dedup();
        powers.len()
    };
    if distinct < 2 {
        return Err(Error::invalid(
            "fitting μ = a·P + b·P² needs at least two distinct powers",
        ));
    }
    let (mut s11, mut s12, mut s22, mut y1, mut y2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (pt, w) in points.iter().zip(&weights) {
        let p = pt.power;
        s11 += w * p * p;
        s12 += w * p * p * p;
        s22 += w * p * p * p * p;
        y1 += w * pt.mu * p;
        y2 += w * pt.mu * p * p;
    }
    let det = s11 * s22 - s12 * s12;
    if !(det > 0.0) || det <= 1e-14 * s11 * s22 {
        return Err(Error::invalid("singular normal matrix: powers do not separate P from P²"));
    }
    let a = (s22 * y1 - s12 * y2) / det;
    let b = (s11 * y2 - s12 * y1) / det;
    let residual_norm = points
        .iter()
        .zip(&weights)
        .map(|(pt, w)| {
            let r = pt.mu - a * pt.power - b * pt.power * pt.power;
            w * r * r
        })
        .sum::<f64>()
        .sqrt();
    Ok(FitResult {
        coefficients: vec![(a, (s22 / det).sqrt()), (b, (s11 / det).sqrt())],
        residual_norm,
        model: FitModel::Poly2NoConstant,
    })
}

/// Inverts the fitted quadratic coefficient `c = μ_c/P²` into the
/// effective nonlinearity: `γ = sqrt(c/(Δν·Δt)) · R·Δt / L_eff`.
pub fn gamma_from_fit(c: f64, channel: &ChannelSpec, pump: &PumpSpec, l_eff: f64) -> Result<f64> {
    channel.validate()?;
    pump.validate()?;
    if !(c > 0.0) {
        return Err(Error::invalid(format!(
            "inverting the pair-rate formula needs a positive quadratic coefficient, got {c}"
        )));
    }
    if !(l_eff > 0.0) {
        return Err(Error::invalid(format!("effective length must be positive, got {l_eff}")));
    }
    let modes = channel.bandwidth_hz * pump.pulse_width;
    Ok((c / modes).sqrt() * pump.rep_rate * pump.pulse_width / l_eff)
}

/// Resolves the per-point weights: `1/σ²` when sigmas are given, unit
/// weights when none are, an error on a mixture (silently mixing the two
/// regimes would skew the fit).
fn fit_weights(points: &[FitPoint]) -> Result<Vec<f64>> {
    if points.len() < 2 {
        return Err(Error::invalid(format!(
            "a fit needs at least two points, got {}",
            points.len()
        )));
    }
    for pt in points {
        if !(pt.power.is_finite() && pt.mu.is_finite() && pt.power >= 0.0) {
            return Err(Error::invalid(format!(
                "fit points must be finite with nonnegative power, got P = {}, mu = {}",
                pt.power, pt.mu
            )));
        }
    }
    let with_sigma = points.iter().filter(|p| p.sigma > 0.0).count();
    if with_sigma == points.len() {
        Ok(points.iter().map(|p| 1.0 / (p.sigma * p.sigma)).collect())
    } else if with_sigma == 0 {
        Ok(vec![1.0; points.len()])
    } else {
        Err(Error::invalid(
            "either every fit point must carry a positive sigma or none may",
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    fn counts(d_c: u64, d_ca: u64, duration: f64) -> RawCounts {
        RawCounts {
            n_sig: d_c + 1000,
            n_idl: d_c + 1000,
            d_c,
            d_ca,
            active_gates_sig: 0,
            active_gates_idl: 0,
            duration,
        }
    }

    #[test]
    fn net_pair_rate_basics() {
        // Equal coincidences and accidentals → nothing left.
        let eq = counts(500, 500, 10.0);
        assert_eq!(net_pair_rate(&eq, 0.01, 0.9, 0.9, 1e8).unwrap(), 0.0);

        // Doubling the net counts doubles the estimate.
        let one = net_pair_rate(&counts(700, 500, 10.0), 0.01, 0.9, 0.9, 1e8).unwrap();
        let two = net_pair_rate(&counts(900, 500, 10.0), 0.01, 0.9, 0.9, 1e8).unwrap();
        assert_relative_eq!(two, 2.0 * one, max_relative = 1e-12);

        // Noisy data may invert the sign; the estimator reports it as-is.
        let noisy = net_pair_rate(&counts(400, 500, 10.0), 0.01, 0.9, 0.9, 1e8).unwrap();
        assert!(noisy < 0.0);

        assert!(net_pair_rate(&eq, 0.0, 0.9, 0.9, 1e8).is_err());
    }

    #[test]
    fn net_singles_rate_basics() {
        // A tally equal to the expected dark counts nets to zero:
        // active gates = 0.9·1e8·10, dark 7e-6 each.
        let dark_only = (7e-6 * 0.9 * 1e8 * 10.0) as u64;
        let zero = net_singles_rate(dark_only, 10.0, 0.01, 0.9, 7e-6, 1e8).unwrap();
        assert_abs_diff_eq!(zero, 0.0, epsilon = 1e-15);

        // Halving the efficiency doubles the estimate for the same counts.
        let full = net_singles_rate(100_000, 10.0, 0.01, 0.9, 0.0, 1e8).unwrap();
        let half = net_singles_rate(100_000, 10.0, 0.005, 0.9, 0.0, 1e8).unwrap();
        assert_relative_eq!(half, 2.0 * full, max_relative = 1e-12);
    }

    #[test]
    fn car_basics() {
        let unit = car(&counts(400, 400, 1.0)).unwrap();
        assert_eq!(unit.value, 1.0);

        // d_c = 8·d_ca → CAR 8 with Poisson error bars.
        let eight = car(&counts(800, 100, 1.0)).unwrap();
        assert_eq!(eight.value, 8.0);
        assert_relative_eq!(
            eight.sigma,
            8.0 * (1.0 / 800.0f64 + 1.0 / 100.0).sqrt(),
            max_relative = 1e-12
        );

        assert!(matches!(car(&counts(5, 0, 1.0)), Err(crate::Error::UndefinedCar(_))));
    }

    #[test]
    fn zwm_v_hand_computed_point() {
        // Same-gate and offset counts equal everywhere → V = 0.
        let flat = zwm_v(
            &counts(300, 300, 120.0),
            &SelfCorrCounts { d_self: 40, d_self_a: 40, duration: 240.0 },
            &SelfCorrCounts { d_self: 70, d_self_a: 70, duration: 240.0 },
        )
        .unwrap();
        assert_eq!(flat.value, 0.0);
        assert!(flat.sigma > 0.0);

        // Hand-checked rational example: pair run 120 s, self runs 240 s.
        //   V = (1000−400)/120 − 2·((500−450)/240 + (520−480)/240) = 4.25
        //   σ² = 1400/120² + 4·950/240² + 4·1000/240² = 13400/57600
        let v = zwm_v(
            &counts(1000, 400, 120.0),
            &SelfCorrCounts { d_self: 500, d_self_a: 450, duration: 240.0 },
            &SelfCorrCounts { d_self: 520, d_self_a: 480, duration: 240.0 },
        )
        .unwrap();
        assert_relative_eq!(v.value, 4.25, max_relative = 1e-12);
        assert_relative_eq!(v.sigma, (13400.0f64 / 57600.0).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(v.significance(), 4.25 / (13400.0f64 / 57600.0).sqrt(), max_relative = 1e-12);
    }

    #[test]
    fn empirical_estimate_basics() {
        let est = empirical_estimate(&[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(est.value, 2.0, max_relative = 1e-12);
        assert_relative_eq!(est.sigma, 1.0, max_relative = 1e-12);
        assert!(empirical_estimate(&[1.0]).is_err());
    }

    #[test]
    fn pure_quadratic_fit_recovers_exact_data() {
        let points: Vec<FitPoint> = (1..=8)
            .map(|i| {
                let p = i as f64 * 1e-5;
                FitPoint { power: p, mu: p * p, sigma: 0.0 }
            })
            .collect();
        let fit = fit_pure_quadratic(&points).unwrap();
        assert_relative_eq!(fit.coefficients[0].0, 1.0, max_relative = 1e-10);
        assert!(fit.residual_norm < 1e-10);
        assert_eq!(fit.model, FitModel::PureQuadratic);
    }

    #[test]
    fn poly2_fit_recovers_exact_data() {
        let (a, b) = (500.0, 2e5);
        let points: Vec<FitPoint> = (1..=8)
            .map(|i| {
                let p = i as f64 * 5e-5;
                FitPoint { power: p, mu: a * p + b * p * p, sigma: 0.02 * (a * p + b * p * p) }
            })
            .collect();
        let fit = fit_poly2(&points).unwrap();
        assert_relative_eq!(fit.coefficients[0].0, a, max_relative = 1e-9);
        assert_relative_eq!(fit.coefficients[1].0, b, max_relative = 1e-9);

        // Identity-line data keeps the quadratic term at zero.
        let line: Vec<FitPoint> = (1..=6)
            .map(|i| FitPoint { power: i as f64 * 1e-4, mu: i as f64 * 1e-4, sigma: 0.0 })
            .collect();
        let linear = fit_poly2(&line).unwrap();
        assert_relative_eq!(linear.coefficients[0].0, 1.0, max_relative = 1e-8);
        assert_abs_diff_eq!(linear.coefficients[1].0, 0.0, epsilon = 1e-6);

        // Pure quadratic data keeps the linear term at zero.
        let quad: Vec<FitPoint> = (1..=6)
            .map(|i| {
                let p = i as f64 * 1e-4;
                FitPoint { power: p, mu: 3.0 * p * p, sigma: 0.0 }
            })
            .collect();
        let pure = fit_poly2(&quad).unwrap();
        assert_abs_diff_eq!(pure.coefficients[0].0, 0.0, epsilon = 1e-9);
        assert_relative_eq!(pure.coefficients[1].0, 3.0, max_relative = 1e-8);
    }

    #[test]
    fn fits_reject_degenerate_input() {
        let single = vec![FitPoint { power: 1e-4, mu: 1.0, sigma: 1.0 }];
        assert!(fit_pure_quadratic(&single).is_err());

        let same_p = vec![
            FitPoint { power: 1e-4, mu: 1.0, sigma: 1.0 },
            FitPoint { power: 1e-4, mu: 1.1, sigma: 1.0 },
        ];
        assert!(fit_poly2(&same_p).is_err());

        let mixed_sigma = vec![
            FitPoint { power: 1e-4, mu: 1.0, sigma: 1.0 },
            FitPoint { power: 2e-4, mu: 4.0, sigma: 0.0 },
        ];
        assert!(fit_pure_quadratic(&mixed_sigma).is_err());
    }

    #[test]
    fn gamma_inversion_known_points() {
        let pump = PumpSpec {
            wavelength: 1545.35e-9,
            avg_power: 1e-4,
            rep_rate: 100e6,
            pulse_width: 130e-12,
        };
        let channel = ChannelSpec {
            bandwidth_hz: 25e9,
            detuning_hz: 100e9,
            fwm_half_bandwidth_hz: 125e9,
        };
        // c = μ_c/P² from the forward model at γ = 9000 /W/m.
        let c = 2.271609907873e5;
        let gamma = gamma_from_fit(c, &channel, &pump, 3.818792311348e-4).unwrap();
        assert_relative_eq!(gamma, 9000.0, max_relative = 1e-9);

        // The same coefficient read with the shorter effective length of
        // the loss-scaled variant implies a proportionally larger γ.
        let gamma_s = gamma_from_fit(c, &channel, &pump, 2.200237822517e-4).unwrap();
        assert_relative_eq!(gamma_s, 15620.643573, max_relative = 1e-9);
        assert!((gamma_s / 15600.0 - 1.0).abs() < 0.01);

        assert!(gamma_from_fit(-1.0, &channel, &pump, 3.8e-4).is_err());
    }

    proptest! {
        /// Scaling every μ by k scales the quadratic coefficient by k.
        #[test]
        fn pure_quadratic_is_linear_in_mu(k in 0.1..10.0f64, c in 0.1..10.0f64) {
            let base: Vec<FitPoint> = (1..=6)
                .map(|i| {
                    let p = i as f64 * 1e-4;
                    FitPoint { power: p, mu: c * p * p, sigma: 0.01 * c * p * p }
                })
                .collect();
            let scaled: Vec<FitPoint> = base
                .iter()
                .map(|pt| FitPoint { power: pt.power, mu: k * pt.mu, sigma: pt.sigma })
                .collect();
            let c0 = fit_pure_quadratic(&base).unwrap().coefficients[0].0;
            let ck = fit_pure_quadratic(&scaled).unwrap().coefficients[0].0;
            prop_assert!((ck - k * c0).abs() <= 1e-9 * ck.abs());
        }

        /// Quadrupling the quadratic coefficient doubles the extracted γ.
        #[test]
        fn gamma_scales_as_sqrt_c(c in 1e3..1e6f64) {
            let pump = PumpSpec {
                wavelength: 1545.35e-9,
                avg_power: 1e-4,
                rep_rate: 100e6,
                pulse_width: 130e-12,
            };
            let channel = ChannelSpec {
                bandwidth_hz: 25e9,
                detuning_hz: 100e9,
                fwm_half_bandwidth_hz: 125e9,
            };
            let g1 = gamma_from_fit(c, &channel, &pump, 3.8e-4).unwrap();
            let g2 = gamma_from_fit(4.0 * c, &channel, &pump, 3.8e-4).unwrap();
            prop_assert!((g2 - 2.0 * g1).abs() <= 1e-10 * g2.abs());
        }
    }
}
