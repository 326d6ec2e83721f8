//! The four subcommands as library functions.
//!
//! Each command returns structured data (the binary prints it), so the
//! integration and acceptance tests can call the exact code path the
//! executable runs without scraping stdout.

use crate::config::{AlphaScaling, Channel, ExperimentConfig, Overrides};
use crate::error::{CliError, Result};
use pairsim_core::analysis::{
    car, fit_poly2, fit_pure_quadratic, gamma_from_fit, net_pair_rate, net_singles_rate, zwm_v,
    FitPoint, FitResult,
};
use pairsim_core::detection_chain::gate_duty;
use pairsim_core::montecarlo::{model_rates, simulate_pairs, zwm_run, ExperimentSpec, RawCounts};
use pairsim_core::source_model::{pair_efficiency, peak_power};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;

const SPEED_OF_LIGHT: f64 = 299_792_458.0;

// ---------------------------------------------------------------------------
// device
// ---------------------------------------------------------------------------

/// Derived device parameters, plus the generation-efficiency metric that
/// normalizes the pair rate by peak power squared, length squared and
/// filter bandwidth (pairs/pulse/W²/m²/nm).
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceReport {
    pub alpha_db_per_m: f64,
    pub alpha_linear_per_m: f64,
    pub effective_length_m: f64,
    pub slowdown: f64,
    pub gamma_eff_per_w_m: f64,
    pub eta_sig: f64,
    pub eta_idl: f64,
    /// Gate duty factor if only dark counts fired the detector.
    pub eta_gate_dark_sig: f64,
    pub eta_gate_dark_idl: f64,
    /// Pair rate at the first sweep power, per pulse.
    pub mu_c_first_power: f64,
    pub first_power_w: f64,
    /// Filter bandwidth converted to wavelength units at the pump.
    pub bandwidth_nm: f64,
    pub pair_metric: f64,
}

pub fn cmd_device(config: &ExperimentConfig, scaling: AlphaScaling) -> Result<DeviceReport> {
    let powers = config.resolved_powers()?;
    let over = Overrides { alpha_scaling: scaling, ..Overrides::default() };
    let spec = config.to_spec(powers[0], &over);
    let derived = spec.waveguide.derive().map_err(|e| CliError::Config(e.to_string()))?;
    let rates = model_rates(&spec).map_err(|e| CliError::Config(e.to_string()))?;

    let duty = |which: Channel| -> Result<f64> {
        let det = config.detection(which);
        gate_duty(det.dark_per_gate, &det).map_err(|e| CliError::Config(e.to_string()))
    };

    // Δλ = λ²·Δν/c around the pump wavelength, in nm.
    let lambda = spec.pump.wavelength;
    let bandwidth_nm = lambda * lambda * spec.channel.bandwidth_hz / SPEED_OF_LIGHT * 1e9;
    let p_peak = peak_power(&spec.pump).map_err(CliError::runtime)?;
    let pair_metric = pair_efficiency(rates.mu_c, p_peak, spec.waveguide.length, bandwidth_nm)
        .map_err(CliError::runtime)?;

    Ok(DeviceReport {
        alpha_db_per_m: spec.waveguide.alpha_db,
        alpha_linear_per_m: derived.alpha_linear,
        effective_length_m: derived.effective_length,
        slowdown: derived.slowdown,
        gamma_eff_per_w_m: spec.waveguide.gamma_eff,
        eta_sig: rates.eta_sig,
        eta_idl: rates.eta_idl,
        eta_gate_dark_sig: duty(Channel::Signal)?,
        eta_gate_dark_idl: duty(Channel::Idler)?,
        mu_c_first_power: rates.mu_c,
        first_power_w: powers[0],
        bandwidth_nm,
        pair_metric,
    })
}

impl fmt::Display for DeviceReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "propagation loss        {:.4} dB/m  ({:.6e} /m)", self.alpha_db_per_m, self.alpha_linear_per_m)?;
        writeln!(f, "effective length        {:.6e} m", self.effective_length_m)?;
        writeln!(f, "slowdown factor S       {:.6}", self.slowdown)?;
        writeln!(f, "nonlinearity gamma_eff  {:.4} /W/m", self.gamma_eff_per_w_m)?;
        writeln!(f, "channel efficiency      signal {:.6e}   idler {:.6e}", self.eta_sig, self.eta_idl)?;
        writeln!(f, "gate duty (dark only)   signal {:.6}   idler {:.6}", self.eta_gate_dark_sig, self.eta_gate_dark_idl)?;
        writeln!(f, "pair rate at P = {:.3e} W   {:.6e} pairs/pulse", self.first_power_w, self.mu_c_first_power)?;
        writeln!(f, "filter bandwidth        {:.6} nm", self.bandwidth_nm)?;
        write!(f, "generation efficiency   {:.6e} pairs/pulse/W\u{b2}/m\u{b2}/nm", self.pair_metric)
    }
}

// ---------------------------------------------------------------------------
// sweep / zwm
// ---------------------------------------------------------------------------

/// One sweep point: truth from the forward model, raw tallies, estimates
/// with uncertainties, and (for the witness command) the self-correlation
/// tallies and V. Columns absent from a plain sweep stay empty in the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub power_w: f64,
    pub mu_c_true: f64,
    pub mu_s_true: f64,
    pub n_sig: u64,
    pub n_idl: u64,
    pub d_c: u64,
    pub d_ca: u64,
    pub active_gates_sig: u64,
    pub active_gates_idl: u64,
    pub duration_s: f64,
    pub mu_c_est: f64,
    pub mu_c_sigma: f64,
    pub mu_s_est: f64,
    pub mu_s_sigma: f64,
    pub car_mc: Option<f64>,
    pub car_sigma: Option<f64>,
    pub car_analytic: Option<f64>,
    pub d_self_sig: Option<u64>,
    pub d_self_sig_a: Option<u64>,
    pub d_self_idl: Option<u64>,
    pub d_self_idl_a: Option<u64>,
    pub v: Option<f64>,
    pub v_sigma: Option<f64>,
    pub v_significance: Option<f64>,
}

/// Shared per-point pipeline: simulate the coincidence run and push the
/// tallies through the estimators. The gate-duty factors entering the
/// estimators are the run's measured active-gate fractions, not the
/// renewal formula.
fn run_point(spec: &ExperimentSpec) -> Result<(SweepResult, RawCounts)> {
    let rates = model_rates(spec).map_err(CliError::runtime)?;
    let counts = simulate_pairs(spec).map_err(CliError::runtime)?;

    let duty_sig = counts.active_gates_sig as f64 / spec.pulses as f64;
    let duty_idl = counts.active_gates_idl as f64 / spec.pulses as f64;
    let rep_rate = spec.pump.rep_rate;
    // One per-channel efficiency for the pair estimator; the geometric
    // mean is exact for the symmetric chains of the bundled configs.
    let eta = (rates.eta_sig * rates.eta_idl).sqrt();

    let mu_c_est =
        net_pair_rate(&counts, eta, duty_sig, duty_idl, rep_rate).map_err(CliError::runtime)?;
    let pair_scale =
        counts.duration * rep_rate * rates.eta_sig * rates.eta_idl * duty_sig * duty_idl;
    let mu_c_sigma = ((counts.d_c + counts.d_ca) as f64).sqrt() / pair_scale;

    let dark_sig = spec.detection_sig.dark_per_gate;
    let mu_s_est =
        net_singles_rate(counts.n_sig, counts.duration, rates.eta_sig, duty_sig, dark_sig, rep_rate)
            .map_err(CliError::runtime)?;
    let mu_s_sigma =
        (counts.n_sig as f64).sqrt() / (counts.duration * rep_rate * rates.eta_sig * duty_sig);

    let (car_mc, car_sigma) = match car(&counts) {
        Ok(est) => (Some(est.value), Some(est.sigma)),
        Err(pairsim_core::Error::UndefinedCar(_)) => (None, None),
        Err(e) => return Err(CliError::runtime(e)),
    };
    let car_analytic =
        match pairsim_core::detection_chain::analytic_car(rates.mu_c, rates.mu_s, dark_sig, eta) {
            Ok(v) => Some(v),
            Err(pairsim_core::Error::UndefinedCar(_)) => None,
            Err(e) => return Err(CliError::runtime(e)),
        };

    let row = SweepResult {
        power_w: spec.pump.avg_power,
        mu_c_true: rates.mu_c,
        mu_s_true: rates.mu_s,
        n_sig: counts.n_sig,
        n_idl: counts.n_idl,
        d_c: counts.d_c,
        d_ca: counts.d_ca,
        active_gates_sig: counts.active_gates_sig,
        active_gates_idl: counts.active_gates_idl,
        duration_s: counts.duration,
        mu_c_est,
        mu_c_sigma,
        mu_s_est,
        mu_s_sigma,
        car_mc,
        car_sigma,
        car_analytic,
        d_self_sig: None,
        d_self_sig_a: None,
        d_self_idl: None,
        d_self_idl_a: None,
        v: None,
        v_sigma: None,
        v_significance: None,
    };
    Ok((row, counts))
}

/// Builds the spec for sweep point `index`, deriving the point's seed
/// from the master seed so points are independent but reproducible.
fn point_spec(config: &ExperimentConfig, power: f64, index: usize, over: &Overrides) -> ExperimentSpec {
    let mut spec = config.to_spec(power, over);
    spec.seed = spec.seed.wrapping_add(index as u64);
    spec
}

/// Runs the coincidence measurement at every sweep power.
pub fn cmd_sweep(config: &ExperimentConfig, over: &Overrides) -> Result<Vec<SweepResult>> {
    let powers = config.resolved_powers()?;
    let mut rows = Vec::with_capacity(powers.len());
    for (i, &p) in powers.iter().enumerate() {
        let spec = point_spec(config, p, i, over);
        let (row, _) = run_point(&spec)
            .map_err(|e| annotate_power(e, p))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Runs the full witness measurement (coincidence run plus both
/// self-correlation runs) at every sweep power.
pub fn cmd_zwm(config: &ExperimentConfig, over: &Overrides) -> Result<Vec<SweepResult>> {
    let powers = config.resolved_powers()?;
    let mut rows = Vec::with_capacity(powers.len());
    for (i, &p) in powers.iter().enumerate() {
        let spec = point_spec(config, p, i, over);
        let run = (|| -> Result<SweepResult> {
            let (mut row, pair_counts) = run_point(&spec)?;
            let full = zwm_run(&spec).map_err(CliError::runtime)?;
            // The pair leg of the witness is the same stream as the plain
            // coincidence run; reuse its tallies rather than re-simulating.
            debug_assert_eq!(full.pairs, pair_counts);
            let v = zwm_v(&full.pairs, &full.self_sig, &full.self_idl)
                .map_err(CliError::runtime)?;
            row.d_self_sig = Some(full.self_sig.d_self);
            row.d_self_sig_a = Some(full.self_sig.d_self_a);
            row.d_self_idl = Some(full.self_idl.d_self);
            row.d_self_idl_a = Some(full.self_idl.d_self_a);
            row.v = Some(v.value);
            row.v_sigma = Some(v.sigma);
            row.v_significance = Some(v.significance());
            Ok(row)
        })();
        rows.push(run.map_err(|e| annotate_power(e, p))?);
    }
    Ok(rows)
}

fn annotate_power(err: CliError, power: f64) -> CliError {
    match err {
        CliError::Runtime(msg) => CliError::Runtime(format!("at P = {power:e} W: {msg}")),
        other => other,
    }
}

/// Writes sweep/witness rows as CSV: header row, comma separation,
/// shortest-round-trip decimal floats, empty cells for absent values.
pub fn write_rows(rows: &[SweepResult], out: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(out)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", out.display())))?;
    for row in rows {
        writer
            .serialize(row)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", out.display())))?;
    }
    writer
        .flush()
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", out.display())))
}

// ---------------------------------------------------------------------------
// fit
// ---------------------------------------------------------------------------

/// Which least-squares model `fit` runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModelChoice {
    PureQuadratic,
    Poly2,
}

/// Structured fit output; the binary prints its `Display` form.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub fit: FitResult,
    /// Extracted nonlinearity ± σ, present for pure-quadratic fits when
    /// a device config supplies the inversion context.
    pub gamma: Option<(f64, f64)>,
    pub points: usize,
}

/// Fits one column of a results CSV against power. `sigma_col = None`
/// gives every point unit weight.
pub fn cmd_fit(
    csv_path: &Path,
    model: FitModelChoice,
    x_col: &str,
    y_col: &str,
    sigma_col: Option<&str>,
    device_context: Option<(&ExperimentConfig, AlphaScaling)>,
) -> Result<FitReport> {
    let points = read_fit_points(csv_path, x_col, y_col, sigma_col)?;
    let fit = match model {
        FitModelChoice::PureQuadratic => fit_pure_quadratic(&points),
        FitModelChoice::Poly2 => fit_poly2(&points),
    }
    .map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?;

    let gamma = match (model, device_context) {
        (FitModelChoice::PureQuadratic, Some((config, scaling))) => {
            let (c, c_sigma) = fit.coefficients[0];
            let derived = config
                .waveguide(scaling)
                .derive()
                .map_err(|e| CliError::Config(e.to_string()))?;
            let first_power = config.resolved_powers()?[0];
            let g = gamma_from_fit(
                c,
                &config.channel(),
                &config.pump(first_power),
                derived.effective_length,
            )
            .map_err(CliError::runtime)?;
            // γ ∝ sqrt(c), so the relative error halves.
            Some((g, g * c_sigma / (2.0 * c)))
        }
        _ => None,
    };
    Ok(FitReport { fit, gamma, points: points.len() })
}

fn read_fit_points(
    csv_path: &Path,
    x_col: &str,
    y_col: &str,
    sigma_col: Option<&str>,
) -> Result<Vec<FitPoint>> {
    let mut reader = csv::Reader::from_path(csv_path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", csv_path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?
        .clone();
    let index_of = |name: &str| -> Result<usize> {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            CliError::Config(format!(
                "{}: no column named '{name}' (available: {})",
                csv_path.display(),
                headers.iter().collect::<Vec<_>>().join(", ")
            ))
        })
    };
    let xi = index_of(x_col)?;
    let yi = index_of(y_col)?;
    let si = sigma_col.map(index_of).transpose()?;

    let mut points = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| CliError::Config(format!("{}: {e}", csv_path.display())))?;
        let cell = |idx: usize, name: &str| -> Result<f64> {
            let raw = record.get(idx).unwrap_or("");
            raw.trim().parse::<f64>().map_err(|_| {
                CliError::Config(format!(
                    "{}: row {}: column '{name}' has no numeric value (got {raw:?})",
                    csv_path.display(),
                    line + 2
                ))
            })
        };
        points.push(FitPoint {
            power: cell(xi, x_col)?,
            mu: cell(yi, y_col)?,
            sigma: match si {
                Some(idx) => cell(idx, sigma_col.unwrap())?,
                None => 0.0,
            },
        });
    }
    Ok(points)
}

impl fmt::Display for FitReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.fit.model {
            pairsim_core::analysis::FitModel::PureQuadratic => {
                let (c, s) = self.fit.coefficients[0];
                writeln!(f, "model  mu = c*P^2   ({} points)", self.points)?;
                writeln!(f, "c      {c:.8e} \u{b1} {s:.3e}")?;
            }
            pairsim_core::analysis::FitModel::Poly2NoConstant => {
                let (a, sa) = self.fit.coefficients[0];
                let (b, sb) = self.fit.coefficients[1];
                writeln!(f, "model  mu = a*P + b*P^2   ({} points)", self.points)?;
                writeln!(f, "a      {a:.8e} \u{b1} {sa:.3e}")?;
                writeln!(f, "b      {b:.8e} \u{b1} {sb:.3e}")?;
            }
        }
        write!(f, "weighted residual norm  {:.6e}", self.fit.residual_norm)?;
        if let Some((g, gs)) = self.gamma {
            write!(f, "\ngamma_eff  {g:.6} \u{b1} {gs:.3} /W/m")?;
        }
        Ok(())
    }
}
