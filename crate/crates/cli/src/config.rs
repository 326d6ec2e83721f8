//! TOML experiment configuration.
//!
//! Every physical key carries an explicit SI unit suffix (`_m`, `_s`,
//! `_hz`, `_w`, `_per_w`...), dB-valued keys end in `_db`, and unknown
//! keys are rejected so a typo cannot silently fall back to a default.
//! A config file maps one-to-one onto the library's spec types plus a
//! sweep definition (explicit power list or log grid), the pulse budget
//! per point, the master seed, and the pair-number statistics.

use crate::error::{CliError, Result};
use pairsim_core::detection_chain::DetectionSpec;
use pairsim_core::device_model::WaveguideSpec;
use pairsim_core::montecarlo::{ExperimentSpec, MarginalStatistics};
use pairsim_core::source_model::{ChannelSpec, NoiseModel, PumpSpec};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Complete experiment description as read from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub waveguide: WaveguideConfig,
    pub pump: PumpConfig,
    pub channel: ChannelConfig,
    pub noise: NoiseConfig,
    pub detection: DetectionPair,
    pub sweep: SweepConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WaveguideConfig {
    /// Physical length in meters.
    pub length_m: f64,
    /// Propagation loss in dB per meter.
    pub alpha_db_per_m: f64,
    /// Group index n_g.
    pub group_index: f64,
    /// Phase (material) index n.
    pub phase_index: f64,
    /// Effective nonlinearity in /W/m, slow-light enhancement included.
    pub gamma_eff_per_w_m: f64,
    /// Pump insertion coupling in dB (≤ 0).
    pub coupling_db: f64,
    /// Group index of the loss-reference device: under
    /// `--alpha-scaling proportional-s` the loss is scaled by the ratio
    /// of this device's slowdown to the reference's.
    pub alpha_ref_group_index: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    pub wavelength_m: f64,
    pub rep_rate_hz: f64,
    pub pulse_width_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelConfig {
    pub bandwidth_hz: f64,
    pub detuning_hz: f64,
    pub fwm_half_bandwidth_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// Linear singles coefficient a in μ_s = aP + bP², /W.
    pub linear_coeff_per_w: f64,
    /// Quadratic singles coefficient b, /W².
    pub quadratic_coeff_per_w2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionPair {
    pub signal: DetectionConfig,
    pub idler: DetectionConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectionConfig {
    pub coupling_db: f64,
    pub filter_db: f64,
    pub quantum_efficiency: f64,
    pub gate_rate_hz: f64,
    pub gate_width_s: f64,
    pub dark_per_gate: f64,
    pub dead_time_s: f64,
}

/// Sweep definition: an explicit power list or a log-spaced grid, plus
/// the per-point simulation budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Explicit average pump powers in watts (exclusive with `log_grid`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub powers_w: Option<Vec<f64>>,
    /// Log-spaced grid (exclusive with `powers_w`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub log_grid: Option<LogGrid>,
    /// Pump pulses (= detector gates) per sweep point.
    pub pulses_per_point: u64,
    /// Master seed; per-point seeds derive from it by offset.
    pub seed: u64,
    /// Pair-number statistics: `"poisson"` or `"thermal"`.
    pub statistics: Statistics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogGrid {
    pub min_w: f64,
    pub max_w: f64,
    pub points: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistics {
    Poisson,
    Thermal,
}

impl From<Statistics> for MarginalStatistics {
    fn from(s: Statistics) -> Self {
        match s {
            Statistics::Poisson => MarginalStatistics::Poisson,
            Statistics::Thermal => MarginalStatistics::MultimodeThermal,
        }
    }
}

/// How the waveguide loss responds to slow light.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaScaling {
    /// Use the configured loss as-is.
    #[default]
    Fixed,
    /// Scale the loss by S/S_ref — the pessimistic reading in which
    /// loss grows proportionally to the slowdown.
    ProportionalS,
}

/// Command-line overrides applied on top of a loaded config.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub pulses: Option<u64>,
    pub statistics: Option<Statistics>,
    pub alpha_scaling: AlphaScaling,
}

impl ExperimentConfig {
    /// Reads and fully validates a config file. Parse errors come back
    /// line-anchored; every module invariant is checked up front so a
    /// bad file fails here and not mid-sweep.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    /// Structural validation beyond what serde enforces: a usable sweep
    /// and spec invariants at every sweep power.
    pub fn validate(&self) -> Result<()> {
        let powers = self.resolved_powers()?;
        for &p in &powers {
            let spec = self.to_spec(p, &Overrides::default());
            spec.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        // The loss-scaled variant must be constructible too.
        let scaled = self.waveguide(AlphaScaling::ProportionalS);
        scaled.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }

    /// The sweep powers in strictly increasing order.
    pub fn resolved_powers(&self) -> Result<Vec<f64>> {
        let powers = match (&self.sweep.powers_w, &self.sweep.log_grid) {
            (Some(list), None) => list.clone(),
            (None, Some(grid)) => {
                if grid.points < 1 || !(grid.min_w > 0.0) || !(grid.max_w > grid.min_w) {
                    return Err(CliError::Config(format!(
                        "log_grid needs 0 < min_w < max_w and at least one point, \
                         got min {} max {} points {}",
                        grid.min_w, grid.max_w, grid.points
                    )));
                }
                let n = grid.points as usize;
                (0..n)
                    .map(|i| {
                        if n == 1 {
                            grid.min_w
                        } else {
                            grid.min_w
                                * (grid.max_w / grid.min_w).powf(i as f64 / (n - 1) as f64)
                        }
                    })
                    .collect()
            }
            (Some(_), Some(_)) => {
                return Err(CliError::Config(
                    "sweep defines both powers_w and log_grid; pick one".into(),
                ))
            }
            (None, None) => {
                return Err(CliError::Config(
                    "sweep defines neither powers_w nor log_grid".into(),
                ))
            }
        };
        if powers.is_empty() {
            return Err(CliError::Config("the sweep has no power points".into()));
        }
        if powers.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Config(
                "sweep powers must be strictly increasing".into(),
            ));
        }
        Ok(powers)
    }

    /// The waveguide spec under the requested loss-scaling mode.
    pub fn waveguide(&self, scaling: AlphaScaling) -> WaveguideSpec {
        let w = &self.waveguide;
        let alpha_db = match scaling {
            AlphaScaling::Fixed => w.alpha_db_per_m,
            // S/S_ref at equal phase index is the group-index ratio.
            AlphaScaling::ProportionalS => {
                w.alpha_db_per_m * w.group_index / w.alpha_ref_group_index
            }
        };
        WaveguideSpec {
            length: w.length_m,
            alpha_db,
            group_index: w.group_index,
            phase_index: w.phase_index,
            gamma_eff: w.gamma_eff_per_w_m,
            coupling_db: w.coupling_db,
        }
    }

    pub fn pump(&self, avg_power: f64) -> PumpSpec {
        PumpSpec {
            wavelength: self.pump.wavelength_m,
            avg_power,
            rep_rate: self.pump.rep_rate_hz,
            pulse_width: self.pump.pulse_width_s,
        }
    }

    pub fn channel(&self) -> ChannelSpec {
        ChannelSpec {
            bandwidth_hz: self.channel.bandwidth_hz,
            detuning_hz: self.channel.detuning_hz,
            fwm_half_bandwidth_hz: self.channel.fwm_half_bandwidth_hz,
        }
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            linear_coeff: self.noise.linear_coeff_per_w,
            quadratic_coeff: self.noise.quadratic_coeff_per_w2,
        }
    }

    pub fn detection(&self, which: Channel) -> DetectionSpec {
        let d = match which {
            Channel::Signal => &self.detection.signal,
            Channel::Idler => &self.detection.idler,
        };
        DetectionSpec {
            coupling_db: d.coupling_db,
            filter_db: d.filter_db,
            quantum_efficiency: d.quantum_efficiency,
            gate_rate: d.gate_rate_hz,
            gate_width: d.gate_width_s,
            dark_per_gate: d.dark_per_gate,
            dead_time: d.dead_time_s,
        }
    }

    /// Assembles the complete simulation spec for one sweep point,
    /// applying the command-line overrides.
    pub fn to_spec(&self, avg_power: f64, over: &Overrides) -> ExperimentSpec {
        ExperimentSpec {
            waveguide: self.waveguide(over.alpha_scaling),
            pump: self.pump(avg_power),
            channel: self.channel(),
            noise: self.noise(),
            detection_sig: self.detection(Channel::Signal),
            detection_idl: self.detection(Channel::Idler),
            pulses: over.pulses.unwrap_or(self.sweep.pulses_per_point),
            seed: over.seed.unwrap_or(self.sweep.seed),
            marginal_statistics: over.statistics.unwrap_or(self.sweep.statistics).into(),
        }
    }
}

/// Selects one of the two detection chains.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Signal,
    Idler,
}
