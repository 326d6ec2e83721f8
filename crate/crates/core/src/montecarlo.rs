//! Stochastic per-pulse simulation of the full experiment.
//!
//! Every pump pulse opens one detector gate per channel. Within a gate the
//! photon counts are: a pair number `N` (Poisson, or negative-binomial for a
//! multimode-thermal marginal), whose two photons go one to each channel,
//! plus independent Poisson noise photons per channel; each photon is then
//! detected with its channel's overall efficiency, and each detector may
//! also fire from a dark count. The simulation never draws the photons
//! individually: for a gate it needs only the *joint firing pattern* of the
//! two detectors, whose exact four-outcome distribution follows from the
//! probability generating function (PGF) of the photon numbers:
//!
//! ```text
//! P(neither fires) ∝ G_N((1−e_s)(1−e_i)) · exp(−μ_n,s·e_s − μ_n,i·e_i)
//! P(sig silent)    ∝ G_N(1−e_s)          · exp(−μ_n,s·e_s)
//! ```
//!
//! (dark-count survival factors `1−μ_d` multiply each silent detector).
//! This is equivalent in law to drawing every photon explicitly, including
//! all multi-pair contributions to accidental coincidences.
//!
//! Gates are independent and identically distributed, so the simulation is
//! event-driven: it draws the geometric gap to the next gate in which at
//! least one detector *triggers*, then the conditional outcome. Dead time
//! is applied on top — a registered detection blanks the next
//! `round(dead_time·gate_rate)` gates of that detector, and triggers that
//! land on a blanked gate are discarded. Coincidences are tallied same-gate
//! (`d_c`) and at a +1-gate offset (`d_ca`, the accidental estimate one
//! pump period away).
//!
//! Reproducibility: all randomness comes from one ChaCha12 stream per run,
//! derived deterministically from the master seed and a per-run stream tag,
//! so identical spec + seed gives bit-identical counts and the three runs
//! of a ZWM measurement are mutually independent.

use crate::detection_chain::{overall_efficiency, DetectionSpec};
use crate::device_model::{db_to_linear, WaveguideSpec};
use crate::error::{Error, Result};
use crate::source_model::{
    noise_only_rate, pair_rate, peak_power, singles_rate, ChannelSpec, NoiseModel, PumpSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Photon-number statistics of the pair-source marginal.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarginalStatistics {
    /// Poisson pair number — the many-mode limit.
    Poisson,
    /// Negative-binomial pair number with `M = round(Δν·Δt)` thermal modes
    /// (`g²(0) = 1 + 1/M`).
    MultimodeThermal,
}

/// Complete description of one simulated experiment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExperimentSpec {
    /// The pair-generating waveguide.
    pub waveguide: WaveguideSpec,
    /// Pulsed pump driving it.
    pub pump: PumpSpec,
    /// Signal/idler filter channel.
    pub channel: ChannelSpec,
    /// Noise-photon polynomial shared by both channels.
    pub noise: NoiseModel,
    /// Signal-channel detection chain.
    pub detection_sig: DetectionSpec,
    /// Idler-channel detection chain.
    pub detection_idl: DetectionSpec,
    /// Number of pump pulses (= gates) in a pair run.
    pub pulses: u64,
    /// Master seed; all random streams derive from it.
    pub seed: u64,
    /// Pair-number statistics.
    pub marginal_statistics: MarginalStatistics,
}

impl ExperimentSpec {
    /// Validates every component plus the cross-cutting requirements:
    /// at least one pulse, and detector gates synchronized to the pump.
    pub fn validate(&self) -> Result<()> {
        self.waveguide.validate()?;
        self.pump.validate()?;
        self.channel.validate()?;
        self.noise.validate()?;
        self.detection_sig.validate()?;
        self.detection_idl.validate()?;
        if self.pulses == 0 {
            return Err(Error::invalid("a run needs at least one pulse"));
        }
        for (name, det) in [("signal", &self.detection_sig), ("idler", &self.detection_idl)] {
            let rel = (det.gate_rate - self.pump.rep_rate).abs() / self.pump.rep_rate;
            if rel > 1e-9 {
                return Err(Error::invalid(format!(
                    "{name} detector gates at {} Hz are not synchronized to the pump \
                     repetition rate {} Hz",
                    det.gate_rate, self.pump.rep_rate
                )));
            }
        }
        Ok(())
    }
}

/// Counters (plus wall-clock duration) from one coincidence (pair) run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawCounts {
    /// Raw signal-channel singles.
    pub n_sig: u64,
    /// Raw idler-channel singles.
    pub n_idl: u64,
    /// Same-gate coincidences.
    pub d_c: u64,
    /// Accidental coincidences: signal at gate g, idler at gate g+1.
    pub d_ca: u64,
    /// Gates during which the signal detector was not blanked.
    pub active_gates_sig: u64,
    /// Gates during which the idler detector was not blanked.
    pub active_gates_idl: u64,
    /// Run duration in seconds (`pulses / rep_rate`).
    pub duration: f64,
}

/// Counters from one 50/50-split self-correlation run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfCorrCounts {
    /// Same-gate coincidences between the two split arms.
    pub d_self: u64,
    /// Offset (+1 gate) coincidences between the arms.
    pub d_self_a: u64,
    /// Run duration in seconds (twice the pair-run duration).
    pub duration: f64,
}

/// Which output port feeds the 50/50 splitter in a self-correlation run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelfCorrChannel {
    /// Split the signal port.
    Signal,
    /// Split the idler port.
    Idler,
}

/// The three measurements of one ZWM data point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZwmCounts {
    /// Signal-idler coincidence run.
    pub pairs: RawCounts,
    /// Signal-port self-correlation run.
    pub self_sig: SelfCorrCounts,
    /// Idler-port self-correlation run.
    pub self_idl: SelfCorrCounts,
}

/// Per-pulse generation rates and channel efficiencies implied by a spec.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelRates {
    /// Mean pair number per pulse μ_c.
    pub mu_c: f64,
    /// Total singles generation per pulse per channel μ_s.
    pub mu_s: f64,
    /// Noise-only generation per pulse per channel μ_n = max(μ_s − μ_c, 0).
    pub mu_n: f64,
    /// Overall signal-channel efficiency.
    pub eta_sig: f64,
    /// Overall idler-channel efficiency.
    pub eta_idl: f64,
    /// Thermal mode count `M = round(Δν·Δt)`, clamped to at least one.
    pub modes: f64,
}

/// Derives the generation rates and efficiencies a simulation (or an
/// analytic prediction) needs from an experiment spec.
pub fn model_rates(spec: &ExperimentSpec) -> Result<ModelRates> {
    spec.validate()?;
    let derived = spec.waveguide.derive()?;
    let p_peak = peak_power(&spec.pump)?;
    let mu_c = pair_rate(
        spec.waveguide.gamma_eff,
        p_peak,
        derived.effective_length,
        &spec.channel,
        &spec.pump,
    )?;
    let mu_s = singles_rate(mu_c, &spec.noise, spec.pump.avg_power)?;
    Ok(ModelRates {
        mu_c,
        mu_s,
        mu_n: noise_only_rate(mu_s, mu_c),
        eta_sig: overall_efficiency(&spec.detection_sig)?,
        eta_idl: overall_efficiency(&spec.detection_idl)?,
        modes: (spec.channel.bandwidth_hz * spec.pump.pulse_width).round().max(1.0),
    })
}

/// Simulates one coincidence run: both channels watched, same-gate and
/// +1-offset coincidences tallied, dead time applied per detector.
pub fn simulate_pairs(spec: &ExperimentSpec) -> Result<RawCounts> {
    let rates = model_rates(spec)?;
    let pgf = pair_number_pgf(spec, &rates);
    let pmf = TriggerPmf::pair_run(
        &pgf,
        rates.eta_sig,
        rates.eta_idl,
        rates.mu_n,
        rates.mu_n,
        spec.detection_sig.dark_per_gate,
        spec.detection_idl.dark_per_gate,
    );
    let mut rng = stream_rng(spec.seed, STREAM_PAIRS);
    let joint = run_gates(
        &pmf,
        spec.pulses,
        spec.detection_sig.blanked_gates_per_detection(),
        spec.detection_idl.blanked_gates_per_detection(),
        &mut rng,
    );
    Ok(RawCounts {
        n_sig: joint.fires_a,
        n_idl: joint.fires_b,
        d_c: joint.same_gate,
        d_ca: joint.offset,
        active_gates_sig: spec.pulses - joint.blanked_a,
        active_gates_idl: spec.pulses - joint.blanked_b,
        duration: spec.pulses as f64 / spec.pump.rep_rate,
    })
}

/// Simulates one self-correlation run: the chosen port is split 50/50 onto
/// two detectors that share the port's detection parameters. Runs twice as
/// many pulses as a pair run (the standard protocol doubles the
/// self-correlation measurement time).
pub fn simulate_selfcorr(spec: &ExperimentSpec, channel: SelfCorrChannel) -> Result<SelfCorrCounts> {
    let rates = model_rates(spec)?;
    let det = match channel {
        SelfCorrChannel::Signal => &spec.detection_sig,
        SelfCorrChannel::Idler => &spec.detection_idl,
    };
    // Coupling and filter sit before the splitter; each arm then carries a
    // 50 % routing factor and the detector quantum efficiency.
    let optics = db_to_linear(det.coupling_db)? * db_to_linear(det.filter_db)?;
    let arm = optics * 0.5 * det.quantum_efficiency;
    let pgf = pair_number_pgf(spec, &rates);
    let pmf = TriggerPmf::split_run(&pgf, rates.mu_n, arm, arm, det.dark_per_gate, det.dark_per_gate);
    let pulses = spec
        .pulses
        .checked_mul(2)
        .ok_or_else(|| Error::invalid("pulse count overflows the doubled self-correlation run"))?;
    let tag = match channel {
        SelfCorrChannel::Signal => STREAM_SELF_SIG,
        SelfCorrChannel::Idler => STREAM_SELF_IDL,
    };
    let mut rng = stream_rng(spec.seed, tag);
    let d = det.blanked_gates_per_detection();
    let joint = run_gates(&pmf, pulses, d, d, &mut rng);
    Ok(SelfCorrCounts {
        d_self: joint.same_gate,
        d_self_a: joint.offset,
        duration: pulses as f64 / spec.pump.rep_rate,
    })
}

/// Runs the three measurements of one ZWM data point on independent random
/// streams derived from the spec's master seed.
pub fn zwm_run(spec: &ExperimentSpec) -> Result<ZwmCounts> {
    Ok(ZwmCounts {
        pairs: simulate_pairs(spec)?,
        self_sig: simulate_selfcorr(spec, SelfCorrChannel::Signal)?,
        self_idl: simulate_selfcorr(spec, SelfCorrChannel::Idler)?,
    })
}

// ---------------------------------------------------------------------------
// Photon-number statistics
// ---------------------------------------------------------------------------

/// Probability generating function `G(z) = E[z^N]` of the per-pulse pair
/// number, evaluated on `z ∈ [0, 1]`.
#[derive(Debug, Clone, Copy)]
enum PairNumberPgf {
    /// `G(z) = exp(−μ(1−z))`.
    Poisson { mean: f64 },
    /// `G(z) = (1 + (μ/M)(1−z))^(−M)` — sum of M thermal modes.
    NegativeBinomial { mean: f64, modes: f64 },
}

impl PairNumberPgf {
    fn eval(&self, z: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&z));
        match *self {
            PairNumberPgf::Poisson { mean } => (-mean * (1.0 - z)).exp(),
            PairNumberPgf::NegativeBinomial { mean, modes } => {
                (1.0 + mean / modes * (1.0 - z)).powf(-modes)
            }
        }
    }
}

fn pair_number_pgf(spec: &ExperimentSpec, rates: &ModelRates) -> PairNumberPgf {
    match spec.marginal_statistics {
        MarginalStatistics::Poisson => PairNumberPgf::Poisson { mean: rates.mu_c },
        MarginalStatistics::MultimodeThermal => {
            PairNumberPgf::NegativeBinomial { mean: rates.mu_c, modes: rates.modes }
        }
    }
}

// ---------------------------------------------------------------------------
// Per-gate joint trigger distribution
// ---------------------------------------------------------------------------

/// Exact joint distribution of the two detectors' trigger pattern in one
/// gate, before dead-time blanking. Outcome labels: `pXY` with `X` for
/// detector a and `Y` for detector b, 1 = triggers.
#[derive(Debug, Clone, Copy)]
struct TriggerPmf {
    p00: f64,
    p01: f64,
    p10: f64,
    p11: f64,
}

impl TriggerPmf {
    fn from_silence_probs(no_a: f64, no_b: f64, p00: f64) -> Self {
        // The subtractions can brush machine epsilon below zero when the
        // trigger probabilities are tiny; clamp rather than propagate -0.
        TriggerPmf {
            p00,
            p01: (no_a - p00).max(0.0),
            p10: (no_b - p00).max(0.0),
            p11: (1.0 - no_a - no_b + p00).max(0.0),
        }
    }

    /// Coincidence run: pairs send one photon to each channel (detected
    /// with probability `e_a`/`e_b`), noise is per-channel Poisson, darks
    /// fire independently.
    fn pair_run(
        pgf: &PairNumberPgf,
        e_a: f64,
        e_b: f64,
        mu_n_a: f64,
        mu_n_b: f64,
        dark_a: f64,
        dark_b: f64,
    ) -> Self {
        let noise_a = (-mu_n_a * e_a).exp();
        let noise_b = (-mu_n_b * e_b).exp();
        let no_a = pgf.eval(1.0 - e_a) * noise_a * (1.0 - dark_a);
        let no_b = pgf.eval(1.0 - e_b) * noise_b * (1.0 - dark_b);
        let p00 = pgf.eval((1.0 - e_a) * (1.0 - e_b))
            * noise_a
            * noise_b
            * (1.0 - dark_a)
            * (1.0 - dark_b);
        Self::from_silence_probs(no_a, no_b, p00)
    }

    /// Self-correlation run: every photon of one port (pair marginal plus
    /// noise) is routed to exactly one arm, so a photon silences both arms
    /// with probability `1 − t_a − t_b`.
    fn split_run(
        pgf: &PairNumberPgf,
        mu_n: f64,
        t_a: f64,
        t_b: f64,
        dark_a: f64,
        dark_b: f64,
    ) -> Self {
        debug_assert!(t_a + t_b <= 1.0);
        let source = |z: f64| pgf.eval(z) * (-mu_n * (1.0 - z)).exp();
        let no_a = source(1.0 - t_a) * (1.0 - dark_a);
        let no_b = source(1.0 - t_b) * (1.0 - dark_b);
        let p00 = source(1.0 - t_a - t_b) * (1.0 - dark_a) * (1.0 - dark_b);
        Self::from_silence_probs(no_a, no_b, p00)
    }

    /// Probability that at least one detector triggers.
    fn trigger_prob(&self) -> f64 {
        self.p01 + self.p10 + self.p11
    }
}

// ---------------------------------------------------------------------------
// Gate walker with dead time
// ---------------------------------------------------------------------------

/// Mutable dead-time bookkeeping of one detector.
struct DetectorState {
    /// Gates blanked after each registered detection.
    dead_gates: u64,
    /// First gate index at which the detector is active again.
    blank_until: u64,
    /// Total gates spent blanked within the run.
    blanked: u64,
    /// Registered detections.
    fires: u64,
}

impl DetectorState {
    fn new(dead_gates: u64) -> Self {
        DetectorState { dead_gates, blank_until: 0, blanked: 0, fires: 0 }
    }

    /// Registers a trigger at `gate` if the detector is active; a
    /// registered detection blanks the following `dead_gates` gates (only
    /// those inside the run count toward the blanked tally).
    fn try_register(&mut self, gate: u64, pulses: u64) -> bool {
        if gate < self.blank_until {
            return false;
        }
        self.fires += 1;
        self.blanked += self.dead_gates.min(pulses - 1 - gate);
        self.blank_until = gate.saturating_add(1).saturating_add(self.dead_gates);
        true
    }
}

/// Tallies of one two-detector gate walk.
struct JointCounts {
    fires_a: u64,
    fires_b: u64,
    same_gate: u64,
    offset: u64,
    blanked_a: u64,
    blanked_b: u64,
}

/// Walks `pulses` i.i.d. gates event-by-event: geometric gaps between gates
/// with at least one trigger, then the conditional outcome draw. Exactly
/// equivalent in law to visiting every gate.
fn run_gates(
    pmf: &TriggerPmf,
    pulses: u64,
    dead_a: u64,
    dead_b: u64,
    rng: &mut ChaCha12Rng,
) -> JointCounts {
    let mut a = DetectorState::new(dead_a);
    let mut b = DetectorState::new(dead_b);
    let mut same_gate = 0u64;
    let mut offset = 0u64;
    // Gate index of the last registered detection on a; u64::MAX = none.
    let mut prev_a = u64::MAX;

    let q = pmf.trigger_prob();
    if q > 0.0 {
        let inv_ln_p00 = if pmf.p00 > 0.0 { 1.0 / pmf.p00.ln() } else { 0.0 };
        let split_01 = pmf.p01;
        let split_10 = pmf.p01 + pmf.p10;
        let mut next = 0u64; // first not-yet-simulated gate
        loop {
            // Geometric gap: number of silent gates before the next event.
            let u = 1.0 - rng.random::<f64>(); // in (0, 1]
            let gap = if pmf.p00 > 0.0 { (u.ln() * inv_ln_p00).floor() } else { 0.0 };
            if gap >= (pulses - next) as f64 {
                break; // the remaining gates are all silent
            }
            let g = next + gap as u64;

            // Conditional outcome at the event gate.
            let r = rng.random::<f64>() * q;
            let (trig_a, trig_b) = if r < split_01 {
                (false, true)
            } else if r < split_10 {
                (true, false)
            } else {
                (true, true)
            };

            let reg_a = trig_a && a.try_register(g, pulses);
            let reg_b = trig_b && b.try_register(g, pulses);
            if reg_a && reg_b {
                same_gate += 1;
            }
            // Accidental estimate: a at gate g−1, b at gate g.
            if reg_b && prev_a != u64::MAX && prev_a + 1 == g {
                offset += 1;
            }
            if reg_a {
                prev_a = g;
            }

            next = g + 1;
            if next >= pulses {
                break;
            }
        }
    }

    JointCounts {
        fires_a: a.fires,
        fires_b: b.fires,
        same_gate,
        offset,
        blanked_a: a.blanked,
        blanked_b: b.blanked,
    }
}

// ---------------------------------------------------------------------------
// Random streams
// ---------------------------------------------------------------------------

const STREAM_PAIRS: u64 = 1;
const STREAM_SELF_SIG: u64 = 2;
const STREAM_SELF_IDL: u64 = 3;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Expands `(master seed, stream tag)` into a full ChaCha12 seed so each
/// run of an experiment draws from its own independent stream.
fn stream_rng(master_seed: u64, stream: u64) -> ChaCha12Rng {
    let mut state = master_seed ^ stream.wrapping_mul(0xA24B_AED4_963E_E407);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}
