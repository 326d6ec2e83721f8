//! Physics and statistics engine for a slow-light photon-pair source.
//!
//! The crate models an end-to-end pulsed-pump experiment: spontaneous
//! four-wave mixing in a lossy slow-light waveguide generates correlated
//! signal/idler photon pairs on top of a phenomenological noise background;
//! both channels pass an efficiency stack into gated single-photon detectors
//! with dark counts and dead time; coincidence counting then yields pair
//! rates, the coincidence-to-accidental ratio (CAR), and the Zou-Wang-Mandel
//! non-classicality parameter V.
//!
//! Module layout mirrors the experiment:
//!
//! * [`device_model`] — waveguide-derived quantities (loss, L_eff, slowdown).
//! * [`source_model`] — per-pulse pair and noise photon generation rates.
//! * [`detection_chain`] — efficiency stack, gate duty under dead time, and
//!   closed-form expected count rates.
//! * [`montecarlo`] — stochastic per-gate simulation producing raw counts.
//! * [`analysis`] — estimators (pair rate, CAR, ZWM V) and weighted fits.

pub mod analysis;
pub mod detection_chain;
pub mod device_model;
pub mod error;
pub mod montecarlo;
pub mod source_model;

pub use error::{Error, Result};
