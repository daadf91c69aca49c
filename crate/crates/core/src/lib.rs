//! A numerical laboratory for the stochastic Korteweg-de Vries equation
//! with small additive colored noise.
//!
//! The crate simulates near-soliton dynamics on a periodic box with a
//! pseudospectral split-step integrator, tracks the randomly modulated
//! soliton through constrained decompositions, measures first-exit times
//! from fixed and modulated soliton neighborhoods by parallel Monte Carlo,
//! and evaluates the associated variational problems: the path action over
//! modulated-soliton velocity paths, its closed-form endpoint minimum, the
//! linear-in-time escape guess with its `1/T^3` bound, and synthesis of the
//! explicit control realizing a velocity path through the forced equation.
//!
//! Modules mirror those layers: [`spectral`] is the grid substrate,
//! [`soliton`] the traveling-wave family and its invariants, [`noise`] the
//! colored Wiener process, [`integrator`] the time stepper, [`modulation`]
//! the decomposition and exit detectors, [`exit`] the Monte Carlo harness,
//! [`action`] the variational layer, and [`config`]/[`experiment`] the
//! configuration and orchestration surface used by the CLI.

pub mod action;
pub mod config;
pub mod error;
pub mod exit;
pub mod experiment;
pub mod integrator;
pub mod modulation;
pub mod noise;
pub mod output;
pub mod soliton;
pub mod spectral;

pub use error::{Error, Result};
pub use spectral::{Grid1D, SpectralField};
