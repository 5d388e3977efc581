//! Circular statistics and high-level fusion of angular quantities.
//!
//! The crate is organised bottom-up:
//!
//! * [`circstats`] wraps angles, measures circular distance and computes
//!   resultant-vector statistics plus the dispersion estimators built on them.
//! * [`distributions`] holds von-Mises / Wrapped-Normal densities, seeded
//!   samplers and the modified Bessel functions they need.
//! * [`fusion`] combines independent angular estimates (weighted average and
//!   plain mean) together with their fused variance / concentration.
//! * [`montecarlo`] runs the verification sweeps and writes plot-ready CSV.
//! * [`t2t`] is a track-to-track fusion pipeline mixing linear kinematics with
//!   a circular heading.
//! * [`scenario`] synthesises a two-radar pedestrian scene for the pipeline.

pub mod circstats;
pub mod distributions;
pub mod error;
pub mod fusion;
pub mod montecarlo;
pub mod rng;
pub mod scenario;
pub mod t2t;

pub use circstats::{Angle, CircularSampleSummary};
pub use error::{Error, Result};
pub use fusion::{AngularEstimate, DispersionValue};
