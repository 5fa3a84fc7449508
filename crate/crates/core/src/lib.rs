//! Simulation and analysis toolkit for a dual-cloud Raman atom-interferometer
//! gravity gradiometer.
//!
//! The crate covers the full measurement chain of such an instrument:
//!
//! * closed-form phase formulas (gravimeter phase, Coriolis tilt shift,
//!   quadratic-Zeeman gradient phase, pulsed-field phase, light-shift
//!   cancellation) in [`physics`];
//! * the detection / quantum-projection noise decomposition in [`noise`];
//! * a per-shot simulator with parameter drifts, digital servo loops,
//!   k-reversal and source-mass modulation in [`sim`];
//! * fluorescence peak fitting and population normalization in [`peaks`];
//! * differential-phase extraction by ellipse fitting in [`ellipse`];
//! * protocol statistics (grouping, k-reversal differencing, doubly
//!   differential phases, Allan deviation, monitor correlation and the
//!   sensitivity budget) in [`pipeline`].
//!
//! The `gradiometer` binary wires these together behind `simulate`, `fit`,
//! `analyze`, `budget` and `trace-fit` subcommands.

pub mod config;
pub mod ellipse;
pub mod error;
pub mod fitting;
pub mod io;
pub mod ledger;
pub mod noise;
pub mod peaks;
pub mod physics;
pub mod pipeline;
pub mod sim;

pub use config::RunConfig;
pub use ellipse::{EllipseParams, FitReport};
pub use error::{Error, Result};
pub use ledger::SensitivityLedger;
pub use noise::NoiseConfig;
pub use peaks::{DetectionTrace, PeakModel};
pub use physics::PhysicsConfig;
pub use sim::ShotRecord;
