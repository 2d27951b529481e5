//! Fault detection and isolation toolkit for a simulated single-spool
//! laboratory turbojet.
//!
//! The crate covers the whole offline/online loop:
//!
//! * [`engine`]: three-state engine model (compressor-exit pressure,
//!   turbine-exit pressure, shaft speed) with algebraic component
//!   thermodynamics and a first-order-plus-dead-time fuel supply.
//! * [`faults`]: time-windowed actuator and sensor fault injection plus
//!   measurement noise.
//! * [`dataset`]: labeled dataset generation for the FD001/FD002 scenarios,
//!   cleaning, z-score normalization, correlation and stratified folds.
//! * [`classifiers`]: LDA, linear SVM, KNN and CART behind one interface.
//! * [`evaluation`]: confusion matrices, accuracy, F1, cross-validation and
//!   the classifier comparison report.
//! * [`runtime`]: multiple-model online monitor with debounced lamps.
//! * [`cli`]: the `turbojet-fdi` command line.

pub mod classifiers;
pub mod cli;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod evaluation;
pub mod faults;
pub mod runtime;
pub mod signals;
mod util;

pub use error::{FdiError, Result};
pub use signals::{Signal, SIGNAL_COUNT};
