//! Monte Carlo simulation of central-broadcast quantum key distribution with
//! displaced thermal states.
//!
//! A thermal source, displaced onto a QPSK ring, is split between Alice and a
//! broadcast path that Eve taps with a beam splitter before it reaches Bob.
//! Every party heterodynes its field, recovers timing and phase from the
//! public quadrant bits, and slices the amplitude `z = sqrt(x^2 + p^2)` at its
//! own median. The secrecy statistics are then estimated from the bit strings.
//!
//! Modules follow the pipeline:
//!
//! * [`optics`]: positive-P field sampling, beam splitters, heterodyne, and a
//!   covariance oracle for the three-party network.
//! * [`modem`]: QPSK mapping, derotation, delay and phase recovery.
//! * [`channel`]: link impairments and Eve's tap.
//! * [`distill`]: amplitudes, median slicing, bit error rate, advantage
//!   distillation.
//! * [`info`]: correlation, entropy, (conditional) mutual information, g2.
//! * [`harness`]: scenario configuration, orchestration, calibration, output.

#![cfg_attr(test, allow(clippy::approx_constant))]

pub mod channel;
pub mod distill;
pub mod error;
pub mod harness;
pub mod info;
pub mod modem;
pub mod optics;

pub use error::{Error, FieldError, Result};
pub use optics::{ComplexAmplitude, QuadraturePair};
