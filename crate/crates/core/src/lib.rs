//! Higher-order intensity correlations of independent thermal light sources
//! observed with detectors at magic positions.
//!
//! With `m2` detectors fixed at the magic positions `2πj/m2` only those
//! photon paths survive in which all `m2` photons come from the same source.
//! Adding moving detectors at the scan phase `δ₁` then produces a N00N-like
//! modulation `cos(m2·δ₁)` from two thermal sources. The crate evaluates these
//! correlation functions three independent ways:
//!
//! * [`pathsum`]: brute-force sums over photon partitions and quantum paths,
//!   cross-checked by a Ryser permanent of the coherence matrix;
//! * [`analytic`]: exact closed forms, visibilities and crossover thresholds;
//! * [`speckle`]: Monte Carlo pseudothermal speckle with cosine fits.
//!
//! [`fockstate`] represents the projected two-mode state in a truncated Fock
//! basis.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod curve;
pub mod error;
pub mod fockstate;
pub mod geometry;
pub mod pathsum;
pub mod permanent;
pub mod speckle;

pub use curve::CorrelationCurve;
pub use error::{Error, Result};
pub use geometry::{DetectorLayout, MovingKind, SourceArray};
