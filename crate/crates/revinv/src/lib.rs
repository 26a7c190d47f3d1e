//! Synthesis, simulation and resource estimation for a space-efficient
//! reversible modular-inversion circuit built from the extended Euclidean
//! algorithm with register sharing.
//!
//! The crate is organized as:
//! - [`model`]: bit-exact classical reference machine (the verification oracle)
//! - [`ir`]: Toffoli-network IR, basis-state simulator, lowering and counting
//! - [`blocks`]: reversible arithmetic building blocks (adders, shifts,
//!   location-controlled operations, length updates)
//! - [`synth`]: per-step circuit assembly, qubit layout, active windows and
//!   the full inversion circuit
//! - [`estimate`]: closed-form width/gate-count model and the ECDLP roll-up
//! - [`exact`]: exact integer evaluation of the golden-ratio step bounds

pub mod blocks;
pub mod estimate;
pub mod exact;
pub mod ir;
pub mod model;
pub mod synth;
