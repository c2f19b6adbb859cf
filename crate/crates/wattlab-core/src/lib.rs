//! Desk-scale laboratory for estimating, measuring and reducing the energy
//! cost of neural-network inference.
//!
//! The crate is organised around five subsystems:
//!
//! * [`model_ir`] — layer/block descriptions of network architectures with
//!   exact FLOP and MAC accounting, plus width scaling for size ladders.
//! * [`energy_metrics`] — computation-energy metrics over hardware profiles,
//!   per-layer breakdowns and the training/inference break-even analysis.
//! * [`power_probe`] — the four-step relative-power measurement procedure
//!   (base power, absolute power, relative power, relative energy) over
//!   pluggable sample sources.
//! * [`kd_core`] — temperature-softened probabilities, KL-divergence
//!   distillation loss and a small deterministic SGD trainer for residual
//!   networks with analytic gradients.
//! * [`link_sim`] — synthetic SIMO receiver datasets parameterised by SINR,
//!   BER-vs-SINR evaluation, the geometric-mean-BER score and the
//!   hyperparameter sweep harness.
//!
//! All randomness flows through seeded ChaCha8 generators; sub-streams are
//! derived with [`seed::derive_seed`] so every run is reproducible bit for
//! bit from a single master seed.

pub mod energy_metrics;
pub mod kd_core;
pub mod link_sim;
pub mod model_ir;
pub mod power_probe;
pub mod seed;
