//! Spiking push-pull LIF networks trained with STDP, viewed as a joint
//! dictionary-learning / LASSO basis-pursuit machine.
//!
//! The crate is organised by subsystem:
//!
//! - [`event_io`]: event data model, the `EVS1` binary format, rasterization,
//!   Poisson generators and spike-train spectra.
//! - [`neuron`]: LIF and push-pull LIF dynamics, PSC filtering and the
//!   rate-domain soft-threshold model.
//! - [`plasticity`]: the double-exponential STDP kernel, exact pairwise and
//!   rate-based weight changes, homeostatic updates.
//! - [`network`]: the coding/error two-layer topology, simulation and
//!   on-line learning of the three weight copies.
//! - [`oracle`]: non-spiking LASSO and dictionary-learning solvers used as
//!   ground truth.
//! - [`tuning`]: kernel spectral matching, weight initialization, training
//!   termination and Akaike-based threshold selection.
//! - [`descriptors`]: global, action and convolutional feature descriptors.
//! - [`readout`]: standard scaling and a one-vs-rest linear SVM.
//! - [`power`]: spike-count based power estimation.
//! - [`synth`] and [`training`]: synthetic datasets and the train/validate
//!   loop; [`config`] and [`checkpoint`] handle files.
//!
//! Data-parallel loops go through [`exec::Exec`]; building without the
//! default `parallel` feature turns every parallel path into a sequential one.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod checkpoint;
pub mod config;
pub mod descriptors;
pub mod error;
pub mod event_io;
pub mod exec;
pub mod network;
pub mod neuron;
pub mod oracle;
pub mod plasticity;
pub mod power;
pub mod readout;
pub mod stats;
pub mod synth;
pub mod training;
pub mod tuning;

pub use error::{Error, Result};
pub use exec::Exec;

/// Default simulation time step in seconds.
pub const DEFAULT_DT: f64 = 0.005;
