//! Quantum-controlled sequential measurements on a `d`-level system.
//!
//! A control qubit selects a coherent superposition of "do nothing" and "project onto the
//! eigenbasis of A". Post-selecting the control qubit gives a family of Kraus operators
//! parametrised by a strength `theta` and a phase `phi`. A subsequent projective measurement
//! of B yields a joint distribution `p(a, b | 1)` that splits into an identity background,
//! a projective background and a coherent term carrying the Kirkwood-Dirac distribution
//! `rho(a, b) = <b|a><a|rho|b>`.
//!
//! The crate provides:
//!
//! - [`state`]: density matrices, observables, random states and bases, trace distance.
//! - [`measurement`]: Kraus operators, success probability, fidelity and dephasing.
//! - [`statistics`]: exact joint statistics, the three-term decomposition and correlations.
//! - [`sampler`]: seeded Monte Carlo experiments with count histograms.
//! - [`reconstruction`]: background subtraction, phase combination, Fourier extraction and
//!   state tomography from the complex joint distribution.

#![forbid(unsafe_code)]

pub mod error;
pub mod measurement;
pub mod reconstruction;
pub mod rng;
pub mod sampler;
pub mod state;
pub mod statistics;

pub use error::{Error, Result};
pub use measurement::{ControlSetting, KrausSet};
pub use reconstruction::{IntrinsicDistribution, ReconstructionMethod, ReconstructionReport};
pub use sampler::{CountHistogram, ExperimentPlan};
pub use state::{ComplexMatrix, DensityMatrix, Observable, ObservablePair};
pub use statistics::{ComplexJointDistribution, JointOutcomeTable, QuasiProbTriple};

pub use num_complex::Complex64;
