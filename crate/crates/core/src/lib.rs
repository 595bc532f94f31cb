//! Deterministic simulation of denial-of-service attack sequences and the
//! security controllers that adapt to them online.
//!
//! The crate is organized around an observable attack model and an
//! event-driven estimator of its duration and frequency bounds:
//!
//! - [`dos_model`] represents attack sequences as measurable interval sets
//!   and provides exact measures, launch counts, bound-verification oracles
//!   and edge-case classification.
//! - [`estimator`] maintains running duration/frequency bound estimates from
//!   observed attack events only, plus a deadline calculator for when the
//!   estimates are guaranteed to become genuine bounds.
//! - [`consensus`] simulates sampled-data average consensus of a
//!   single-integrator multi-agent system whose sampling interval adapts to
//!   the estimates.
//! - [`impulsive`] simulates impulsive stabilization of an unstable plant
//!   whose control interval adapts to the estimates, with Lyapunov and
//!   impulse-count audits.
//! - [`oracle`] recomputes estimator trajectories from scratch so the
//!   event-driven implementation can be cross-checked at every event.
//! - [`linalg`] holds the small dense-matrix kernels (cyclic Jacobi
//!   eigensolver, scaling-and-squaring matrix exponential) the controllers
//!   rely on.
//!
//! All simulation state is plain data: runs are pure functions of their
//! scenario, so independent runs can execute concurrently. With the default
//! `parallel` feature the batch entry points ([`estimator::replay_many`],
//! [`oracle::recompute_estimates`]) fan out over rayon; without it they fall
//! back to equivalent sequential loops.

pub mod consensus;
pub mod dos_model;
pub mod estimator;
pub mod impulsive;
pub mod linalg;
pub mod oracle;

pub use dos_model::{BoundVerdict, DosInterval, DosSequence, EdgeCaseReport};
pub use estimator::{EstimatorConfig, EstimatorState};
