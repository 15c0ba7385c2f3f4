//! Physics-informed operator learning for coupled second-order dynamical systems.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! * [`system`] — assembly of mass/damping/stiffness systems from point masses,
//!   spring/dashpot connections and reduced flexible bodies; stochastic
//!   excitation synthesis; equation residual evaluation.
//! * [`modal`] — generalized eigen solve, Rayleigh damping, modal reduction and
//!   mesh-independent field recovery from mode shapes.
//! * [`oracle`] — Newmark time integration for ground truth, finite-difference
//!   derivatives, dataset construction and normalization.
//! * [`en`] — per-pair, per-equation residual weights computed by perturbation
//!   simulation, used to normalize equation losses across heterogeneous ODEs.
//! * [`pino`] — a Fourier-spectral neural operator with hand-written
//!   reverse-mode gradients, the four-term physics-informed objective and a
//!   GradNorm-balanced training loop.
//! * [`uq`] — uncertainty propagation: density evolution along representative
//!   parameter points and Monte Carlo through a trained surrogate.

pub mod en;
pub mod error;
pub mod io;
pub mod linalg;
pub mod modal;
pub mod oracle;
pub mod parallel;
pub mod pino;
pub mod rng;
pub mod system;
pub mod uq;

pub use error::{Error, Result};
