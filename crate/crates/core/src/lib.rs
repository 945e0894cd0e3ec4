//! Classical Liouville dynamics written in Hilbert-space form.
//!
//! A classical phase-space ensemble `f(x, p)` is Fourier transformed in `p`
//! and rotated to `(Q, q) = (x + y/2, x - y/2)`, where it obeys a von Neumann
//! type equation plus an anharmonic correction `ℰ(Q, q)`. The crate provides
//! the transforms, the three evolution engines, quenched potential noise with
//! its Lindblad limit, and a Poisson-sprinkling void estimate.

pub mod causet;
pub mod csvio;
pub mod error;
pub mod evolvers;
pub mod grid;
pub mod output;
mod spectral;
pub mod potentials;
pub mod rng;
pub mod scenario;
pub mod studies;
pub mod state;
pub mod stochastic;

pub use error::{Error, Result};
pub use grid::GridSpec;
pub use state::{DensityGrid, MixedDistribution, PhaseSpaceDistribution, StateDiagnostics};
