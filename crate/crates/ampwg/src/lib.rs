//! Information capacity of an amplifying disordered waveguide channel.
//!
//! The library computes heterodyne and Holevo capacities of a multimode
//! waveguide with gain and disorder, both per scattering instance and
//! averaged over a Rayleigh-distributed transmission intensity. Every
//! closed form is backed by independent Monte Carlo and quadrature
//! oracles, and by a microscopic tight-binding scattering-matrix
//! simulator with uniform linear gain.
//!
//! Modules:
//! - [`specfun`]: incomplete gamma `Γ(0;x)`, the overflow-safe product
//!   `eˣΓ(0;x)`, and the Gaussian-state entropy `g(x)`.
//! - [`medium`]: channel parameters, diffusion-theory ensemble averages,
//!   effective signal-to-noise ratio, and scattering-matrix queries.
//! - [`capacity`]: closed-form capacities (instance, averaged, threshold
//!   limit, asymptotic approximations).
//! - [`oracle`]: Rayleigh-ensemble Monte Carlo, deterministic quadrature
//!   averaging, and a mutual-information sampling estimator.
//! - [`wgsim`]: quasi-1D Anderson lattice with uniform gain, producing
//!   super-unitary scattering matrices for empirical validation.
//! - [`phase`]: separatrix in the (l/L, P/NP0) plane between the regions
//!   where threshold amplification raises or lowers the Holevo capacity.
//! - [`cli`]: command-line front end (parameter sweeps, validation suite,
//!   ensemble runs, separatrix curves).

pub mod capacity;
pub mod cli;
pub mod medium;
pub mod oracle;
pub mod phase;
pub mod quad;
pub mod specfun;
pub mod wgsim;

mod rng;

pub use capacity::{CapacityResult, Method};
pub use medium::{DiffusionAverages, MediumParams, ScatteringMatrix};
pub use oracle::{McEstimate, RngSpec};
pub use wgsim::{EnsembleStats, LatticeSpec};
