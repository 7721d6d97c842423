//! Learn pairwise Boltzmann-machine priors (couplings and fields) from
//! binarized image patches, and analyze the result.
//!
//! The pipeline runs in stages, each backed by one module:
//!
//! - [`imageio`] — read PGM images, quantize and dither them into ±1 spin
//!   fields, write PBM.
//! - [`patchset`] — cut binary images into square patches, persist them in a
//!   compact bit-packed format, and accumulate empirical moments (μ, Γ).
//! - [`invising`] — closed-form inverse-Ising estimators: naive mean-field
//!   (NMF) and the Bethe approximation (BA).
//! - [`gibbs`] — Metropolis sampling of an Ising model, Monte-Carlo
//!   maximum-likelihood learning, and specific-heat sweeps.
//! - [`analysis`] — distance profiles, sublattice link classification,
//!   coupling histograms, exponential decay fits, frustration counts,
//!   field/magnetization histograms, and Fourier spectra.
//! - [`priormodel`] — build the six-parameter prior as a concrete model,
//!   extract its parameters back out, and generate synthetic patches.
//! - [`enumerate`] — exact enumeration of small spin systems (≤ 20 spins),
//!   used as a reference oracle.
//!
//! All Monte-Carlo entry points are deterministic for a fixed seed and
//! independent of thread count.

pub mod analysis;
pub mod enumerate;
pub mod gibbs;
pub mod imageio;
pub mod invising;
pub mod patchset;
pub mod priormodel;

mod seeding;

pub use invising::IsingModel;
pub use patchset::{EmpiricalMoments, PatchSet, SpinPatch};
