//! Numerical layer for revised Wightman-functionals over a single neutral
//! scalar field of mass `m > 0` in four spacetime dimensions.
//!
//! The companion crate `uqft-core` provides the exact symbolic layer: state
//! labels (Gaussian wave packets with star/lift/Poincaré structure) and the
//! kernel term lists that define each `n`-point functional. This crate turns
//! those symbols into numbers:
//!
//! - [`quad`] — deterministic quadrature for the three integral primitives
//!   (two-point overlaps, single-particle shell transforms, conjoined
//!   contraction integrals) plus an independent Monte-Carlo oracle.
//! - [`gram`] — sesquilinear pairings of positive-subalgebra vectors, Gram
//!   matrices with eigenvalue reports, the free-field comparison oracle, and
//!   cluster-decomposition scans.
//! - [`scatter`] — wave-packet scattering kinematics, finite-width
//!   amplitudes, and the closed-form Gaussian prediction they converge to.
//! - [`eigen`] — a self-contained Hermitian eigenvalue solver for the small
//!   matrices produced by [`gram`].
//! - [`cache`] — an optional on-disk store for shell-transform samples.
//! - [`config`] — the TOML run-configuration schema, run manifests, and the
//!   suite drivers used by the `uqft` binary.

pub mod cache;
pub mod config;
pub mod eigen;
pub mod gram;
pub mod quad;
pub mod scatter;
