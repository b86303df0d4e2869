//! Symbolic core for a revised Wightman-functional construction for a single
//! neutral scalar field of mass m > 0 in four spacetime dimensions.
//!
//! The crate holds everything that is exact: the function-sequence algebra and
//! its involution ([`algebra`]), the enumeration and energy-ordering
//! combinatorics ([`combinatorics`]), and the symbolic expansion of the n-point
//! kernels into two-point and conjoined factors with exact rational
//! coefficients ([`kernel`]). Floating point enters only through state-label
//! parameters and pointwise on-shell evaluation; all quadrature lives in the
//! companion crate.
//!
//! The crate is `no_std` (with `alloc`) so the symbolic layer can be embedded
//! anywhere; `libm` supplies the handful of transcendental calls.

#![cfg_attr(not(test), no_std)]
#![warn(missing_docs)]

extern crate alloc;

pub mod algebra;
pub mod combinatorics;
pub mod kernel;
