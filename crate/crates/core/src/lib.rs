//! Core of the bispectrum toolkit: band calculus for compact Lie groups,
//! SU(2) representation numerics, band-limited signals on SO(3), their low
//! order moments and bispectra, and frequency-marching recovery.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// NaN must fail these tests, so `!(x > t)` is deliberate
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod band;
pub mod bispectrum;
pub mod error;
pub mod linalg;
pub mod moments;
pub mod mra;
pub mod quadrature;
pub mod recovery;
pub mod rotation;
pub mod signal;
pub mod su2;

pub use error::{Error, Result, Stage};
pub use rotation::Rotation;

/// Complex double.
pub type C64 = num_complex::Complex64;
/// Dense complex matrix.
pub type CMat = nalgebra::DMatrix<C64>;

#[inline]
pub fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
