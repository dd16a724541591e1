//! Hermite and special Hermite semigroups as transforms onto spaces of entire functions.

pub mod envelope;
pub mod error;
pub mod kernels;
pub mod quadrature;
pub mod semigroup;
pub mod special;
pub mod specfun;
pub mod spectral;
pub mod stft;
pub mod suite;
pub mod taylor;

pub use error::{Error, Result};
