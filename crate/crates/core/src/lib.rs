//! Asymptotic exponents, Finsler metrics and interface motion for KPP fronts
//! in two-layer composite media.

pub mod error;
pub mod front;
pub mod homog;
pub mod medium;
pub mod numeric;
pub mod oracles;
pub mod rates;
pub mod spectral;
pub mod xdep;

pub use error::{Error, Result};
