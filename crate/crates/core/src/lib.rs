//! Exact machinery for sum-of-squares degree bounds on the ordering principle.
//!
//! Everything that is an identity or a PSD decision is computed over exact
//! rationals; transcendental conditions are decided with outward-rounded
//! interval enclosures.

pub mod certifier;
pub mod error;
pub mod exact;
pub mod laguerre;
pub mod omega;
pub mod pe;
pub mod quadrature;
pub mod witness;

pub use error::{Error, Result};
