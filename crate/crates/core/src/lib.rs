//! Wick expansions of finite-dimensional integrals `∫ f e^{-S/ħ} dx` as formal
//! series in `ħ`, together with numerical oracles that check the series.

pub mod error;
pub mod expansion;
pub mod formal;
pub mod gauge;
pub mod lattice;
pub mod linalg;
pub mod morsebott;
pub mod oracle;
pub mod quadrature;
pub mod wick;

pub use error::{Error, Result};
