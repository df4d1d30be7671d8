//! Polynomials and hbar-graded series over exact or floating coefficients.

pub mod coeff;
pub mod poly;
pub mod series;
pub mod text;

pub use coeff::{Backend, Exact, ExactComplex, Float, Scalar};
pub use poly::{Exponents, Polynomial};
pub use series::HbarGradedSeries;
pub use text::{default_names, format_polynomial, parse_coefficient, parse_expression};
