//! Numerical laboratory for traceless 2×2 systems of holomorphic 1-forms on genus-2
//! hyperelliptic curves: monodromy and its large-parameter growth, widths of
//! quadratic differentials, flat-surface trajectories, fibers of the determinant
//! map and the semiflat metric on its base.

pub mod curve;
pub mod demo;
pub mod differentials;
pub mod error;
pub mod fiber;
pub mod flat;
pub mod mat2;
pub mod monodromy;
pub mod poly;
pub mod precise;
pub mod quadrature;
pub mod semiflat;
pub mod wkb;

pub use error::{Error, Result};
pub use num_complex::Complex64;
