//! Numerical tools for finitely generated polynomial and affine semigroups:
//! Julia-set sampling, pressure and Bowen parameters, dimension and area
//! estimates, conjugacy continuation and transversality diagnostics.

pub mod error;
pub mod families;
pub mod geometry;
pub mod io;
pub mod julia;
pub mod poly;
pub mod randomdyn;
pub mod semigroup;
pub mod thermo;
pub mod transversality;

pub use error::{Error, Result};
pub use poly::{Complex, Metric, Polynomial};
pub use semigroup::{EPWord, MultiMap, Word};
