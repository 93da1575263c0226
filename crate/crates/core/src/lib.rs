//! C²-smooth isogeometric spline spaces on bilinear multi-patch domains and
//! a Galerkin solver for the triharmonic equation built on them.

pub mod assembly;
pub mod basis;
pub mod bspline;
pub mod error;
pub mod gluing;
pub mod multipatch;
pub mod physical;
pub mod par;
pub mod poly2d;
pub mod quadrature;
pub mod solver;
pub mod study;

pub use error::{Error, Result};
