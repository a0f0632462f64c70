//! Isogeometric Poisson solver on single-patch NURBS solids with every
//! operator kept in tensor-train form.

pub mod assembly;
pub mod discretization;
pub mod driver;
pub mod error;
pub mod geometry;
pub mod reference;
pub mod splines;

pub use error::{IgaError, Result};
pub use geometry::{make_geometry, GeometryKind, GeometryPatch};
