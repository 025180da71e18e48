//! Exact-arithmetic toolkit for translation surfaces built from rational
//! polygons: cylinder decompositions, twist deformations, degenerations to
//! boundary surfaces and the flows that move periods around. Everything is
//! computed over the rationals; there are no floating point numbers anywhere.

pub mod cylinders;
pub mod degeneration;
pub mod error;
pub mod geom;
pub mod halftrans;
pub mod homology;
pub mod linalg;
pub mod scalar;
pub mod surf;
pub mod surface;
pub mod tangent;

pub use error::{Error, Result};
pub use scalar::{QQi, Rat, Vec2Q};
pub use surface::{Corner, DEdge, Polygon, Surface};

/// Temporary entry point for the CLI binary; replaced by the real driver.
pub fn cli_main() -> i32 {
    0
}
