//! G-injective and G-isometric tensor network states on small lattices.

pub mod anyon;
pub mod error;
pub mod group;
pub mod la;
pub mod mps;
pub mod peps;
pub mod tensor;
pub mod topo;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
