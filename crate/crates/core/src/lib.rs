//! Discrete d-tensor paraproduct decomposition on dyadic grids.
//!
//! A smooth map applied to a sampled function, `A(f)`, splits into a multiscale
//! quasilinear part `Ã(f)` built from tensor Haar blocks and a residual `Δ(A,f)`
//! that is smoother than `A(f)`.

pub mod compress;
pub mod czd;
pub mod datasets;
pub mod detect;
pub mod dtf;
pub mod error;
pub mod experiments;
pub mod grid;
pub mod haar;
pub mod paraproduct;
pub mod regularity;
pub mod report;
pub mod rng;
pub mod smoothmap;

pub use error::{Error, Result};
pub use grid::{BoxIndex, DyadicTensor, ScaleTuple};
pub use haar::HaarPyramid;
pub use paraproduct::{DecomposeOptions, Decomposition, PartitionTerm};
pub use smoothmap::SmoothMap;
