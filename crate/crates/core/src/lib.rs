//! Numerical laboratory for line solitary waves of the Zakharov-Kuznetsov
//! equation `u_t + d_x(Delta u + u^2) = 0` on the cylinder `R x (2 pi L) T`.

pub mod cli;
pub mod config;
pub mod decomposition;
pub mod error;
pub mod evolution;
pub mod grid;
pub mod lab;
pub mod report;
pub mod snapshot;
pub mod scalar;
pub mod spectrum;
pub mod speeds;
pub mod waves;

pub use error::{Result, ZkError};
pub use grid::{Axis, CylGrid, Field, SpectralField};
pub use scalar::Real;

pub type Grid64 = CylGrid<f64>;
pub type Grid32 = CylGrid<f32>;
pub type Field64 = Field<f64>;
pub type Field32 = Field<f32>;
