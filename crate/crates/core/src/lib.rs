//! Slow/fast systems driven by fractional Ornstein–Uhlenbeck noise: samplers,
//! chaos expansions, functional limit theorems, rough-path lifts and solvers.

pub mod chaos;
pub mod diagram;
pub mod error;
pub mod functional_limits;
pub mod gaussian_noise;
pub mod grid;
pub mod hermite_process;
pub mod linalg;
pub mod martingale;
pub mod par;
pub mod quad;
pub mod rde;
pub mod rng;
pub mod rough_path;
pub mod stats;

pub use error::{Error, Result};
pub use grid::TimeGrid;
