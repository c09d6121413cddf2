//! Simulation and exact analysis of fractal percolation.
//!
//! The crate samples Mandelbrot (MFP), k-fractal, generalized (GFP) and fat
//! fractal percolation down to a finite level, labels clusters under `L^d`
//! adjacency, evaluates crossing events, runs the m-good recursions and the
//! (n,u)-goodness procedure, computes fat-fractal statistics, and estimates
//! crossing probabilities by Monte Carlo with exact enumeration as an oracle.

pub mod connectivity;
pub mod error;
pub mod estimators;
pub mod exact;
pub mod fatfractal;
pub mod goodness;
pub mod index;
pub mod models;
pub mod rng;

pub use error::{Error, Result};
pub use index::{adjacent, compare_indices, cube_geometry, CubeIndex, LatticeCell};
pub use models::{GeneratorSpec, Grid, Model, RetentionSchedule};
pub use connectivity::{crosses, label_clusters, ClusterLabels, StripSpec};
pub use estimators::{Estimate, ExactModel};
pub use fatfractal::{FatStats, PointDigits, ScheduleCriteria};
pub use goodness::{GoodRecursionResult, GoodnessMap};
pub use index::BoxShape;
