//! Reproducible samplers for MFP, k-fractal, generalized and fat fractal
//! percolation, plus the grid type they produce.

pub mod grid;
pub mod io;
pub mod sample;
pub mod spec;

pub use grid::{level_shape, CellSet, Grid, GridHeader};
pub use sample::{cube_uniform, sample_fat, sample_gfp, sample_k, sample_mfp, sample_model};
pub use spec::{children_per_cube, exact_f64, CountSampler, GeneratorSpec, Model, RetentionSchedule, TailRule};
