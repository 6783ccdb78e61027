//! Count-Min Sketch construction for 32-bit item streams.
//!
//! * [`hashing`]: tabulation hashing, including the merged layout that serves
//!   all rows of a sketch from one table.
//! * [`sketch`]: the sketch itself, its dimensioning and memory accounting.
//! * [`parallel`]: sequential, multi-table, naive shared and buffered two-phase
//!   builders.
//! * [`hetero`]: buffered builds on fast/slow core pairs with dynamic load
//!   balancing.
//! * [`streamgen`]: uniform and Zipfian workloads and exact ground truth.

pub mod error;
pub mod hashing;
pub mod hetero;
pub mod parallel;
pub mod sketch;
pub mod streamgen;

pub use error::{Error, Result};
pub use hashing::{to_column, MergedTabulationTable, TabulationTable};
pub use hetero::{build_buffered_hetero, Balancer, F2sTrace, HeteroConfig, HeteroStats};
pub use parallel::{
    build_buffered, build_multi_table, build_naive, build_sequential, BuildConfig, BuildStats, Strategy,
    UpdateSync,
};
pub use sketch::{memory_footprint, CountMinSketch, Counter, DepthMode, MemoryLayout, SketchParams, WidthMode};
pub use streamgen::{eval_accuracy, gen_stream, AccuracyReport, Distribution, ExactOracle, StreamSpec};
