//! Split/merge trajectory clustering with a stability post-process.

pub mod distance_cache;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod segment_clustering;
pub mod stability;
pub mod synthetic;
pub mod trajectory;
pub mod trajectory_clustering;

pub use error::{Error, Result};
