//! Edge-based segmentation of triangle meshes.

pub mod cli;
pub mod error;
pub mod feature_map;
pub mod mesh;
pub mod metrics;
pub mod net;
pub mod ops;
pub mod pool;
pub mod rescale;
pub mod synth;
pub mod train;

pub use error::{Error, ErrorClass, Result};
pub use feature_map::FeatureMap;
pub use mesh::Mesh;
