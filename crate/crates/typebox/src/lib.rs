//! Box-embedding entity typing: types and mentions live in the unit
//! hypercube as Gumbel-softened boxes, and type membership is the expected
//! conditional volume of the type box given the mention box. A sigmoid-dot
//! vector baseline shares the same feature-hashing encoder.

pub mod checkpoint;
pub mod data;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod gradients;
pub mod models;
pub mod training;

pub use error::{Error, Result};
