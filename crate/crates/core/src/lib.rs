//! Text graph tensor construction and tensor graph convolutional networks
//! for transductive document classification.

pub mod ablation;
pub mod autodiff;
pub mod config;
pub mod corpus;
pub mod error;
pub mod fixtures;
pub mod gradcheck;
pub mod graph;
pub mod linalg;
pub mod manifest;
pub mod model;
pub mod trainer;

pub use error::{Error, Result};
