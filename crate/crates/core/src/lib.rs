pub mod ablation;
pub mod crf;
pub mod data;
pub mod error;
pub mod eval;
pub mod features;
pub mod layers;
pub mod model;
pub mod numerics;
pub mod selfcheck;
pub mod tags;

pub use error::{Error, Result};
pub use tags::{Tag, TagScheme, TagSet};
