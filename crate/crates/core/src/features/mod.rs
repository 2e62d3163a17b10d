//! Token features: casing one-hots, layout distance vectors, static
//! embeddings and scalar-mixed contextual layers.

mod casing;
mod contextual;
mod distance;
mod embeddings;
mod scalar_mix;

pub use casing::{casing_feature, CasingCategory, CASING_DIM};
pub use contextual::{
    ContextualLayers, ContextualProvider, ContextualSource, DegenerateProvider, SidecarProvider,
    WindowedProvider,
};
pub use distance::{distance_vectors, scaled_distance_vectors};
pub use embeddings::{load_static_embeddings, OovPolicy, StaticEmbeddingTable, DEFAULT_STATIC_DIM};
pub(crate) use embeddings::fnv1a;
pub use scalar_mix::{scalar_mix, scalar_mix_backward};

use serde::{Deserialize, Serialize};

/// A token as produced by OCR: its text and the top-left pixel corner of
/// its bounding box. Character offsets index the document's reconstructed
/// text and are derived, not stored.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawToken {
    pub text: String,
    pub x: u32,
    pub y: u32,
    #[serde(skip)]
    pub char_start: usize,
    #[serde(skip)]
    pub char_end: usize,
}

impl RawToken {
    pub fn new(text: impl Into<String>, x: u32, y: u32) -> Self {
        RawToken {
            text: text.into(),
            x,
            y,
            char_start: 0,
            char_end: 0,
        }
    }
}

/// Lowercasing applied before every embedding lookup.
pub fn lowercase_normalize(text: &str) -> String {
    text.to_lowercase()
}
