use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::CASING_DIM;

/// Widths of the pieces concatenated into a token representation. A
/// disabled piece has width zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingLayout {
    pub char_dim: usize,
    pub static_dim: usize,
    pub contextual_dim: usize,
    pub use_distance: bool,
}

impl EmbeddingLayout {
    pub fn total_dim(&self) -> usize {
        self.char_dim
            + self.static_dim
            + self.contextual_dim
            + CASING_DIM
            + if self.use_distance { 2 } else { 0 }
    }

    /// Offsets of the char, static, contextual, casing and distance pieces.
    pub fn offsets(&self) -> [usize; 5] {
        let a = self.char_dim;
        let b = a + self.static_dim;
        let c = b + self.contextual_dim;
        let d = c + CASING_DIM;
        [0, a, b, c, d]
    }
}

/// Concatenates `char ∘ static ∘ contextual ∘ casing (∘ distance)`.
pub fn assemble_token_embedding(
    layout: &EmbeddingLayout,
    t_char: &[f64],
    t_static: &[f64],
    t_contextual: &[f64],
    t_casing: &[f64],
    t_dist: Option<&[f64]>,
) -> Result<Vec<f64>> {
    let check = |name: &str, got: usize, want: usize| {
        if got == want {
            Ok(())
        } else {
            Err(Error::usage(format!("{name} piece has width {got}, layout expects {want}")))
        }
    };
    check("char", t_char.len(), layout.char_dim)?;
    check("static", t_static.len(), layout.static_dim)?;
    check("contextual", t_contextual.len(), layout.contextual_dim)?;
    check("casing", t_casing.len(), CASING_DIM)?;
    match (layout.use_distance, t_dist) {
        (true, Some(d)) => check("distance", d.len(), 2)?,
        (false, None) => {}
        (true, None) => return Err(Error::usage("layout expects a distance piece")),
        (false, Some(_)) => return Err(Error::usage("distance piece given but disabled")),
    }
    let mut v = Vec::with_capacity(layout.total_dim());
    v.extend_from_slice(t_char);
    v.extend_from_slice(t_static);
    v.extend_from_slice(t_contextual);
    v.extend_from_slice(t_casing);
    if let Some(d) = t_dist {
        v.extend_from_slice(d);
    }
    Ok(v)
}
