use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{ContextualSource, DEFAULT_STATIC_DIM};
use crate::tags::TagScheme;

/// Architecture, feature switches and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub scheme: TagScheme,
    pub use_contextual: bool,
    pub use_static: bool,
    pub use_distance: bool,
    pub contextual_source: ContextualSource,
    pub contextual_layers: usize,
    /// Width of each contextual layer. Derived providers use the static
    /// embedding width.
    pub contextual_dim: usize,
    pub static_dim: usize,
    pub char_dim: usize,
    pub char_filters: usize,
    pub char_width: usize,
    pub hidden_dim: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub dropout: f64,
    pub seed: u64,
    pub patience: usize,
    pub max_epochs: usize,
    /// Distance vectors are divided by this before use.
    pub distance_divisor: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            scheme: TagScheme::Bio,
            use_contextual: true,
            use_static: true,
            use_distance: true,
            contextual_source: ContextualSource::Degenerate,
            contextual_layers: 3,
            contextual_dim: DEFAULT_STATIC_DIM,
            static_dim: DEFAULT_STATIC_DIM,
            char_dim: 25,
            char_filters: 30,
            char_width: 3,
            hidden_dim: 100,
            batch_size: 16,
            learning_rate: 0.001,
            dropout: 0.5,
            seed: 0,
            patience: 5,
            max_epochs: 50,
            distance_divisor: 1.0,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::usage(m.to_string()));
        if !self.use_contextual && !self.use_static {
            return fail("at least one of the contextual and static embeddings must be enabled");
        }
        if self.batch_size == 0 {
            return fail("batch size must be at least 1");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return fail("dropout must lie in [0, 1)");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return fail("learning rate must be positive");
        }
        if self.char_dim == 0 || self.char_filters == 0 || self.char_width == 0 || self.hidden_dim == 0 {
            return fail("layer sizes must be positive");
        }
        if self.char_width.is_multiple_of(2) {
            return fail("char CNN width must be odd for same padding");
        }
        if self.use_contextual && (self.contextual_layers == 0 || self.contextual_dim == 0) {
            return fail("contextual layers and dimension must be positive");
        }
        if self.static_dim == 0 {
            return fail("static embedding dimension must be positive");
        }
        if !(self.distance_divisor > 0.0 && self.distance_divisor.is_finite()) {
            return fail("distance divisor must be positive");
        }
        if self.max_epochs == 0 {
            return fail("max epochs must be at least 1");
        }
        Ok(())
    }

    /// Short name of the feature configuration, e.g. `all` or `no-distance`.
    pub fn feature_label(&self) -> String {
        let mut off = Vec::new();
        if !self.use_contextual {
            off.push("contextual");
        }
        if !self.use_static {
            off.push("static");
        }
        if !self.use_distance {
            off.push("distance");
        }
        if off.is_empty() {
            "all".into()
        } else {
            format!("no-{}", off.join("-no-"))
        }
    }
}
