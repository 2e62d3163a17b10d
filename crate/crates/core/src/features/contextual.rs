use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::RawToken;

/// Per-token stack of `num_layers` vectors of width `dim`, stored flat as
/// `[token][layer][dim]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextualLayers {
    num_tokens: usize,
    num_layers: usize,
    dim: usize,
    values: Vec<f64>,
}

impl ContextualLayers {
    pub fn new(num_tokens: usize, num_layers: usize, dim: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != num_tokens * num_layers * dim {
            return Err(Error::usage(format!(
                "contextual layers need {} values, got {}",
                num_tokens * num_layers * dim,
                values.len()
            )));
        }
        Ok(ContextualLayers {
            num_tokens,
            num_layers,
            dim,
            values,
        })
    }

    /// Builds from nested `[token][layer][dim]` vectors, checking that every
    /// token has the same layer count and width.
    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let num_layers = nested.first().map_or(0, Vec::len);
        let dim = nested.first().and_then(|t| t.first()).map_or(0, Vec::len);
        let mut values = Vec::with_capacity(nested.len() * num_layers * dim);
        for (i, token) in nested.iter().enumerate() {
            if token.len() != num_layers {
                return Err(Error::data(format!(
                    "token {i} has {} layers, expected {num_layers}",
                    token.len()
                )));
            }
            for layer in token {
                if layer.len() != dim {
                    return Err(Error::data(format!(
                        "token {i} has a layer of width {}, expected {dim}",
                        layer.len()
                    )));
                }
                values.extend_from_slice(layer);
            }
        }
        Self::new(nested.len(), num_layers, dim, values)
    }

    pub fn num_tokens(&self) -> usize {
        self.num_tokens
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The `num_layers × dim` block of token `i`.
    pub fn token(&self, i: usize) -> &[f64] {
        let block = self.num_layers * self.dim;
        &self.values[i * block..(i + 1) * block]
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        (0..self.num_tokens)
            .map(|i| self.token(i).chunks(self.dim.max(1)).map(<[f64]>::to_vec).collect())
            .collect()
    }
}

/// Where contextual layers come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextualSource {
    /// `layers` copies of each token's static embedding.
    Degenerate,
    /// Layer `l` averages the static embeddings within `l` tokens on each side.
    Windowed,
    /// Precomputed layers read from a JSON Lines sidecar.
    Sidecar,
}

/// Supplies contextual layers for a document.
pub trait ContextualProvider {
    fn layers(
        &self,
        doc_id: &str,
        tokens: &[RawToken],
        statics: &[Vec<f64>],
    ) -> Result<ContextualLayers>;
}

#[derive(Debug, Clone, Copy)]
pub struct DegenerateProvider {
    pub num_layers: usize,
}

impl ContextualProvider for DegenerateProvider {
    fn layers(&self, _: &str, _: &[RawToken], statics: &[Vec<f64>]) -> Result<ContextualLayers> {
        let dim = statics.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(statics.len() * self.num_layers * dim);
        for s in statics {
            for _ in 0..self.num_layers {
                values.extend_from_slice(s);
            }
        }
        ContextualLayers::new(statics.len(), self.num_layers, dim, values)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WindowedProvider {
    pub num_layers: usize,
}

impl ContextualProvider for WindowedProvider {
    fn layers(&self, _: &str, _: &[RawToken], statics: &[Vec<f64>]) -> Result<ContextualLayers> {
        let n = statics.len();
        let dim = statics.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n * self.num_layers * dim);
        for i in 0..n {
            for radius in 0..self.num_layers {
                let lo = i.saturating_sub(radius);
                let hi = (i + radius).min(n - 1);
                let count = (hi - lo + 1) as f64;
                let mut acc = vec![0.0; dim];
                for s in &statics[lo..=hi] {
                    for (a, v) in acc.iter_mut().zip(s) {
                        *a += v;
                    }
                }
                values.extend(acc.into_iter().map(|a| a / count));
            }
        }
        ContextualLayers::new(n, self.num_layers, dim, values)
    }
}

#[derive(Serialize, Deserialize)]
struct SidecarLine {
    doc_id: String,
    layers: Vec<Vec<Vec<f64>>>,
}

/// Precomputed layers keyed by document id.
#[derive(Debug, Clone, Default)]
pub struct SidecarProvider {
    docs: HashMap<String, ContextualLayers>,
}

impl SidecarProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, doc_id: impl Into<String>, layers: ContextualLayers) {
        self.docs.insert(doc_id.into(), layers);
    }

    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    pub fn get(&self, doc_id: &str) -> Option<&ContextualLayers> {
        self.docs.get(doc_id)
    }

    /// `(layers, dim)` shared by the non-empty documents, if any.
    pub fn shape(&self) -> Option<(usize, usize)> {
        self.docs
            .values()
            .find(|l| l.num_tokens() > 0)
            .map(|l| (l.num_layers(), l.dim()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Self::new();
        let mut shape: Option<(usize, usize)> = None;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed: SidecarLine = serde_json::from_str(&line).map_err(|e| Error::Parse {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            let layers = ContextualLayers::from_nested(&parsed.layers).map_err(|e| Error::Schema {
                line: lineno + 1,
                message: e.to_string(),
            })?;
            if layers.num_tokens() > 0 {
                let this = (layers.num_layers(), layers.dim());
                match shape {
                    None => shape = Some(this),
                    Some(s) if s != this => {
                        return Err(Error::Schema {
                            line: lineno + 1,
                            message: format!(
                                "layer shape {this:?} differs from earlier documents {s:?}"
                            ),
                        })
                    }
                    _ => {}
                }
            }
            out.docs.insert(parsed.doc_id, layers);
        }
        Ok(out)
    }

    /// Writes entries in the given order.
    pub fn write<'a, I>(path: impl AsRef<Path>, entries: I) -> Result<()>
    where
        I: IntoIterator<Item = (&'a str, &'a ContextualLayers)>,
    {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        for (doc_id, layers) in entries {
            let line = SidecarLine {
                doc_id: doc_id.to_string(),
                layers: layers.to_nested(),
            };
            serde_json::to_writer(&mut w, &line).map_err(|e| Error::data(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

impl ContextualProvider for SidecarProvider {
    fn layers(&self, doc_id: &str, tokens: &[RawToken], _: &[Vec<f64>]) -> Result<ContextualLayers> {
        let layers = self
            .docs
            .get(doc_id)
            .ok_or_else(|| Error::data(format!("no contextual layers for document {doc_id:?}")))?;
        if layers.num_tokens() != tokens.len() {
            return Err(Error::data(format!(
                "document {doc_id:?} has {} tokens but the sidecar has {}",
                tokens.len(),
                layers.num_tokens()
            )));
        }
        Ok(layers.clone())
    }
}
