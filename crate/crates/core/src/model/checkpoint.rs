//! Single-file checkpoints: magic bytes, a little-endian `u32` manifest
//! length, a JSON manifest, then every tensor as little-endian `f64`s in
//! manifest order.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{OovPolicy, StaticEmbeddingTable};
use crate::layers::CharVocab;
use crate::model::{ModelConfig, Tagger};
use crate::numerics::Tensor;
use crate::tags::TagSet;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"MSEGCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    version: u32,
    config: ModelConfig,
    tagset: TagSet,
    char_vocab: CharVocab,
    static_table: StaticManifest,
    tensors: Vec<TensorEntry>,
}

#[derive(Serialize, Deserialize)]
struct StaticManifest {
    dim: usize,
    oov: OovPolicy,
    tokens: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

fn corrupt(offset: usize, message: impl Into<String>) -> Error {
    Error::Checkpoint {
        offset: offset as u64,
        message: message.into(),
    }
}

/// Serializes the model to bytes.
pub fn checkpoint_bytes(tagger: &Tagger) -> Vec<u8> {
    let statics = tagger.statics();
    let manifest = Manifest {
        version: CHECKPOINT_VERSION,
        config: tagger.config().clone(),
        tagset: tagger.tagset().clone(),
        char_vocab: tagger.vocab().clone(),
        static_table: StaticManifest {
            dim: statics.dim(),
            oov: statics.oov_policy(),
            tokens: statics.tokens().to_vec(),
        },
        tensors: tagger
            .params()
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                shape: p.value.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&manifest).expect("manifest serializes");
    let floats = statics.flat_vectors().len() + tagger.params().num_scalars();
    let mut out = Vec::with_capacity(12 + json.len() + 8 * floats);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    let values = statics
        .flat_vectors()
        .iter()
        .chain(tagger.params().iter().flat_map(|p| p.value.values()));
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(corrupt(
                self.bytes.len(),
                format!("file ends inside {what} (needed {n} bytes at offset {})", self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn floats(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let raw = self.take(n * 8, what)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect())
    }
}

/// Rebuilds a model from [`checkpoint_bytes`] output.
pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<Tagger> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic header")? != CHECKPOINT_MAGIC {
        return Err(corrupt(0, "not a checkpoint file"));
    }
    let len = u32::from_le_bytes(r.take(4, "manifest length")?.try_into().expect("4 bytes")) as usize;
    let start = r.pos;
    let manifest: Manifest = {
        let raw = r.take(len, "manifest")?;
        let value: serde_json::Value =
            serde_json::from_slice(raw).map_err(|e| corrupt(start, format!("manifest: {e}")))?;
        let version = value.get("version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
        if version != CHECKPOINT_VERSION {
            return Err(Error::Version {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        serde_json::from_value(value).map_err(|e| corrupt(start, format!("manifest: {e}")))?
    };

    let s = &manifest.static_table;
    let static_values = r.floats(s.tokens.len() * s.dim, "static embedding table")?;
    let entries = s
        .tokens
        .iter()
        .cloned()
        .zip(static_values.chunks(s.dim.max(1)).map(<[f64]>::to_vec));
    let statics = StaticEmbeddingTable::from_entries(s.dim, entries, s.oov)
        .map_err(|e| corrupt(start, e.to_string()))?;
    if statics.len() != s.tokens.len() {
        return Err(corrupt(start, "duplicate tokens in static table"));
    }

    let mut tagger = Tagger::new(manifest.config, manifest.char_vocab, Arc::new(statics))
        .map_err(|e| corrupt(start, format!("inconsistent manifest: {e}")))?;
    if *tagger.tagset() != manifest.tagset {
        return Err(corrupt(start, "tagset does not match the configured scheme"));
    }
    if tagger.params().len() != manifest.tensors.len() {
        return Err(corrupt(
            start,
            format!(
                "manifest lists {} tensors, model has {}",
                manifest.tensors.len(),
                tagger.params().len()
            ),
        ));
    }
    for (p, entry) in tagger.params_mut().iter_mut().zip(&manifest.tensors) {
        if p.name != entry.name || p.value.shape() != entry.shape.as_slice() {
            return Err(corrupt(
                start,
                format!(
                    "tensor {} {:?} does not match model tensor {} {:?}",
                    entry.name,
                    entry.shape,
                    p.name,
                    p.value.shape()
                ),
            ));
        }
        let offset = r.pos;
        let values = r.floats(p.value.len(), &format!("tensor {}", entry.name))?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(corrupt(offset, format!("non-finite value in tensor {}", entry.name)));
        }
        p.value = Tensor::from_vec(&entry.shape, values)?;
    }
    if r.pos != bytes.len() {
        return Err(corrupt(r.pos, "trailing bytes after the last tensor"));
    }
    Ok(tagger)
}

/// Writes atomically through a temporary file in the same directory.
pub fn save_checkpoint(tagger: &Tagger, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, checkpoint_bytes(tagger)).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Tagger> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth_generate;
    use crate::data::SynthConfig;
    use crate::numerics::SeededRng;

    fn model() -> (Tagger, Vec<crate::data::Document>) {
        let docs = synth_generate(3, 8, &SynthConfig::default()).unwrap();
        let vocab = CharVocab::build(docs.iter().flat_map(|d| d.tokens()).map(|t| t.text.as_str()));
        let statics = StaticEmbeddingTable::from_entries(
            4,
            vec![("and".to_string(), vec![0.1, -0.2, 0.3, 1e-300]), ("of".to_string(), vec![1.0; 4])],
            OovPolicy::default(),
        )
        .unwrap();
        let config = ModelConfig {
            static_dim: 4,
            contextual_dim: 4,
            char_dim: 3,
            char_filters: 4,
            hidden_dim: 5,
            seed: 2,
            ..Default::default()
        };
        let mut t = Tagger::new(config, vocab, Arc::new(statics)).unwrap();
        let mut rng = SeededRng::new(9);
        for p in t.params_mut().iter_mut() {
            for v in p.value.values_mut() {
                *v += rng.normal() * 0.3;
            }
        }
        (t, docs)
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let (t, docs) = model();
        let bytes = checkpoint_bytes(&t);
        let back = checkpoint_from_bytes(&bytes).unwrap();
        assert_eq!(checkpoint_bytes(&back), bytes);
        for d in &docs {
            let a = t.emissions(&t.features(d).unwrap()).unwrap();
            let b = back.emissions(&back.features(d).unwrap()).unwrap();
            assert!(a.values().iter().zip(b.values()).all(|(x, y)| x.to_bits() == y.to_bits()));
            assert_eq!(t.predict(d).unwrap(), back.predict(d).unwrap());
        }
    }

    #[test]
    fn truncation_reports_offset() {
        let (t, _) = model();
        let bytes = checkpoint_bytes(&t);
        for cut in [0, 5, 11, 40, bytes.len() - 1] {
            match checkpoint_from_bytes(&bytes[..cut]) {
                Err(Error::Checkpoint { offset, .. }) => assert!(offset <= cut as u64),
                other => panic!("cut at {cut}: {other:?}"),
            }
        }
    }

    #[test]
    fn version_mismatch() {
        let (t, _) = model();
        let bytes = checkpoint_bytes(&t);
        let text = String::from_utf8_lossy(&bytes[12..]).to_string();
        let at = 12 + text.find("\"version\":1").unwrap() + "\"version\":".len();
        let mut bumped = bytes.clone();
        bumped[at] = b'2';
        assert!(matches!(
            checkpoint_from_bytes(&bumped),
            Err(Error::Version { found: 2, expected: 1 })
        ));
    }

    #[test]
    fn file_round_trip() {
        let (t, _) = model();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ckpt");
        save_checkpoint(&t, &path).unwrap();
        assert_eq!(checkpoint_bytes(&load_checkpoint(&path).unwrap()), checkpoint_bytes(&t));
        assert!(matches!(load_checkpoint(dir.path().join("missing")), Err(Error::Io { .. })));
    }
}
