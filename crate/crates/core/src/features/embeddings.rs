use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SeededRng;

pub const DEFAULT_STATIC_DIM: usize = 100;

/// How lookups of out-of-vocabulary tokens are resolved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OovPolicy {
    /// Gaussian vector with standard deviation `scale`, seeded by the
    /// FNV-1a hash of the token bytes.
    HashedGaussian { scale: f64 },
    Zeros,
}

impl Default for OovPolicy {
    fn default() -> Self {
        OovPolicy::HashedGaussian { scale: 0.1 }
    }
}

/// Frozen token → vector table.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticEmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    tokens: Vec<String>,
    vectors: Vec<f64>,
    oov: OovPolicy,
}

impl StaticEmbeddingTable {
    /// Empty vocabulary: every lookup goes through the OOV policy.
    pub fn empty(dim: usize, oov: OovPolicy) -> Self {
        StaticEmbeddingTable {
            dim,
            index: HashMap::new(),
            tokens: Vec::new(),
            vectors: Vec::new(),
            oov,
        }
    }

    /// Builds a table from `(token, vector)` entries; duplicates keep the
    /// first occurrence.
    pub fn from_entries<I>(dim: usize, entries: I, oov: OovPolicy) -> Result<Self>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        let mut table = Self::empty(dim, oov);
        for (token, vector) in entries {
            if vector.len() != dim {
                return Err(Error::usage(format!(
                    "embedding for {token:?} has dimension {}, expected {dim}",
                    vector.len()
                )));
            }
            table.insert(token, &vector);
        }
        Ok(table)
    }

    fn insert(&mut self, token: String, vector: &[f64]) {
        if self.index.contains_key(&token) {
            return;
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.vectors.extend_from_slice(vector);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn oov_policy(&self) -> OovPolicy {
        self.oov
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Flat `len × dim` matrix in vocabulary order.
    pub fn flat_vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn contains(&self, token: &str) -> bool {
        self.index.contains_key(token)
    }

    /// Total lookup: stored vector or the OOV policy's vector.
    pub fn lookup(&self, token: &str) -> Vec<f64> {
        match self.index.get(token) {
            Some(&i) => self.vectors[i * self.dim..(i + 1) * self.dim].to_vec(),
            None => self.oov_vector(token),
        }
    }

    fn oov_vector(&self, token: &str) -> Vec<f64> {
        match self.oov {
            OovPolicy::Zeros => vec![0.0; self.dim],
            OovPolicy::HashedGaussian { scale } => {
                let mut rng = SeededRng::new(fnv1a(token.as_bytes()));
                (0..self.dim).map(|_| scale * rng.normal()).collect()
            }
        }
    }
}

/// 64-bit FNV-1a.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Reads a whitespace-separated text embedding file (token then floats per
/// line). The dimension is taken from the first line.
pub fn load_static_embeddings(path: impl AsRef<Path>, oov: OovPolicy) -> Result<StaticEmbeddingTable> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut table: Option<StaticEmbeddingTable> = None;
    let mut buf = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = lineno + 1;
        let mut parts = line.split_whitespace();
        let Some(token) = parts.next() else {
            continue;
        };
        buf.clear();
        for p in parts {
            let v: f64 = p.parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("invalid float {p:?}"),
            })?;
            buf.push(v);
        }
        let t = table.get_or_insert_with(|| StaticEmbeddingTable::empty(buf.len(), oov));
        if buf.is_empty() || buf.len() != t.dim {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} values, found {}", t.dim, buf.len()),
            });
        }
        t.insert(token.to_string(), &buf);
    }
    table.ok_or_else(|| Error::Parse {
        line: 0,
        message: format!("{}: embedding file is empty", path.display()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_two_lines() {
        let f = write("amy 0.1 0.2 0.3\nsmith -1 0 2.5\n");
        let t = load_static_embeddings(f.path(), OovPolicy::Zeros).unwrap();
        assert_eq!(t.len(), 2);
        assert_eq!(t.dim(), 3);
        assert_eq!(t.lookup("smith"), vec![-1.0, 0.0, 2.5]);
        assert_eq!(t.lookup("zzz"), vec![0.0; 3]);
    }

    #[test]
    fn duplicates_keep_first() {
        let f = write("a 1 1\na 2 2\n");
        let t = load_static_embeddings(f.path(), OovPolicy::Zeros).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.lookup("a"), vec![1.0, 1.0]);
    }

    #[test]
    fn inconsistent_dimension_reports_line() {
        let f = write("a 1 1\nb 2 2\nc 3\n");
        match load_static_embeddings(f.path(), OovPolicy::Zeros) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_file_is_an_error() {
        let f = write("");
        assert!(load_static_embeddings(f.path(), OovPolicy::Zeros).is_err());
    }

    #[test]
    fn hashed_oov_is_stable_and_token_specific() {
        let t = StaticEmbeddingTable::empty(16, OovPolicy::default());
        let a1 = t.lookup("marned");
        let a2 = StaticEmbeddingTable::empty(16, OovPolicy::default()).lookup("marned");
        let b = t.lookup("rnarried");
        assert_eq!(a1, a2);
        assert_ne!(a1, b);
        assert!(a1.iter().any(|v| *v != 0.0));
    }
}
