use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Marriage-related entity types scored by the task-based evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EntityType {
    Bride,
    Groom,
    BrideResidence,
    GroomResidence,
    WeddingDate,
}

impl EntityType {
    pub const ALL: [EntityType; 5] = [
        EntityType::Bride,
        EntityType::Groom,
        EntityType::BrideResidence,
        EntityType::GroomResidence,
        EntityType::WeddingDate,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityType::Bride => "Bride",
            EntityType::Groom => "Groom",
            EntityType::BrideResidence => "BrideResidence",
            EntityType::GroomResidence => "GroomResidence",
            EntityType::WeddingDate => "WeddingDate",
        }
    }
}

impl fmt::Display for EntityType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntityType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::usage(format!("unknown entity type {s:?}")))
    }
}

/// A typed half-open character span; identity is `(type, start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Entity {
    #[serde(rename = "type")]
    pub kind: EntityType,
    pub start: usize,
    pub end: usize,
}

impl Entity {
    pub fn new(kind: EntityType, start: usize, end: usize) -> Self {
        Entity { kind, start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }
}
