use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-token segmentation label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    #[serde(rename = "B-Marriage")]
    Begin,
    #[serde(rename = "I-Marriage")]
    Inside,
    #[serde(rename = "O")]
    Outside,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Begin => "B-Marriage",
            Tag::Inside => "I-Marriage",
            Tag::Outside => "O",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Tag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "B-Marriage" | "B" => Ok(Tag::Begin),
            "I-Marriage" | "I" => Ok(Tag::Inside),
            "O" => Ok(Tag::Outside),
            other => Err(Error::usage(format!("unknown label {other:?}"))),
        }
    }
}

/// Tagging scheme: with or without the outside class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagScheme {
    Bio,
    Bi,
}

impl TagScheme {
    pub fn tagset(self) -> TagSet {
        TagSet::new(self)
    }

    pub fn name(self) -> &'static str {
        match self {
            TagScheme::Bio => "BIO",
            TagScheme::Bi => "BI",
        }
    }
}

impl FromStr for TagScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bio" => Ok(TagScheme::Bio),
            "bi" => Ok(TagScheme::Bi),
            other => Err(Error::usage(format!("unknown tag scheme {other:?}"))),
        }
    }
}

/// Ordered label inventory; label index = position in `labels`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagSet {
    scheme: TagScheme,
    labels: Vec<Tag>,
}

impl TagSet {
    pub fn new(scheme: TagScheme) -> Self {
        let labels = match scheme {
            TagScheme::Bio => vec![Tag::Begin, Tag::Inside, Tag::Outside],
            TagScheme::Bi => vec![Tag::Begin, Tag::Inside],
        };
        TagSet { scheme, labels }
    }

    pub fn scheme(&self) -> TagScheme {
        self.scheme
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[Tag] {
        &self.labels
    }

    pub fn tag(&self, index: usize) -> Tag {
        self.labels[index]
    }

    pub fn index(&self, tag: Tag) -> Result<usize> {
        self.labels.iter().position(|t| *t == tag).ok_or_else(|| {
            Error::usage(format!("label {tag} is not in the {} tagset", self.scheme.name()))
        })
    }

    pub fn encode(&self, tags: &[Tag]) -> Result<Vec<usize>> {
        tags.iter().map(|t| self.index(*t)).collect()
    }

    pub fn decode(&self, indices: &[usize]) -> Vec<Tag> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }
}
