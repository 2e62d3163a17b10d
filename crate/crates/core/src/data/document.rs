use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Entity;
use crate::features::RawToken;
use crate::tags::Tag;

/// An OCR'd article: ordered tokens with optional gold labels and entities.
///
/// The document text is the token texts joined by single spaces; token
/// character offsets and entity spans index that text (in chars).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DocumentRecord", into = "DocumentRecord")]
pub struct Document {
    pub doc_id: String,
    tokens: Vec<RawToken>,
    labels: Option<Vec<Tag>>,
    entities: Option<Vec<Entity>>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct DocumentRecord {
    doc_id: String,
    tokens: Vec<RawToken>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<Tag>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entities: Option<Vec<Entity>>,
}

impl TryFrom<DocumentRecord> for Document {
    type Error = Error;

    fn try_from(r: DocumentRecord) -> Result<Self> {
        Document::new(r.doc_id, r.tokens, r.labels, r.entities)
    }
}

impl From<Document> for DocumentRecord {
    fn from(d: Document) -> Self {
        DocumentRecord {
            doc_id: d.doc_id,
            tokens: d.tokens,
            labels: d.labels,
            entities: d.entities,
        }
    }
}

impl Document {
    /// Validates and assigns character offsets.
    pub fn new(
        doc_id: impl Into<String>,
        tokens: Vec<RawToken>,
        labels: Option<Vec<Tag>>,
        entities: Option<Vec<Entity>>,
    ) -> Result<Self> {
        let mut doc = Document {
            doc_id: doc_id.into(),
            tokens,
            labels,
            entities,
        };
        doc.reindex();
        doc.validate()?;
        Ok(doc)
    }

    fn reindex(&mut self) {
        let mut pos = 0;
        for (i, t) in self.tokens.iter_mut().enumerate() {
            if i > 0 {
                pos += 1;
            }
            t.char_start = pos;
            pos += t.text.chars().count();
            t.char_end = pos;
        }
    }

    fn validate(&self) -> Result<()> {
        if let Some(labels) = &self.labels {
            if labels.len() != self.tokens.len() {
                return Err(Error::data(format!(
                    "document {:?}: {} labels for {} tokens",
                    self.doc_id,
                    labels.len(),
                    self.tokens.len()
                )));
            }
        }
        let len = self.text_len();
        for e in self.entities.iter().flatten() {
            if e.start >= e.end || e.end > len {
                return Err(Error::data(format!(
                    "document {:?}: entity {} span [{}, {}) outside text of length {len}",
                    self.doc_id, e.kind, e.start, e.end
                )));
            }
        }
        Ok(())
    }

    pub fn tokens(&self) -> &[RawToken] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn labels(&self) -> Option<&[Tag]> {
        self.labels.as_deref()
    }

    pub fn entities(&self) -> &[Entity] {
        self.entities.as_deref().unwrap_or(&[])
    }

    pub fn has_entities(&self) -> bool {
        self.entities.is_some()
    }

    pub fn set_labels(&mut self, labels: Option<Vec<Tag>>) -> Result<()> {
        let old = std::mem::replace(&mut self.labels, labels);
        if let Err(e) = self.validate() {
            self.labels = old;
            return Err(e);
        }
        Ok(())
    }

    /// Replaces token texts (count must not change) and entity spans.
    pub fn replace_texts(&mut self, texts: Vec<String>, entities: Option<Vec<Entity>>) -> Result<()> {
        if texts.len() != self.tokens.len() {
            return Err(Error::usage("token count must be preserved"));
        }
        for (t, text) in self.tokens.iter_mut().zip(texts) {
            t.text = text;
        }
        self.entities = entities;
        self.reindex();
        self.validate()
    }

    /// Length in chars of the reconstructed text.
    pub fn text_len(&self) -> usize {
        self.tokens.last().map_or(0, |t| t.char_end)
    }

    pub fn text(&self) -> String {
        self.tokens
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}
