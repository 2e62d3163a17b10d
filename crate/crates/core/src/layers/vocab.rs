use std::collections::BTreeSet;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub const PAD_INDEX: usize = 0;
pub const UNK_INDEX: usize = 1;

/// Character inventory built from training text. Index 0 is padding and
/// index 1 the unknown character; real characters follow in sorted order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<char>", into = "Vec<char>")]
pub struct CharVocab {
    chars: Vec<char>,
    index: HashMap<char, usize>,
}

impl CharVocab {
    pub fn build<'a, I>(texts: I) -> Self
    where
        I: IntoIterator<Item = &'a str>,
    {
        let set: BTreeSet<char> = texts.into_iter().flat_map(str::chars).collect();
        Self::from(set.into_iter().collect::<Vec<_>>())
    }

    /// Number of embedding rows, including the two reserved ones.
    pub fn len(&self) -> usize {
        self.chars.len() + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn chars(&self) -> &[char] {
        &self.chars
    }

    pub fn index_of(&self, c: char) -> usize {
        self.index.get(&c).copied().unwrap_or(UNK_INDEX)
    }

    /// Indices for a token; an empty token becomes a single unknown char.
    pub fn encode(&self, text: &str) -> Vec<usize> {
        let v: Vec<usize> = text.chars().map(|c| self.index_of(c)).collect();
        if v.is_empty() {
            vec![UNK_INDEX]
        } else {
            v
        }
    }
}

impl From<Vec<char>> for CharVocab {
    fn from(chars: Vec<char>) -> Self {
        let index = chars.iter().enumerate().map(|(i, c)| (*c, i + 2)).collect();
        CharVocab { chars, index }
    }
}

impl From<CharVocab> for Vec<char> {
    fn from(v: CharVocab) -> Self {
        v.chars
    }
}
