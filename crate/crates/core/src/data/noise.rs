use serde::{Deserialize, Serialize};

use crate::data::Document;
use crate::error::{Error, Result};
use crate::eval::Entity;
use crate::features::fnv1a;
use crate::numerics::SeededRng;

/// OCR-style corruption rates, applied independently per token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseConfig {
    pub substitution_rate: f64,
    pub case_flip_rate: f64,
    pub punctuation_swap_rate: f64,
    /// `(from, to)` character-sequence confusions used for substitutions.
    pub confusions: Vec<(String, String)>,
    pub seed: u64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            substitution_rate: 0.0,
            case_flip_rate: 0.0,
            punctuation_swap_rate: 0.0,
            confusions: default_confusions(),
            seed: 0,
        }
    }
}

fn default_confusions() -> Vec<(String, String)> {
    [
        ("o", "0"),
        ("0", "o"),
        ("l", "1"),
        ("1", "l"),
        ("rn", "m"),
        ("m", "rn"),
        ("e", "c"),
        ("c", "e"),
        ("h", "b"),
        ("i", "l"),
        ("u", "n"),
        ("n", "u"),
        ("S", "5"),
        ("B", "8"),
        (".", ","),
        (",", "."),
    ]
    .into_iter()
    .map(|(a, b)| (a.to_string(), b.to_string()))
    .collect()
}

impl NoiseConfig {
    /// The same rate for all three corruption kinds.
    pub fn uniform(rate: f64, seed: u64) -> Self {
        NoiseConfig {
            substitution_rate: rate,
            case_flip_rate: rate,
            punctuation_swap_rate: rate,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, r) in [
            ("substitution_rate", self.substitution_rate),
            ("case_flip_rate", self.case_flip_rate),
            ("punctuation_swap_rate", self.punctuation_swap_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::usage(format!("{name} {r} outside [0, 1]")));
            }
        }
        if self.confusions.iter().any(|(a, b)| a.is_empty() || a == b) {
            return Err(Error::usage("confusion pairs must be nonempty and distinct"));
        }
        Ok(())
    }
}

fn substitute(text: &str, confusions: &[(String, String)], rng: &mut SeededRng) -> String {
    let applicable: Vec<&(String, String)> =
        confusions.iter().filter(|(a, _)| text.contains(a.as_str())).collect();
    if !applicable.is_empty() {
        let (from, to) = *rng.choose(&applicable);
        let sites: Vec<usize> = text.match_indices(from.as_str()).map(|(i, _)| i).collect();
        let at = *rng.choose(&sites);
        let mut out = String::with_capacity(text.len() + 1);
        out.push_str(&text[..at]);
        out.push_str(to);
        out.push_str(&text[at + from.len()..]);
        return out;
    }
    // no confusion applies: replace one char with a different letter
    let mut chars: Vec<char> = text.chars().collect();
    if chars.is_empty() {
        return "x".to_string();
    }
    let k = rng.below(chars.len());
    let mut c = (b'a' + rng.below(26) as u8) as char;
    if c == chars[k] {
        c = if c == 'z' { 'a' } else { (c as u8 + 1) as char };
    }
    chars[k] = c;
    chars.into_iter().collect()
}

fn flip_case(text: &str) -> String {
    text.chars()
        .flat_map(|c| {
            if c.is_uppercase() {
                c.to_lowercase().collect::<Vec<_>>()
            } else if c.is_lowercase() {
                c.to_uppercase().collect::<Vec<_>>()
            } else {
                vec![c]
            }
        })
        .collect()
}

fn swap_punctuation(text: &str, rng: &mut SeededRng) -> String {
    let sites: Vec<usize> = text
        .char_indices()
        .filter(|(_, c)| matches!(c, '.' | ',' | ';' | ':'))
        .map(|(i, _)| i)
        .collect();
    if sites.is_empty() {
        return text.to_string();
    }
    let at = *rng.choose(&sites);
    let c = text[at..].chars().next().unwrap();
    let swapped = match c {
        '.' => ',',
        ',' => '.',
        ';' => ':',
        _ => ';',
    };
    let mut out = String::with_capacity(text.len());
    out.push_str(&text[..at]);
    out.push(swapped);
    out.push_str(&text[at + 1..]);
    out
}

/// Where an entity sits relative to its first and last tokens.
struct Anchor {
    entity: Entity,
    first: usize,
    from_start: usize,
    last: usize,
    from_end: usize,
}

fn anchor(doc: &Document, e: &Entity) -> Anchor {
    let toks = doc.tokens();
    let first = toks
        .iter()
        .position(|t| t.char_end > e.start)
        .unwrap_or(toks.len() - 1);
    let last = toks
        .iter()
        .rposition(|t| t.char_start < e.end)
        .unwrap_or(first)
        .max(first);
    Anchor {
        entity: *e,
        first,
        from_start: e.start.saturating_sub(toks[first].char_start),
        last,
        from_end: toks[last].char_end.saturating_sub(e.end),
    }
}

/// Corrupts token texts. Token count, labels and entity identities are
/// preserved; entity spans follow their tokens to the new offsets.
pub fn inject_ocr_noise(doc: &Document, config: &NoiseConfig) -> Result<Document> {
    config.validate()?;
    let mut rng = SeededRng::derive(config.seed, fnv1a(doc.doc_id.as_bytes()));
    let texts: Vec<String> = doc
        .tokens()
        .iter()
        .map(|t| {
            let mut s = t.text.clone();
            if rng.bernoulli(config.substitution_rate) {
                s = substitute(&s, &config.confusions, &mut rng);
            }
            if rng.bernoulli(config.case_flip_rate) {
                s = flip_case(&s);
            }
            if rng.bernoulli(config.punctuation_swap_rate) {
                s = swap_punctuation(&s, &mut rng);
            }
            s
        })
        .collect();

    let anchors: Vec<Anchor> = doc.entities().iter().map(|e| anchor(doc, e)).collect();
    let mut out = doc.clone();
    out.replace_texts(texts, None)?;
    if doc.has_entities() {
        let toks = out.tokens();
        let entities = anchors
            .iter()
            .map(|a| {
                let ft = &toks[a.first];
                let lt = &toks[a.last];
                let first_len = ft.char_end - ft.char_start;
                let last_len = lt.char_end - lt.char_start;
                let start = ft.char_start + a.from_start.min(first_len.saturating_sub(1));
                let mut end = lt.char_end - a.from_end.min(last_len.saturating_sub(1));
                if end <= start {
                    end = start + 1;
                }
                Entity::new(a.entity.kind, start, end)
            })
            .collect();
        out.replace_texts(out.tokens().iter().map(|t| t.text.clone()).collect(), Some(entities))?;
    }
    Ok(out)
}
