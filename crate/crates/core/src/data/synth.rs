//! Synthetic marriage-announcement lists with simulated page layout.
//!
//! Each document is an optional header, optional O-labelled preamble and
//! date subheadings, and a run of announcements drawn from templates.
//! Segment counts follow a rounded log-normal with median 7; announcements
//! run 40-80 characters. Announcements usually start a new printed line.

use serde::{Deserialize, Serialize};

use crate::data::Document;
use crate::error::{Error, Result};
use crate::eval::{Entity, EntityType};
use crate::features::RawToken;
use crate::numerics::SeededRng;
use crate::tags::Tag;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub median_segments: f64,
    /// Log-scale spread of the segment count.
    pub segment_spread: f64,
    pub header_prob: f64,
    pub preamble_prob: f64,
    /// Probability that a document carries date subheadings.
    pub subheading_prob: f64,
    /// Per-document range for the chance that an announcement starts a line.
    pub newline_prob: (f64, f64),
    /// Chance that the period ending the previous announcement became a comma.
    pub period_to_comma_prob: f64,
    /// Chance that an announcement's first word is lowercased.
    pub lowercase_initial_prob: f64,
    pub trailer_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            median_segments: 7.0,
            segment_spread: 0.45,
            header_prob: 0.75,
            preamble_prob: 0.2,
            subheading_prob: 0.25,
            newline_prob: (0.6, 1.0),
            period_to_comma_prob: 0.08,
            lowercase_initial_prob: 0.06,
            trailer_prob: 0.15,
        }
    }
}

const GROOM_FIRST: &[&str] = &[
    "John", "William", "James", "George", "Charles", "Frank", "Joseph", "Henry", "Robert", "Edward",
    "Thomas", "Walter", "Harry", "Arthur", "Fred", "Albert", "Samuel", "Louis", "Clarence", "Ernest",
    "Paul", "Carl", "Oscar", "Herman", "Jesse", "Elmer", "Roy", "Earl", "Ray", "Hugh",
];
const BRIDE_FIRST: &[&str] = &[
    "Mary", "Anna", "Emma", "Elizabeth", "Margaret", "Minnie", "Ida", "Bertha", "Clara", "Alice",
    "Annie", "Florence", "Bessie", "Grace", "Ethel", "Sarah", "Ella", "Edna", "Mabel", "Lillian",
    "Rose", "Helen", "Laura", "Cora", "Nellie", "Pearl", "Martha", "Hattie", "Amy", "Lena",
];
const SURNAMES: &[&str] = &[
    "Smith", "Johnson", "Brown", "Miller", "Davis", "Wilson", "Anderson", "Taylor", "Thomas", "Moore",
    "Martin", "Jackson", "Thompson", "White", "Harris", "Clark", "Lewis", "Robinson", "Walker", "Young",
    "Allen", "King", "Wright", "Scott", "Hill", "Green", "Adams", "Baker", "Nelson", "Carter",
    "Mitchell", "Roberts", "Turner", "Phillips", "Campbell", "Parker", "Evans", "Edwards", "Collins",
    "Stewart", "Morris", "Murphy", "Cook", "Rogers", "McKay", "Olson", "Larsen", "Schmidt", "Becker",
    "O'Brien", "Burnham", "Lindqvist", "Hoffman", "Keller", "Weaver", "Fischer", "Sullivan",
];
const TOWNS: &[&str] = &[
    "Springfield", "Riverton", "Salem", "Fairview", "Clinton", "Georgetown", "Madison", "Franklin",
    "Greenville", "Bristol", "Marion", "Oxford", "Ashland", "Dover", "Milton", "Newport", "Auburn",
    "Burlington", "Chester", "Jackson", "Lexington", "Lincoln", "Monroe", "Plymouth", "Troy",
    "Cedar Rapids", "Des Moines", "Rock Island", "Sioux City", "Grand Forks", "Council Bluffs",
    "this city", "Kansas City",
];
const MONTHS: &[&str] = &[
    "Jan.", "Feb.", "March", "April", "May", "June", "July", "Aug.", "Sept.", "Oct.", "Nov.", "Dec.",
];
const HEADERS: &[&[&str]] = &[
    &["MARRIED"],
    &["MARRIAGES"],
    &["MARRIAGE", "LICENSES"],
    &["Marriage", "Licenses."],
    &["WEDDINGS"],
    &["LICENSED", "TO", "WED"],
    &["Marriage", "Record"],
];
const PREAMBLES: &[&[&str]] = &[
    &["The", "following", "licenses", "were", "issued", "by", "the", "county", "clerk:"],
    &["Licenses", "to", "wed", "were", "granted", "at", "the", "clerk's", "office", "to", "the", "following:"],
    &["Issued", "at", "the", "courthouse", "this", "week:"],
];
const TRAILERS: &[&str] = &["(No", "cards.)"];

struct Piece {
    text: String,
    entity: Option<usize>,
}

/// Announcement under construction: words plus entity groups.
struct Builder {
    pieces: Vec<Piece>,
    /// (type, chars trimmed from the end of the last token)
    entities: Vec<(EntityType, usize)>,
}

impl Builder {
    fn new() -> Self {
        Builder {
            pieces: Vec::new(),
            entities: Vec::new(),
        }
    }

    fn words(&mut self, s: &str) -> &mut Self {
        for w in s.split_whitespace() {
            self.pieces.push(Piece {
                text: w.to_string(),
                entity: None,
            });
        }
        self
    }

    /// Appends an entity's words; `punct` is glued to its last word but
    /// lies outside the entity span.
    fn entity(&mut self, kind: EntityType, text: &str, punct: &str) -> &mut Self {
        let id = self.entities.len();
        self.entities.push((kind, punct.chars().count()));
        let words: Vec<&str> = text.split_whitespace().collect();
        for (i, w) in words.iter().enumerate() {
            let mut t = w.to_string();
            if i + 1 == words.len() {
                t.push_str(punct);
            }
            self.pieces.push(Piece {
                text: t,
                entity: Some(id),
            });
        }
        self
    }
}

fn name(rng: &mut SeededRng, first: &[&str]) -> String {
    let f = rng.choose(first);
    let s = rng.choose(SURNAMES);
    match rng.below(6) {
        0 => format!("{} {}. {}", f, (b'A' + rng.below(26) as u8) as char, s),
        1 => format!("{}. {}", &f[..1], s),
        _ => format!("{f} {s}"),
    }
}

fn date(rng: &mut SeededRng, year: u32) -> String {
    let m = rng.choose(MONTHS);
    let d = 1 + rng.below(28);
    if rng.bernoulli(0.4) {
        format!("{m} {d}, {year}")
    } else {
        format!("{m} {d}")
    }
}

fn announcement(rng: &mut SeededRng, year: u32) -> Builder {
    let groom = name(rng, GROOM_FIRST);
    let bride = name(rng, BRIDE_FIRST);
    let g_town = rng.choose(TOWNS).to_string();
    let b_town = rng.choose(TOWNS).to_string();
    let g_age = 19 + rng.below(20);
    let b_age = 17 + rng.below(15);
    let mut b = Builder::new();
    use EntityType::*;
    match rng.below(6) {
        0 => {
            b.entity(Groom, &groom, ",").words(&format!("{g_age},"));
            b.entity(GroomResidence, &g_town, ",").words("and");
            b.entity(Bride, &bride, ",").words(&format!("{b_age},"));
            b.entity(BrideResidence, &b_town, ".");
        }
        1 => {
            b.entity(Groom, &groom, "").words("of");
            b.entity(GroomResidence, &g_town, "").words("to");
            b.entity(Bride, &bride, "").words("of");
            b.entity(BrideResidence, &b_town, ".");
        }
        2 => {
            let town = rng.choose(TOWNS).to_string();
            b.entity(Groom, &groom, "").words("and");
            b.entity(Bride, &bride, ",").words("both of");
            // both residences share the span
            let id_g = b.entities.len();
            b.entities.push((GroomResidence, 1));
            b.entities.push((BrideResidence, 1));
            let words: Vec<&str> = town.split_whitespace().collect();
            for (i, w) in words.iter().enumerate() {
                let t = if i + 1 == words.len() { format!("{w}.") } else { w.to_string() };
                b.pieces.push(Piece {
                    text: t,
                    entity: Some(id_g),
                });
            }
        }
        3 => {
            let gs = groom.rsplit(' ').next().unwrap().to_string();
            let bs = bride.rsplit(' ').next().unwrap().to_string();
            b.words(&format!("{gs}-{bs}."));
            b.entity(Groom, &groom, "").words("of");
            b.entity(GroomResidence, &g_town, "").words("and");
            b.entity(Bride, &bride, "").words("of");
            b.entity(BrideResidence, &b_town, ",");
            b.entity(WeddingDate, &date(rng, year), ".");
        }
        4 => {
            b.words("Mr.").entity(Groom, &groom, ",");
            b.entity(GroomResidence, &g_town, ",").words("and Miss");
            b.entity(Bride, &bride, ",");
            b.entity(BrideResidence, &b_town, ",").words("were married");
            let officiant = rng.choose(SURNAMES).to_string();
            b.entity(WeddingDate, &date(rng, year), "")
                .words(&format!("by Rev. {officiant}."));
        }
        _ => {
            b.entity(Groom, &groom, ",").entity(GroomResidence, &g_town, ",");
            b.words(&format!("aged {g_age}, and"));
            b.entity(Bride, &bride, ",").words(&format!("aged {b_age}, of"));
            b.entity(BrideResidence, &b_town, ".");
        }
    }
    if rng.bernoulli(0.05) {
        b.words(TRAILERS.join(" ").as_str());
    }
    b
}

/// Page geometry for one document.
struct Layout {
    left: u32,
    width: u32,
    char_w: u32,
    line_h: u32,
    indent: u32,
    x: u32,
    y: u32,
    at_line_start: bool,
}

impl Layout {
    fn new(rng: &mut SeededRng) -> Self {
        let left = 40 + rng.below(1800) as u32;
        let char_w = 8 + rng.below(4) as u32;
        let y = 100 + rng.below(3000) as u32;
        Layout {
            left,
            width: 300 + rng.below(250) as u32,
            char_w,
            line_h: char_w + 5 + rng.below(4) as u32,
            indent: if rng.bernoulli(0.5) { 2 * char_w } else { 0 },
            x: left,
            y,
            at_line_start: true,
        }
    }

    fn newline(&mut self, indent: bool) {
        if !self.at_line_start {
            self.y += self.line_h;
        }
        self.x = self.left + if indent { self.indent } else { 0 };
        self.at_line_start = true;
    }

    fn place(&mut self, text: &str) -> (u32, u32) {
        let w = self.char_w * text.chars().count().max(1) as u32;
        if !self.at_line_start && self.x + w > self.left + self.width {
            self.y += self.line_h;
            self.x = self.left;
        }
        let pos = (self.x, self.y);
        self.x += w + self.char_w;
        self.at_line_start = false;
        pos
    }
}

struct DocBuilder {
    texts: Vec<String>,
    positions: Vec<(u32, u32)>,
    labels: Vec<Tag>,
    /// (type, first token, last token, chars trimmed at end)
    entities: Vec<(EntityType, usize, usize, usize)>,
}

impl DocBuilder {
    fn push(&mut self, layout: &mut Layout, text: String, label: Tag) -> usize {
        self.positions.push(layout.place(&text));
        self.texts.push(text);
        self.labels.push(label);
        self.texts.len() - 1
    }
}

fn sample_segment_count(rng: &mut SeededRng, cfg: &SynthConfig) -> usize {
    let z = rng.normal();
    let v = (cfg.median_segments.ln() + cfg.segment_spread * z).exp();
    (v.round() as usize).clamp(1, 60)
}

/// Generates `n_docs` labelled documents with entities.
pub fn synth_generate(n_docs: usize, seed: u64, cfg: &SynthConfig) -> Result<Vec<Document>> {
    if n_docs == 0 {
        return Err(Error::usage("n_docs must be at least 1"));
    }
    (0..n_docs)
        .map(|i| synth_document(format!("synth-{seed}-{i:05}"), SeededRng::derive(seed, i as u64), cfg))
        .collect()
}

fn synth_document(doc_id: String, mut rng: SeededRng, cfg: &SynthConfig) -> Result<Document> {
    let mut layout = Layout::new(&mut rng);
    let year = 1880 + rng.below(60) as u32;
    let mut db = DocBuilder {
        texts: Vec::new(),
        positions: Vec::new(),
        labels: Vec::new(),
        entities: Vec::new(),
    };

    if rng.bernoulli(cfg.header_prob) {
        let header = rng.choose(HEADERS);
        layout.x = layout.left + layout.width / 3;
        for w in header.iter() {
            db.push(&mut layout, w.to_string(), Tag::Outside);
        }
        layout.newline(false);
    }
    if rng.bernoulli(cfg.preamble_prob) {
        for w in rng.choose(PREAMBLES).iter() {
            db.push(&mut layout, w.to_string(), Tag::Outside);
        }
        layout.newline(false);
    }

    let n_segments = sample_segment_count(&mut rng, cfg);
    let subheadings = rng.bernoulli(cfg.subheading_prob);
    let newline_prob = rng.uniform_range(cfg.newline_prob.0, cfg.newline_prob.1);
    let mut prev_last: Option<usize> = None;
    for s in 0..n_segments {
        if subheadings && (s == 0 || rng.bernoulli(0.25)) {
            layout.newline(false);
            layout.x = layout.left + layout.width / 4;
            let d = date(&mut rng, year);
            let words: Vec<String> = d.split_whitespace().map(str::to_string).collect();
            let first = db.texts.len();
            let n = words.len();
            for (k, w) in words.into_iter().enumerate() {
                let w = if k + 1 == n { format!("{w}.") } else { w };
                db.push(&mut layout, w, Tag::Outside);
            }
            db.entities.push((EntityType::WeddingDate, first, db.texts.len() - 1, 1));
            layout.newline(false);
            prev_last = None;
        }

        let ann = announcement(&mut rng, year);
        if s > 0 && rng.bernoulli(newline_prob) {
            layout.newline(true);
        }
        if let Some(p) = prev_last {
            if rng.bernoulli(cfg.period_to_comma_prob) && db.texts[p].ends_with('.') {
                db.texts[p].pop();
                db.texts[p].push(',');
            }
        }
        let lower_first = rng.bernoulli(cfg.lowercase_initial_prob);
        let mut spans: Vec<Option<(usize, usize)>> = vec![None; ann.entities.len()];
        for (k, piece) in ann.pieces.into_iter().enumerate() {
            let text = if k == 0 && lower_first {
                piece.text.to_lowercase()
            } else {
                piece.text
            };
            let label = if k == 0 { Tag::Begin } else { Tag::Inside };
            let idx = db.push(&mut layout, text, label);
            if let Some(e) = piece.entity {
                let span = spans[e].get_or_insert((idx, idx));
                span.1 = idx;
            }
        }
        for (e, (kind, trim)) in ann.entities.iter().enumerate() {
            if let Some((a, b)) = spans[e] {
                db.entities.push((*kind, a, b, *trim));
            }
        }
        // entity groups sharing one span (both-of residences)
        for e in 0..ann.entities.len() {
            if spans[e].is_none() && e > 0 {
                if let Some((a, b)) = spans[e - 1] {
                    db.entities.push((ann.entities[e].0, a, b, ann.entities[e].1));
                }
            }
        }
        prev_last = Some(db.texts.len() - 1);
    }

    if rng.bernoulli(cfg.trailer_prob) {
        layout.newline(false);
        for w in ["Total", "licenses", "issued:"] {
            db.push(&mut layout, w.to_string(), Tag::Outside);
        }
        let n = format!("{n_segments}.");
        db.push(&mut layout, n, Tag::Outside);
    }

    let tokens: Vec<RawToken> = db
        .texts
        .iter()
        .zip(&db.positions)
        .map(|(t, &(x, y))| RawToken::new(t.clone(), x, y))
        .collect();
    let doc = Document::new(doc_id, tokens, Some(db.labels), None)?;
    let toks = doc.tokens();
    let mut entities: Vec<Entity> = db
        .entities
        .iter()
        .map(|&(kind, a, b, trim)| {
            let last = &toks[b];
            let trim = trim.min(last.char_end - last.char_start - 1);
            Entity::new(kind, toks[a].char_start, last.char_end - trim)
        })
        .collect();
    entities.sort();
    entities.dedup();
    let (doc_id, tokens, labels) = (doc.doc_id.clone(), doc.tokens().to_vec(), doc.labels().map(<[Tag]>::to_vec));
    Document::new(doc_id, tokens, labels, Some(entities))
}
