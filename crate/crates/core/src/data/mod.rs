//! Corpus format, OCR noise simulation, synthetic corpora and splits.

mod corpus;
mod document;
mod noise;
mod split;
mod synth;

pub use corpus::{corpus_to_string, parse_corpus, parse_corpus_str, write_corpus};
pub use document::Document;
pub use noise::{inject_ocr_noise, NoiseConfig};
pub use split::{split_corpus, CorpusSplit};
pub use synth::{synth_generate, SynthConfig};
