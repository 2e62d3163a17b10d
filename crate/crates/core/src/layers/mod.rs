//! Neural encoder pieces: character CNN, token-embedding assembly,
//! dropout, BiLSTM and the emission projection.

mod assemble;
mod char_cnn;
mod dropout;
mod linear;
mod lstm;
mod vocab;

pub use assemble::{assemble_token_embedding, EmbeddingLayout};
pub use char_cnn::{CharCnn, CharCnnCache};
pub use dropout::{dropout, Mode};
pub use linear::Linear;
pub use lstm::{BiLstm, BiLstmCache, Lstm, LstmCache};
pub use vocab::{CharVocab, PAD_INDEX, UNK_INDEX};
