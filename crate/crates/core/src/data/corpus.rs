use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::data::document::DocumentRecord;
use crate::data::Document;
use crate::error::{Error, Result};

/// Parses a JSON Lines corpus; blank lines are skipped.
pub fn parse_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut docs = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if let Some(doc) = parse_line(&line, i + 1)? {
            docs.push(doc);
        }
    }
    Ok(docs)
}

/// Parses corpus text already in memory.
pub fn parse_corpus_str(content: &str) -> Result<Vec<Document>> {
    let mut docs = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if let Some(doc) = parse_line(line, i + 1)? {
            docs.push(doc);
        }
    }
    Ok(docs)
}

fn parse_line(line: &str, lineno: usize) -> Result<Option<Document>> {
    if line.trim().is_empty() {
        return Ok(None);
    }
    let record: DocumentRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: lineno,
        message: e.to_string(),
    })?;
    Document::try_from(record)
        .map(Some)
        .map_err(|e| Error::Schema {
            line: lineno,
            message: e.to_string(),
        })
}

/// One compact JSON object per line, fields in schema order.
pub fn corpus_to_string(docs: &[Document]) -> String {
    let mut out = String::new();
    for d in docs {
        out.push_str(&serde_json::to_string(d).expect("documents always serialize"));
        out.push('\n');
    }
    out
}

/// Writes via a temporary file renamed into place.
pub fn write_corpus(docs: &[Document], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("jsonl.tmp");
    {
        let file = File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        let mut w = BufWriter::new(file);
        for d in docs {
            serde_json::to_writer(&mut w, d).map_err(|e| Error::data(e.to_string()))?;
            w.write_all(b"\n").map_err(|e| Error::io(&tmp, e))?;
        }
        w.flush().map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}
