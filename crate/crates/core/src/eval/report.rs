use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::crf::extract_segments;
use crate::data::Document;
use crate::error::{Error, Result};
use crate::eval::segmentation::{convert_labels, pk_any_scheme};
use crate::eval::stats::{mean, sample_sd};
use crate::eval::task::{task_eval, CharSpan, TaskCounts};
use crate::eval::EntityType;
use crate::tags::{Tag, TagScheme};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub name: String,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub pk_mean: f64,
    pub pk_sd: f64,
    /// Documents scored by P_k.
    pub pk_documents: usize,
    /// Documents too short for the P_k window.
    pub pk_skipped: usize,
    /// One row per entity type followed by the aggregate row `all`.
    pub rows: Vec<MetricRow>,
    pub metadata: BTreeMap<String, String>,
}

impl EvalReport {
    pub fn from_parts(pks: &[f64], skipped: usize, counts: &TaskCounts) -> Self {
        let mut rows: Vec<MetricRow> = EntityType::ALL
            .iter()
            .map(|t| row(t.as_str(), &counts.per_type.get(t).copied().unwrap_or_default()))
            .collect();
        rows.push(row("all", &counts.total()));
        EvalReport {
            pk_mean: if pks.is_empty() { f64::NAN } else { mean(pks) },
            pk_sd: sample_sd(pks),
            pk_documents: pks.len(),
            pk_skipped: skipped,
            rows,
            metadata: BTreeMap::new(),
        }
    }

    pub fn aggregate(&self) -> &MetricRow {
        self.rows.last().expect("report has an aggregate row")
    }

    pub fn row(&self, name: &str) -> Option<&MetricRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# pk\t{:.6}\t{:.6}\t{}", self.pk_mean, self.pk_sd, self.pk_documents);
        let _ = writeln!(s, "entity\ttp\tfp\tfn\tprecision\trecall\tf1");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{:.4}\t{:.4}\t{:.4}",
                r.name, r.tp, r.fp, r.fn_, r.precision, r.recall, r.f1
            );
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn row(name: &str, c: &crate::eval::Counts) -> MetricRow {
    MetricRow {
        name: name.to_string(),
        tp: c.tp,
        fp: c.fp,
        fn_: c.fn_,
        precision: c.precision(),
        recall: c.recall(),
        f1: c.f1(),
    }
}

fn spans(doc: &Document, labels: &[Tag]) -> Vec<CharSpan> {
    extract_segments(labels)
        .iter()
        .map(|s| s.char_span(doc.tokens()))
        .collect()
}

/// Scores predicted label sequences against labelled gold documents.
///
/// P_k runs on BI forms of both sides. Gold segments for the task score are
/// the gold labels expressed in the prediction scheme.
pub fn evaluate_corpus(gold: &[Document], predictions: &[Vec<Tag>], scheme: TagScheme) -> Result<EvalReport> {
    if gold.is_empty() {
        return Err(Error::usage("evaluation set is empty"));
    }
    if gold.len() != predictions.len() {
        return Err(Error::usage(format!(
            "{} gold documents but {} predictions",
            gold.len(),
            predictions.len()
        )));
    }
    let mut pks = Vec::new();
    let mut skipped = 0;
    let mut counts = TaskCounts::default();
    for (doc, pred) in gold.iter().zip(predictions) {
        let labels = doc
            .labels()
            .ok_or_else(|| Error::data(format!("document {:?} has no gold labels", doc.doc_id)))?;
        if pred.len() != labels.len() {
            return Err(Error::usage(format!(
                "document {:?}: {} predicted labels for {} tokens",
                doc.doc_id,
                pred.len(),
                labels.len()
            )));
        }
        if scheme == TagScheme::Bi && pred.contains(&Tag::Outside) {
            return Err(Error::usage(format!(
                "document {:?}: O label in BI-scheme predictions",
                doc.doc_id
            )));
        }
        match pk_any_scheme(labels, pred) {
            Ok(v) => pks.push(v),
            Err(Error::Data(_)) => skipped += 1,
            Err(e) => return Err(e),
        }
        let gold_labels = convert_labels(labels, scheme);
        let c = task_eval(doc.entities(), &spans(doc, &gold_labels), &spans(doc, pred))?;
        counts.add(&c);
    }
    let mut report = EvalReport::from_parts(&pks, skipped, &counts);
    report.metadata.insert("scheme".into(), scheme.name().into());
    report.metadata.insert("documents".into(), gold.len().to_string());
    Ok(report)
}
