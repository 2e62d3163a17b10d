//! Feature/scheme ablation grid: train every cell over several seeds,
//! summarise mean and standard deviation, and compare designated cells
//! with a t-test.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::data::Document;
use crate::error::{Error, Result};
use crate::eval::{compare_runs, evaluate_corpus, mean, sample_sd, EntityType};
use crate::features::{SidecarProvider, StaticEmbeddingTable};
use crate::model::{predict_corpus, train, ModelConfig, Protocol, TrainOptions};
use crate::tags::TagScheme;

/// One grid cell: a tag scheme and a feature configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationCell {
    pub name: String,
    pub scheme: TagScheme,
    pub use_contextual: bool,
    pub use_static: bool,
    pub use_distance: bool,
}

impl AblationCell {
    /// Parses a feature label: `all` or `no-` terms joined by `-`, e.g.
    /// `no-distance` or `no-static-no-distance`.
    pub fn parse(features: &str, scheme: TagScheme) -> Result<Self> {
        let (mut ctx, mut stat, mut dist) = (true, true, true);
        if features != "all" {
            let rest = features
                .strip_prefix("no-")
                .ok_or_else(|| Error::usage(format!("unknown feature set {features:?}")))?;
            for part in rest.split("-no-") {
                match part {
                    "contextual" => ctx = false,
                    "static" => stat = false,
                    "distance" => dist = false,
                    _ => return Err(Error::usage(format!("unknown feature set {features:?}"))),
                }
            }
        }
        Ok(AblationCell {
            name: format!("{}/{features}", scheme.name().to_lowercase()),
            scheme,
            use_contextual: ctx,
            use_static: stat,
            use_distance: dist,
        })
    }

    fn apply(&self, base: &ModelConfig, seed: u64) -> ModelConfig {
        ModelConfig {
            scheme: self.scheme,
            use_contextual: self.use_contextual,
            use_static: self.use_static,
            use_distance: self.use_distance,
            seed,
            ..base.clone()
        }
    }
}

#[derive(Debug, Clone)]
pub struct AblationPlan {
    pub base: ModelConfig,
    pub cells: Vec<AblationCell>,
    pub seeds: Vec<u64>,
    pub protocol: Protocol,
    /// Pairs of cell names to compare; empty means the default pairs.
    pub comparisons: Vec<(String, String)>,
    pub threads: usize,
}

impl AblationPlan {
    /// Cells for every feature set under every scheme. Repeated names get
    /// a `#n` suffix.
    pub fn grid(features: &[&str], schemes: &[TagScheme]) -> Result<Vec<AblationCell>> {
        let mut cells: Vec<AblationCell> = Vec::new();
        for &scheme in schemes {
            for f in features {
                let mut cell = AblationCell::parse(f, scheme)?;
                let dup = cells.iter().filter(|c| c.name.split('#').next() == Some(&cell.name)).count();
                if dup > 0 {
                    cell.name = format!("{}#{}", cell.name, dup + 1);
                }
                cells.push(cell);
            }
        }
        Ok(cells)
    }

    /// `<scheme>/all` against every other cell of that scheme, then the
    /// first cell of each scheme against each other.
    pub fn default_comparisons(cells: &[AblationCell]) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut anchors = Vec::new();
        for scheme in [TagScheme::Bio, TagScheme::Bi] {
            let of: Vec<&AblationCell> = cells.iter().filter(|c| c.scheme == scheme).collect();
            let Some(anchor) = of.iter().find(|c| c.name == format!("{}/all", scheme.name().to_lowercase())).or(of.first()) else {
                continue;
            };
            anchors.push(anchor.name.clone());
            for c in &of {
                if c.name != anchor.name {
                    out.push((anchor.name.clone(), c.name.clone()));
                }
            }
        }
        if anchors.len() == 2 {
            out.push((anchors[0].clone(), anchors[1].clone()));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub cell: String,
    pub seed: u64,
    pub pk: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub entity_f1: BTreeMap<String, f64>,
    pub epochs: usize,
    pub best_epoch: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    fn of(xs: &[f64]) -> Self {
        MeanSd {
            mean: if xs.is_empty() { f64::NAN } else { mean(xs) },
            sd: sample_sd(xs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: AblationCell,
    pub runs: usize,
    pub failures: usize,
    pub pk: MeanSd,
    pub precision: MeanSd,
    pub recall: MeanSd,
    pub f1: MeanSd,
    pub entity_f1: BTreeMap<String, MeanSd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub a: String,
    pub b: String,
    pub metric: String,
    pub t: Option<f64>,
    pub p_value: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub protocol: Protocol,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellSummary>,
    pub comparisons: Vec<Comparison>,
    pub runs: Vec<RunResult>,
}

fn fmt_ms(m: &MeanSd, digits: usize) -> String {
    format!("{:.*}±{:.*}", digits, m.mean, digits, m.sd)
}

impl AblationReport {
    pub fn cell(&self, name: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.cell.name == name)
    }

    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let entity_cols: Vec<String> = EntityType::ALL.iter().map(|t| format!("f1_{t}")).collect();
        let _ = writeln!(
            s,
            "cell\truns\tfailures\tpk\tprecision\trecall\tf1\t{}",
            entity_cols.join("\t")
        );
        for c in &self.cells {
            let ents: Vec<String> = EntityType::ALL
                .iter()
                .map(|t| c.entity_f1.get(t.as_str()).map_or("nan".into(), |m| fmt_ms(m, 4)))
                .collect();
            let _ = writeln!(
                s,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                c.cell.name,
                c.runs,
                c.failures,
                fmt_ms(&c.pk, 4),
                fmt_ms(&c.precision, 4),
                fmt_ms(&c.recall, 4),
                fmt_ms(&c.f1, 4),
                ents.join("\t")
            );
        }
        let _ = writeln!(s, "\na\tb\tmetric\tt\tp");
        for c in &self.comparisons {
            let f = |v: Option<f64>| v.map_or("nan".to_string(), |x| format!("{x:.4}"));
            let _ = writeln!(s, "{}\t{}\t{}\t{}\t{}", c.a, c.b, c.metric, f(c.t), f(c.p_value));
        }
        s
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

fn run_cell(
    cell: &AblationCell,
    seed: u64,
    plan: &AblationPlan,
    data: (&[Document], &[Document], &[Document]),
    statics: &Arc<StaticEmbeddingTable>,
    sidecar: &Option<Arc<SidecarProvider>>,
) -> Result<RunResult> {
    let (train_docs, dev_docs, test_docs) = data;
    let config = cell.apply(&plan.base, seed);
    let options = TrainOptions {
        protocol: plan.protocol,
        threads: plan.threads,
        sidecar: sidecar.clone(),
    };
    let out = train(train_docs, dev_docs, &config, statics.clone(), &options)?;
    let preds = predict_corpus(&out.tagger, test_docs, plan.threads)?;
    let report = evaluate_corpus(test_docs, &preds, cell.scheme)?;
    let all = report.aggregate();
    Ok(RunResult {
        cell: cell.name.clone(),
        seed,
        pk: report.pk_mean,
        precision: all.precision,
        recall: all.recall,
        f1: all.f1,
        entity_f1: report
            .rows
            .iter()
            .filter(|r| r.name != "all")
            .map(|r| (r.name.clone(), r.f1))
            .collect(),
        epochs: out.log.len(),
        best_epoch: out.best_epoch,
        error: None,
    })
}

/// Trains and evaluates every cell for every seed. A failing run is
/// recorded in the report and the grid continues.
pub fn run_ablation(
    plan: &AblationPlan,
    train_docs: &[Document],
    dev_docs: &[Document],
    test_docs: &[Document],
    statics: Arc<StaticEmbeddingTable>,
    sidecar: Option<Arc<SidecarProvider>>,
    mut on_run: impl FnMut(&RunResult),
) -> Result<AblationReport> {
    if plan.cells.is_empty() || plan.seeds.is_empty() {
        return Err(Error::usage("ablation needs at least one cell and one seed"));
    }
    if test_docs.is_empty() {
        return Err(Error::usage("ablation needs a nonempty test set"));
    }
    let mut runs = Vec::new();
    for cell in &plan.cells {
        for &seed in &plan.seeds {
            let r = run_cell(cell, seed, plan, (train_docs, dev_docs, test_docs), &statics, &sidecar)
                .unwrap_or_else(|e| RunResult {
                    cell: cell.name.clone(),
                    seed,
                    pk: f64::NAN,
                    precision: f64::NAN,
                    recall: f64::NAN,
                    f1: f64::NAN,
                    entity_f1: BTreeMap::new(),
                    epochs: 0,
                    best_epoch: 0,
                    error: Some(e.to_string()),
                });
            on_run(&r);
            runs.push(r);
        }
    }
    let cells: Vec<CellSummary> = plan.cells.iter().map(|c| summarise(c, &runs)).collect();
    let pairs = if plan.comparisons.is_empty() {
        AblationPlan::default_comparisons(&plan.cells)
    } else {
        plan.comparisons.clone()
    };
    let mut comparisons = Vec::new();
    for (a, b) in pairs {
        for metric in ["f1", "pk"] {
            comparisons.push(compare(&runs, &a, &b, metric));
        }
    }
    Ok(AblationReport {
        protocol: plan.protocol,
        seeds: plan.seeds.clone(),
        cells,
        comparisons,
        runs,
    })
}

fn ok_runs<'a>(runs: &'a [RunResult], cell: &'a str) -> impl Iterator<Item = &'a RunResult> {
    runs.iter().filter(move |r| r.cell == cell && r.error.is_none())
}

fn summarise(cell: &AblationCell, runs: &[RunResult]) -> CellSummary {
    let ok: Vec<&RunResult> = ok_runs(runs, &cell.name).collect();
    let total = runs.iter().filter(|r| r.cell == cell.name).count();
    let col = |f: fn(&RunResult) -> f64| MeanSd::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
    let entity_f1 = EntityType::ALL
        .iter()
        .map(|t| {
            let xs: Vec<f64> = ok.iter().filter_map(|r| r.entity_f1.get(t.as_str()).copied()).collect();
            (t.as_str().to_string(), MeanSd::of(&xs))
        })
        .collect();
    CellSummary {
        cell: cell.clone(),
        runs: ok.len(),
        failures: total - ok.len(),
        pk: col(|r| r.pk),
        precision: col(|r| r.precision),
        recall: col(|r| r.recall),
        f1: col(|r| r.f1),
        entity_f1,
    }
}

fn compare(runs: &[RunResult], a: &str, b: &str, metric: &str) -> Comparison {
    let pick = |c: &str| -> Vec<f64> {
        ok_runs(runs, c)
            .map(|r| if metric == "f1" { r.f1 } else { r.pk })
            .collect()
    };
    let mut out = Comparison {
        a: a.to_string(),
        b: b.to_string(),
        metric: metric.to_string(),
        t: None,
        p_value: None,
        note: None,
    };
    match compare_runs(&pick(a), &pick(b)) {
        Ok(t) => {
            out.t = Some(t.t);
            out.p_value = Some(t.p_value);
        }
        Err(e) => out.note = Some(e.to_string()),
    }
    out
}
