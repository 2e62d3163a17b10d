//! Numeric self-test: gradient certification of the full model and
//! exhaustive oracles for the CRF and P_k.

use std::sync::Arc;
use std::time::Instant;

use serde::Serialize;

use crate::crf::{log_partition, sequence_score, viterbi, CrfWeights};
use crate::data::Document;
use crate::error::Result;
use crate::eval::{bio_to_bi, pk};
use crate::features::{ContextualSource, OovPolicy, RawToken, StaticEmbeddingTable};
use crate::layers::{CharVocab, Mode};
use crate::model::{ModelConfig, Tagger};
use crate::numerics::{gradient_check, logsumexp, SeededRng, Tensor};
use crate::tags::Tag;

#[derive(Debug, Clone, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SelfCheckReport {
    pub checks: Vec<CheckResult>,
}

impl SelfCheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SelfCheckOptions {
    /// Flips the sign of the emission-projection gradient, which the
    /// gradient check must catch.
    pub inject_fault: bool,
}

pub fn run_selfcheck(options: SelfCheckOptions) -> SelfCheckReport {
    let mut report = SelfCheckReport::default();
    let mut run = |name: &str, f: &dyn Fn() -> Result<(bool, String)>| {
        let t = Instant::now();
        let (passed, detail) = f().unwrap_or_else(|e| (false, e.to_string()));
        report.checks.push(CheckResult {
            name: name.to_string(),
            passed,
            detail,
            seconds: t.elapsed().as_secs_f64(),
        });
    };
    run("model gradient", &|| gradient_certificate(20, options.inject_fault));
    run("crf partition and viterbi", &|| crf_oracle(50));
    run("pk window scan", &|| pk_oracle(200));
    report
}

fn random_token(rng: &mut SeededRng) -> RawToken {
    const WORDS: &[&str] = &["MARRIED", "John", "smith,", "of", "1890.", "Mary", "x"];
    RawToken::new(
        *rng.choose(WORDS),
        rng.below(600) as u32,
        rng.below(400) as u32,
    )
}

fn gradient_certificate(instances: u64, fault: bool) -> Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        let mut rng = SeededRng::derive(seed, 77);
        let tokens: Vec<RawToken> = (0..3).map(|_| random_token(&mut rng)).collect();
        let labels: Vec<Tag> = (0..3).map(|_| *rng.choose(&[Tag::Begin, Tag::Inside, Tag::Outside])).collect();
        let doc = Document::new(format!("check-{seed}"), tokens, Some(labels), None)?;
        let config = ModelConfig {
            contextual_source: ContextualSource::Windowed,
            contextual_layers: 2,
            contextual_dim: 3,
            static_dim: 3,
            char_dim: 3,
            char_filters: 4,
            hidden_dim: 3,
            dropout: 0.0,
            seed,
            distance_divisor: 300.0,
            ..Default::default()
        };
        let vocab = CharVocab::build(doc.tokens().iter().map(|t| t.text.as_str()));
        let statics = StaticEmbeddingTable::empty(3, OovPolicy::HashedGaussian { scale: 0.5 });
        let tagger = Tagger::new(config, vocab, Arc::new(statics))?;
        let features = tagger.features(&doc)?;
        let gold = tagger.gold_indices(&doc)?;
        let mut params = tagger.params().clone();
        for p in params.iter_mut() {
            for v in p.value.values_mut() {
                *v += rng.uniform_range(-0.3, 0.3);
            }
        }
        let flipped: Vec<_> = ["projection.weight", "projection.bias"]
            .iter()
            .filter_map(|n| params.id(n))
            .collect();
        let mut failure = None;
        // a wider step keeps rounding noise in the difference below the
        // floor of the relative error
        let r = gradient_check(&mut params, 2e-4, |p| {
            let mut g = p.new_grads();
            let mut dummy = SeededRng::new(0);
            let loss = match tagger.loss_and_gradient(p, &features, &gold, Mode::Infer, &mut dummy, &mut g) {
                Ok(l) => l,
                Err(e) => {
                    failure.get_or_insert(e);
                    0.0
                }
            };
            if fault {
                for &id in &flipped {
                    for v in g.get_mut(id).values_mut() {
                        *v = -*v;
                    }
                }
            }
            p.accumulate(&g);
            loss
        });
        if let Some(e) = failure {
            return Err(e);
        }
        worst = worst.max(r.max_rel_error);
        if r.max_rel_error >= 1e-4 {
            let (name, idx) = r.worst.unwrap_or_default();
            return Ok((
                false,
                format!(
                    "seed {seed}: relative error {:.3e} at {name}[{idx}] (analytic {:.6e}, numeric {:.6e})",
                    r.max_rel_error, r.worst_analytic, r.worst_numeric
                ),
            ));
        }
    }
    Ok((true, format!("{instances} instances, max relative error {worst:.3e}")))
}

fn all_paths(n: usize, l: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..l.pow(n as u32)).map(move |mut code| {
        (0..n)
            .map(|_| {
                let d = code % l;
                code /= l;
                d
            })
            .collect()
    })
}

fn crf_oracle(instances: u64) -> Result<(bool, String)> {
    let l = 3;
    let mut worst: f64 = 0.0;
    for seed in 0..instances {
        let mut rng = SeededRng::derive(seed, 91);
        let n = 1 + rng.below(8);
        let mut draw = |k: usize| (0..k).map(|_| rng.uniform_range(-3.0, 3.0)).collect::<Vec<f64>>();
        let emissions = Tensor::from_vec(&[n, l], draw(n * l))?;
        let (transitions, start, stop) = (draw(l * l), draw(l), draw(l));
        let crf = CrfWeights {
            transitions: &transitions,
            start: &start,
            stop: &stop,
        };
        let scores: Vec<f64> = all_paths(n, l)
            .map(|p| sequence_score(&emissions, &crf, &p))
            .collect::<Result<_>>()?;
        let brute_z = logsumexp(&scores)?;
        let brute_max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let z = log_partition(&emissions, &crf)?;
        let (path, _) = viterbi(&emissions, &crf)?;
        let path_score = sequence_score(&emissions, &crf, &path)?;
        worst = worst.max((z - brute_z).abs());
        if (z - brute_z).abs() > 1e-6 {
            return Ok((false, format!("seed {seed}: log Z {z} vs exhaustive {brute_z}")));
        }
        if path_score != brute_max {
            return Ok((false, format!("seed {seed}: Viterbi score {path_score} vs exhaustive {brute_max}")));
        }
    }
    Ok((true, format!("{instances} instances, max |log Z error| {worst:.3e}")))
}

/// Window scan written from scratch: endpoints share a segment when no
/// `B` occurs in `(i, j]`.
fn pk_brute(r: &[Tag], h: &[Tag], k: usize) -> f64 {
    let same = |x: &[Tag], i: usize, j: usize| !x[i + 1..=j].contains(&Tag::Begin);
    let n = r.len();
    let bad = (0..n - k).filter(|&i| same(r, i, i + k) != same(h, i, i + k)).count();
    bad as f64 / (n - k) as f64
}

fn pk_oracle(instances: u64) -> Result<(bool, String)> {
    use Tag::*;
    let worked = [
        (vec![Begin, Inside, Begin, Inside, Inside], vec![Begin, Inside, Begin, Inside, Inside], 0.0),
        (vec![Begin, Inside, Begin, Inside, Inside], vec![Begin, Inside, Inside, Inside, Inside], 0.25),
        (vec![Begin, Inside, Inside, Inside], vec![Begin, Inside, Begin, Inside], 1.0),
    ];
    for (r, h, want) in &worked {
        let got = pk(r, h, None)?;
        if got != *want {
            return Ok((false, format!("worked example {r:?}/{h:?}: {got} != {want}")));
        }
    }
    let mut checked = 0;
    let mut rng = SeededRng::new(4242);
    while checked < instances {
        let n = 2 + rng.below(30);
        let mut draw = || -> Vec<Tag> {
            let raw: Vec<Tag> = (0..n).map(|_| *rng.choose(&[Begin, Inside, Inside, Outside])).collect();
            bio_to_bi(&raw)
        };
        let (r, h) = (draw(), draw());
        let k = 1 + rng.below(n - 1);
        let got = pk(&r, &h, Some(k))?;
        let want = pk_brute(&r, &h, k);
        if got != want {
            return Ok((false, format!("n={n} k={k}: {got} != {want}")));
        }
        checked += 1;
    }
    Ok((true, format!("3 worked examples and {instances} random pairs")))
}
