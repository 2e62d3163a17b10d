use std::sync::Arc;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::data::Document;
use crate::error::{Error, Result};
use crate::eval::pk_any_scheme;
use crate::features::{SidecarProvider, StaticEmbeddingTable};
use crate::layers::{CharVocab, Mode};
use crate::model::tagger::DocFeatures;
use crate::model::{ModelConfig, Tagger};
use crate::numerics::{nadam_step, Grads, NadamConfig, OptimizerState, SeededRng};
use crate::tags::Tag;

const SHUFFLE_STREAM: u64 = 2;
const DROPOUT_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

/// How the stopping epoch is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Protocol {
    /// Train on the training set, keep the parameters with the best dev
    /// P_k and stop after `patience` epochs without improvement.
    DevEarlyStop,
    /// Train on training and dev sets together for a fixed number of epochs.
    Combined { epochs: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Summed training NLL over the epoch (with dropout).
    pub train_loss: f64,
    pub dev_pk: Option<f64>,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub protocol: Protocol,
    /// Worker threads for per-document gradients. Results do not depend on it.
    pub threads: usize,
    pub sidecar: Option<Arc<SidecarProvider>>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            protocol: Protocol::DevEarlyStop,
            threads: 1,
            sidecar: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub tagger: Tagger,
    pub log: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (1-based).
    pub best_epoch: usize,
}

/// Mean dev P_k over documents long enough for the window.
pub fn dev_pk(tagger: &Tagger, docs: &[Document], features: &[DocFeatures], threads: usize) -> Result<f64> {
    let preds = map_parallel(features, threads, |f| tagger.predict_features(f))?;
    let mut sum = 0.0;
    let mut count = 0;
    for (doc, pred) in docs.iter().zip(&preds) {
        let gold = doc.labels().unwrap_or(&[]);
        match pk_any_scheme(gold, pred) {
            Ok(v) => {
                sum += v;
                count += 1;
            }
            Err(Error::Data(_)) => {}
            Err(e) => return Err(e),
        }
    }
    if count == 0 {
        return Err(Error::usage("no dev document is long enough to compute P_k"));
    }
    Ok(sum / count as f64)
}

/// Applies `f` to every item, splitting the work over up to `threads`
/// scoped threads; results keep input order.
pub(crate) fn map_parallel<T, R, F>(items: &[T], threads: usize, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync,
{
    let threads = threads.clamp(1, items.len().max(1));
    if threads == 1 {
        return items.iter().map(&f).collect();
    }
    let chunk = items.len().div_ceil(threads);
    let f = &f;
    thread::scope(|s| {
        let handles: Vec<_> = items
            .chunks(chunk)
            .map(|c| s.spawn(move || c.iter().map(f).collect::<Result<Vec<R>>>()))
            .collect();
        let mut out = Vec::with_capacity(items.len());
        for h in handles {
            out.extend(h.join().expect("worker thread panicked")?);
        }
        Ok(out)
    })
}

fn check_labelled(docs: &[Document], what: &str) -> Result<()> {
    for d in docs {
        if d.labels().is_none() {
            return Err(Error::data(format!("{what} document {:?} has no labels", d.doc_id)));
        }
        if d.is_empty() {
            return Err(Error::data(format!("{what} document {:?} has no tokens", d.doc_id)));
        }
    }
    Ok(())
}

/// Trains a tagger from scratch.
pub fn train(
    train_docs: &[Document],
    dev_docs: &[Document],
    config: &ModelConfig,
    statics: Arc<StaticEmbeddingTable>,
    options: &TrainOptions,
) -> Result<TrainOutcome> {
    config.validate()?;
    if train_docs.is_empty() {
        return Err(Error::usage("training corpus is empty"));
    }
    check_labelled(train_docs, "training")?;
    check_labelled(dev_docs, "dev")?;

    let (fit_docs, epochs, early_stop): (Vec<&Document>, usize, bool) = match options.protocol {
        Protocol::DevEarlyStop => {
            if dev_docs.is_empty() {
                return Err(Error::usage("early stopping needs a nonempty dev set"));
            }
            (train_docs.iter().collect(), config.max_epochs, true)
        }
        Protocol::Combined { epochs } => {
            if epochs == 0 {
                return Err(Error::usage("combined protocol needs at least one epoch"));
            }
            (train_docs.iter().chain(dev_docs).collect(), epochs, false)
        }
    };

    let vocab = CharVocab::build(fit_docs.iter().flat_map(|d| d.tokens()).map(|t| t.text.as_str()));
    let mut tagger = Tagger::new(config.clone(), vocab, statics)?;
    tagger.set_sidecar(options.sidecar.clone());

    let threads = options.threads.max(1);
    let fit_features = map_parallel(&fit_docs, threads, |d| tagger.features(d))?;
    let fit_gold: Vec<Vec<usize>> = fit_docs.iter().map(|d| tagger.gold_indices(d)).collect::<Result<_>>()?;
    let dev_features = if early_stop {
        map_parallel(dev_docs, threads, |d| tagger.features(d))?
    } else {
        Vec::new()
    };

    let hyper = NadamConfig {
        learning_rate: config.learning_rate,
        ..NadamConfig::default()
    };
    let mut state = OptimizerState::new(&tagger.params, hyper);
    let mut order: Vec<usize> = (0..fit_docs.len()).collect();
    let mut shuffle_rng = SeededRng::derive(config.seed, SHUFFLE_STREAM);

    let mut log = Vec::new();
    let mut best: Option<(f64, usize, Tagger)> = None;
    let mut since_best = 0;
    for epoch in 1..=epochs {
        shuffle_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for (b, batch) in order.chunks(config.batch_size).enumerate() {
            let work: Vec<(usize, usize)> = batch
                .iter()
                .enumerate()
                .map(|(k, &i)| (i, b * config.batch_size + k))
                .collect();
            let results = map_parallel(&work, threads, |&(i, position)| {
                let mut rng = SeededRng::derive(config.seed ^ DROPOUT_SEED_MIX, ((epoch as u64) << 32) | position as u64);
                let mut grads = tagger.params.new_grads();
                let loss = tagger.loss_and_gradient(
                    &tagger.params,
                    &fit_features[i],
                    &fit_gold[i],
                    Mode::Train,
                    &mut rng,
                    &mut grads,
                )?;
                Ok((loss, grads))
            })?;
            let mut total: Option<Grads> = None;
            for ((loss, grads), &(i, _)) in results.into_iter().zip(&work) {
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!(
                        "non-finite loss {loss} on document {:?} (epoch {epoch}, batch {})",
                        fit_docs[i].doc_id,
                        b + 1
                    )));
                }
                epoch_loss += loss;
                match &mut total {
                    None => total = Some(grads),
                    Some(t) => t.add_assign(&grads),
                }
            }
            if let Some(g) = total {
                tagger.params.accumulate(&g);
            }
            nadam_step(&mut tagger.params, &mut state).map_err(|e| match e {
                Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}, batch {}: {m}", b + 1)),
                other => other,
            })?;
        }

        let mut record = EpochRecord {
            epoch,
            train_loss: epoch_loss,
            dev_pk: None,
            improved: false,
        };
        if early_stop {
            let pk = dev_pk(&tagger, dev_docs, &dev_features, threads)?;
            record.dev_pk = Some(pk);
            if best.as_ref().is_none_or(|(b, _, _)| pk < *b) {
                record.improved = true;
                best = Some((pk, epoch, tagger.clone()));
                since_best = 0;
            } else {
                since_best += 1;
            }
        }
        log::info!(
            "epoch {epoch}: loss {:.4}{}",
            record.train_loss,
            record.dev_pk.map(|p| format!(", dev P_k {p:.4}")).unwrap_or_default()
        );
        log.push(record);
        if early_stop && since_best >= config.patience.max(1) {
            break;
        }
    }

    let (tagger, best_epoch) = match best {
        Some((_, epoch, t)) => (t, epoch),
        None => (tagger, log.len()),
    };
    Ok(TrainOutcome {
        tagger,
        log,
        best_epoch,
    })
}

/// Predicted labels for each document, in order.
pub fn predict_corpus(tagger: &Tagger, docs: &[Document], threads: usize) -> Result<Vec<Vec<Tag>>> {
    map_parallel(docs, threads, |d| Ok(tagger.predict(d)?.labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig};
    use crate::features::OovPolicy;
    use crate::model::checkpoint_bytes;

    fn tiny_config(seed: u64) -> ModelConfig {
        ModelConfig {
            static_dim: 8,
            contextual_dim: 8,
            char_dim: 6,
            char_filters: 8,
            hidden_dim: 12,
            seed,
            max_epochs: 5,
            distance_divisor: 100.0,
            ..Default::default()
        }
    }

    fn statics() -> Arc<StaticEmbeddingTable> {
        Arc::new(StaticEmbeddingTable::empty(8, OovPolicy::default()))
    }

    #[test]
    fn loss_decreases_early() {
        let docs = synth_generate(24, 5, &SynthConfig::default()).unwrap();
        let out = train(&docs[..20], &docs[20..], &tiny_config(1), statics(), &TrainOptions::default()).unwrap();
        let l: Vec<f64> = out.log.iter().map(|r| r.train_loss).collect();
        assert!(l[0] > l[1] && l[1] > l[2], "{l:?}");
        assert!(out.log[0].improved);
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let docs = synth_generate(12, 6, &SynthConfig::default()).unwrap();
        let cfg = ModelConfig {
            max_epochs: 2,
            ..tiny_config(4)
        };
        let run = |threads| {
            let opts = TrainOptions {
                threads,
                ..Default::default()
            };
            let out = train(&docs[..9], &docs[9..], &cfg, statics(), &opts).unwrap();
            (checkpoint_bytes(&out.tagger), out.log)
        };
        let a = run(1);
        assert_eq!(a, run(1));
        assert_eq!(a, run(3));
    }

    #[test]
    fn patience_zero_stops_at_first_non_improvement() {
        let docs = synth_generate(10, 7, &SynthConfig::default()).unwrap();
        let cfg = ModelConfig {
            patience: 0,
            max_epochs: 20,
            learning_rate: 1e-9,
            ..tiny_config(2)
        };
        let out = train(&docs[..8], &docs[8..], &cfg, statics(), &TrainOptions::default()).unwrap();
        let first_bad = out.log.iter().position(|r| !r.improved).unwrap();
        assert_eq!(out.log.len(), first_bad + 1);
    }

    #[test]
    fn combined_protocol_runs_fixed_epochs() {
        let docs = synth_generate(6, 7, &SynthConfig::default()).unwrap();
        let opts = TrainOptions {
            protocol: Protocol::Combined { epochs: 2 },
            ..Default::default()
        };
        let out = train(&docs[..4], &docs[4..], &tiny_config(2), statics(), &opts).unwrap();
        assert_eq!(out.log.len(), 2);
        assert!(out.log.iter().all(|r| r.dev_pk.is_none()));
    }

    #[test]
    fn input_errors() {
        let docs = synth_generate(3, 7, &SynthConfig::default()).unwrap();
        let o = TrainOptions::default();
        assert!(matches!(train(&[], &docs, &tiny_config(1), statics(), &o), Err(Error::Usage(_))));
        assert!(matches!(train(&docs, &[], &tiny_config(1), statics(), &o), Err(Error::Usage(_))));
        let mut unlabelled = docs[0].clone();
        unlabelled.set_labels(None).unwrap();
        assert!(matches!(train(&[unlabelled], &docs, &tiny_config(1), statics(), &o), Err(Error::Data(_))));
    }

    #[test]
    fn overfits_one_document() {
        let docs = synth_generate(1, 12, &SynthConfig::default()).unwrap();
        let cfg = ModelConfig {
            dropout: 0.0,
            learning_rate: 0.05,
            ..tiny_config(3)
        };
        let opts = TrainOptions {
            protocol: Protocol::Combined { epochs: 300 },
            ..Default::default()
        };
        let out = train(&docs, &[], &cfg, statics(), &opts).unwrap();
        assert!(out.log.last().unwrap().train_loss < 0.01, "{:?}", out.log.last());
        assert_eq!(out.tagger.predict(&docs[0]).unwrap().labels, docs[0].labels().unwrap());
    }
}
