use std::sync::Arc;

use crate::crf::{extract_segments, nll_loss, viterbi, Crf, Segment};
use crate::data::Document;
use crate::error::{Error, Result};
use crate::eval::convert_labels;
use crate::features::{
    casing_feature, lowercase_normalize, scalar_mix, scalar_mix_backward, scaled_distance_vectors,
    ContextualLayers, ContextualProvider, ContextualSource, DegenerateProvider, SidecarProvider,
    StaticEmbeddingTable, WindowedProvider, CASING_DIM,
};
use crate::layers::{
    assemble_token_embedding, dropout, BiLstm, BiLstmCache, CharCnn, CharCnnCache, CharVocab,
    EmbeddingLayout, Linear, Mode,
};
use crate::model::ModelConfig;
use crate::numerics::{Grads, ParamId, ParamSet, SeededRng, Tensor};
use crate::tags::{Tag, TagSet};

/// Parameter-independent inputs for one document.
#[derive(Debug, Clone)]
pub struct DocFeatures {
    chars: Vec<Vec<usize>>,
    statics: Vec<Vec<f64>>,
    contextual: Option<ContextualLayers>,
    casing: Vec<[f64; CASING_DIM]>,
    distance: Vec<[f64; 2]>,
}

impl DocFeatures {
    pub fn len(&self) -> usize {
        self.chars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chars.is_empty()
    }
}

/// Layer handles inside a [`ParamSet`].
#[derive(Debug, Clone)]
pub(crate) struct Network {
    layout: EmbeddingLayout,
    char_cnn: CharCnn,
    /// Scalar-mix weights and gamma.
    mix: Option<(ParamId, ParamId)>,
    bilstm: BiLstm,
    projection: Linear,
    crf: Crf,
    dropout: f64,
}

struct Pass {
    char_caches: Vec<CharCnnCache>,
    inputs: Vec<Vec<f64>>,
    masks: Option<Vec<Vec<f64>>>,
    hidden: Vec<Vec<f64>>,
    lstm: BiLstmCache,
}

impl Network {
    fn build(config: &ModelConfig, vocab_size: usize, num_labels: usize) -> Result<(Network, ParamSet)> {
        let mut params = ParamSet::new();
        let mut rng = SeededRng::derive(config.seed, INIT_STREAM);
        let char_cnn = CharCnn::new(
            &mut params,
            "char_cnn",
            vocab_size,
            config.char_dim,
            config.char_filters,
            config.char_width,
            &mut rng,
        )?;
        let mix = if config.use_contextual {
            let w = params.add("scalar_mix.weights", Tensor::zeros(&[config.contextual_layers]))?;
            let g = params.add("scalar_mix.gamma", Tensor::filled(&[1], 1.0))?;
            Some((w, g))
        } else {
            None
        };
        let layout = EmbeddingLayout {
            char_dim: char_cnn.output_dim(),
            static_dim: if config.use_static { config.static_dim } else { 0 },
            contextual_dim: if config.use_contextual { config.contextual_dim } else { 0 },
            use_distance: config.use_distance,
        };
        let bilstm = BiLstm::new(&mut params, "bilstm", layout.total_dim(), config.hidden_dim, &mut rng)?;
        let projection = Linear::new(&mut params, "projection", bilstm.output_dim(), num_labels, &mut rng)?;
        let crf = Crf::new(&mut params, "crf", num_labels)?;
        let net = Network {
            layout,
            char_cnn,
            mix,
            bilstm,
            projection,
            crf,
            dropout: config.dropout,
        };
        Ok((net, params))
    }

    fn forward(&self, params: &ParamSet, f: &DocFeatures, mode: Mode, rng: &mut SeededRng) -> Result<(Tensor, Pass)> {
        let n = f.len();
        if n == 0 {
            return Err(Error::usage("document has no tokens"));
        }
        let mut char_caches = Vec::with_capacity(n);
        let mut inputs = Vec::with_capacity(n);
        for i in 0..n {
            let (t_char, cache) = self.char_cnn.forward(params, &f.chars[i]);
            char_caches.push(cache);
            let t_static: &[f64] = if self.layout.static_dim > 0 { &f.statics[i] } else { &[] };
            let t_ctx = match (self.mix, &f.contextual) {
                (Some((w, g)), Some(layers)) => scalar_mix(
                    layers.token(i),
                    params.value(w).values(),
                    params.value(g).values()[0],
                )?,
                (Some(_), None) => return Err(Error::data("contextual layers missing")),
                _ => Vec::new(),
            };
            let dist = self.layout.use_distance.then_some(&f.distance[i][..]);
            inputs.push(assemble_token_embedding(
                &self.layout,
                &t_char,
                t_static,
                &t_ctx,
                &f.casing[i],
                dist,
            )?);
        }
        let masks = dropout(&mut inputs, self.dropout, mode, rng);
        let (hidden, lstm) = self.bilstm.forward(params, &inputs);
        let emissions = self.projection.forward(params, &hidden);
        Ok((
            emissions,
            Pass {
                char_caches,
                inputs,
                masks,
                hidden,
                lstm,
            },
        ))
    }

    fn backward(&self, params: &ParamSet, grads: &mut Grads, f: &DocFeatures, pass: &Pass, d_emissions: &Tensor) {
        let d_hidden = self.projection.backward(params, grads, &pass.hidden, d_emissions);
        let mut d_inputs = self.bilstm.backward(params, grads, &pass.inputs, &pass.lstm, &d_hidden);
        if let Some(masks) = &pass.masks {
            for (d, m) in d_inputs.iter_mut().zip(masks) {
                for (a, b) in d.iter_mut().zip(m) {
                    *a *= b;
                }
            }
        }
        let [o_char, _, o_ctx, _, _] = self.layout.offsets();
        for (i, d) in d_inputs.iter().enumerate() {
            self.char_cnn
                .backward(params, grads, &pass.char_caches[i], &d[o_char..o_char + self.layout.char_dim]);
            if let (Some((w, g)), Some(layers)) = (self.mix, &f.contextual) {
                let d_ctx = &d[o_ctx..o_ctx + self.layout.contextual_dim];
                let (dw, dg) = scalar_mix_backward(
                    layers.token(i),
                    params.value(w).values(),
                    params.value(g).values()[0],
                    d_ctx,
                );
                for (a, b) in grads.get_mut(w).values_mut().iter_mut().zip(&dw) {
                    *a += b;
                }
                grads.get_mut(g).values_mut()[0] += dg;
            }
        }
    }

    /// NLL of `gold` under the model; adds the gradient into `grads`.
    pub(crate) fn loss(
        &self,
        params: &ParamSet,
        f: &DocFeatures,
        gold: &[usize],
        mode: Mode,
        rng: &mut SeededRng,
        grads: &mut Grads,
    ) -> Result<f64> {
        let (emissions, pass) = self.forward(params, f, mode, rng)?;
        let (loss, g) = nll_loss(&emissions, &self.crf.weights(params), gold)?;
        self.crf.accumulate(grads, &g);
        self.backward(params, grads, f, &pass, &g.d_emissions);
        Ok(loss)
    }
}

const INIT_STREAM: u64 = 1;

/// Output of [`Tagger::predict`].
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<Tag>,
    pub segments: Vec<Segment>,
}

/// The BiLSTM-CRF segmenter with everything needed to featurize documents.
#[derive(Debug, Clone)]
pub struct Tagger {
    config: ModelConfig,
    tagset: TagSet,
    vocab: CharVocab,
    statics: Arc<StaticEmbeddingTable>,
    sidecar: Option<Arc<SidecarProvider>>,
    pub(crate) net: Network,
    pub(crate) params: ParamSet,
}

impl Tagger {
    /// A freshly initialised model.
    pub fn new(config: ModelConfig, vocab: CharVocab, statics: Arc<StaticEmbeddingTable>) -> Result<Self> {
        config.validate()?;
        if statics.dim() != config.static_dim {
            return Err(Error::usage(format!(
                "static embeddings have dimension {}, config expects {}",
                statics.dim(),
                config.static_dim
            )));
        }
        if config.use_contextual
            && config.contextual_source != ContextualSource::Sidecar
            && config.contextual_dim != config.static_dim
        {
            return Err(Error::usage(format!(
                "derived contextual layers have the static dimension {}, config expects {}",
                config.static_dim, config.contextual_dim
            )));
        }
        let tagset = config.scheme.tagset();
        let (net, params) = Network::build(&config, vocab.len(), tagset.len())?;
        Ok(Tagger {
            config,
            tagset,
            vocab,
            statics,
            sidecar: None,
            net,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn tagset(&self) -> &TagSet {
        &self.tagset
    }

    pub fn vocab(&self) -> &CharVocab {
        &self.vocab
    }

    pub fn statics(&self) -> &StaticEmbeddingTable {
        &self.statics
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParamSet {
        &mut self.params
    }

    /// Source of contextual layers when the config names a sidecar.
    pub fn set_sidecar(&mut self, sidecar: Option<Arc<SidecarProvider>>) {
        self.sidecar = sidecar;
    }

    pub fn features(&self, doc: &Document) -> Result<DocFeatures> {
        let tokens = doc.tokens();
        let c = &self.config;
        let need_statics = c.use_static || (c.use_contextual && c.contextual_source != ContextualSource::Sidecar);
        let statics: Vec<Vec<f64>> = if need_statics {
            tokens
                .iter()
                .map(|t| self.statics.lookup(&lowercase_normalize(&t.text)))
                .collect()
        } else {
            Vec::new()
        };
        let contextual = if c.use_contextual {
            let layers = match c.contextual_source {
                ContextualSource::Degenerate => DegenerateProvider {
                    num_layers: c.contextual_layers,
                }
                .layers(&doc.doc_id, tokens, &statics)?,
                ContextualSource::Windowed => WindowedProvider {
                    num_layers: c.contextual_layers,
                }
                .layers(&doc.doc_id, tokens, &statics)?,
                ContextualSource::Sidecar => self
                    .sidecar
                    .as_ref()
                    .ok_or_else(|| Error::data("the model needs a contextual sidecar file"))?
                    .layers(&doc.doc_id, tokens, &statics)?,
            };
            if layers.num_tokens() > 0
                && (layers.num_layers() != c.contextual_layers || layers.dim() != c.contextual_dim)
            {
                return Err(Error::data(format!(
                    "document {:?}: contextual layers are {}x{}, model expects {}x{}",
                    doc.doc_id,
                    layers.num_layers(),
                    layers.dim(),
                    c.contextual_layers,
                    c.contextual_dim
                )));
            }
            Some(layers)
        } else {
            None
        };
        Ok(DocFeatures {
            chars: tokens.iter().map(|t| self.vocab.encode(&t.text)).collect(),
            statics: if c.use_static { statics } else { Vec::new() },
            contextual,
            casing: tokens.iter().map(|t| casing_feature(&t.text)).collect(),
            distance: scaled_distance_vectors(tokens, c.distance_divisor),
        })
    }

    /// Gold label indices in this model's scheme.
    pub fn gold_indices(&self, doc: &Document) -> Result<Vec<usize>> {
        let labels = doc
            .labels()
            .ok_or_else(|| Error::data(format!("document {:?} has no gold labels", doc.doc_id)))?;
        self.tagset.encode(&convert_labels(labels, self.config.scheme))
    }

    /// Inference-mode emission scores, `n × |tagset|`.
    pub fn emissions(&self, features: &DocFeatures) -> Result<Tensor> {
        let mut rng = SeededRng::new(0);
        Ok(self.net.forward(&self.params, features, Mode::Infer, &mut rng)?.0)
    }

    pub fn predict_features(&self, features: &DocFeatures) -> Result<Vec<Tag>> {
        let emissions = self.emissions(features)?;
        let (path, _) = viterbi(&emissions, &self.net.crf.weights(&self.params))?;
        Ok(self.tagset.decode(&path))
    }

    pub fn predict(&self, doc: &Document) -> Result<Prediction> {
        let labels = self.predict_features(&self.features(doc)?)?;
        let segments = extract_segments(&labels);
        Ok(Prediction { labels, segments })
    }

    /// NLL of `gold` under `params` (which must be shaped like this model's
    /// parameters); the gradient is added into `grads`.
    pub fn loss_and_gradient(
        &self,
        params: &ParamSet,
        features: &DocFeatures,
        gold: &[usize],
        mode: Mode,
        rng: &mut SeededRng,
        grads: &mut Grads,
    ) -> Result<f64> {
        self.net.loss(params, features, gold, mode, rng, grads)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{OovPolicy, RawToken};
    use crate::numerics::gradient_check;
    use crate::tags::TagScheme;

    pub(crate) fn small_config(seed: u64) -> ModelConfig {
        ModelConfig {
            contextual_layers: 2,
            contextual_dim: 3,
            static_dim: 3,
            char_dim: 3,
            char_filters: 4,
            hidden_dim: 3,
            dropout: 0.0,
            seed,
            distance_divisor: 50.0,
            ..Default::default()
        }
    }

    fn doc() -> Document {
        Document::new(
            "d",
            vec![
                RawToken::new("MARRIED", 100, 40),
                RawToken::new("John", 40, 60),
                RawToken::new("Smith,", 90, 60),
            ],
            Some(vec![Tag::Outside, Tag::Begin, Tag::Inside]),
            None,
        )
        .unwrap()
    }

    fn tagger(config: ModelConfig) -> Tagger {
        let d = doc();
        let vocab = CharVocab::build(d.tokens().iter().map(|t| t.text.as_str()));
        let statics = Arc::new(StaticEmbeddingTable::empty(config.static_dim, OovPolicy::HashedGaussian { scale: 0.5 }));
        Tagger::new(config, vocab, statics).unwrap()
    }

    #[test]
    fn one_token_document() {
        let t = tagger(small_config(1));
        let d = Document::new("x", vec![RawToken::new("Ann", 3, 4)], None, None).unwrap();
        let f = t.features(&d).unwrap();
        let e = t.emissions(&f).unwrap();
        assert_eq!(e.shape(), &[1, 3]);
        assert!(e.is_finite());
        assert_eq!(t.emissions(&f).unwrap(), e);
        assert_eq!(t.predict(&d).unwrap().labels.len(), 1);
    }

    #[test]
    fn distance_switch_changes_input_width_only() {
        let on = tagger(small_config(1));
        let off = tagger(ModelConfig {
            use_distance: false,
            ..small_config(1)
        });
        assert_eq!(on.net.layout.total_dim(), off.net.layout.total_dim() + 2);
        let names = |t: &Tagger| t.params.iter().map(|p| p.name.clone()).collect::<Vec<_>>();
        assert_eq!(names(&on), names(&off));
        let w = |t: &Tagger| t.params.value(t.net.bilstm.forward.w_input).shape().to_vec();
        assert_eq!(w(&on)[1], w(&off)[1] + 2);
    }

    #[test]
    fn bi_model_never_outputs_outside() {
        let t = tagger(ModelConfig {
            scheme: TagScheme::Bi,
            ..small_config(2)
        });
        assert!(!t.predict(&doc()).unwrap().labels.contains(&Tag::Outside));
        assert_eq!(t.gold_indices(&doc()).unwrap(), vec![0, 0, 1]);
    }

    #[test]
    fn sidecar_required() {
        let t = tagger(ModelConfig {
            contextual_source: ContextualSource::Sidecar,
            ..small_config(1)
        });
        assert!(matches!(t.features(&doc()), Err(Error::Data(_))));
    }

    #[test]
    fn full_model_gradient() {
        for source in [ContextualSource::Degenerate, ContextualSource::Windowed] {
            let t = tagger(ModelConfig {
                contextual_source: source,
                ..small_config(7)
            });
            let d = doc();
            let f = t.features(&d).unwrap();
            let gold = t.gold_indices(&d).unwrap();
            // move every parameter off its small initial scale so that no
            // gradient is tiny enough to drown in finite-difference noise
            let mut params = t.params.clone();
            let mut rng = SeededRng::new(3);
            for p in params.iter_mut() {
                for v in p.value.values_mut() {
                    *v += rng.uniform_range(-0.5, 0.5);
                }
            }
            let report = gradient_check(&mut params, 1e-5, |p| {
                let mut g = p.new_grads();
                let mut rng = SeededRng::new(0);
                let loss = t.loss_and_gradient(p, &f, &gold, Mode::Infer, &mut rng, &mut g).unwrap();
                p.accumulate(&g);
                loss
            });
            assert!(report.max_rel_error < 1e-4, "{report:?}");
        }
    }
}
