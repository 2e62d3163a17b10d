use crate::error::Result;
use crate::numerics::{Grads, ParamId, ParamSet, SeededRng, Tensor};

use super::vocab::PAD_INDEX;

/// Character CNN: embeddings, one same-padded convolution, global max pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharCnn {
    pub embedding: ParamId,
    pub filters: ParamId,
    pub bias: ParamId,
    pub char_dim: usize,
    pub num_filters: usize,
    pub width: usize,
}

/// Positions that won the max pool, one per filter, plus the input chars.
#[derive(Debug, Clone)]
pub struct CharCnnCache {
    chars: Vec<usize>,
    argmax: Vec<usize>,
}

impl CharCnn {
    pub fn new(
        params: &mut ParamSet,
        prefix: &str,
        vocab_size: usize,
        char_dim: usize,
        num_filters: usize,
        width: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let mut embed = Tensor::zeros(&[vocab_size, char_dim]);
        for (i, v) in embed.values_mut().iter_mut().enumerate() {
            if i / char_dim != PAD_INDEX {
                *v = rng.uniform_range(-0.1, 0.1);
            }
        }
        let mut filters = Tensor::zeros(&[num_filters, width * char_dim]);
        for v in filters.values_mut() {
            *v = rng.uniform_range(-0.1, 0.1);
        }
        Ok(CharCnn {
            embedding: params.add(format!("{prefix}.char_embedding"), embed)?,
            filters: params.add(format!("{prefix}.filters"), filters)?,
            bias: params.add(format!("{prefix}.bias"), Tensor::zeros(&[num_filters]))?,
            char_dim,
            num_filters,
            width,
        })
    }

    pub fn output_dim(&self) -> usize {
        self.num_filters
    }

    /// Forward over the character indices of one token.
    pub fn forward(&self, params: &ParamSet, chars: &[usize]) -> (Vec<f64>, CharCnnCache) {
        let embed = params.value(self.embedding);
        let filters = params.value(self.filters);
        let bias = params.value(self.bias).values();
        let e = self.char_dim;
        let pad = (self.width - 1) / 2;
        let m = chars.len();

        let mut best = vec![f64::NEG_INFINITY; self.num_filters];
        let mut argmax = vec![0usize; self.num_filters];
        for p in 0..m {
            for f in 0..self.num_filters {
                let w = filters.row(f);
                let mut z = bias[f];
                for k in 0..self.width {
                    let Some(q) = (p + k).checked_sub(pad).filter(|q| *q < m) else {
                        continue;
                    };
                    let x = embed.row(chars[q]);
                    z += crate::numerics::dot(&w[k * e..(k + 1) * e], x);
                }
                if z > best[f] {
                    best[f] = z;
                    argmax[f] = p;
                }
            }
        }
        (
            best,
            CharCnnCache {
                chars: chars.to_vec(),
                argmax,
            },
        )
    }

    /// Forward for a token right-padded with [`PAD_INDEX`] to `padded_len`;
    /// padding contributes zeros and is excluded from pooling.
    pub fn forward_padded(&self, params: &ParamSet, chars: &[usize], padded_len: usize) -> Vec<f64> {
        let real = chars.iter().take_while(|c| **c != PAD_INDEX).count();
        debug_assert!(padded_len >= real);
        self.forward(params, &chars[..real]).0
    }

    pub fn backward(&self, params: &ParamSet, grads: &mut Grads, cache: &CharCnnCache, d_out: &[f64]) {
        let e = self.char_dim;
        let pad = (self.width - 1) / 2;
        let m = cache.chars.len();
        let embed = params.value(self.embedding);
        let filters = params.value(self.filters);
        for f in 0..self.num_filters {
            let d = d_out[f];
            if d == 0.0 {
                continue;
            }
            let p = cache.argmax[f];
            grads.get_mut(self.bias).values_mut()[f] += d;
            for k in 0..self.width {
                let Some(q) = (p + k).checked_sub(pad).filter(|q| *q < m) else {
                    continue;
                };
                let c = cache.chars[q];
                {
                    let df = &mut grads.get_mut(self.filters).row_mut(f)[k * e..(k + 1) * e];
                    crate::numerics::axpy(d, embed.row(c), df);
                }
                let w = &filters.row(f)[k * e..(k + 1) * e];
                crate::numerics::axpy(d, w, grads.get_mut(self.embedding).row_mut(c));
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradient_check;

    fn setup(seed: u64) -> (ParamSet, CharCnn) {
        let mut ps = ParamSet::new();
        let mut rng = SeededRng::new(seed);
        let cnn = CharCnn::new(&mut ps, "cnn", 9, 25, 30, 3, &mut rng).unwrap();
        // widen the initial scale so pooling winners are well separated
        for p in ps.iter_mut() {
            for v in p.value.values_mut() {
                *v *= 5.0;
            }
        }
        let b = ps.get_mut(cnn.bias);
        for (i, v) in b.value.values_mut().iter_mut().enumerate() {
            *v = 0.01 * i as f64;
        }
        (ps, cnn)
    }

    /// Naive conv + max pool straight from the definition.
    fn oracle(ps: &ParamSet, cnn: &CharCnn, chars: &[usize]) -> Vec<f64> {
        let e = cnn.char_dim;
        let m = chars.len() as isize;
        let emb = |q: isize, d: usize| -> f64 {
            if q < 0 || q >= m {
                0.0
            } else {
                ps.value(cnn.embedding).at(chars[q as usize], d)
            }
        };
        (0..cnn.num_filters)
            .map(|f| {
                (0..m)
                    .map(|p| {
                        let mut z = ps.value(cnn.bias).values()[f];
                        for k in 0..3isize {
                            for d in 0..e {
                                z += ps.value(cnn.filters).at(f, k as usize * e + d) * emb(p + k - 1, d);
                            }
                        }
                        z
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect()
    }

    #[test]
    fn single_char_token_has_full_output() {
        let (ps, cnn) = setup(1);
        let (out, _) = cnn.forward(&ps, &[3]);
        assert_eq!(out.len(), 30);
        assert!(out.iter().all(|v| v.is_finite()));
        for (a, b) in out.iter().zip(oracle(&ps, &cnn, &[3])) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_filters_and_bias_give_zero() {
        let (mut ps, cnn) = setup(2);
        ps.get_mut(cnn.filters).value.fill(0.0);
        ps.get_mut(cnn.bias).value.fill(0.0);
        let (out, _) = cnn.forward(&ps, &[2, 3, 4]);
        assert_eq!(out, vec![0.0; 30]);
    }

    #[test]
    fn matches_naive_oracle() {
        for seed in 0..5 {
            let (ps, cnn) = setup(seed);
            let chars = [2, 7, 3, 3, 8];
            let (out, _) = cnn.forward(&ps, &chars);
            for (a, b) in out.iter().zip(oracle(&ps, &cnn, &chars)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn trailing_padding_is_ignored() {
        let (ps, cnn) = setup(3);
        let chars = [4, 5, 6];
        let base = cnn.forward(&ps, &chars).0;
        for extra in 1..6 {
            let mut padded = chars.to_vec();
            padded.extend(std::iter::repeat_n(PAD_INDEX, extra));
            assert_eq!(cnn.forward_padded(&ps, &padded, padded.len()), base);
        }
    }

    #[test]
    fn gradient_check_passes() {
        let (mut ps, cnn) = setup(4);
        let chars = [2, 5, 5, 7, 3];
        let d_out: Vec<f64> = (0..30).map(|i| ((i * 7 % 11) as f64 - 5.0) / 5.0).collect();
        let report = gradient_check(&mut ps, 1e-6, |ps| {
            let (out, cache) = cnn.forward(ps, &chars);
            let mut g = ps.new_grads();
            cnn.backward(ps, &mut g, &cache, &d_out);
            ps.accumulate(&g);
            out.iter().zip(&d_out).map(|(a, b)| a * b).sum()
        });
        assert!(report.max_rel_error < 1e-4, "{report:?}");
    }
}
