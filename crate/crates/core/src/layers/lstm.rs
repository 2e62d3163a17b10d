use crate::error::Result;
use crate::numerics::{
    matvec_acc, matvec_t_acc, outer_acc, sigmoid, Grads, ParamId, ParamSet, SeededRng, Tensor,
};

/// One LSTM direction. Gate rows are stacked as input, forget, cell
/// candidate, output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lstm {
    pub w_input: ParamId,
    pub w_hidden: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub hidden_dim: usize,
}

#[derive(Debug, Clone)]
pub struct LstmCache {
    /// Post-activation gates per step: `[i, f, g, o]`, each `hidden_dim` wide.
    gates: Vec<Vec<f64>>,
    cells: Vec<Vec<f64>>,
    hidden: Vec<Vec<f64>>,
}

impl Lstm {
    /// Weights uniform in `[-0.1, 0.1]`, forget-gate bias 1, other biases 0.
    pub fn new(
        params: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let h4 = 4 * hidden_dim;
        let mut uniform = |shape: &[usize]| {
            let mut t = Tensor::zeros(shape);
            for v in t.values_mut() {
                *v = rng.uniform_range(-0.1, 0.1);
            }
            t
        };
        let w_input = uniform(&[h4, input_dim]);
        let w_hidden = uniform(&[h4, hidden_dim]);
        let mut bias = Tensor::zeros(&[h4]);
        bias.values_mut()[hidden_dim..2 * hidden_dim].fill(1.0);
        Ok(Lstm {
            w_input: params.add(format!("{prefix}.w_input"), w_input)?,
            w_hidden: params.add(format!("{prefix}.w_hidden"), w_hidden)?,
            bias: params.add(format!("{prefix}.bias"), bias)?,
            input_dim,
            hidden_dim,
        })
    }

    /// Runs over `inputs` in order from zero initial states.
    pub fn forward(&self, params: &ParamSet, inputs: &[&[f64]]) -> LstmCache {
        let hd = self.hidden_dim;
        let wi = params.value(self.w_input).values();
        let wh = params.value(self.w_hidden).values();
        let b = params.value(self.bias).values();
        let mut cache = LstmCache {
            gates: Vec::with_capacity(inputs.len()),
            cells: Vec::with_capacity(inputs.len()),
            hidden: Vec::with_capacity(inputs.len()),
        };
        let mut h_prev = vec![0.0; hd];
        let mut c_prev = vec![0.0; hd];
        for x in inputs {
            let mut z = b.to_vec();
            matvec_acc(wi, self.input_dim, x, &mut z);
            matvec_acc(wh, hd, &h_prev, &mut z);
            let mut c = vec![0.0; hd];
            let mut h = vec![0.0; hd];
            for j in 0..hd {
                let i = sigmoid(z[j]);
                let f = sigmoid(z[hd + j]);
                let g = z[2 * hd + j].tanh();
                let o = sigmoid(z[3 * hd + j]);
                z[j] = i;
                z[hd + j] = f;
                z[2 * hd + j] = g;
                z[3 * hd + j] = o;
                c[j] = f * c_prev[j] + i * g;
                h[j] = o * c[j].tanh();
            }
            cache.gates.push(z);
            cache.cells.push(c.clone());
            cache.hidden.push(h.clone());
            h_prev = h;
            c_prev = c;
        }
        cache
    }

    /// Backpropagates `d_hidden` (one row per step) and adds input
    /// gradients into `d_inputs`.
    pub fn backward(
        &self,
        params: &ParamSet,
        grads: &mut Grads,
        inputs: &[&[f64]],
        cache: &LstmCache,
        d_hidden: &[Vec<f64>],
        d_inputs: &mut [Vec<f64>],
    ) {
        let hd = self.hidden_dim;
        let wi = params.value(self.w_input).values();
        let wh = params.value(self.w_hidden).values();
        let n = inputs.len();
        let zeros = vec![0.0; hd];
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        let mut dz = vec![0.0; 4 * hd];
        for t in (0..n).rev() {
            let gates = &cache.gates[t];
            let c = &cache.cells[t];
            let c_prev = if t > 0 { &cache.cells[t - 1] } else { &zeros };
            let h_prev = if t > 0 { &cache.hidden[t - 1] } else { &zeros };
            for j in 0..hd {
                let (i, f, g, o) = (gates[j], gates[hd + j], gates[2 * hd + j], gates[3 * hd + j]);
                let dh = d_hidden[t][j] + dh_next[j];
                let tc = c[j].tanh();
                let d_o = dh * tc;
                let dc = dc_next[j] + dh * o * (1.0 - tc * tc);
                dz[j] = dc * g * i * (1.0 - i);
                dz[hd + j] = dc * c_prev[j] * f * (1.0 - f);
                dz[2 * hd + j] = dc * i * (1.0 - g * g);
                dz[3 * hd + j] = d_o * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            outer_acc(&dz, inputs[t], grads.get_mut(self.w_input).values_mut());
            if t > 0 {
                outer_acc(&dz, h_prev, grads.get_mut(self.w_hidden).values_mut());
            }
            for (gb, d) in grads.get_mut(self.bias).values_mut().iter_mut().zip(&dz) {
                *gb += d;
            }
            matvec_t_acc(wi, self.input_dim, &dz, &mut d_inputs[t]);
            dh_next.fill(0.0);
            matvec_t_acc(wh, hd, &dz, &mut dh_next);
        }
    }
}

impl LstmCache {
    pub fn hidden(&self) -> &[Vec<f64>] {
        &self.hidden
    }
}

/// Forward and backward LSTMs with independent weights; outputs are the
/// concatenation `forward_h ∘ backward_h`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiLstm {
    pub forward: Lstm,
    pub backward: Lstm,
}

#[derive(Debug, Clone)]
pub struct BiLstmCache {
    fwd: LstmCache,
    bwd: LstmCache,
}

impl BiLstm {
    pub fn new(
        params: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        Ok(BiLstm {
            forward: Lstm::new(params, &format!("{prefix}.fwd"), input_dim, hidden_dim, rng)?,
            backward: Lstm::new(params, &format!("{prefix}.bwd"), input_dim, hidden_dim, rng)?,
        })
    }

    pub fn output_dim(&self) -> usize {
        2 * self.forward.hidden_dim
    }

    pub fn forward(&self, params: &ParamSet, inputs: &[Vec<f64>]) -> (Vec<Vec<f64>>, BiLstmCache) {
        let fwd_in: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let bwd_in: Vec<&[f64]> = fwd_in.iter().rev().copied().collect();
        let fwd = self.forward.forward(params, &fwd_in);
        let bwd = self.backward.forward(params, &bwd_in);
        let n = inputs.len();
        let out = (0..n)
            .map(|i| {
                let mut h = fwd.hidden[i].clone();
                h.extend_from_slice(&bwd.hidden[n - 1 - i]);
                h
            })
            .collect();
        (out, BiLstmCache { fwd, bwd })
    }

    /// Returns gradients with respect to the inputs.
    pub fn backward(
        &self,
        params: &ParamSet,
        grads: &mut Grads,
        inputs: &[Vec<f64>],
        cache: &BiLstmCache,
        d_out: &[Vec<f64>],
    ) -> Vec<Vec<f64>> {
        let n = inputs.len();
        let hd = self.forward.hidden_dim;
        let fwd_in: Vec<&[f64]> = inputs.iter().map(Vec::as_slice).collect();
        let bwd_in: Vec<&[f64]> = fwd_in.iter().rev().copied().collect();
        let d_fwd: Vec<Vec<f64>> = d_out.iter().map(|d| d[..hd].to_vec()).collect();
        let d_bwd: Vec<Vec<f64>> = d_out.iter().rev().map(|d| d[hd..].to_vec()).collect();

        let mut d_inputs = vec![vec![0.0; self.forward.input_dim]; n];
        self.forward
            .backward(params, grads, &fwd_in, &cache.fwd, &d_fwd, &mut d_inputs);
        let mut d_rev = vec![vec![0.0; self.forward.input_dim]; n];
        self.backward
            .backward(params, grads, &bwd_in, &cache.bwd, &d_bwd, &mut d_rev);
        for (i, d) in d_rev.into_iter().rev().enumerate() {
            for (a, b) in d_inputs[i].iter_mut().zip(d) {
                *a += b;
            }
        }
        d_inputs
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gradient_check;

    fn setup(seed: u64, input_dim: usize, hidden: usize) -> (ParamSet, BiLstm) {
        let mut ps = ParamSet::new();
        let mut rng = SeededRng::new(seed);
        let bl = BiLstm::new(&mut ps, "bilstm", input_dim, hidden, &mut rng).unwrap();
        (ps, bl)
    }

    fn inputs(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
        let mut rng = SeededRng::new(seed ^ 0xABCD);
        (0..n).map(|_| (0..d).map(|_| rng.uniform_range(-1.0, 1.0)).collect()).collect()
    }

    #[test]
    fn single_token_output_has_both_halves() {
        let (ps, bl) = setup(1, 6, 100);
        let x = inputs(1, 1, 6);
        let (h, _) = bl.forward(&ps, &x);
        assert_eq!(h.len(), 1);
        assert_eq!(h[0].len(), 200);
        // one step from zero state: each half is the same cell applied to x
        let fw = bl.forward.forward(&ps, &[&x[0]]);
        let bw = bl.backward.forward(&ps, &[&x[0]]);
        assert_eq!(&h[0][..100], fw.hidden()[0].as_slice());
        assert_eq!(&h[0][100..], bw.hidden()[0].as_slice());
    }

    #[test]
    fn zero_weights_give_zero_hidden() {
        let (mut ps, bl) = setup(2, 4, 5);
        for p in ps.iter_mut() {
            p.value.fill(0.0);
        }
        let (h, _) = bl.forward(&ps, &inputs(2, 3, 4));
        assert!(h.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn perturbation_reaches_expected_halves() {
        let (ps, bl) = setup(3, 4, 3);
        let x = inputs(3, 5, 4);
        let (base, _) = bl.forward(&ps, &x);
        let j = 2;
        let mut y = x.clone();
        y[j][0] += 0.5;
        let (pert, _) = bl.forward(&ps, &y);
        for i in 0..5 {
            let fwd_changed = base[i][..3] != pert[i][..3];
            let bwd_changed = base[i][3..] != pert[i][3..];
            assert_eq!(fwd_changed, j <= i, "forward half at {i}");
            assert_eq!(bwd_changed, j >= i, "backward half at {i}");
        }
    }

    #[test]
    fn reversal_with_swapped_weights_swaps_halves() {
        let (ps, bl) = setup(4, 3, 2);
        let swapped = BiLstm {
            forward: bl.backward,
            backward: bl.forward,
        };
        let x = inputs(4, 4, 3);
        let rev: Vec<Vec<f64>> = x.iter().rev().cloned().collect();
        let (a, _) = bl.forward(&ps, &x);
        let (b, _) = swapped.forward(&ps, &rev);
        for i in 0..4 {
            let j = 3 - i;
            assert_eq!(a[i][..2], b[j][2..]);
            assert_eq!(a[i][2..], b[j][..2]);
        }
    }

    #[test]
    fn gradient_check_small_instances() {
        for seed in 0..20 {
            let (mut ps, bl) = setup(seed, 3, 4);
            for p in ps.iter_mut() {
                for v in p.value.values_mut() {
                    *v *= 5.0;
                }
            }
            let x = inputs(seed, 3, 3);
            let mut rng = SeededRng::new(seed + 100);
            let w: Vec<Vec<f64>> = (0..3).map(|_| (0..8).map(|_| rng.normal()).collect()).collect();
            let report = gradient_check(&mut ps, 1e-5, |ps| {
                let (h, cache) = bl.forward(ps, &x);
                let mut g = ps.new_grads();
                bl.backward(ps, &mut g, &x, &cache, &w);
                ps.accumulate(&g);
                h.iter().flatten().zip(w.iter().flatten()).map(|(a, b)| a * b).sum()
            });
            assert!(report.max_rel_error < 1e-4, "seed {seed}: {report:?}");
        }
    }

    #[test]
    fn input_gradients_match_differences() {
        let (ps, bl) = setup(9, 3, 4);
        let x = inputs(9, 3, 3);
        let w: Vec<Vec<f64>> = (0..3).map(|i| (0..8).map(|j| ((i * 8 + j) % 5) as f64 - 2.0).collect()).collect();
        let f = |x: &[Vec<f64>]| -> f64 {
            let (h, _) = bl.forward(&ps, x);
            h.iter().flatten().zip(w.iter().flatten()).map(|(a, b)| a * b).sum()
        };
        let (_, cache) = bl.forward(&ps, &x);
        let mut g = ps.new_grads();
        let dx = bl.backward(&ps, &mut g, &x, &cache, &w);
        let eps = 1e-6;
        for t in 0..3 {
            for d in 0..3 {
                let mut p = x.clone();
                let mut m = x.clone();
                p[t][d] += eps;
                m[t][d] -= eps;
                let num = (f(&p) - f(&m)) / (2.0 * eps);
                assert!((num - dx[t][d]).abs() < 1e-7, "{num} vs {}", dx[t][d]);
            }
        }
    }
}
