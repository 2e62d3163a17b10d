use crate::error::Result;
use crate::numerics::{matvec_acc, matvec_t_acc, outer_acc, Grads, ParamId, ParamSet, SeededRng, Tensor};

/// Affine map `W h + b`, applied row by row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Linear {
    pub weight: ParamId,
    pub bias: ParamId,
    pub input_dim: usize,
    pub output_dim: usize,
}

impl Linear {
    pub fn new(
        params: &mut ParamSet,
        prefix: &str,
        input_dim: usize,
        output_dim: usize,
        rng: &mut SeededRng,
    ) -> Result<Self> {
        let mut w = Tensor::zeros(&[output_dim, input_dim]);
        for v in w.values_mut() {
            *v = rng.uniform_range(-0.1, 0.1);
        }
        Ok(Linear {
            weight: params.add(format!("{prefix}.weight"), w)?,
            bias: params.add(format!("{prefix}.bias"), Tensor::zeros(&[output_dim]))?,
            input_dim,
            output_dim,
        })
    }

    /// `n × output_dim` scores, no nonlinearity.
    pub fn forward(&self, params: &ParamSet, rows: &[Vec<f64>]) -> Tensor {
        let w = params.value(self.weight).values();
        let b = params.value(self.bias).values();
        let mut out = Tensor::zeros(&[rows.len(), self.output_dim]);
        for (i, h) in rows.iter().enumerate() {
            let o = out.row_mut(i);
            o.copy_from_slice(b);
            matvec_acc(w, self.input_dim, h, o);
        }
        out
    }

    pub fn backward(
        &self,
        params: &ParamSet,
        grads: &mut Grads,
        rows: &[Vec<f64>],
        d_out: &Tensor,
    ) -> Vec<Vec<f64>> {
        let w = params.value(self.weight).values();
        let mut d_rows = Vec::with_capacity(rows.len());
        for (i, h) in rows.iter().enumerate() {
            let d = d_out.row(i);
            outer_acc(d, h, grads.get_mut(self.weight).values_mut());
            for (gb, v) in grads.get_mut(self.bias).values_mut().iter_mut().zip(d) {
                *gb += v;
            }
            let mut dh = vec![0.0; self.input_dim];
            matvec_t_acc(w, self.input_dim, d, &mut dh);
            d_rows.push(dh);
        }
        d_rows
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (ParamSet, Linear) {
        let mut ps = ParamSet::new();
        let lin = Linear::new(&mut ps, "proj", 4, 3, &mut SeededRng::new(5)).unwrap();
        (ps, lin)
    }

    #[test]
    fn zero_projection_gives_zero_scores() {
        let (mut ps, lin) = setup();
        ps.get_mut(lin.weight).value.fill(0.0);
        let out = lin.forward(&ps, &[vec![1.0, 2.0, 3.0, 4.0]]);
        assert_eq!(out.values(), &[0.0; 3]);
    }

    #[test]
    fn selection_projection_copies_coordinates() {
        let (mut ps, lin) = setup();
        let w = &mut ps.get_mut(lin.weight).value;
        w.fill(0.0);
        *w.at_mut(0, 3) = 1.0;
        *w.at_mut(1, 0) = 1.0;
        *w.at_mut(2, 1) = 1.0;
        let out = lin.forward(&ps, &[vec![0.5, -1.0, 7.0, 2.0]]);
        assert_eq!(out.values(), &[2.0, 0.5, -1.0]);
    }

    #[test]
    fn matches_naive_matmul() {
        let (ps, lin) = setup();
        let rows = vec![vec![0.3, -0.2, 1.5, 0.0], vec![-1.0, 2.0, 0.25, 0.5]];
        let out = lin.forward(&ps, &rows);
        let w = ps.value(lin.weight);
        let b = ps.value(lin.bias);
        for (i, h) in rows.iter().enumerate() {
            for o in 0..3 {
                let mut s = b.values()[o];
                for k in 0..4 {
                    s += w.at(o, k) * h[k];
                }
                assert!((out.at(i, o) - s).abs() < 1e-14);
            }
        }
    }
}
