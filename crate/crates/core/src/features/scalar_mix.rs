use crate::error::{Error, Result};
use crate::numerics::{dot, softmax};

/// `gamma · Σ_l softmax(weights)_l · layer_l` over a flat `L × D` block.
pub fn scalar_mix(layers: &[f64], weights: &[f64], gamma: f64) -> Result<Vec<f64>> {
    let l = weights.len();
    if l == 0 {
        return Err(Error::usage("scalar mix needs at least one layer"));
    }
    if !layers.len().is_multiple_of(l) {
        return Err(Error::usage(format!(
            "{} values cannot be split into {l} equal layers",
            layers.len()
        )));
    }
    let dim = layers.len() / l;
    let s = softmax(weights);
    let mut out = vec![0.0; dim];
    for (layer, sl) in layers.chunks_exact(dim.max(1)).zip(&s) {
        for (o, v) in out.iter_mut().zip(layer) {
            *o += gamma * sl * v;
        }
    }
    Ok(out)
}

/// Gradients of [`scalar_mix`] with respect to the mix weights and gamma.
pub fn scalar_mix_backward(
    layers: &[f64],
    weights: &[f64],
    gamma: f64,
    d_out: &[f64],
) -> (Vec<f64>, f64) {
    let dim = d_out.len();
    let s = softmax(weights);
    let proj: Vec<f64> = layers.chunks_exact(dim.max(1)).map(|a| dot(a, d_out)).collect();
    let d_gamma: f64 = s.iter().zip(&proj).map(|(sl, p)| sl * p).sum();
    let d_weights = s
        .iter()
        .zip(&proj)
        .map(|(sk, pk)| gamma * sk * (pk - d_gamma))
        .collect();
    (d_weights, d_gamma)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn uniform_weights_average() {
        let out = scalar_mix(&[1.0, 0.0, 0.0, 1.0, 1.0, 1.0], &[0.0; 3], 1.0).unwrap();
        assert!((out[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((out[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn dominant_weight_selects_layer() {
        let layers = [1.0, 2.0, -3.0, 4.0, 0.5, 0.25];
        let out = scalar_mix(&layers, &[0.0, 50.0, 0.0], 1.0).unwrap();
        assert!((out[0] + 3.0).abs() < 1e-6 && (out[1] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn zero_gamma_gives_zero() {
        let out = scalar_mix(&[5.0, 6.0, 7.0, 8.0], &[3.0, -1.0], 0.0).unwrap();
        assert_eq!(out, vec![0.0, 0.0]);
    }

    #[test]
    fn mismatched_layers_rejected() {
        assert!(scalar_mix(&[1.0, 2.0, 3.0], &[0.0, 0.0], 1.0).is_err());
        assert!(scalar_mix(&[1.0], &[], 1.0).is_err());
    }

    #[test]
    fn backward_matches_central_differences() {
        let layers = [0.3, -1.2, 0.8, 2.0, 0.1, -0.4, 1.1, 0.7, -0.9];
        let w = [0.2, -0.5, 0.9];
        let gamma = 1.3;
        let d_out = [0.5, -2.0, 1.0];
        let f = |w: &[f64], g: f64| -> f64 {
            scalar_mix(&layers, w, g).unwrap().iter().zip(&d_out).map(|(a, b)| a * b).sum()
        };
        let (dw, dg) = scalar_mix_backward(&layers, &w, gamma, &d_out);
        let eps = 1e-6;
        for k in 0..3 {
            let mut wp = w;
            let mut wm = w;
            wp[k] += eps;
            wm[k] -= eps;
            let num = (f(&wp, gamma) - f(&wm, gamma)) / (2.0 * eps);
            assert!((num - dw[k]).abs() < 1e-8, "{k}: {num} vs {}", dw[k]);
        }
        let num = (f(&w, gamma + eps) - f(&w, gamma - eps)) / (2.0 * eps);
        assert!((num - dg).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn shift_invariant(
            w in prop::collection::vec(-3.0f64..3.0, 3),
            layers in prop::collection::vec(-2.0f64..2.0, 12),
            c in -10.0f64..10.0,
        ) {
            let shifted: Vec<f64> = w.iter().map(|v| v + c).collect();
            let a = scalar_mix(&layers, &w, 0.7).unwrap();
            let b = scalar_mix(&layers, &shifted, 0.7).unwrap();
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
