//! Numeric substrate: tensors, parameters, the Nadam optimizer, a seeded
//! generator and a finite-difference gradient checker.

mod gradcheck;
mod optim;
mod params;
mod rng;
mod tensor;

pub use gradcheck::{gradient_check, gradient_check_sampled, relative_error, GradCheckReport};
pub use optim::{nadam_step, NadamConfig, OptimizerState};
pub use params::{Grads, ParamId, ParamSet, Parameter};
pub use rng::{seeded_rng, SeededRng};
pub use tensor::Tensor;
pub(crate) use tensor::{axpy, dot, matvec_acc, matvec_t_acc, outer_acc};

use crate::error::{Error, Result};

/// `log Σ exp(v_i)` with max-shift; errors on an empty slice.
pub fn logsumexp(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(Error::usage("logsumexp of an empty vector"));
    }
    Ok(lse(v))
}

/// Infallible variant for callers that guarantee a nonempty slice.
#[inline]
pub(crate) fn lse(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Numerically stable softmax.
pub fn softmax(v: &[f64]) -> Vec<f64> {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = v.iter().map(|x| (x - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}
