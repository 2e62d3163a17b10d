use crate::data::Document;
use crate::error::{Error, Result};
use crate::numerics::SeededRng;

/// Train, dev and test partitions of a corpus.
#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSplit {
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub test: Vec<Document>,
}

/// Shuffles with `seed` and cuts by `ratios` (train, dev, test).
///
/// Train and dev sizes are rounded; test receives the remainder.
pub fn split_corpus(docs: &[Document], ratios: (f64, f64, f64), seed: u64) -> Result<CorpusSplit> {
    let (a, b, c) = ratios;
    if [a, b, c].iter().any(|r| !r.is_finite() || *r < 0.0) || ((a + b + c) - 1.0).abs() > 1e-9 {
        return Err(Error::usage(format!(
            "split ratios must be non-negative and sum to 1, got ({a}, {b}, {c})"
        )));
    }
    let n = docs.len();
    let mut order: Vec<usize> = (0..n).collect();
    SeededRng::new(seed).shuffle(&mut order);
    let n_train = ((a * n as f64).round() as usize).min(n);
    let n_dev = ((b * n as f64).round() as usize).min(n - n_train);
    let pick = |idx: &[usize]| idx.iter().map(|&i| docs[i].clone()).collect::<Vec<_>>();
    Ok(CorpusSplit {
        train: pick(&order[..n_train]),
        dev: pick(&order[n_train..n_train + n_dev]),
        test: pick(&order[n_train + n_dev..]),
    })
}
