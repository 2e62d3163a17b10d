//! Linear-chain CRF over per-token emission scores: path scoring, the
//! forward-algorithm partition function, the negative log-likelihood with
//! its gradient, Viterbi decoding and segment extraction.

mod segments;

pub use segments::{extract_segments, segments_to_labels, Segment};

use crate::error::{Error, Result};
use crate::numerics::{lse, Grads, ParamId, ParamSet, Tensor};

/// Borrowed CRF scores for `L` labels. `transitions` is `L × L` indexed
/// `[from][to]`.
#[derive(Debug, Clone, Copy)]
pub struct CrfWeights<'a> {
    pub transitions: &'a [f64],
    pub start: &'a [f64],
    pub stop: &'a [f64],
}

impl<'a> CrfWeights<'a> {
    pub fn num_labels(&self) -> usize {
        self.start.len()
    }

    #[inline]
    fn trans(&self, from: usize, to: usize) -> f64 {
        self.transitions[from * self.start.len() + to]
    }
}

/// CRF parameters registered in a [`ParamSet`]; initialised to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Crf {
    pub transitions: ParamId,
    pub start: ParamId,
    pub stop: ParamId,
    pub num_labels: usize,
}

impl Crf {
    pub fn new(params: &mut ParamSet, prefix: &str, num_labels: usize) -> Result<Self> {
        Ok(Crf {
            transitions: params.add(
                format!("{prefix}.transitions"),
                Tensor::zeros(&[num_labels, num_labels]),
            )?,
            start: params.add(format!("{prefix}.start"), Tensor::zeros(&[num_labels]))?,
            stop: params.add(format!("{prefix}.stop"), Tensor::zeros(&[num_labels]))?,
            num_labels,
        })
    }

    pub fn weights<'a>(&self, params: &'a ParamSet) -> CrfWeights<'a> {
        CrfWeights {
            transitions: params.value(self.transitions).values(),
            start: params.value(self.start).values(),
            stop: params.value(self.stop).values(),
        }
    }

    /// Adds an NLL gradient into the parameter buffers.
    pub fn accumulate(&self, grads: &mut Grads, g: &NllGradient) {
        let add = |t: &mut Tensor, src: &[f64]| {
            for (a, b) in t.values_mut().iter_mut().zip(src) {
                *a += b;
            }
        };
        add(grads.get_mut(self.transitions), &g.d_transitions);
        add(grads.get_mut(self.start), &g.d_start);
        add(grads.get_mut(self.stop), &g.d_stop);
    }
}

fn check_shapes(emissions: &Tensor, crf: &CrfWeights<'_>) -> Result<()> {
    let l = crf.num_labels();
    if emissions.cols() != l || crf.stop.len() != l || crf.transitions.len() != l * l {
        return Err(Error::usage(format!(
            "emissions have {} labels, CRF has {l}",
            emissions.cols()
        )));
    }
    Ok(())
}

/// `start[y_1] + Σ emissions[i][y_i] + Σ transitions[y_i][y_{i+1}] + stop[y_n]`.
pub fn sequence_score(emissions: &Tensor, crf: &CrfWeights<'_>, labels: &[usize]) -> Result<f64> {
    check_shapes(emissions, crf)?;
    let n = emissions.rows();
    if labels.len() != n {
        return Err(Error::usage(format!(
            "{} labels for {n} emission rows",
            labels.len()
        )));
    }
    if n == 0 {
        return Ok(0.0);
    }
    if let Some(bad) = labels.iter().find(|&&y| y >= crf.num_labels()) {
        return Err(Error::usage(format!("label index {bad} out of range")));
    }
    let mut s = crf.start[labels[0]] + crf.stop[labels[n - 1]];
    for (i, &y) in labels.iter().enumerate() {
        s += emissions.at(i, y);
        if i + 1 < n {
            s += crf.trans(y, labels[i + 1]);
        }
    }
    Ok(s)
}

/// Forward log-potentials: `alpha[t][j]` scores all prefixes ending in `j`.
fn forward_scores(emissions: &Tensor, crf: &CrfWeights<'_>) -> Vec<Vec<f64>> {
    let n = emissions.rows();
    let l = crf.num_labels();
    let mut alpha = Vec::with_capacity(n);
    alpha.push((0..l).map(|j| crf.start[j] + emissions.at(0, j)).collect::<Vec<_>>());
    let mut buf = vec![0.0; l];
    for t in 1..n {
        let prev = &alpha[t - 1];
        let row: Vec<f64> = (0..l)
            .map(|j| {
                for i in 0..l {
                    buf[i] = prev[i] + crf.trans(i, j);
                }
                lse(&buf) + emissions.at(t, j)
            })
            .collect();
        alpha.push(row);
    }
    alpha
}

/// Backward log-potentials: `beta[t][i]` scores all suffixes after `i`.
fn backward_scores(emissions: &Tensor, crf: &CrfWeights<'_>) -> Vec<Vec<f64>> {
    let n = emissions.rows();
    let l = crf.num_labels();
    let mut beta = vec![vec![0.0; l]; n];
    beta[n - 1].copy_from_slice(crf.stop);
    let mut buf = vec![0.0; l];
    for t in (0..n - 1).rev() {
        for i in 0..l {
            for j in 0..l {
                buf[j] = crf.trans(i, j) + emissions.at(t + 1, j) + beta[t + 1][j];
            }
            beta[t][i] = lse(&buf);
        }
    }
    beta
}

/// `log Σ_y exp(sequence_score(y))` by the forward algorithm.
pub fn log_partition(emissions: &Tensor, crf: &CrfWeights<'_>) -> Result<f64> {
    check_shapes(emissions, crf)?;
    if emissions.rows() == 0 {
        return Err(Error::usage("log partition of an empty sequence"));
    }
    let alpha = forward_scores(emissions, crf);
    let last = alpha.last().unwrap();
    let terminal: Vec<f64> = last.iter().zip(crf.stop).map(|(a, s)| a + s).collect();
    Ok(lse(&terminal))
}

/// Gradient of the NLL with respect to emissions and CRF scores.
#[derive(Debug, Clone, PartialEq)]
pub struct NllGradient {
    pub d_emissions: Tensor,
    pub d_transitions: Vec<f64>,
    pub d_start: Vec<f64>,
    pub d_stop: Vec<f64>,
}

/// `log_partition - sequence_score(gold)` and its gradient
/// (expected minus observed feature counts).
pub fn nll_loss(emissions: &Tensor, crf: &CrfWeights<'_>, gold: &[usize]) -> Result<(f64, NllGradient)> {
    let gold_score = sequence_score(emissions, crf, gold)?;
    let n = emissions.rows();
    if n == 0 {
        return Err(Error::usage("negative log-likelihood of an empty sequence"));
    }
    let l = crf.num_labels();
    let alpha = forward_scores(emissions, crf);
    let beta = backward_scores(emissions, crf);
    let terminal: Vec<f64> = alpha[n - 1].iter().zip(crf.stop).map(|(a, s)| a + s).collect();
    let log_z = lse(&terminal);

    let mut d_emissions = Tensor::zeros(&[n, l]);
    let mut d_transitions = vec![0.0; l * l];
    let mut d_start = vec![0.0; l];
    let mut d_stop = vec![0.0; l];
    for t in 0..n {
        for j in 0..l {
            let p = (alpha[t][j] + beta[t][j] - log_z).exp();
            *d_emissions.at_mut(t, j) = p;
            if t == 0 {
                d_start[j] = p;
            }
            if t == n - 1 {
                d_stop[j] = p;
            }
        }
        if t + 1 < n {
            for i in 0..l {
                for j in 0..l {
                    let lp = alpha[t][i] + crf.trans(i, j) + emissions.at(t + 1, j) + beta[t + 1][j]
                        - log_z;
                    d_transitions[i * l + j] += lp.exp();
                }
            }
        }
    }
    for (t, &y) in gold.iter().enumerate() {
        *d_emissions.at_mut(t, y) -= 1.0;
        if t + 1 < n {
            d_transitions[y * l + gold[t + 1]] -= 1.0;
        }
    }
    d_start[gold[0]] -= 1.0;
    d_stop[gold[n - 1]] -= 1.0;

    Ok((
        log_z - gold_score,
        NllGradient {
            d_emissions,
            d_transitions,
            d_start,
            d_stop,
        },
    ))
}

/// Highest-scoring label sequence and its score. Ties go to the lowest
/// label index, both in the recursion and at the final step.
pub fn viterbi(emissions: &Tensor, crf: &CrfWeights<'_>) -> Result<(Vec<usize>, f64)> {
    check_shapes(emissions, crf)?;
    let n = emissions.rows();
    if n == 0 {
        return Ok((Vec::new(), 0.0));
    }
    let l = crf.num_labels();
    let mut score: Vec<f64> = (0..l).map(|j| crf.start[j] + emissions.at(0, j)).collect();
    let mut backptr = vec![vec![0usize; l]; n];
    for t in 1..n {
        let mut next = vec![0.0; l];
        for j in 0..l {
            let mut best = 0;
            let mut best_score = score[0] + crf.trans(0, j);
            for i in 1..l {
                let s = score[i] + crf.trans(i, j);
                if s > best_score {
                    best = i;
                    best_score = s;
                }
            }
            backptr[t][j] = best;
            next[j] = best_score + emissions.at(t, j);
        }
        score = next;
    }
    let mut last = 0;
    let mut best_score = score[0] + crf.stop[0];
    for j in 1..l {
        let s = score[j] + crf.stop[j];
        if s > best_score {
            last = j;
            best_score = s;
        }
    }
    let mut path = vec![0usize; n];
    path[n - 1] = last;
    for t in (1..n).rev() {
        path[t - 1] = backptr[t][path[t]];
    }
    Ok((path, best_score))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::SeededRng;

    struct Owned {
        trans: Vec<f64>,
        start: Vec<f64>,
        stop: Vec<f64>,
    }

    impl Owned {
        fn zeros(l: usize) -> Self {
            Owned {
                trans: vec![0.0; l * l],
                start: vec![0.0; l],
                stop: vec![0.0; l],
            }
        }

        fn random(l: usize, rng: &mut SeededRng) -> Self {
            let mut r = |k| (0..k).map(|_| rng.normal()).collect::<Vec<_>>();
            Owned {
                trans: r(l * l),
                start: r(l),
                stop: r(l),
            }
        }

        fn w(&self) -> CrfWeights<'_> {
            CrfWeights {
                transitions: &self.trans,
                start: &self.start,
                stop: &self.stop,
            }
        }
    }

    fn random_emissions(n: usize, l: usize, rng: &mut SeededRng) -> Tensor {
        Tensor::from_vec(&[n, l], (0..n * l).map(|_| 2.0 * rng.normal()).collect()).unwrap()
    }

    #[test]
    fn zero_params_score_zero_and_uniform_partition() {
        let c = Owned::zeros(3);
        let e = Tensor::zeros(&[4, 3]);
        assert_eq!(sequence_score(&e, &c.w(), &[0, 2, 1, 1]).unwrap(), 0.0);
        let z = log_partition(&e, &c.w()).unwrap();
        assert!((z - 4.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_token_score_and_partition() {
        let mut rng = SeededRng::new(1);
        let c = Owned::random(3, &mut rng);
        let e = random_emissions(1, 3, &mut rng);
        for y in 0..3 {
            let want = c.start[y] + e.at(0, y) + c.stop[y];
            assert_eq!(sequence_score(&e, &c.w(), &[y]).unwrap(), want);
        }
        let terms: Vec<f64> = (0..3).map(|y| c.start[y] + e.at(0, y) + c.stop[y]).collect();
        assert!((log_partition(&e, &c.w()).unwrap() - lse(&terms)).abs() < 1e-12);
    }

    #[test]
    fn score_matches_term_by_term_sum() {
        let mut rng = SeededRng::new(2);
        let c = Owned::random(3, &mut rng);
        let e = random_emissions(3, 3, &mut rng);
        let y = [2, 0, 1];
        let want = c.start[2]
            + e.at(0, 2)
            + c.trans[2 * 3]
            + e.at(1, 0)
            + c.trans[1]
            + e.at(2, 1)
            + c.stop[1];
        assert!((sequence_score(&e, &c.w(), &y).unwrap() - want).abs() < 1e-12);
        assert!(sequence_score(&e, &c.w(), &[0, 1]).is_err());
    }

    #[test]
    fn single_label_tagset_has_zero_loss() {
        let mut rng = SeededRng::new(3);
        let c = Owned::random(1, &mut rng);
        let e = random_emissions(5, 1, &mut rng);
        let (loss, _) = nll_loss(&e, &c.w(), &[0; 5]).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn uniform_two_token_loss() {
        let c = Owned::zeros(3);
        let (loss, _) = nll_loss(&Tensor::zeros(&[2, 3]), &c.w(), &[1, 2]).unwrap();
        assert!((loss - 2.0 * 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn nll_gradient_matches_differences() {
        for seed in 0..10 {
            let mut rng = SeededRng::new(seed);
            let c = Owned::random(3, &mut rng);
            let e = random_emissions(4, 3, &mut rng);
            let gold = [0, 1, 1, 2];
            let (_, g) = nll_loss(&e, &c.w(), &gold).unwrap();
            let eps = 1e-6;
            let loss = |e: &Tensor, c: &Owned| nll_loss(e, &c.w(), &gold).unwrap().0;
            for k in 0..e.len() {
                let mut p = e.clone();
                let mut m = e.clone();
                p.values_mut()[k] += eps;
                m.values_mut()[k] -= eps;
                let num = (loss(&p, &c) - loss(&m, &c)) / (2.0 * eps);
                assert!((num - g.d_emissions.values()[k]).abs() < 1e-7);
            }
            for k in 0..9 {
                let mut p = Owned { trans: c.trans.clone(), start: c.start.clone(), stop: c.stop.clone() };
                let mut m = Owned { trans: c.trans.clone(), start: c.start.clone(), stop: c.stop.clone() };
                p.trans[k] += eps;
                m.trans[k] -= eps;
                let num = (loss(&e, &p) - loss(&e, &m)) / (2.0 * eps);
                assert!((num - g.d_transitions[k]).abs() < 1e-7);
            }
            for k in 0..3 {
                let mut p = Owned { trans: c.trans.clone(), start: c.start.clone(), stop: c.stop.clone() };
                let mut m = Owned { trans: c.trans.clone(), start: c.start.clone(), stop: c.stop.clone() };
                p.start[k] += eps;
                m.start[k] -= eps;
                p.stop[k] += eps;
                m.stop[k] -= eps;
                let num = (loss(&e, &p) - loss(&e, &m)) / (2.0 * eps);
                assert!((num - g.d_start[k] - g.d_stop[k]).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn viterbi_tie_break_and_argmax() {
        let c = Owned::zeros(3);
        let (path, _) = viterbi(&Tensor::zeros(&[4, 3]), &c.w()).unwrap();
        assert_eq!(path, vec![0, 0, 0, 0]);
        let e = Tensor::from_vec(&[3, 3], vec![0.0, 9.0, 0.0, 0.0, 0.0, 9.0, 9.0, 0.0, 0.0]).unwrap();
        assert_eq!(viterbi(&e, &c.w()).unwrap().0, vec![1, 2, 0]);
    }

    #[test]
    fn viterbi_invariant_to_column_shift() {
        let mut rng = SeededRng::new(11);
        let c = Owned::random(3, &mut rng);
        let e = random_emissions(6, 3, &mut rng);
        let base = viterbi(&e, &c.w()).unwrap().0;
        let mut shifted = e.clone();
        for t in 0..6 {
            for j in 0..3 {
                *shifted.at_mut(t, j) += 3.5 * (t as f64 + 1.0);
            }
        }
        assert_eq!(viterbi(&shifted, &c.w()).unwrap().0, base);
    }
}
