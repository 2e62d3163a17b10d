use crate::numerics::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Inverted dropout. Returns the per-element multipliers applied (`0` or
/// `1/(1-rate)`), or `None` when the call was the identity.
pub fn dropout(values: &mut [Vec<f64>], rate: f64, mode: Mode, rng: &mut SeededRng) -> Option<Vec<Vec<f64>>> {
    assert!((0.0..1.0).contains(&rate), "dropout rate must be in [0, 1)");
    if mode == Mode::Infer || rate == 0.0 {
        return None;
    }
    let scale = 1.0 / (1.0 - rate);
    let masks = values
        .iter_mut()
        .map(|row| {
            row.iter_mut()
                .map(|v| {
                    let m = if rng.bernoulli(rate) { 0.0 } else { scale };
                    *v *= m;
                    m
                })
                .collect()
        })
        .collect();
    Some(masks)
}
