use crate::features::RawToken;

/// `(x_i - x_{i-1}, y_i - y_{i-1})` per token, `(0, 0)` for the first.
pub fn distance_vectors(tokens: &[RawToken]) -> Vec<[f64; 2]> {
    scaled_distance_vectors(tokens, 1.0)
}

/// Distance vectors divided by `divisor`.
pub fn scaled_distance_vectors(tokens: &[RawToken], divisor: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(tokens.len());
    for (i, t) in tokens.iter().enumerate() {
        if i == 0 {
            out.push([0.0, 0.0]);
        } else {
            let p = &tokens[i - 1];
            out.push([
                (f64::from(t.x) - f64::from(p.x)) / divisor,
                (f64::from(t.y) - f64::from(p.y)) / divisor,
            ]);
        }
    }
    out
}
