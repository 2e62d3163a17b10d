use crate::numerics::{ParamId, ParamSet, SeededRng};

/// Outcome of a finite-difference gradient check.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub worst_analytic: f64,
    pub worst_numeric: f64,
    pub coordinates_checked: usize,
}

/// Relative error with denominator `max(|a|, |n|, 1e-7)`. The floor keeps
/// rounding noise in central differences (about 1e-12 for O(1) losses)
/// from reading as error on coordinates whose true gradient is zero.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(1e-7);
    (analytic - numeric).abs() / denom
}

/// Compares analytic gradients against central differences on every
/// coordinate of `params`.
///
/// `loss_fn` must return the loss and add its analytic gradient into the
/// parameters' `grad` accumulators; the checker zeroes them before the
/// analytic pass and leaves them zeroed afterwards. `loss_fn` must be
/// deterministic.
pub fn gradient_check<F>(params: &mut ParamSet, eps: f64, loss_fn: F) -> GradCheckReport
where
    F: FnMut(&mut ParamSet) -> f64,
{
    let coords: Vec<Vec<usize>> = params.iter().map(|p| (0..p.value.len()).collect()).collect();
    check_coordinates(params, eps, &coords, loss_fn)
}

/// Like [`gradient_check`], but checks at most `per_param` randomly chosen
/// coordinates of each parameter.
pub fn gradient_check_sampled<F>(
    params: &mut ParamSet,
    eps: f64,
    per_param: usize,
    rng: &mut SeededRng,
    loss_fn: F,
) -> GradCheckReport
where
    F: FnMut(&mut ParamSet) -> f64,
{
    let coords: Vec<Vec<usize>> = params
        .iter()
        .map(|p| {
            let mut all: Vec<usize> = (0..p.value.len()).collect();
            rng.shuffle(&mut all);
            all.truncate(per_param);
            all.sort_unstable();
            all
        })
        .collect();
    check_coordinates(params, eps, &coords, loss_fn)
}

fn check_coordinates<F>(
    params: &mut ParamSet,
    eps: f64,
    coords: &[Vec<usize>],
    mut loss_fn: F,
) -> GradCheckReport
where
    F: FnMut(&mut ParamSet) -> f64,
{
    params.zero_grad();
    loss_fn(params);
    let analytic: Vec<Vec<f64>> = params.iter().map(|p| p.grad.values().to_vec()).collect();
    params.zero_grad();

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        worst_analytic: 0.0,
        worst_numeric: 0.0,
        coordinates_checked: 0,
    };
    for pi in 0..params.len() {
        let id = ParamId(pi);
        for &ci in &coords[pi] {
            let original = params.get(id).value.values()[ci];
            params.get_mut(id).value.values_mut()[ci] = original + eps;
            let plus = loss_fn(params);
            params.get_mut(id).value.values_mut()[ci] = original - eps;
            let minus = loss_fn(params);
            params.get_mut(id).value.values_mut()[ci] = original;

            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[pi][ci];
            let err = relative_error(a, numeric);
            report.coordinates_checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((params.get(id).name.clone(), ci));
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    params.zero_grad();
    report
}
