use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub t: f64,
    pub p_value: f64,
    pub df: f64,
}

/// Two-sided unpaired Student's t-test with pooled variance.
pub fn compare_runs(a: &[f64], b: &[f64]) -> Result<TTest> {
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::usage(format!(
            "t-test needs at least 2 runs per side, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Numeric("non-finite score in t-test input".into()));
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let diff = mean(a) - mean(b);
    let pooled = ((na - 1.0) * sample_sd(a).powi(2) + (nb - 1.0) * sample_sd(b).powi(2)) / df;
    let se = (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    if se == 0.0 {
        return Ok(if diff == 0.0 {
            TTest { t: 0.0, p_value: 1.0, df }
        } else {
            TTest {
                t: diff.signum() * f64::INFINITY,
                p_value: 0.0,
                df,
            }
        });
    }
    let t = diff / se;
    let dist = StudentsT::new(0.0, 1.0, df).map_err(|e| Error::Numeric(e.to_string()))?;
    let p_value = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(TTest { t, p_value, df })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_lists() {
        let r = compare_runs(&[0.9, 0.8, 0.85], &[0.9, 0.8, 0.85]).unwrap();
        assert_eq!((r.t, r.p_value), (0.0, 1.0));
        let r = compare_runs(&[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!((r.t, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn maximal_separation() {
        assert!(compare_runs(&[1.0, 1.0, 1.0], &[0.0, 0.0, 0.0]).unwrap().p_value < 0.01);
    }

    #[test]
    fn three_vs_three_reference_values() {
        // reference values from an independent statistics package
        let r = compare_runs(&[0.041, 0.039, 0.037], &[0.045, 0.040, 0.048]).unwrap();
        assert!((r.t - -2.0485900789263365).abs() < 1e-10);
        assert!((r.p_value - 0.10986605951688352).abs() < 1e-8);
        assert_eq!(r.df, 4.0);
        let r = compare_runs(&[97.8, 97.5, 98.1], &[93.9, 94.6, 93.1]).unwrap();
        assert!((r.t - 8.428571428571415).abs() < 1e-9);
        assert!((r.p_value - 0.001085027294806276).abs() < 1e-9);
    }

    #[test]
    fn closed_form_two_degrees_of_freedom() {
        // with df = 2 the two-sided p is 1 - t / sqrt(t^2 + 2)
        let r = compare_runs(&[1.0, 2.0], &[0.0, 0.5]).unwrap();
        let expected = 1.0 - r.t.abs() / (r.t * r.t + 2.0).sqrt();
        assert!((r.p_value - expected).abs() < 1e-10);
    }

    #[test]
    fn too_few_runs() {
        assert!(compare_runs(&[1.0], &[1.0, 2.0]).is_err());
    }
}
