//! Dispersion-based consistency for numeric answers.

use serde::Serialize;
use thiserror::Error;

use crate::trace::TraceSet;

pub const DEFAULT_REL_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum NumericError {
    #[error("empty numeric sample")]
    EmptySample,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NumericSample {
    pub values: Vec<f64>,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub score: f64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn variance(values: &[f64]) -> f64 {
    let m = mean(values);
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

/// `clamp(1 - σ/|μ|)`. All-equal samples score 1; a zero mean with spread
/// scores 0.
pub fn sc_numerical(values: &[f64]) -> Result<NumericSample, NumericError> {
    if values.is_empty() {
        return Err(NumericError::EmptySample);
    }
    let mu = mean(values);
    let all_equal = values.iter().all(|v| *v == values[0]);
    let sigma = if all_equal { 0.0 } else { variance(values).sqrt() };
    let score = if all_equal {
        1.0
    } else if mu.abs() < 1e-12 {
        0.0
    } else {
        (1.0 - sigma / mu.abs()).clamp(0.0, 1.0)
    };
    Ok(NumericSample {
        values: values.to_vec(),
        mean: mu,
        std: sigma,
        score,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VarianceReduction {
    pub value: f64,
    pub warning: Option<String>,
}

/// `1 - var(after)/var(before)`; zero with a warning when `before` has no
/// variance.
pub fn variance_reduction(before: &[f64], after: &[f64]) -> Result<VarianceReduction, NumericError> {
    if before.is_empty() || after.is_empty() {
        return Err(NumericError::EmptySample);
    }
    let vb = variance(before);
    if vb == 0.0 {
        return Ok(VarianceReduction {
            value: 0.0,
            warning: Some("baseline variance is zero; reduction reported as 0".into()),
        });
    }
    Ok(VarianceReduction {
        value: 1.0 - variance(after) / vb,
        warning: None,
    })
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Fraction of values within `rel_tol * |median|` of the median (absolute
/// tolerance when the median is zero).
pub fn threshold_consistency(values: &[f64], rel_tol: f64) -> Result<f64, NumericError> {
    if values.is_empty() {
        return Err(NumericError::EmptySample);
    }
    let m = median(values);
    let tol = if m == 0.0 { rel_tol } else { rel_tol * m.abs() };
    let within = values.iter().filter(|v| (*v - m).abs() <= tol).count();
    Ok(within as f64 / values.len() as f64)
}

/// Numeric final answers of a trace set; traces whose answer does not parse
/// as a number are listed separately.
pub fn answer_values(set: &TraceSet) -> (Vec<f64>, Vec<String>) {
    let mut values = Vec::new();
    let mut skipped = Vec::new();
    for t in &set.traces {
        match t.final_answer.trim().parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => skipped.push(t.trace_id.clone()),
        }
    }
    (values, skipped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn examples() {
        assert_eq!(sc_numerical(&[2.0, 2.0, 2.0]).unwrap().score, 1.0);
        let s = sc_numerical(&[1.0, 3.0]).unwrap();
        assert_eq!((s.mean, s.std, s.score), (2.0, 1.0, 0.5));
        assert_eq!(sc_numerical(&[-1.0, 1.0]).unwrap().score, 0.0);
        assert_eq!(sc_numerical(&[0.0, 0.0]).unwrap().score, 1.0);
        assert_eq!(sc_numerical(&[7.0]).unwrap().score, 1.0);
        assert_eq!(sc_numerical(&[]), Err(NumericError::EmptySample));
        // Wide spread clamps at zero instead of going negative.
        assert_eq!(sc_numerical(&[-1.0, 3.0]).unwrap().score, 0.0);
    }

    #[test]
    fn variance_reduction_examples() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(variance_reduction(&a, &a).unwrap().value, 0.0);
        assert_eq!(variance_reduction(&a, &[5.0, 5.0]).unwrap().value, 1.0);
        // var {0, 4} = 4, var {0, 2·√2} = 2.
        let v = variance_reduction(&[0.0, 4.0], &[0.0, 2.0 * 2f64.sqrt()]).unwrap();
        assert!((v.value - 0.5).abs() < 1e-12);
        let z = variance_reduction(&[3.0, 3.0], &[1.0, 2.0]).unwrap();
        assert_eq!(z.value, 0.0);
        assert!(z.warning.is_some());
        assert!(variance_reduction(&[1.0, 2.0], &[0.0, 10.0]).unwrap().value < 0.0);
        assert!(variance_reduction(&[], &[1.0]).is_err());
    }

    #[test]
    fn threshold_examples() {
        assert_eq!(
            threshold_consistency(&[10.0, 10.0, 10.000001, 11.0], 1e-6).unwrap(),
            0.75
        );
        assert_eq!(threshold_consistency(&[0.0, 0.0, 1.0], 1e-6).unwrap(), 2.0 / 3.0);
        assert!(threshold_consistency(&[], 1e-6).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 256, rng_seed: proptest::test_runner::RngSeed::Fixed(9), ..ProptestConfig::default() })]

        #[test]
        fn bounded(v in prop::collection::vec(-1e6f64..1e6, 1..20)) {
            let s = sc_numerical(&v).unwrap();
            prop_assert!((0.0..=1.0).contains(&s.score));
            prop_assert!(s.std >= 0.0);
        }

        #[test]
        fn scale_invariant(v in prop::collection::vec(0.5f64..100.0, 2..12), c in prop::sample::select(vec![0.5f64, 2.0, 4.0, 8.0])) {
            // Powers of two keep the arithmetic exact.
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let a = sc_numerical(&v).unwrap().score;
            let b = sc_numerical(&scaled).unwrap().score;
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn translation_raises_score(v in prop::collection::vec(-10.0f64..10.0, 2..12), shift in 100.0f64..1000.0) {
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            let further: Vec<f64> = v.iter().map(|x| x + 10.0 * shift).collect();
            let (a, b, c) = (
                sc_numerical(&v).unwrap().score,
                sc_numerical(&shifted).unwrap().score,
                sc_numerical(&further).unwrap().score,
            );
            prop_assert!(b >= a - 1e-12);
            prop_assert!(c >= b - 1e-12);
        }
    }
}
