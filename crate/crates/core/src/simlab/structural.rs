//! Empirical check that higher structural consistency goes with higher
//! accuracy. Trace sets are drawn from the corrupting mock generator at
//! random corruption rates; each set contributes its Ψ and the fraction of
//! its samples with the correct final answer.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::consistency::{full_report, ConsistencyError, ScoringConfig};
use crate::equivalence::SimilarityProvider;
use crate::sampler::{sample_id, sub_rng, GeneratorBackend, MockBackend};
use crate::trace::{Domain, ReasoningTrace, TraceSet};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationResult {
    pub sets: usize,
    pub rho: f64,
    /// One-sided p-value for rho > 0.
    pub p_value: f64,
    /// Mean correctness per Ψ decile, lowest first.
    pub decile_means: Vec<f64>,
    pub satisfied: bool,
}

/// 1-based ranks with ties averaged.
fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &o in &order[i..=j] {
            r[o] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let (rx, ry) = (ranks(xs), ranks(ys));
    let n = rx.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        0.0
    } else {
        cov / (vx * vy).sqrt()
    }
}

fn one_sided_p(rho: f64, n: usize) -> f64 {
    if n < 3 {
        return 1.0;
    }
    if rho >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho)).sqrt();
    1.0 - StudentsT::new(0.0, 1.0, df).expect("positive df").cdf(t)
}

fn truth_chain() -> ReasoningTrace {
    ReasoningTrace::chain(
        "truth",
        "42",
        &[
            "six times seven",
            "six times seven is forty two",
            "so the product is forty two",
            "answer is forty two",
        ],
    )
}

/// Draws `sets` trace sets of `k` samples with corruption uniform in
/// `[0, max_corruption]`.
pub fn structural_correlation(
    sets: usize,
    k: usize,
    max_corruption: f64,
    seed: u64,
) -> Result<CorrelationResult, ConsistencyError> {
    let provider = SimilarityProvider::default();
    let cfg = ScoringConfig::default();
    let points: Vec<(f64, f64)> = (0..sets)
        .into_par_iter()
        .map(|s| {
            let rate = sub_rng(seed, s as u64).random_range(0.0..=max_corruption);
            let backend = MockBackend::new(
                truth_chain(),
                rate,
                seed.wrapping_add(s as u64).wrapping_mul(0x100_0001),
            );
            let traces: Vec<ReasoningTrace> = (0..k)
                .map(|i| {
                    let mut t = backend.generate("q", i).expect("mock never fails");
                    t.trace_id = sample_id(i);
                    t
                })
                .collect();
            let correct = traces.iter().filter(|t| backend.is_correct(&t.final_answer)).count() as f64 / k as f64;
            let set = TraceSet::new("q", Domain::Generic, traces);
            full_report(&set, &provider, &cfg).map(|r| (r.global, correct))
        })
        .collect::<Result<_, _>>()?;

    let psi: Vec<f64> = points.iter().map(|p| p.0).collect();
    let acc: Vec<f64> = points.iter().map(|p| p.1).collect();
    let rho = spearman(&psi, &acc);
    let p_value = one_sided_p(rho, sets);

    let mut order: Vec<usize> = (0..sets).collect();
    order.sort_by(|&a, &b| psi[a].total_cmp(&psi[b]).then(a.cmp(&b)));
    let decile_means = (0..10)
        .filter_map(|d| {
            let bin = &order[d * sets / 10..(d + 1) * sets / 10];
            (!bin.is_empty()).then(|| bin.iter().map(|&i| acc[i]).sum::<f64>() / bin.len() as f64)
        })
        .collect();
    Ok(CorrelationResult {
        sets,
        rho,
        p_value,
        decile_means,
        satisfied: rho > 0.0 && p_value < 0.01,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_examples() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert_eq!(spearman(&[1.0, 1.0], &[1.0, 2.0]), 0.0);
        assert_eq!(ranks(&[5.0, 1.0, 5.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn p_value_examples() {
        assert!((one_sided_p(0.0, 30) - 0.5).abs() < 1e-12);
        assert!(one_sided_p(0.9, 30) < 1e-6);
        assert_eq!(one_sided_p(0.5, 2), 1.0);
    }

    #[test]
    fn structure_tracks_accuracy() {
        let r = structural_correlation(120, 5, 0.6, 3).unwrap();
        assert!(r.satisfied, "{r:?}");
        assert_eq!(r.decile_means.len(), 10);
    }
}
