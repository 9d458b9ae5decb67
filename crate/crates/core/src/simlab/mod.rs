//! Monte Carlo checks of the concentration, propagation and entropy results
//! behind self-consistency.
//!
//! Every trial draws from its own stream derived from the seed and the trial
//! index, so results do not depend on thread count.

mod dag;
mod entropy;
mod structural;

pub use dag::{intermediate_benefit, propagation_bound, simulate_propagation, BenefitResult, Dag, DagSpec};
pub use entropy::{
    entropy_detail, entropy_profile, entropy_reduction_check, EntropyReport, JointDistribution, ENTROPY_TOLERANCE,
};
pub use structural::{spearman, structural_correlation, CorrelationResult};

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;
use statrs::distribution::{Binomial, Discrete, DiscreteCDF};
use thiserror::Error;

use crate::sampler::sub_rng;

pub const Z95: f64 = 1.96;
pub const CONVERGENCE_DELTAS: [f64; 3] = [0.05, 0.1, 0.2];

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("{name} = {value} outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("bound undefined: d * epsilon = {product} >= 1")]
    BoundInvalid { product: f64 },
    #[error("error rate at epsilon' is 0 over {trials} trials; ratio undefined")]
    Degenerate { trials: usize },
    #[error("invalid DAG descriptor {0:?}")]
    Dag(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimSpec {
    pub tau: f64,
    pub epsilon: f64,
    pub k: usize,
    pub trials: usize,
    pub dag: DagSpec,
    pub delta_target: f64,
    pub seed: u64,
}

impl Default for SimSpec {
    fn default() -> Self {
        SimSpec {
            tau: 0.2,
            epsilon: 0.1,
            k: 5,
            trials: 10_000,
            dag: DagSpec::Chain(5),
            delta_target: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    pub empirical: f64,
    pub theoretical_bound: f64,
    /// `empirical <= theoretical_bound + ci_halfwidth`.
    pub satisfied: bool,
    pub ci_halfwidth: f64,
    pub trials: usize,
    /// Closed-form probability of the simulated event, when known.
    pub exact: Option<f64>,
}

impl SimResult {
    pub fn new(empirical: f64, bound: f64, trials: usize, exact: Option<f64>) -> Self {
        let ci = ci_halfwidth(empirical, trials);
        SimResult {
            empirical,
            theoretical_bound: bound,
            satisfied: empirical <= bound + ci,
            ci_halfwidth: ci,
            trials,
            exact,
        }
    }

    /// True if the closed form lies inside the empirical confidence interval.
    pub fn exact_within_ci(&self) -> Option<bool> {
        self.exact.map(|e| (self.empirical - e).abs() <= self.ci_halfwidth)
    }
}

/// 95% normal-approximation half-width for a proportion.
pub fn ci_halfwidth(p: f64, n: usize) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    Z95 * (p * (1.0 - p) / n as f64).sqrt()
}

fn check(name: &'static str, value: f64, ok: bool, expected: &'static str) -> Result<(), SimError> {
    if ok {
        Ok(())
    } else {
        Err(SimError::Domain { name, value, expected })
    }
}

/// `exp(-k (1 - 2 tau)^2 / 2)`.
pub fn bound_error(tau: f64, k: usize) -> Result<f64, SimError> {
    check("tau", tau, (0.0..0.5).contains(&tau), "[0, 0.5)")?;
    Ok((-(k as f64) * (1.0 - 2.0 * tau).powi(2) / 2.0).exp())
}

/// Majority-vote bound with correct/incorrect generation probabilities.
pub fn binary_correctness_bound(p_correct: f64, k: usize) -> Result<f64, SimError> {
    check("p_c", p_correct, p_correct > 0.5 && p_correct <= 1.0, "(0.5, 1]")?;
    let p_incorrect = 1.0 - p_correct;
    Ok((-(k as f64) * (p_correct - p_incorrect).powi(2) / 2.0).exp())
}

/// `2 ln(1/delta) / (1 - 2 tau)^2`.
pub fn sample_complexity(tau: f64, delta: f64) -> Result<f64, SimError> {
    check("tau", tau, (0.0..0.5).contains(&tau), "[0, 0.5)")?;
    check("delta", delta, delta > 0.0 && delta <= 1.0, "(0, 1]")?;
    Ok(2.0 * (1.0 / delta).ln() / (1.0 - 2.0 * tau).powi(2))
}

/// Probability that at most half of k Bernoulli(p) draws succeed.
pub fn exact_majority_error(p_correct: f64, k: usize) -> f64 {
    if k == 0 {
        return 1.0;
    }
    Binomial::new(p_correct, k as u64)
        .expect("valid binomial")
        .cdf((k / 2) as u64)
}

fn count_trials<F>(trials: usize, seed: u64, event: F) -> usize
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> bool + Sync,
{
    (0..trials)
        .into_par_iter()
        .filter(|&i| event(&mut sub_rng(seed, i as u64)))
        .count()
}

/// Fraction of trials in which the majority of k samples is wrong, each
/// sample being correct with probability `1 - tau`.
pub fn simulate_majority(spec: &SimSpec) -> Result<SimResult, SimError> {
    let bound = bound_error(spec.tau, spec.k)?;
    let p = 1.0 - spec.tau;
    let k = spec.k;
    let wrong = count_trials(spec.trials, spec.seed, |rng| {
        let correct = (0..k).filter(|_| rng.random_bool(p)).count();
        2 * correct <= k
    });
    Ok(SimResult::new(
        wrong as f64 / spec.trials as f64,
        bound,
        spec.trials,
        Some(exact_majority_error(p, k)),
    ))
}

/// Fraction of trials where the k-sample frequency of a statement with true
/// factuality `truth` deviates from it by more than `delta`.
pub fn convergence_check(spec: &SimSpec, truth: f64, delta: f64) -> Result<SimResult, SimError> {
    check("truth", truth, (0.0..=1.0).contains(&truth), "[0, 1]")?;
    check("delta", delta, delta > 0.0, "(0, inf)")?;
    let k = spec.k;
    check("k", k as f64, k >= 1, "k >= 1")?;
    // Compared on the count scale with a small slack so that a frequency
    // exactly delta away (e.g. 160/200 against 0.7) is not counted.
    let deviates = |i: usize| (i as f64 - truth * k as f64).abs() > delta * k as f64 + 1e-9;
    let hits = count_trials(spec.trials, spec.seed, |rng| {
        deviates((0..k).filter(|_| rng.random_bool(truth)).count())
    });
    let bin = Binomial::new(truth, k as u64).expect("valid binomial");
    let exact: f64 = (0..=k).filter(|&i| deviates(i)).map(|i| bin.pmf(i as u64)).sum();
    Ok(SimResult::new(
        hits as f64 / spec.trials as f64,
        2.0 * (-2.0 * k as f64 * delta * delta).exp(),
        spec.trials,
        Some(exact),
    ))
}
