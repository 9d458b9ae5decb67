//! Adaptive sampling: draw an initial batch, then keep adding samples while
//! combined consistency stays at or below the upper threshold and the
//! budget allows.

mod http;
mod mock;

pub use http::{HttpBackend, TOKEN_ENV, URL_ENV};
pub use mock::MockBackend;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::consistency::{ConsistencyError, ConsistencyReport};
use crate::trace::{Domain, ReasoningTrace, TraceSet};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("sample {index}: request failed after {attempts} attempts: {message}")]
    Http {
        index: usize,
        attempts: usize,
        message: String,
    },
    #[error("sample {index}: invalid trace in response: {message}")]
    Malformed { index: usize, message: String },
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("invalid sampler configuration: {0}")]
    Config(String),
    #[error("round {round}: {source}")]
    Backend {
        round: usize,
        #[source]
        source: BackendError,
    },
    #[error(transparent)]
    Scoring(#[from] ConsistencyError),
}

/// Source of sampled traces. Implementations must be deterministic for a
/// fixed seed and sample index, and safe to call concurrently.
pub trait GeneratorBackend: Sync {
    fn name(&self) -> &'static str;
    fn generate(&self, query: &str, index: usize) -> Result<ReasoningTrace, BackendError>;
}

/// Independent random stream for one (seed, index) pair.
pub fn sub_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub fn sample_id(index: usize) -> String {
    format!("sample-{index:03}")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplerConfig {
    pub k0: usize,
    pub k_max: usize,
    pub tau_low: f64,
    pub tau_high: f64,
    /// Step rate scaling the number of extra samples per round.
    pub rate: f64,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            k0: 3,
            k_max: 10,
            tau_low: 0.5,
            tau_high: 0.7,
            rate: 1.0,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        let bad = |m: String| Err(SamplerError::Config(m));
        if self.k0 == 0 || self.k0 > self.k_max {
            return bad(format!(
                "need 1 <= k0 <= k_max, got k0={} k_max={}",
                self.k0, self.k_max
            ));
        }
        for (name, v) in [("tau_low", self.tau_low), ("tau_high", self.tau_high)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} = {v} outside [0, 1]"));
            }
        }
        if self.tau_low > self.tau_high {
            return bad(format!("tau_low {} above tau_high {}", self.tau_low, self.tau_high));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return bad(format!("rate must be positive, got {}", self.rate));
        }
        Ok(())
    }
}

/// `max(1, ceil(rate * (tau_low - min(lambda, tau_low)) * k_max))`.
pub fn step_size(lambda_t: f64, cfg: &SamplerConfig) -> usize {
    let gap = cfg.tau_low - lambda_t.min(cfg.tau_low);
    // The tolerance keeps float noise such as 4.000000000000001 from
    // rounding up to an extra sample.
    let raw = (cfg.rate * gap * cfg.k_max as f64 - 1e-9).ceil();
    (raw as usize).max(1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    HighConsistency,
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Round {
    /// Samples accumulated when the round was scored.
    pub t: usize,
    pub lambda: f64,
    /// Samples requested after this round; 0 for the last round.
    pub delta: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplerOutcome {
    pub traces: TraceSet,
    pub rounds: Vec<Round>,
    pub stop_reason: StopReason,
    pub total_samples: usize,
    pub consensus: ReasoningTrace,
    pub report: ConsistencyReport,
}

/// Trace with the highest mean statement score; ties go to the smallest
/// trace id.
pub fn select_consensus<'a>(set: &'a TraceSet, report: &ConsistencyReport) -> &'a ReasoningTrace {
    let mut best = 0;
    for i in 1..set.traces.len() {
        let (a, b) = (report.trace_mean_atomic(i), report.trace_mean_atomic(best));
        if a > b || (a == b && set.traces[i].trace_id < set.traces[best].trace_id) {
            best = i;
        }
    }
    &set.traces[best]
}

fn draw(
    backend: &dyn GeneratorBackend,
    query: &str,
    range: std::ops::Range<usize>,
    round: usize,
) -> Result<Vec<ReasoningTrace>, SamplerError> {
    range
        .into_par_iter()
        .map(|i| {
            let mut t = backend.generate(query, i)?;
            t.trace_id = sample_id(i);
            t.validate().map_err(|e| BackendError::Malformed {
                index: i,
                message: e.to_string(),
            })?;
            Ok(t)
        })
        .collect::<Result<Vec<_>, BackendError>>()
        .map_err(|source| SamplerError::Backend { round, source })
}

pub fn run_adaptive<F>(
    query: &str,
    domain: Domain,
    backend: &dyn GeneratorBackend,
    cfg: &SamplerConfig,
    scorer: F,
) -> Result<SamplerOutcome, SamplerError>
where
    F: Fn(&TraceSet) -> Result<ConsistencyReport, ConsistencyError>,
{
    cfg.validate()?;
    let mut set = TraceSet::new(query, domain, draw(backend, query, 0..cfg.k0, 0)?);
    let mut report = scorer(&set)?;
    let mut rounds = vec![Round {
        t: cfg.k0,
        lambda: report.combined,
        delta: 0,
    }];
    let mut t = cfg.k0;
    while t < cfg.k_max && report.combined <= cfg.tau_high {
        let delta = step_size(report.combined, cfg).min(cfg.k_max - t);
        rounds.last_mut().expect("rounds start non-empty").delta = delta;
        let fresh = draw(backend, query, t..t + delta, rounds.len())?;
        set.traces.extend(fresh);
        t += delta;
        report = scorer(&set)?;
        rounds.push(Round {
            t,
            lambda: report.combined,
            delta: 0,
        });
    }
    let stop_reason = if report.combined > cfg.tau_high {
        StopReason::HighConsistency
    } else {
        StopReason::BudgetExhausted
    };
    let consensus = select_consensus(&set, &report).clone();
    Ok(SamplerOutcome {
        total_samples: set.k(),
        traces: set,
        rounds,
        stop_reason,
        consensus,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::{full_report, ScoringConfig};
    use crate::equivalence::SimilarityProvider;

    fn scorer(set: &TraceSet) -> Result<ConsistencyReport, ConsistencyError> {
        full_report(set, &SimilarityProvider::default(), &ScoringConfig::default())
    }

    fn truth() -> ReasoningTrace {
        ReasoningTrace::chain(
            "truth",
            "12",
            &[
                "let n be four",
                "then n squared is sixteen",
                "sixteen minus four is twelve",
            ],
        )
    }

    #[test]
    fn step_size_examples() {
        let c = |tau_low, k_max| SamplerConfig {
            tau_low,
            k_max,
            tau_high: 0.9,
            ..SamplerConfig::default()
        };
        assert_eq!(step_size(0.4, &c(0.6, 20)), 4);
        assert_eq!(step_size(0.6, &c(0.6, 20)), 1);
        assert_eq!(step_size(0.95, &c(0.6, 20)), 1);
        assert_eq!(step_size(0.0, &c(0.5, 10)), 5);
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig {
            k0: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SamplerConfig {
            k0: 11,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SamplerConfig {
            tau_low: 0.9,
            tau_high: 0.5,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SamplerConfig {
            rate: 0.0,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SamplerConfig::default().validate().is_ok());
    }

    #[test]
    fn identical_samples_stop_after_first_round() {
        let backend = MockBackend::new(truth(), 0.0, 1);
        let cfg = SamplerConfig {
            tau_high: 0.9,
            ..Default::default()
        };
        let out = run_adaptive("q", Domain::Generic, &backend, &cfg, scorer).unwrap();
        assert_eq!(out.total_samples, cfg.k0);
        assert_eq!(out.rounds.len(), 1);
        assert_eq!(out.stop_reason, StopReason::HighConsistency);
        assert_eq!(out.consensus.trace_id, "sample-000");
    }

    #[test]
    fn distinct_samples_exhaust_budget() {
        let backend = MockBackend::new(truth(), 1.0, 1);
        let cfg = SamplerConfig {
            tau_high: 0.99,
            ..Default::default()
        };
        let out = run_adaptive("q", Domain::Generic, &backend, &cfg, scorer).unwrap();
        assert_eq!(out.total_samples, cfg.k_max);
        assert_eq!(out.stop_reason, StopReason::BudgetExhausted);
        assert_eq!(out.rounds.last().unwrap().t, cfg.k_max);
    }

    #[test]
    fn guard_and_budget_respected() {
        for seed in 0..40 {
            let backend = MockBackend::new(truth(), 0.3, seed);
            let cfg = SamplerConfig {
                seed,
                ..Default::default()
            };
            let out = run_adaptive("q", Domain::Generic, &backend, &cfg, scorer).unwrap();
            assert!((cfg.k0..=cfg.k_max).contains(&out.total_samples));
            // Every round but the last must have satisfied the loop guard.
            for w in out.rounds.windows(2) {
                assert!(w[0].lambda <= cfg.tau_high && w[0].t < cfg.k_max);
                assert_eq!(w[0].t + w[0].delta, w[1].t);
            }
            assert_eq!(out.rounds.last().unwrap().delta, 0);
            assert_eq!(out.rounds.last().unwrap().t, out.total_samples);
        }
    }

    #[test]
    fn mock_runs_reproduce() {
        let run = || {
            let backend = MockBackend::new(truth(), 0.25, 42);
            serde_json::to_string(
                &run_adaptive("q", Domain::Generic, &backend, &SamplerConfig::default(), scorer).unwrap(),
            )
            .unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn consensus_rules() {
        let one = TraceSet::new("q", Domain::Generic, vec![truth()]);
        assert_eq!(select_consensus(&one, &scorer(&one).unwrap()).trace_id, "truth");

        let mut traces: Vec<ReasoningTrace> = (0..4)
            .map(|i| ReasoningTrace::chain(&format!("t{i}"), "1", &["alpha", "beta"]))
            .collect();
        traces.insert(0, ReasoningTrace::chain("a-odd", "2", &["gamma", "delta"]));
        let set = TraceSet::new("q", Domain::Generic, traces);
        assert_eq!(select_consensus(&set, &scorer(&set).unwrap()).trace_id, "t0");

        let tie = TraceSet::new(
            "q",
            Domain::Generic,
            vec![
                ReasoningTrace::chain("b", "1", &["alpha"]),
                ReasoningTrace::chain("a", "1", &["alpha"]),
            ],
        );
        assert_eq!(select_consensus(&tie, &scorer(&tie).unwrap()).trace_id, "a");
    }
}
