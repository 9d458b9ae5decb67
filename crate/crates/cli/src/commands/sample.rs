use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use scv_core::consistency::{full_report, ConsistencyReport};
use scv_core::equivalence::SimilarityProvider;
use scv_core::sampler::{run_adaptive, GeneratorBackend, HttpBackend, MockBackend, Round, SamplerConfig, StopReason};
use scv_core::trace::{parse_trace, parse_trace_set_with, Domain, ParseMode, ReasoningTrace};

use crate::error::{CliResult, Fail};
use crate::output::{num, read_file};
use crate::{check_unit, Context, ScoringArgs};

/// Corruption rate per difficulty level in a sweep.
pub const SWEEP_LEVELS: [(&str, f64); 3] = [("easy", 0.05), ("medium", 0.15), ("hard", 0.30)];
pub const DEFAULT_QUERY: &str = "let n be four; what is n squared minus n?";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BackendKind {
    Mock,
    Http,
}

impl std::str::FromStr for BackendKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mock" => Ok(BackendKind::Mock),
            "http" => Ok(BackendKind::Http),
            other => Err(format!("unknown backend {other:?} (mock, http)")),
        }
    }
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// mock or http (http reads SCV_GEN_URL and SCV_GEN_TOKEN).
    #[arg(long, env = "SCV_BACKEND")]
    backend: Option<BackendKind>,
    /// Ground-truth trace for the mock backend (a trace object or a trace
    /// set, whose first trace is used). A built-in three-step chain otherwise.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Per-statement corruption rate of the mock backend.
    #[arg(long, env = "SCV_CORRUPTION")]
    corruption: Option<f64>,
    #[arg(long)]
    query: Option<String>,
    #[arg(long, env = "SCV_K0")]
    k0: Option<usize>,
    #[arg(long, env = "SCV_K_MAX")]
    k_max: Option<usize>,
    #[arg(long, env = "SCV_TAU_LOW")]
    tau_low: Option<f64>,
    #[arg(long, env = "SCV_TAU_HIGH")]
    tau_high: Option<f64>,
    #[arg(long, env = "SCV_RATE")]
    rate: Option<f64>,
    /// Run the mock backend at easy/medium/hard corruption and write sweep.csv.
    #[arg(long)]
    sweep: bool,
    /// Runs per difficulty level in a sweep.
    #[arg(long, env = "SCV_RUNS")]
    runs: Option<usize>,
    #[command(flatten)]
    scoring: ScoringArgs,
}

pub fn default_truth() -> ReasoningTrace {
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

fn load_truth(path: &Option<PathBuf>) -> CliResult<ReasoningTrace> {
    let Some(p) = path else {
        return Ok(default_truth());
    };
    let bytes = read_file(p)?;
    match parse_trace(&bytes, ParseMode::Strict) {
        Ok(t) => Ok(t),
        Err(single) => match parse_trace_set_with(&bytes, ParseMode::Strict) {
            Ok(set) => Ok(set.traces.into_iter().next().expect("validated sets are non-empty")),
            Err(_) => Err(single.into()),
        },
    }
}

#[derive(Debug, Serialize)]
struct SampleSummary<'a> {
    backend: &'static str,
    seed: u64,
    config: &'a SamplerConfig,
    rounds: &'a [Round],
    stop_reason: StopReason,
    total_samples: usize,
    consensus: &'a str,
    consensus_answer: &'a str,
    report: &'a ConsistencyReport,
}

#[derive(Debug, Serialize)]
pub struct SweepRow {
    pub difficulty: &'static str,
    pub corruption: f64,
    pub runs: usize,
    pub mean_samples: f64,
    pub mean_lambda: f64,
    /// Fraction of runs whose consensus answer is correct.
    pub accuracy: f64,
    /// Fraction of runs stopped by the consistency threshold.
    pub early_stop: f64,
}

pub const SWEEP_HEADER: [&str; 7] = [
    "difficulty",
    "corruption",
    "runs",
    "mean_samples",
    "mean_lambda",
    "accuracy",
    "early_stop",
];

impl SweepRow {
    pub fn record(&self) -> Vec<String> {
        vec![
            self.difficulty.into(),
            num(self.corruption),
            self.runs.to_string(),
            num(self.mean_samples),
            num(self.mean_lambda),
            num(self.accuracy),
            num(self.early_stop),
        ]
    }
}

/// Mock-backend runs at each difficulty level; run `r` uses seed `seed + r`
/// at every level.
pub fn sweep(
    truth: &ReasoningTrace,
    query: &str,
    base: &SamplerConfig,
    runs: usize,
    provider: &SimilarityProvider,
    scoring: &scv_core::consistency::ScoringConfig,
) -> CliResult<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (difficulty, corruption) in SWEEP_LEVELS {
        let (mut samples, mut lambda, mut correct, mut early) = (0usize, 0.0, 0usize, 0usize);
        for r in 0..runs {
            let seed = base.seed.wrapping_add(r as u64);
            let backend = MockBackend::new(truth.clone(), corruption, seed);
            let cfg = SamplerConfig { seed, ..*base };
            let out = run_adaptive(query, Domain::Generic, &backend, &cfg, |s| {
                full_report(s, provider, scoring)
            })?;
            samples += out.total_samples;
            lambda += out.report.combined;
            correct += usize::from(backend.is_correct(&out.consensus.final_answer));
            early += usize::from(out.stop_reason == StopReason::HighConsistency);
        }
        let n = runs as f64;
        rows.push(SweepRow {
            difficulty,
            corruption,
            runs,
            mean_samples: samples as f64 / n,
            mean_lambda: lambda / n,
            accuracy: correct as f64 / n,
            early_stop: early as f64 / n,
        });
    }
    Ok(rows)
}

pub fn run(ctx: &Context, a: &SampleArgs) -> CliResult<()> {
    let (provider, scoring) = ctx.scoring(&a.scoring)?;
    let c = &ctx.config;
    let d = SamplerConfig::default();
    let cfg = SamplerConfig {
        k0: c.pick(a.k0, "k0", d.k0)?,
        k_max: c.pick(a.k_max, "k-max", d.k_max)?,
        tau_low: c.pick(a.tau_low, "tau-low", d.tau_low)?,
        tau_high: c.pick(a.tau_high, "tau-high", d.tau_high)?,
        rate: c.pick(a.rate, "rate", d.rate)?,
        seed: ctx.seed,
    };
    cfg.validate()?;
    let backend_kind = c.pick(a.backend, "backend", BackendKind::Mock)?;
    let query = a.query.clone().unwrap_or_else(|| DEFAULT_QUERY.to_string());

    if a.sweep {
        if backend_kind != BackendKind::Mock {
            return Err(Fail::invalid("--sweep needs the mock backend"));
        }
        let runs = c.pick(a.runs, "runs", 20)?;
        if runs == 0 {
            return Err(Fail::invalid("--runs must be at least 1"));
        }
        let rows = sweep(&load_truth(&a.truth)?, &query, &cfg, runs, &provider, &scoring)?;
        ctx.output.json("sweep.json", &rows)?;
        let records: Vec<Vec<String>> = rows.iter().map(SweepRow::record).collect();
        return ctx.output.csv("sweep.csv", &SWEEP_HEADER, &records);
    }

    let backend: Box<dyn GeneratorBackend> = match backend_kind {
        BackendKind::Mock => {
            let corruption = check_unit("corruption", c.pick(a.corruption, "corruption", 0.1)?)?;
            Box::new(MockBackend::new(load_truth(&a.truth)?, corruption, ctx.seed))
        }
        BackendKind::Http => Box::new(
            HttpBackend::from_env(ctx.seed)
                .ok_or_else(|| Fail::invalid(format!("{} is not set", scv_core::sampler::URL_ENV)))?,
        ),
    };
    let out = run_adaptive(&query, Domain::Generic, backend.as_ref(), &cfg, |s| {
        full_report(s, &provider, &scoring)
    })?;
    let mut doc = out.traces.to_json();
    doc.push('\n');
    ctx.output.write_text("samples.json", &doc)?;
    ctx.output.json(
        "sample.json",
        &SampleSummary {
            backend: backend.name(),
            seed: ctx.seed,
            config: &cfg,
            rounds: &out.rounds,
            stop_reason: out.stop_reason,
            total_samples: out.total_samples,
            consensus: &out.consensus.trace_id,
            consensus_answer: &out.consensus.final_answer,
            report: &out.report,
        },
    )?;
    let rows: Vec<Vec<String>> = out
        .rounds
        .iter()
        .enumerate()
        .map(|(i, r)| vec![i.to_string(), r.t.to_string(), num(r.lambda), r.delta.to_string()])
        .collect();
    ctx.output.csv("sample.csv", &["round", "t", "lambda", "delta"], &rows)
}
