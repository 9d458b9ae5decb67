use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use scv_core::consistency::{full_report, ConsistencyReport};
use scv_core::numeric::{answer_values, sc_numerical, threshold_consistency, NumericSample, DEFAULT_REL_TOL};
use scv_core::symbolic::{sc_symbolic, EquivConfig, SymbolicScore};
use scv_core::theorem::{sc_theorem, TheoremScore, DEFAULT_BETA};
use scv_core::trace::{Domain, TraceSet};

use super::load_set;
use crate::error::{CliResult, Fail};
use crate::output::num;
use crate::{check_unit, Context, ScoringArgs};

pub const DEFAULT_LAMBDA: f64 = 0.5;

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Trace-set document (JSON).
    #[arg(long)]
    traces: PathBuf,
    /// Ignore unknown fields instead of rejecting them.
    #[arg(long)]
    lenient: bool,
    #[command(flatten)]
    scoring: ScoringArgs,
    /// Weight of proof structure against soundness (theorem sets).
    #[arg(long, env = "SCV_BETA")]
    beta: Option<f64>,
    /// Weight of tree similarity against algebraic equivalence (symbolic sets).
    #[arg(long, env = "SCV_LAMBDA")]
    lambda: Option<f64>,
    /// Relative tolerance for threshold consistency (numeric sets).
    #[arg(long, env = "SCV_NUMERIC_REL_TOL")]
    numeric_rel_tol: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct NumericBlock {
    pub sample: NumericSample,
    pub threshold_consistency: f64,
    pub rel_tol: f64,
    /// Traces whose final answer is not a number.
    pub skipped: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct VerifyOutput {
    pub query: String,
    pub domain: Domain,
    pub consistency: ConsistencyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theorem: Option<TheoremScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub symbolic: Option<SymbolicScore>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numeric: Option<NumericBlock>,
    pub warnings: Vec<String>,
}

pub struct DomainParams {
    pub beta: f64,
    pub lambda: f64,
    pub rel_tol: f64,
    pub seed: u64,
}

pub fn domain_scores(
    set: &TraceSet,
    consistency: ConsistencyReport,
    provider: &scv_core::equivalence::SimilarityProvider,
    iso: &scv_core::iso::IsoConfig,
    p: &DomainParams,
) -> CliResult<VerifyOutput> {
    let mut out = VerifyOutput {
        query: set.query.clone(),
        domain: set.domain,
        consistency,
        theorem: None,
        symbolic: None,
        numeric: None,
        warnings: Vec::new(),
    };
    match set.domain {
        Domain::Theorem => out.theorem = Some(sc_theorem(set, p.beta, provider, iso)?),
        Domain::Symbolic => {
            let cfg = EquivConfig {
                seed: p.seed,
                ..EquivConfig::default()
            };
            match sc_symbolic(set, p.lambda, &cfg) {
                Ok(s) => out.symbolic = Some(s),
                Err(e @ scv_core::symbolic::SymbolicError::Domain { .. }) => {
                    return Err(Fail::invalid(format!("domain error: {e}")))
                }
                Err(e) => out.warnings.push(format!("symbolic score unavailable: {e}")),
            }
        }
        Domain::Numeric => {
            let (values, skipped) = answer_values(set);
            match sc_numerical(&values) {
                Ok(sample) => {
                    out.numeric = Some(NumericBlock {
                        threshold_consistency: threshold_consistency(&values, p.rel_tol).map_err(Fail::internal)?,
                        sample,
                        rel_tol: p.rel_tol,
                        skipped,
                    })
                }
                Err(e) => out.warnings.push(format!("numeric score unavailable: {e}")),
            }
        }
        Domain::Generic => {}
    }
    for w in out.consistency.warnings.iter().chain(&out.warnings) {
        log::warn!("{w}");
    }
    Ok(out)
}

fn row(level: &str, key: &str, score: f64, flagged: bool) -> Vec<String> {
    vec![level.into(), key.into(), num(score), flagged.to_string()]
}

pub const CSV_HEADER: [&str; 4] = ["level", "key", "score", "flagged"];

/// One row per statement class, edge, global score and domain score.
pub fn report_rows(o: &VerifyOutput) -> Vec<Vec<String>> {
    let r = &o.consistency;
    let thr = r.flag_threshold;
    let mut rows: Vec<Vec<String>> = r
        .per_statement
        .iter()
        .map(|s| row("statement", &s.key, s.score, s.flagged))
        .collect();
    rows.extend(r.per_edge.iter().map(|e| row("edge", &e.key, e.score, e.score < thr)));
    rows.push(row("global", "psi", r.global, r.global < thr));
    rows.push(row("global", "phi", r.entropy, r.entropy < thr));
    rows.push(row("global", "lambda", r.combined, r.combined < thr));
    if let Some(t) = &o.theorem {
        rows.push(row("theorem", "sc_proof", t.sc_proof, t.sc_proof < thr));
        rows.push(row("theorem", "soundness", t.soundness, t.soundness < thr));
        rows.push(row("theorem", "sc_theorem", t.combined, t.combined < thr));
        rows.extend(t.per_trace.iter().map(|(id, s)| row("proof", id, *s, *s < thr)));
    }
    if let Some(s) = &o.symbolic {
        rows.push(row(
            "symbolic",
            "tree_similarity",
            s.tree_similarity,
            s.tree_similarity < thr,
        ));
        rows.push(row(
            "symbolic",
            "algebraic_equivalence",
            s.algebraic_equivalence,
            s.algebraic_equivalence < thr,
        ));
        rows.push(row("symbolic", "sc_symbolic", s.combined, s.combined < thr));
    }
    if let Some(n) = &o.numeric {
        rows.push(row("numeric", "sc_numerical", n.sample.score, n.sample.score < thr));
        rows.push(row(
            "numeric",
            "threshold_consistency",
            n.threshold_consistency,
            n.threshold_consistency < thr,
        ));
    }
    rows
}

pub fn run(ctx: &Context, a: &VerifyArgs) -> CliResult<()> {
    let (provider, cfg) = ctx.scoring(&a.scoring)?;
    let c = &ctx.config;
    let params = DomainParams {
        beta: check_unit("beta", c.pick(a.beta, "beta", DEFAULT_BETA)?)?,
        lambda: check_unit("lambda", c.pick(a.lambda, "lambda", DEFAULT_LAMBDA)?)?,
        rel_tol: c.pick(a.numeric_rel_tol, "numeric-rel-tol", DEFAULT_REL_TOL)?,
        seed: ctx.seed,
    };
    if !(params.rel_tol >= 0.0 && params.rel_tol.is_finite()) {
        return Err(Fail::invalid(format!(
            "domain error: numeric-rel-tol = {} must be non-negative",
            params.rel_tol
        )));
    }
    let set = load_set(&a.traces, a.lenient)?;
    let report = full_report(&set, &provider, &cfg)?;
    let out = domain_scores(&set, report, &provider, &cfg.iso, &params)?;
    ctx.output.json("report.json", &out)?;
    ctx.output.csv("report.csv", &CSV_HEADER, &report_rows(&out))?;
    Ok(())
}
