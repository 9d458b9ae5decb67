use std::path::PathBuf;

use clap::Args;
use serde::Serialize;

use scv_core::repair::{repair_in_set, Replacement, DEFAULT_REPAIR_THRESHOLD};

use super::load_set;
use crate::error::CliResult;
use crate::output::num;
use crate::{check_unit, Context, ScoringArgs};

#[derive(Args, Debug)]
pub struct RepairArgs {
    #[arg(long)]
    traces: PathBuf,
    /// trace_id of the trace to repair.
    #[arg(long)]
    target: String,
    /// Statements whose class scores below this are repaired.
    #[arg(long, env = "SCV_THRESHOLD")]
    threshold: Option<f64>,
    #[arg(long)]
    lenient: bool,
    #[command(flatten)]
    scoring: ScoringArgs,
}

#[derive(Serialize)]
struct RepairSummary<'a> {
    target: &'a str,
    threshold: f64,
    replaced: &'a [Replacement],
    removed: &'a [String],
    before_mean: f64,
    after_mean: f64,
}

pub fn run(ctx: &Context, a: &RepairArgs) -> CliResult<()> {
    let (provider, cfg) = ctx.scoring(&a.scoring)?;
    let threshold = check_unit(
        "threshold",
        ctx.config.pick(a.threshold, "threshold", DEFAULT_REPAIR_THRESHOLD)?,
    )?;
    let set = load_set(&a.traces, a.lenient)?;
    let out = repair_in_set(&a.target, &set, &provider, &cfg, threshold)?;
    let mut doc = out.set.to_json();
    doc.push('\n');
    ctx.output.write_text("repaired.json", &doc)?;
    ctx.output.json(
        "repair.json",
        &RepairSummary {
            target: &a.target,
            threshold,
            replaced: &out.plan.replaced,
            removed: &out.plan.removed,
            before_mean: out.before_mean,
            after_mean: out.after_mean,
        },
    )?;
    let mut rows: Vec<Vec<String>> = out
        .plan
        .replaced
        .iter()
        .map(|r| {
            vec![
                "replace".into(),
                r.statement.clone(),
                r.old_text.clone(),
                r.new_text.clone(),
            ]
        })
        .collect();
    let text_of = |id: &str| {
        set.trace(&a.target)
            .and_then(|t| t.statement(id))
            .map(|s| s.text.clone())
            .unwrap_or_default()
    };
    rows.extend(
        out.plan
            .removed
            .iter()
            .map(|id| vec!["remove".into(), id.clone(), text_of(id), String::new()]),
    );
    rows.push(vec![
        "score".into(),
        "before_mean".into(),
        num(out.before_mean),
        String::new(),
    ]);
    rows.push(vec![
        "score".into(),
        "after_mean".into(),
        num(out.after_mean),
        String::new(),
    ]);
    ctx.output
        .csv("repair.csv", &["action", "statement", "old", "new"], &rows)
}
