//! Repair of a selected trace using material from the rest of the sample set.
//!
//! Every statement whose class scores below the threshold is replaced, in
//! place, by the representative of a well-supported class the trace does not
//! already contain. Candidates are ranked by how many of the statement's
//! neighbours they are connected to elsewhere, then by textual similarity,
//! then by score. A statement with no candidate is removed and its parents
//! are wired directly to its children.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;
use thiserror::Error;

use crate::consistency::{full_report, ConsistencyError, ConsistencyReport, ScoringConfig};
use crate::equivalence::{jaccard, SimilarityProvider};
use crate::trace::{build_graph, Edge, ReasoningTrace, TraceError, TraceSet};

pub const DEFAULT_REPAIR_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum RepairError {
    #[error("trace {0:?} is not in the set")]
    UnknownTarget(String),
    #[error("threshold {0} outside [0, 1]")]
    Threshold(f64),
    #[error("trace {0:?} cannot be repaired: no statement would remain")]
    Irreparable(String),
    #[error("repaired trace is invalid: {0}")]
    Invalid(#[from] TraceError),
    #[error(transparent)]
    Scoring(#[from] ConsistencyError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Replacement {
    pub statement: String,
    pub old_text: String,
    pub new_text: String,
    /// Key of the class the new text comes from.
    pub class: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairPlan {
    pub trace: ReasoningTrace,
    pub replaced: Vec<Replacement>,
    pub removed: Vec<String>,
}

impl RepairPlan {
    pub fn is_unchanged(&self) -> bool {
        self.replaced.is_empty() && self.removed.is_empty()
    }
}

/// Repairs `target_id` against the alignment and scores in `report`, which
/// must have been computed for `set`.
pub fn repair_trace(
    target_id: &str,
    set: &TraceSet,
    report: &ConsistencyReport,
    threshold: f64,
) -> Result<RepairPlan, RepairError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(RepairError::Threshold(threshold));
    }
    let t = set
        .traces
        .iter()
        .position(|x| x.trace_id == target_id)
        .ok_or_else(|| RepairError::UnknownTarget(target_id.to_string()))?;
    let target = &set.traces[t];
    let classes = &report.class_of[t];
    let score = |c: usize| report.per_statement[c].score;
    let g = build_graph(target);

    let low: Vec<usize> = g
        .topological_order()
        .iter()
        .copied()
        .filter(|&v| score(classes[v]) < threshold)
        .collect();
    if low.is_empty() {
        return Ok(RepairPlan {
            trace: target.clone(),
            replaced: vec![],
            removed: vec![],
        });
    }

    let edge_score: BTreeMap<(usize, usize), f64> = report.per_edge.iter().map(|e| ((e.from, e.to), e.score)).collect();
    let mut taken: BTreeSet<usize> = classes.iter().copied().collect();
    let mut new_class = classes.clone();
    let mut out = target.clone();
    let mut replaced = Vec::new();
    let mut removed_idx = Vec::new();

    for &v in &low {
        let text = &target.statements[v].text;
        let parents: Vec<usize> = g.parents(v).map(|p| new_class[p]).collect();
        let children: Vec<usize> = g.children(v).map(|c| new_class[c]).collect();
        let best = report
            .per_statement
            .iter()
            .filter(|s| s.score >= threshold && !taken.contains(&s.class))
            .map(|s| {
                let overlap: f64 = parents
                    .iter()
                    .map(|&p| edge_score.get(&(p, s.class)).copied().unwrap_or(0.0))
                    .sum::<f64>()
                    + children
                        .iter()
                        .map(|&c| edge_score.get(&(s.class, c)).copied().unwrap_or(0.0))
                        .sum::<f64>();
                (overlap, jaccard(text, &s.text), s.score, s.class)
            })
            .max_by(|a, b| {
                a.0.total_cmp(&b.0)
                    .then(a.1.total_cmp(&b.1))
                    .then(a.2.total_cmp(&b.2))
                    .then(b.3.cmp(&a.3))
            });
        match best {
            Some((.., c)) => {
                let r = report.representatives[c];
                let mut s = set.traces[r.trace].statements[r.statement].clone();
                s.id = target.statements[v].id.clone();
                s.premises = None;
                replaced.push(Replacement {
                    statement: s.id.clone(),
                    old_text: text.clone(),
                    new_text: s.text.clone(),
                    class: report.per_statement[c].key.clone(),
                });
                out.statements[v] = s;
                taken.insert(c);
                new_class[v] = c;
            }
            None => removed_idx.push(v),
        }
    }

    if removed_idx.len() == target.statements.len() {
        return Err(RepairError::Irreparable(target_id.to_string()));
    }
    let removed: BTreeSet<usize> = removed_idx.iter().copied().collect();
    // Each kept vertex links to the kept vertices reachable through removed ones.
    let mut edges = BTreeSet::new();
    for u in 0..g.len() {
        if removed.contains(&u) {
            continue;
        }
        let mut stack: Vec<usize> = g.children(u).collect();
        let mut seen = BTreeSet::new();
        while let Some(w) = stack.pop() {
            if !seen.insert(w) {
                continue;
            }
            if removed.contains(&w) {
                stack.extend(g.children(w));
            } else {
                edges.insert((u, w));
            }
        }
    }
    // Keep the original edge order, then append rerouted edges.
    let index = |id: &str| target.index_of(id).expect("validated trace");
    let mut new_edges: Vec<Edge> = Vec::new();
    for e in &target.edges {
        let key = (index(&e.from), index(&e.to));
        if edges.remove(&key) {
            new_edges.push(e.clone());
        }
    }
    for (u, w) in edges {
        new_edges.push(Edge::new(
            target.statements[u].id.clone(),
            target.statements[w].id.clone(),
        ));
    }
    out.edges = new_edges;
    out.statements = out
        .statements
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !removed.contains(i))
        .map(|(_, s)| s)
        .collect();
    let removed_ids: Vec<String> = removed_idx.iter().map(|&v| target.statements[v].id.clone()).collect();
    // Explicit premises naming removed statements no longer resolve.
    for s in &mut out.statements {
        if let Some(p) = &mut s.premises {
            p.retain(|id| !removed_ids.contains(id));
        }
    }
    out.validate()?;
    Ok(RepairPlan {
        trace: out,
        replaced,
        removed: removed_ids,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepairOutcome {
    pub plan: RepairPlan,
    /// The input set with the target replaced by its repair.
    pub set: TraceSet,
    pub before_mean: f64,
    pub after_mean: f64,
}

/// Scores the set, repairs the target and re-scores with the repaired trace
/// in place of the original.
pub fn repair_in_set(
    target_id: &str,
    set: &TraceSet,
    provider: &SimilarityProvider,
    cfg: &ScoringConfig,
    threshold: f64,
) -> Result<RepairOutcome, RepairError> {
    let report = full_report(set, provider, cfg)?;
    let plan = repair_trace(target_id, set, &report, threshold)?;
    let t = set
        .traces
        .iter()
        .position(|x| x.trace_id == target_id)
        .expect("checked by repair_trace");
    let mut repaired = set.clone();
    repaired.traces[t] = plan.trace.clone();
    let after = full_report(&repaired, provider, cfg)?;
    Ok(RepairOutcome {
        before_mean: report.trace_mean_atomic(t),
        after_mean: after.trace_mean_atomic(t),
        plan,
        set: repaired,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Domain, Statement};

    fn provider() -> SimilarityProvider {
        SimilarityProvider::default()
    }

    fn set(traces: Vec<ReasoningTrace>) -> TraceSet {
        TraceSet::new("q", Domain::Generic, traces)
    }

    fn chain(id: &str, texts: &[&str]) -> ReasoningTrace {
        ReasoningTrace::chain(id, "1", texts)
    }

    #[test]
    fn consistent_target_unchanged() {
        let s = set((0..3).map(|i| chain(&format!("t{i}"), &["alpha", "beta"])).collect());
        let out = repair_in_set("t1", &s, &provider(), &ScoringConfig::default(), 0.5).unwrap();
        assert!(out.plan.is_unchanged());
        assert_eq!(out.plan.trace, s.traces[1]);
    }

    #[test]
    fn conflicting_step_replaced_by_majority() {
        let mut traces: Vec<ReasoningTrace> = (0..4)
            .map(|i| chain(&format!("t{i}"), &["alpha", "beta", "gamma"]))
            .collect();
        traces.push(chain("t4", &["alpha", "bogus step", "gamma"]));
        let s = set(traces);
        let out = repair_in_set("t4", &s, &provider(), &ScoringConfig::default(), 0.5).unwrap();
        let texts: Vec<&str> = out.plan.trace.statements.iter().map(|x| x.text.as_str()).collect();
        assert_eq!(texts, vec!["alpha", "beta", "gamma"]);
        assert_eq!(out.plan.trace.statements[1].id, "s1");
        assert!(out.after_mean > out.before_mean);
        assert_eq!(out.after_mean, 1.0);
    }

    #[test]
    fn unsupported_step_removed_and_rerouted() {
        let mut traces: Vec<ReasoningTrace> = (0..4).map(|i| chain(&format!("t{i}"), &["alpha", "gamma"])).collect();
        traces.push(chain("t4", &["alpha", "detour", "gamma"]));
        let s = set(traces);
        let out = repair_in_set("t4", &s, &provider(), &ScoringConfig::default(), 0.5).unwrap();
        assert_eq!(out.plan.removed, vec!["s1".to_string()]);
        assert_eq!(out.plan.trace.edges, vec![Edge::new("s0", "s2")]);
        assert_eq!(out.after_mean, 1.0);
    }

    #[test]
    fn all_unique_is_irreparable() {
        let s = set(vec![
            chain("a", &["alpha"]),
            chain("b", &["beta"]),
            chain("c", &["gamma"]),
        ]);
        assert!(matches!(
            repair_in_set("a", &s, &provider(), &ScoringConfig::default(), 0.5),
            Err(RepairError::Irreparable(_))
        ));
    }

    #[test]
    fn bad_inputs() {
        let s = set(vec![chain("a", &["alpha"])]);
        assert!(matches!(
            repair_in_set("zz", &s, &provider(), &ScoringConfig::default(), 0.5),
            Err(RepairError::UnknownTarget(_))
        ));
        assert!(matches!(
            repair_in_set("a", &s, &provider(), &ScoringConfig::default(), 1.5),
            Err(RepairError::Threshold(_))
        ));
    }

    #[test]
    fn replacement_prefers_structural_fit() {
        // Two candidate classes are absent from t3; "beta" follows "alpha"
        // elsewhere, "delta" is disconnected.
        let mut traces: Vec<ReasoningTrace> = (0..3)
            .map(|i| {
                ReasoningTrace::new(
                    format!("t{i}"),
                    "1",
                    vec![
                        Statement::claim("a", "alpha"),
                        Statement::claim("b", "beta"),
                        Statement::claim("d", "delta"),
                    ],
                    vec![Edge::new("a", "b")],
                )
            })
            .collect();
        traces.push(chain("t3", &["alpha", "zzz"]));
        let s = set(traces);
        let out = repair_in_set("t3", &s, &provider(), &ScoringConfig::default(), 0.5).unwrap();
        assert_eq!(out.plan.trace.statements[1].text, "beta");
    }

    #[test]
    fn idempotent_on_example() {
        let mut traces: Vec<ReasoningTrace> = (0..4)
            .map(|i| chain(&format!("t{i}"), &["alpha", "beta", "gamma"]))
            .collect();
        traces.push(chain("t4", &["alpha", "bogus", "other bogus", "gamma"]));
        let s = set(traces);
        let once = repair_in_set("t4", &s, &provider(), &ScoringConfig::default(), 0.5).unwrap();
        let twice = repair_in_set("t4", &once.set, &provider(), &ScoringConfig::default(), 0.5).unwrap();
        assert!(twice.plan.is_unchanged());
        assert_eq!(twice.plan.trace, once.plan.trace);
    }
}
