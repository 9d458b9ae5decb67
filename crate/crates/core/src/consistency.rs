//! Statement, edge and graph level consistency scores, the answer-entropy
//! score and their combination.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::equivalence::{
    align, tokens, AlignmentClass, AlignmentMap, ProviderError, SimilarityProvider, StatementRef,
};
use crate::iso::{iso_with, IsoConfig, IsoError, IsoMethod, IsoProblem};
use crate::symbolic::canonical_statement;
use crate::trace::{build_graph, ReasoningGraph, TraceSet};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_FLAG_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ConsistencyError {
    #[error("{what} needs at least {need} traces, got {k}")]
    DegenerateSample { what: &'static str, need: usize, k: usize },
    #[error("{name} = {value} outside [0, 1]")]
    Domain { name: &'static str, value: f64 },
    #[error(transparent)]
    Provider(#[from] ProviderError),
    #[error(transparent)]
    Iso(#[from] IsoError),
}

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64, ConsistencyError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ConsistencyError::Domain { name, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringConfig {
    pub alpha: f64,
    pub flag_threshold: f64,
    pub iso: IsoConfig,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig {
            alpha: DEFAULT_ALPHA,
            flag_threshold: DEFAULT_FLAG_THRESHOLD,
            iso: IsoConfig::default(),
        }
    }
}

/// Fraction of traces containing a member of the class.
pub fn sc_atomic(class: &AlignmentClass, set: &TraceSet) -> f64 {
    let mut traces: Vec<usize> = class.members.iter().map(|m| m.trace).collect();
    traces.sort_unstable();
    traces.dedup();
    traces.len() as f64 / set.k() as f64
}

/// Fraction of traces with an edge from a member of `from` to a member of `to`.
pub fn sc_logical(map: &AlignmentMap, from: usize, to: usize, set: &TraceSet) -> f64 {
    let hits = set
        .traces
        .iter()
        .enumerate()
        .filter(|(t, trace)| {
            trace.edges.iter().any(|e| {
                let (Some(a), Some(b)) = (trace.index_of(&e.from), trace.index_of(&e.to)) else {
                    return false;
                };
                map.class_of[*t][a] == from && map.class_of[*t][b] == to
            })
        })
        .count();
    hits as f64 / set.k() as f64
}

fn graphs(set: &TraceSet) -> Vec<ReasoningGraph> {
    set.traces.iter().map(build_graph).collect()
}

/// Mean structural similarity over all unordered trace pairs, using the
/// alignment classes as vertex labels.
pub fn psi_global(set: &TraceSet, map: &AlignmentMap, iso: &IsoConfig) -> Result<f64, ConsistencyError> {
    Ok(psi_detail(set, map, iso)?.0)
}

fn psi_detail(set: &TraceSet, map: &AlignmentMap, iso: &IsoConfig) -> Result<(f64, Vec<IsoMethod>), ConsistencyError> {
    let k = set.k();
    if k < 2 {
        return Err(ConsistencyError::DegenerateSample {
            what: "global consistency",
            need: 2,
            k,
        });
    }
    let gs = graphs(set);
    let pairs: Vec<(usize, usize)> = (0..k).flat_map(|i| ((i + 1)..k).map(move |j| (i, j))).collect();
    let results = pairs
        .par_iter()
        .map(|&(i, j)| {
            let p = IsoProblem::from_labels(&gs[i], &gs[j], map.class_of[i].clone(), map.class_of[j].clone());
            iso_with(&p, iso)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let total: f64 = results.iter().map(|r| r.score).sum();
    Ok((total / pairs.len() as f64, results.iter().map(|r| r.method).collect()))
}

/// Equivalence key of a final answer: the canonical expression when it
/// parses, otherwise its normalized tokens.
pub fn answer_key(answer: &str) -> String {
    canonical_statement(answer).unwrap_or_else(|| tokens(answer).join(" "))
}

/// Sizes of the final-answer clusters, ordered by key.
pub fn answer_clusters(set: &TraceSet) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for t in &set.traces {
        *counts.entry(answer_key(&t.final_answer)).or_insert(0) += 1;
    }
    counts
}

/// `1 - H / ln k` over final-answer clusters.
pub fn phi_entropy(set: &TraceSet) -> Result<f64, ConsistencyError> {
    let k = set.k();
    if k < 2 {
        return Err(ConsistencyError::DegenerateSample {
            what: "entropy consistency",
            need: 2,
            k,
        });
    }
    let kf = k as f64;
    let h: f64 = answer_clusters(set)
        .values()
        .map(|&c| {
            let p = c as f64 / kf;
            -p * p.ln()
        })
        .sum();
    Ok((1.0 - h / kf.ln()).clamp(0.0, 1.0))
}

pub fn lambda_combined(psi: f64, phi: f64, alpha: f64) -> Result<f64, ConsistencyError> {
    check_unit("psi", psi)?;
    check_unit("phi", phi)?;
    check_unit("alpha", alpha)?;
    Ok(alpha * psi + (1.0 - alpha) * phi)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatementScore {
    pub class: usize,
    /// `trace_id/statement_id` of the class representative.
    pub key: String,
    pub text: String,
    pub support: usize,
    pub score: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeScore {
    pub from: usize,
    pub to: usize,
    pub key: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConsistencyReport {
    pub query: String,
    pub k: usize,
    pub per_statement: Vec<StatementScore>,
    pub per_edge: Vec<EdgeScore>,
    pub global: f64,
    pub entropy: f64,
    pub combined: f64,
    pub alpha: f64,
    pub flag_threshold: f64,
    /// Class ids with statement score below the flag threshold.
    pub flagged: Vec<usize>,
    pub degenerate: bool,
    pub iso_methods: Vec<IsoMethod>,
    pub warnings: Vec<String>,
    /// `class_of[trace][statement]`, as in the alignment.
    #[serde(skip)]
    pub class_of: Vec<Vec<usize>>,
    /// Representative statement of each class.
    #[serde(skip)]
    pub representatives: Vec<StatementRef>,
}

impl ConsistencyReport {
    pub fn mean_atomic(&self) -> f64 {
        if self.per_statement.is_empty() {
            return 1.0;
        }
        self.per_statement.iter().map(|s| s.score).sum::<f64>() / self.per_statement.len() as f64
    }

    pub fn statement(&self, class: usize) -> Option<&StatementScore> {
        self.per_statement.iter().find(|s| s.class == class)
    }

    /// Mean statement score of one trace; 0 for a trace without statements.
    pub fn trace_mean_atomic(&self, trace: usize) -> f64 {
        let classes = &self.class_of[trace];
        if classes.is_empty() {
            return 0.0;
        }
        classes.iter().map(|&c| self.per_statement[c].score).sum::<f64>() / classes.len() as f64
    }
}

/// Every edge (class_i, class_j) occurring in at least one trace.
pub fn class_edges(set: &TraceSet, map: &AlignmentMap) -> Vec<(usize, usize)> {
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (t, trace) in set.traces.iter().enumerate() {
        for e in &trace.edges {
            if let (Some(a), Some(b)) = (trace.index_of(&e.from), trace.index_of(&e.to)) {
                out.push((map.class_of[t][a], map.class_of[t][b]));
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    out
}

pub fn full_report(
    set: &TraceSet,
    provider: &SimilarityProvider,
    cfg: &ScoringConfig,
) -> Result<ConsistencyReport, ConsistencyError> {
    let map = align(set, provider)?;
    report_with_alignment(set, &map, cfg)
}

pub fn report_with_alignment(
    set: &TraceSet,
    map: &AlignmentMap,
    cfg: &ScoringConfig,
) -> Result<ConsistencyReport, ConsistencyError> {
    check_unit("alpha", cfg.alpha)?;
    check_unit("flag_threshold", cfg.flag_threshold)?;
    let mut warnings = Vec::new();
    let text_of = |c: &AlignmentClass| {
        let r = c.representative_ref;
        set.traces[r.trace].statements[r.statement].text.clone()
    };

    let per_statement: Vec<StatementScore> = map
        .classes
        .iter()
        .map(|c| {
            let score = sc_atomic(c, set);
            StatementScore {
                class: c.id,
                key: c.key(),
                text: text_of(c),
                support: map.trace_support(c.id),
                score,
                flagged: score < cfg.flag_threshold,
            }
        })
        .collect();
    let per_edge = class_edges(set, map)
        .into_iter()
        .map(|(a, b)| EdgeScore {
            from: a,
            to: b,
            key: format!("{} -> {}", map.class(a).key(), map.class(b).key()),
            score: sc_logical(map, a, b, set),
        })
        .collect();

    let degenerate = set.k() < 2;
    let (global, entropy, iso_methods) = if degenerate {
        warnings.push("single trace: global and entropy scores are vacuously 1".to_string());
        (1.0, 1.0, Vec::new())
    } else {
        let (psi, methods) = psi_detail(set, map, &cfg.iso)?;
        (psi, phi_entropy(set)?, methods)
    };
    let combined = lambda_combined(global, entropy, cfg.alpha)?;
    let flagged = per_statement.iter().filter(|s| s.flagged).map(|s| s.class).collect();
    Ok(ConsistencyReport {
        query: set.query.clone(),
        k: set.k(),
        per_statement,
        per_edge,
        global,
        entropy,
        combined,
        alpha: cfg.alpha,
        flag_threshold: cfg.flag_threshold,
        flagged,
        degenerate,
        iso_methods,
        warnings,
        class_of: map.class_of.clone(),
        representatives: map.classes.iter().map(|c| c.representative_ref).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Domain, Edge, ReasoningTrace, Statement};
    use proptest::prelude::*;

    fn set(traces: Vec<ReasoningTrace>) -> TraceSet {
        TraceSet::new("q", Domain::Generic, traces)
    }

    fn chain(id: &str, answer: &str, texts: &[&str]) -> ReasoningTrace {
        ReasoningTrace::chain(id, answer, texts)
    }

    fn report(s: &TraceSet) -> ConsistencyReport {
        full_report(s, &SimilarityProvider::default(), &ScoringConfig::default()).unwrap()
    }

    fn class_with_text(r: &ConsistencyReport, text: &str) -> StatementScore {
        r.per_statement.iter().find(|s| s.text == text).unwrap().clone()
    }

    #[test]
    fn identical_traces_score_one() {
        let s = set((0..4)
            .map(|i| chain(&format!("t{i}"), "7", &["alpha", "beta", "gamma"]))
            .collect());
        let r = report(&s);
        assert!(r.per_statement.iter().all(|x| x.score == 1.0));
        assert!(r.per_edge.iter().all(|x| x.score == 1.0));
        assert_eq!((r.global, r.entropy, r.combined), (1.0, 1.0, 1.0));
        assert!(r.flagged.is_empty());
        assert!(!r.degenerate);
    }

    #[test]
    fn atomic_counts_traces() {
        let s = set(vec![
            chain("t0", "1", &["alpha", "beta"]),
            chain("t1", "1", &["alpha", "beta"]),
            chain("t2", "1", &["alpha", "beta"]),
            chain("t3", "1", &["alpha", "delta"]),
        ]);
        let r = report(&s);
        assert_eq!(class_with_text(&r, "alpha").score, 1.0);
        assert_eq!(class_with_text(&r, "beta").score, 0.75);
        assert_eq!(class_with_text(&r, "delta").score, 0.25);
    }

    #[test]
    fn logical_counts_edges() {
        // alpha and beta appear everywhere, the edge only in t0.
        let mut traces: Vec<ReasoningTrace> = (0..4)
            .map(|i| {
                ReasoningTrace::new(
                    format!("t{i}"),
                    "1",
                    vec![Statement::claim("a", "alpha"), Statement::claim("b", "beta")],
                    vec![],
                )
            })
            .collect();
        traces[0].edges.push(Edge::new("a", "b"));
        let s = set(traces);
        let r = report(&s);
        assert_eq!(r.per_edge.len(), 1);
        assert_eq!(r.per_edge[0].score, 0.25);
    }

    #[test]
    fn unique_statement_flagged() {
        let mut traces: Vec<ReasoningTrace> = (0..5)
            .map(|i| chain(&format!("t{i}"), "1", &["alpha", "beta"]))
            .collect();
        traces[2] = chain("t2", "1", &["alpha", "beta", "unicorn"]);
        let r = report(&set(traces));
        let u = class_with_text(&r, "unicorn");
        assert_eq!(u.score, 0.2);
        assert_eq!(r.flagged, vec![u.class]);
    }

    #[test]
    fn psi_chain_example() {
        let s = set(vec![
            chain("t0", "1", &["alpha", "beta", "gamma"]),
            chain("t1", "1", &["alpha", "beta", "delta"]),
        ]);
        assert_eq!(report(&s).global, 0.5);
        let disjoint = set(vec![chain("t0", "1", &["alpha"]), chain("t1", "1", &["omega"])]);
        assert_eq!(report(&disjoint).global, 0.0);
    }

    fn answers(list: &[&str]) -> TraceSet {
        set(list
            .iter()
            .enumerate()
            .map(|(i, a)| chain(&format!("t{i}"), a, &["x"]))
            .collect())
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(phi_entropy(&answers(&["5", "5", "5"])).unwrap(), 1.0);
        assert!(phi_entropy(&answers(&["1", "2", "3", "4"])).unwrap().abs() < 1e-12);
        // Sizes {2,1,1} at k = 4: H = 1.5 ln 2, so 1 - H / ln 4 = 0.25.
        let phi = phi_entropy(&answers(&["1", "1", "2", "3"])).unwrap();
        assert!((phi - 0.25).abs() < 1e-12);
        // Equivalent answers share a cluster.
        assert_eq!(phi_entropy(&answers(&["2x+2", "2(x+1)", "2 x + 2"])).unwrap(), 1.0);
        assert!(matches!(
            phi_entropy(&answers(&["1"])),
            Err(ConsistencyError::DegenerateSample { k: 1, .. })
        ));
    }

    #[test]
    fn entropy_matches_direct_oracle() {
        // Oracle: entropy from the multiset of answer strings directly.
        let list = ["a", "b", "b", "c", "c", "c"];
        let mut counts = std::collections::HashMap::new();
        for a in list {
            *counts.entry(a).or_insert(0.0) += 1.0;
        }
        let h: f64 = counts.values().map(|c: &f64| -(c / 6.0) * (c / 6.0f64).ln()).sum();
        let phi = phi_entropy(&answers(&list)).unwrap();
        assert!((phi - (1.0 - h / 6f64.ln())).abs() < 1e-12);
    }

    #[test]
    fn lambda_examples() {
        assert_eq!(lambda_combined(1.0, 1.0, 0.3).unwrap(), 1.0);
        assert_eq!(lambda_combined(0.5, 0.25, 0.5).unwrap(), 0.375);
        assert_eq!(lambda_combined(0.9, 0.2, 0.0).unwrap(), 0.2);
        assert!(matches!(
            lambda_combined(1.2, 0.0, 0.5),
            Err(ConsistencyError::Domain { name: "psi", .. })
        ));
        assert!(lambda_combined(0.5, 0.5, -0.1).is_err());
    }

    #[test]
    fn single_trace_is_degenerate() {
        let r = report(&set(vec![chain("t0", "1", &["alpha"])]));
        assert!(r.degenerate);
        assert_eq!((r.global, r.entropy, r.combined), (1.0, 1.0, 1.0));
        assert!(!r.warnings.is_empty());
        let s = set(vec![chain("t0", "1", &["alpha"])]);
        let map = align(&s, &SimilarityProvider::default()).unwrap();
        assert!(psi_global(&s, &map, &IsoConfig::default()).is_err());
    }

    #[test]
    fn duplicating_can_lower_entropy_score() {
        // Answer clusters {3,1} -> {3,2}: the distribution gets flatter.
        let before = phi_entropy(&answers(&["1", "1", "1", "2"])).unwrap();
        let after = phi_entropy(&answers(&["1", "1", "1", "2", "2"])).unwrap();
        assert!(after < before);
    }

    #[test]
    fn duplicating_can_lower_structural_score() {
        // One outlier A against three identical B: duplicating A adds
        // zero-similarity pairs faster than unit pairs.
        let b = |i: usize| chain(&format!("b{i}"), "1", &["beta", "gamma"]);
        let a = |i: usize| chain(&format!("a{i}"), "1", &["alpha", "omega"]);
        let before = report(&set(vec![a(0), b(0), b(1), b(2)])).global;
        let after = report(&set(vec![a(0), a(1), b(0), b(1), b(2)])).global;
        assert_eq!(before, 0.5);
        assert_eq!(after, 0.4);
    }

    const VOCAB: [&str; 6] = ["alpha", "beta", "gamma", "delta", "omega", "sigma"];

    fn arb_trace(id: usize) -> impl Strategy<Value = ReasoningTrace> {
        (
            prop::sample::subsequence(VOCAB.to_vec(), 1..=4),
            prop::collection::vec(any::<bool>(), 6),
            0usize..3,
        )
            .prop_map(move |(texts, edge_bits, answer)| {
                let stmts: Vec<Statement> = texts
                    .iter()
                    .enumerate()
                    .map(|(i, t)| Statement::claim(format!("s{i}"), *t))
                    .collect();
                let mut edges = Vec::new();
                let mut bit = 0;
                for u in 0..stmts.len() {
                    for v in (u + 1)..stmts.len() {
                        if edge_bits[bit % 6] {
                            edges.push(Edge::new(format!("s{u}"), format!("s{v}")));
                        }
                        bit += 1;
                    }
                }
                ReasoningTrace::new(format!("t{id}"), answer.to_string(), stmts, edges)
            })
    }

    fn arb_set() -> impl Strategy<Value = TraceSet> {
        (2usize..=5)
            .prop_flat_map(|k| (0..k).map(arb_trace).collect::<Vec<_>>())
            .prop_map(set)
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 128, rng_seed: proptest::test_runner::RngSeed::Fixed(5), ..ProptestConfig::default() })]

        #[test]
        fn scores_bounded_and_combined_exact(s in arb_set()) {
            let r = report(&s);
            for x in &r.per_statement {
                prop_assert!((0.0..=1.0).contains(&x.score));
                let m = x.support as f64 / s.k() as f64;
                prop_assert_eq!(x.score, m);
            }
            for e in &r.per_edge {
                prop_assert!((0.0..=1.0).contains(&e.score));
            }
            for v in [r.global, r.entropy, r.combined] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert_eq!(r.combined, r.alpha * r.global + (1.0 - r.alpha) * r.entropy);
            let keys: Vec<usize> = r.per_statement.iter().map(|x| x.class).collect();
            prop_assert!(r.flagged.iter().all(|c| keys.contains(c)));
        }

        #[test]
        fn entropy_ignores_order(s in arb_set(), rot in 0usize..5) {
            let mut t = s.clone();
            let n = t.traces.len();
            t.traces.rotate_left(rot % n);
            t.traces.reverse();
            prop_assert!((phi_entropy(&s).unwrap() - phi_entropy(&t).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn novel_trace_never_raises_scores(s in arb_set()) {
            // Replace a copy of trace 0 with a trace sharing no statement
            // and no answer with anything else.
            let mut dup = s.clone();
            let mut copy = s.traces[0].clone();
            copy.trace_id = "dup".into();
            dup.traces.push(copy);
            let mut novel = s.clone();
            novel.traces.push(ReasoningTrace::chain("novel", "999", &["zeta", "kappa"]));
            let (a, b) = (report(&dup), report(&novel));
            prop_assert!(b.global <= a.global + 1e-12);
            prop_assert!(b.entropy <= a.entropy + 1e-12);
            prop_assert!(b.combined <= a.combined + 1e-12);
        }

        #[test]
        fn identical_sets_are_maximal(t in arb_trace(0), k in 2usize..6) {
            let s = set((0..k).map(|i| { let mut c = t.clone(); c.trace_id = format!("t{i}"); c }).collect());
            let r = report(&s);
            prop_assert_eq!((r.global, r.entropy, r.combined), (1.0, 1.0, 1.0));
        }
    }
}
