//! Trace and reasoning-graph data model, plus the on-disk trace-set document.
//!
//! A trace-set document is UTF-8 JSON:
//!
//! ```json
//! {
//!   "query": "...",
//!   "domain": "theorem" | "symbolic" | "numeric" | "generic",
//!   "traces": [
//!     {
//!       "trace_id": "t1",
//!       "final_answer": "...",
//!       "statements": [{"id": "s1", "text": "...", "kind": "claim"}],
//!       "edges": [{"from": "s1", "to": "s2"}]
//!     }
//!   ]
//! }
//! ```
//!
//! Statements may additionally carry `canonical`, `value`, `rule` and
//! `premises`. Unknown fields are rejected unless the document is parsed in
//! lenient mode.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TraceError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("cycle error: edge {from} -> {to} in trace {trace_id} closes a cycle")]
    Cycle { trace_id: String, from: String, to: String },
    #[error("dangling edge error: edge {from} -> {to} in trace {trace_id} references unknown statement {missing}")]
    DanglingEdge {
        trace_id: String,
        from: String,
        to: String,
        missing: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    Claim,
    Expression,
    Numeric,
}

impl fmt::Display for StatementKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StatementKind::Claim => "claim",
            StatementKind::Expression => "expression",
            StatementKind::Numeric => "numeric",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Theorem,
    Symbolic,
    Numeric,
    #[default]
    Generic,
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Domain::Theorem => "theorem",
            Domain::Symbolic => "symbolic",
            Domain::Numeric => "numeric",
            Domain::Generic => "generic",
        })
    }
}

/// One step of a reasoning trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Statement {
    pub id: String,
    pub text: String,
    pub kind: StatementKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    /// Inference-rule annotation used by the theorem domain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule: Option<String>,
    /// Premise ids used by the theorem domain. Defaults to the in-edges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub premises: Option<Vec<String>>,
}

impl Statement {
    pub fn new(id: impl Into<String>, text: impl Into<String>, kind: StatementKind) -> Self {
        Statement {
            id: id.into(),
            text: text.into(),
            kind,
            canonical: None,
            value: None,
            rule: None,
            premises: None,
        }
    }

    pub fn claim(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self::new(id, text, StatementKind::Claim)
    }

    pub fn expression(id: impl Into<String>, text: impl Into<String>) -> Self {
        Self::new(id, text, StatementKind::Expression)
    }

    pub fn numeric(id: impl Into<String>, text: impl Into<String>, value: f64) -> Self {
        let mut s = Self::new(id, text, StatementKind::Numeric);
        s.value = Some(value);
        s
    }

    pub fn with_rule(mut self, rule: &str, premises: &[&str]) -> Self {
        self.rule = Some(rule.to_string());
        self.premises = Some(premises.iter().map(|p| p.to_string()).collect());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub from: String,
    pub to: String,
}

impl Edge {
    pub fn new(from: impl Into<String>, to: impl Into<String>) -> Self {
        Edge {
            from: from.into(),
            to: to.into(),
        }
    }
}

/// One sampled response: ordered statements, dependency edges and a final answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub trace_id: String,
    pub final_answer: String,
    pub statements: Vec<Statement>,
    pub edges: Vec<Edge>,
}

impl ReasoningTrace {
    pub fn new(
        trace_id: impl Into<String>,
        final_answer: impl Into<String>,
        statements: Vec<Statement>,
        edges: Vec<Edge>,
    ) -> Self {
        ReasoningTrace {
            trace_id: trace_id.into(),
            final_answer: final_answer.into(),
            statements,
            edges,
        }
    }

    /// Chain trace `s0 -> s1 -> ...` of claims, handy for tests and examples.
    pub fn chain(trace_id: &str, final_answer: &str, texts: &[&str]) -> Self {
        let statements: Vec<_> = texts
            .iter()
            .enumerate()
            .map(|(i, t)| Statement::claim(format!("s{i}"), *t))
            .collect();
        let edges = (1..texts.len())
            .map(|i| Edge::new(format!("s{}", i - 1), format!("s{i}")))
            .collect();
        ReasoningTrace::new(trace_id, final_answer, statements, edges)
    }

    pub fn statement(&self, id: &str) -> Option<&Statement> {
        self.statements.iter().find(|s| s.id == id)
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.statements.iter().position(|s| s.id == id)
    }

    /// Checks every trace invariant: unique non-empty ids, known edge
    /// endpoints, no self-loops or duplicate edges, acyclicity and
    /// numeric statements carrying a value.
    pub fn validate(&self) -> Result<(), TraceError> {
        if self.trace_id.is_empty() {
            return Err(TraceError::Schema("empty trace_id".into()));
        }
        let mut ids = HashSet::new();
        for s in &self.statements {
            if s.id.is_empty() {
                return Err(TraceError::Schema(format!(
                    "empty statement id in trace {}",
                    self.trace_id
                )));
            }
            if !ids.insert(s.id.as_str()) {
                return Err(TraceError::Schema(format!(
                    "duplicate statement id {} in trace {}",
                    s.id, self.trace_id
                )));
            }
            if s.kind == StatementKind::Numeric && s.value.is_none() {
                return Err(TraceError::Schema(format!(
                    "numeric statement {} in trace {} has no value",
                    s.id, self.trace_id
                )));
            }
            if let Some(v) = s.value {
                if !v.is_finite() {
                    return Err(TraceError::Schema(format!(
                        "statement {} in trace {} has a non-finite value",
                        s.id, self.trace_id
                    )));
                }
            }
        }
        let mut seen = HashSet::new();
        for e in &self.edges {
            for end in [&e.from, &e.to] {
                if !ids.contains(end.as_str()) {
                    return Err(TraceError::DanglingEdge {
                        trace_id: self.trace_id.clone(),
                        from: e.from.clone(),
                        to: e.to.clone(),
                        missing: end.clone(),
                    });
                }
            }
            if e.from == e.to {
                return Err(TraceError::Cycle {
                    trace_id: self.trace_id.clone(),
                    from: e.from.clone(),
                    to: e.to.clone(),
                });
            }
            if !seen.insert((e.from.as_str(), e.to.as_str())) {
                return Err(TraceError::Schema(format!(
                    "duplicate edge {} -> {} in trace {}",
                    e.from, e.to, self.trace_id
                )));
            }
        }
        self.check_acyclic()
    }

    fn check_acyclic(&self) -> Result<(), TraceError> {
        // Incremental insertion: an edge closes a cycle iff `to` already
        // reaches `from` through edges accepted so far.
        let index: HashMap<&str, usize> = self
            .statements
            .iter()
            .enumerate()
            .map(|(i, s)| (s.id.as_str(), i))
            .collect();
        let mut succ: Vec<Vec<usize>> = vec![Vec::new(); self.statements.len()];
        for e in &self.edges {
            let (u, v) = (index[e.from.as_str()], index[e.to.as_str()]);
            if reaches(&succ, v, u) {
                return Err(TraceError::Cycle {
                    trace_id: self.trace_id.clone(),
                    from: e.from.clone(),
                    to: e.to.clone(),
                });
            }
            succ[u].push(v);
        }
        Ok(())
    }
}

fn reaches(succ: &[Vec<usize>], from: usize, target: usize) -> bool {
    let mut stack = vec![from];
    let mut seen = vec![false; succ.len()];
    while let Some(n) = stack.pop() {
        if n == target {
            return true;
        }
        if std::mem::replace(&mut seen[n], true) {
            continue;
        }
        stack.extend(succ[n].iter().copied());
    }
    false
}

/// The k sampled responses to one query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSet {
    pub query: String,
    pub domain: Domain,
    pub traces: Vec<ReasoningTrace>,
}

impl TraceSet {
    pub fn new(query: impl Into<String>, domain: Domain, traces: Vec<ReasoningTrace>) -> Self {
        TraceSet {
            query: query.into(),
            domain,
            traces,
        }
    }

    pub fn k(&self) -> usize {
        self.traces.len()
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        if self.traces.is_empty() {
            return Err(TraceError::Schema("trace set has no traces".into()));
        }
        let mut ids = HashSet::new();
        for t in &self.traces {
            if !ids.insert(t.trace_id.as_str()) {
                return Err(TraceError::Schema(format!("duplicate trace_id {}", t.trace_id)));
            }
            t.validate()?;
        }
        Ok(())
    }

    pub fn trace(&self, trace_id: &str) -> Option<&ReasoningTrace> {
        self.traces.iter().find(|t| t.trace_id == trace_id)
    }

    /// Serializes to the canonical (pretty, stable field order) document form.
    pub fn to_json(&self) -> String {
        let doc = DocSet::from(self);
        serde_json::to_string_pretty(&doc).expect("trace set serializes")
    }
}

// Document mirrors. Two variants so that strict mode can reject unknown
// fields while lenient mode ignores them.
macro_rules! doc_types {
    ($modname:ident, $($attr:meta)?) => {
        mod $modname {
            use super::*;

            #[derive(Serialize, Deserialize)]
            $(#[$attr])?
            pub struct DocStatement {
                pub id: String,
                pub text: String,
                pub kind: StatementKind,
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub canonical: Option<String>,
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub value: Option<f64>,
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub rule: Option<String>,
                #[serde(default, skip_serializing_if = "Option::is_none")]
                pub premises: Option<Vec<String>>,
            }

            #[derive(Serialize, Deserialize)]
            $(#[$attr])?
            pub struct DocEdge {
                pub from: String,
                pub to: String,
            }

            #[derive(Serialize, Deserialize)]
            $(#[$attr])?
            pub struct DocTrace {
                pub trace_id: String,
                pub final_answer: String,
                pub statements: Vec<DocStatement>,
                pub edges: Vec<DocEdge>,
            }

            #[derive(Serialize, Deserialize)]
            $(#[$attr])?
            pub struct DocSet {
                pub query: String,
                pub domain: Domain,
                pub traces: Vec<DocTrace>,
            }

            impl From<DocStatement> for Statement {
                fn from(d: DocStatement) -> Self {
                    Statement {
                        id: d.id,
                        text: d.text,
                        kind: d.kind,
                        canonical: d.canonical,
                        value: d.value,
                        rule: d.rule,
                        premises: d.premises,
                    }
                }
            }

            impl From<DocTrace> for ReasoningTrace {
                fn from(d: DocTrace) -> Self {
                    ReasoningTrace {
                        trace_id: d.trace_id,
                        final_answer: d.final_answer,
                        statements: d.statements.into_iter().map(Statement::from).collect(),
                        edges: d.edges.into_iter().map(|e| Edge { from: e.from, to: e.to }).collect(),
                    }
                }
            }

            impl From<&TraceSet> for DocSet {
                fn from(s: &TraceSet) -> Self {
                    DocSet {
                        query: s.query.clone(),
                        domain: s.domain,
                        traces: s.traces.iter().map(DocTrace::from).collect(),
                    }
                }
            }

            impl From<&ReasoningTrace> for DocTrace {
                fn from(t: &ReasoningTrace) -> Self {
                    DocTrace {
                        trace_id: t.trace_id.clone(),
                        final_answer: t.final_answer.clone(),
                        statements: t
                            .statements
                            .iter()
                            .map(|s| DocStatement {
                                id: s.id.clone(),
                                text: s.text.clone(),
                                kind: s.kind,
                                canonical: s.canonical.clone(),
                                value: s.value,
                                rule: s.rule.clone(),
                                premises: s.premises.clone(),
                            })
                            .collect(),
                        edges: t
                            .edges
                            .iter()
                            .map(|e| DocEdge { from: e.from.clone(), to: e.to.clone() })
                            .collect(),
                    }
                }
            }
        }
    };
}

doc_types!(strict, serde(deny_unknown_fields));
doc_types!(lenient,);

use strict::DocSet;

/// How unknown document fields are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParseMode {
    #[default]
    Strict,
    Lenient,
}

pub fn parse_trace_set(document: &[u8]) -> Result<TraceSet, TraceError> {
    parse_trace_set_with(document, ParseMode::Strict)
}

pub fn parse_trace_set_with(document: &[u8], mode: ParseMode) -> Result<TraceSet, TraceError> {
    let schema = |e: serde_json::Error| TraceError::Schema(e.to_string());
    let set = match mode {
        ParseMode::Strict => {
            let doc: strict::DocSet = serde_json::from_slice(document).map_err(schema)?;
            TraceSet {
                query: doc.query,
                domain: doc.domain,
                traces: doc.traces.into_iter().map(ReasoningTrace::from).collect(),
            }
        }
        ParseMode::Lenient => {
            let doc: lenient::DocSet = serde_json::from_slice(document).map_err(schema)?;
            TraceSet {
                query: doc.query,
                domain: doc.domain,
                traces: doc.traces.into_iter().map(ReasoningTrace::from).collect(),
            }
        }
    };
    set.validate()?;
    Ok(set)
}

/// Parses a single trace object (the HTTP generator's response body).
pub fn parse_trace(document: &[u8], mode: ParseMode) -> Result<ReasoningTrace, TraceError> {
    let schema = |e: serde_json::Error| TraceError::Schema(e.to_string());
    let trace: ReasoningTrace = match mode {
        ParseMode::Strict => serde_json::from_slice::<strict::DocTrace>(document)
            .map_err(schema)?
            .into(),
        ParseMode::Lenient => serde_json::from_slice::<lenient::DocTrace>(document)
            .map_err(schema)?
            .into(),
    };
    trace.validate()?;
    Ok(trace)
}

pub fn trace_to_json(trace: &ReasoningTrace) -> String {
    serde_json::to_string_pretty(&strict::DocTrace::from(trace)).expect("trace serializes")
}

/// DAG view of a trace. Vertex `i` is `statements[i]` of the source trace.
#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningGraph {
    pub vertices: Vec<Statement>,
    /// Directed edges as (parent, child) vertex indices, sorted.
    pub edges: Vec<(usize, usize)>,
    topo: Vec<usize>,
    edge_set: BTreeSet<(usize, usize)>,
}

impl ReasoningGraph {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn topological_order(&self) -> &[usize] {
        &self.topo
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.edge_set.contains(&(from, to))
    }

    pub fn parents(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.1 == v).map(|e| e.0)
    }

    pub fn children(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.iter().filter(move |e| e.0 == v).map(|e| e.1)
    }

    /// Builds a graph from raw parts; `None` if an edge is out of range or the
    /// edges contain a cycle.
    pub fn from_parts(vertices: Vec<Statement>, edges: Vec<(usize, usize)>) -> Option<Self> {
        let n = vertices.len();
        if edges.iter().any(|&(u, v)| u >= n || v >= n || u == v) {
            return None;
        }
        let edge_set: BTreeSet<_> = edges.iter().copied().collect();
        let topo = topo_sort(n, &edge_set)?;
        Some(ReasoningGraph {
            vertices,
            edges: edge_set.iter().copied().collect(),
            topo,
            edge_set,
        })
    }
}

/// Kahn's algorithm, always picking the smallest ready index so that an
/// edgeless graph keeps input order.
fn topo_sort(n: usize, edges: &BTreeSet<(usize, usize)>) -> Option<Vec<usize>> {
    let mut indeg = vec![0usize; n];
    let mut succ = vec![Vec::new(); n];
    for &(u, v) in edges {
        indeg[v] += 1;
        succ[u].push(v);
    }
    let mut ready: BTreeSet<usize> = (0..n).filter(|&v| indeg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = ready.pop_first() {
        order.push(v);
        for &w in &succ[v] {
            indeg[w] -= 1;
            if indeg[w] == 0 {
                ready.insert(w);
            }
        }
    }
    (order.len() == n).then_some(order)
}

pub fn build_graph(trace: &ReasoningTrace) -> ReasoningGraph {
    let index: HashMap<&str, usize> = trace
        .statements
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), i))
        .collect();
    let edges = trace
        .edges
        .iter()
        .map(|e| (index[e.from.as_str()], index[e.to.as_str()]))
        .collect();
    ReasoningGraph::from_parts(trace.statements.clone(), edges).expect("validated trace induces a DAG")
}
