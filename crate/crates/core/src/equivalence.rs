//! Statement equivalence and cross-trace alignment.
//!
//! Two statements are equivalent when their similarity reaches the
//! provider's threshold. Alignment clusters every statement of every trace
//! by single linkage over that relation.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::symbolic::canonical_statement;
use crate::trace::{Statement, StatementKind, TraceSet};

pub const DEFAULT_THRESHOLD: f64 = 0.85;
pub const EMBED_URL_ENV: &str = "SCV_EMBED_URL";

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("embedding provider unreachable: {0}")]
    Unreachable(String),
    #[error("embedding provider returned a malformed response: {0}")]
    Malformed(String),
    #[error("similarity threshold {0} outside [0, 1]")]
    Threshold(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    /// Token Jaccard plus explicit `canonical` fields.
    Token,
    /// Token Jaccard plus canonical forms derived from the statement content.
    Canonical,
    /// Cosine similarity of embeddings from an HTTP endpoint.
    Remote,
}

impl std::str::FromStr for ProviderKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "token" => Ok(ProviderKind::Token),
            "canonical" => Ok(ProviderKind::Canonical),
            "remote" => Ok(ProviderKind::Remote),
            other => Err(format!("unknown similarity provider {other:?}")),
        }
    }
}

#[derive(Serialize)]
struct EmbedRequest<'a> {
    texts: &'a [&'a str],
}

#[derive(Deserialize)]
struct EmbedResponse {
    embeddings: Vec<Vec<f64>>,
}

#[derive(Debug)]
struct RemoteEmbedder {
    url: String,
    client: reqwest::blocking::Client,
    cache: Mutex<HashMap<String, Vec<f64>>>,
}

impl RemoteEmbedder {
    fn embed(&self, text: &str) -> Result<Vec<f64>, ProviderError> {
        if let Some(v) = self.cache.lock().unwrap().get(text) {
            return Ok(v.clone());
        }
        let resp = self
            .client
            .post(&self.url)
            .json(&EmbedRequest { texts: &[text] })
            .send()
            .and_then(|r| r.error_for_status())
            .map_err(|e| ProviderError::Unreachable(e.to_string()))?;
        let body: EmbedResponse = resp.json().map_err(|e| ProviderError::Malformed(e.to_string()))?;
        let v = body
            .embeddings
            .into_iter()
            .next()
            .ok_or_else(|| ProviderError::Malformed("no embedding returned".into()))?;
        self.cache.lock().unwrap().insert(text.to_string(), v.clone());
        Ok(v)
    }
}

/// Pluggable statement similarity.
#[derive(Debug)]
pub struct SimilarityProvider {
    kind: ProviderKind,
    threshold: f64,
    remote: Option<RemoteEmbedder>,
}

impl Default for SimilarityProvider {
    fn default() -> Self {
        SimilarityProvider::canonical(DEFAULT_THRESHOLD)
    }
}

impl SimilarityProvider {
    pub fn token(threshold: f64) -> Self {
        SimilarityProvider {
            kind: ProviderKind::Token,
            threshold,
            remote: None,
        }
    }

    pub fn canonical(threshold: f64) -> Self {
        SimilarityProvider {
            kind: ProviderKind::Canonical,
            threshold,
            remote: None,
        }
    }

    pub fn remote(url: impl Into<String>, threshold: f64) -> Result<Self, ProviderError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| ProviderError::Unreachable(e.to_string()))?;
        Ok(SimilarityProvider {
            kind: ProviderKind::Remote,
            threshold,
            remote: Some(RemoteEmbedder {
                url: url.into(),
                client,
                cache: Mutex::new(HashMap::new()),
            }),
        })
    }

    /// Builds a provider by kind; the remote one reads its URL from
    /// `SCV_EMBED_URL`.
    pub fn from_kind(kind: ProviderKind, threshold: f64) -> Result<Self, ProviderError> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(ProviderError::Threshold(threshold));
        }
        match kind {
            ProviderKind::Token => Ok(Self::token(threshold)),
            ProviderKind::Canonical => Ok(Self::canonical(threshold)),
            ProviderKind::Remote => {
                let url = std::env::var(EMBED_URL_ENV)
                    .map_err(|_| ProviderError::Unreachable(format!("{EMBED_URL_ENV} is not set")))?;
                Self::remote(url, threshold)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            ProviderKind::Token => "token",
            ProviderKind::Canonical => "canonical",
            ProviderKind::Remote => "remote",
        }
    }

    pub fn kind(&self) -> ProviderKind {
        self.kind
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    fn canonical_of(&self, s: &Statement) -> Option<String> {
        if let Some(c) = &s.canonical {
            return Some(c.clone());
        }
        if self.kind == ProviderKind::Token {
            return None;
        }
        match s.kind {
            StatementKind::Expression => canonical_statement(&s.text),
            StatementKind::Numeric => s.value.map(canonical_number),
            StatementKind::Claim => Some(tokens(&s.text).join(" ")),
        }
    }

    /// Symmetric similarity in [0, 1]; 1 for identical text or equal
    /// canonical forms, 0 across statement kinds.
    pub fn similarity(&self, a: &Statement, b: &Statement) -> Result<f64, ProviderError> {
        if a.kind != b.kind {
            return Ok(0.0);
        }
        if a.text == b.text {
            return Ok(1.0);
        }
        if let (Some(ca), Some(cb)) = (self.canonical_of(a), self.canonical_of(b)) {
            if ca == cb {
                return Ok(1.0);
            }
        }
        match &self.remote {
            Some(r) => {
                let (ea, eb) = (r.embed(&a.text)?, r.embed(&b.text)?);
                Ok(cosine(&ea, &eb).clamp(0.0, 1.0))
            }
            None => {
                let j = jaccard(&a.text, &b.text);
                Ok(if j >= self.threshold { 1.0 } else { j })
            }
        }
    }

    pub fn equivalent(&self, a: &Statement, b: &Statement) -> Result<bool, ProviderError> {
        Ok(self.similarity(a, b)? >= self.threshold)
    }
}

fn canonical_number(v: f64) -> String {
    // 12 significant digits absorbs formatting noise such as 0.30000000000000004.
    let s = format!("{:.11e}", v);
    let parsed: f64 = s.parse().unwrap_or(v);
    format!("{parsed}")
}

/// Lowercased tokens: alphanumeric runs (with `_` and inner `.`) and single
/// symbol characters.
pub fn tokens(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = text.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let inner_dot = c == '.' && !cur.is_empty() && chars.get(i + 1).is_some_and(|n| n.is_alphanumeric());
        if c.is_alphanumeric() || c == '_' || inner_dot {
            cur.extend(c.to_lowercase());
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if !c.is_whitespace() {
                out.push(c.to_string());
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Jaccard index of the token sets; two token-less texts score 1.
pub fn jaccard(a: &str, b: &str) -> f64 {
    let sa: std::collections::BTreeSet<String> = tokens(a).into_iter().collect();
    let sb: std::collections::BTreeSet<String> = tokens(b).into_iter().collect();
    if sa.is_empty() && sb.is_empty() {
        return 1.0;
    }
    let inter = sa.intersection(&sb).count();
    let union = sa.union(&sb).count();
    inter as f64 / union as f64
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    dot / (na * nb)
}

/// Disjoint-set forest with path halving.
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Single-linkage clusters of `items` under the provider's equivalence.
/// Returns a class index per item; classes are numbered in order of their
/// first member.
pub fn cluster_statements(items: &[&Statement], provider: &SimilarityProvider) -> Result<Vec<usize>, ProviderError> {
    let n = items.len();
    let links: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .filter_map(|j| match provider.equivalent(items[i], items[j]) {
                    Ok(true) => Some(Ok(j)),
                    Ok(false) => None,
                    Err(e) => Some(Err(e)),
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let mut uf = UnionFind::new(n);
    for (i, row) in links.iter().enumerate() {
        for &j in row {
            uf.union(i, j);
        }
    }
    let mut ids: BTreeMap<usize, usize> = BTreeMap::new();
    Ok((0..n)
        .map(|i| {
            let root = uf.find(i);
            let next = ids.len();
            *ids.entry(root).or_insert(next)
        })
        .collect())
}

/// A statement position: (trace index, statement index) within a set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct StatementRef {
    pub trace: usize,
    pub statement: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentClass {
    pub id: usize,
    /// Lexicographically smallest (trace_id, statement_id) among members.
    pub representative: (String, String),
    pub representative_ref: StatementRef,
    pub members: Vec<StatementRef>,
}

impl AlignmentClass {
    pub fn key(&self) -> String {
        format!("{}/{}", self.representative.0, self.representative.1)
    }
}

/// Partition of every statement of a trace set into equivalence classes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlignmentMap {
    /// Ordered by representative.
    pub classes: Vec<AlignmentClass>,
    /// `class_of[trace][statement]` is a class id.
    pub class_of: Vec<Vec<usize>>,
}

impl AlignmentMap {
    pub fn class(&self, id: usize) -> &AlignmentClass {
        &self.classes[id]
    }

    pub fn class_of(&self, r: StatementRef) -> usize {
        self.class_of[r.trace][r.statement]
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Number of distinct traces with at least one member in the class.
    pub fn trace_support(&self, id: usize) -> usize {
        let mut traces: Vec<usize> = self.classes[id].members.iter().map(|m| m.trace).collect();
        traces.dedup();
        traces.len()
    }
}

pub fn align(set: &TraceSet, provider: &SimilarityProvider) -> Result<AlignmentMap, ProviderError> {
    let refs: Vec<StatementRef> = set
        .traces
        .iter()
        .enumerate()
        .flat_map(|(t, tr)| (0..tr.statements.len()).map(move |s| StatementRef { trace: t, statement: s }))
        .collect();
    let stmts: Vec<&Statement> = refs
        .iter()
        .map(|r| &set.traces[r.trace].statements[r.statement])
        .collect();
    let raw = cluster_statements(&stmts, provider)?;

    let key = |r: &StatementRef| {
        (
            set.traces[r.trace].trace_id.clone(),
            set.traces[r.trace].statements[r.statement].id.clone(),
        )
    };
    let mut groups: BTreeMap<usize, Vec<StatementRef>> = BTreeMap::new();
    for (r, c) in refs.iter().zip(&raw) {
        groups.entry(*c).or_default().push(*r);
    }
    let mut classes: Vec<AlignmentClass> = groups
        .into_values()
        .map(|members| {
            let rep = *members.iter().min_by_key(|r| key(r)).expect("non-empty class");
            AlignmentClass {
                id: 0,
                representative: key(&rep),
                representative_ref: rep,
                members,
            }
        })
        .collect();
    classes.sort_by(|a, b| a.representative.cmp(&b.representative));
    let mut class_of: Vec<Vec<usize>> = set
        .traces
        .iter()
        .map(|t| vec![usize::MAX; t.statements.len()])
        .collect();
    for (id, c) in classes.iter_mut().enumerate() {
        c.id = id;
        for m in &c.members {
            class_of[m.trace][m.statement] = id;
        }
    }
    Ok(AlignmentMap { classes, class_of })
}
