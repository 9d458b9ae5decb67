//! Structural similarity of reasoning graphs: `|MCS| / |V1 ∪ V2|`.
//!
//! The common subgraph is node-induced, need not be connected, maps only
//! statement-equivalent vertices, and preserves directed adjacency in both
//! directions. The union counts equivalence classes as a multiset, so a
//! statement present in both graphs counts once.

mod exact;
mod spectral;

use serde::Serialize;
use thiserror::Error;

use crate::equivalence::{cluster_statements, ProviderError, SimilarityProvider};
use crate::trace::{ReasoningGraph, Statement};

pub use exact::mcs_exact;
pub use spectral::mcs_spectral;

pub const DEFAULT_EXACT_CAP: usize = 24;

#[derive(Debug, Error)]
pub enum IsoError {
    #[error("graphs have {total} vertices in total, above the exact-search cap of {cap}")]
    SizeCap { total: usize, cap: usize },
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IsoMethod {
    Exact,
    Spectral,
    /// Exact under the size cap, spectral above it.
    Auto,
}

impl std::str::FromStr for IsoMethod {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(IsoMethod::Exact),
            "spectral" => Ok(IsoMethod::Spectral),
            "auto" => Ok(IsoMethod::Auto),
            other => Err(format!("unknown iso method {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IsoConfig {
    pub method: IsoMethod,
    pub exact_cap: usize,
}

impl Default for IsoConfig {
    fn default() -> Self {
        IsoConfig {
            method: IsoMethod::Auto,
            exact_cap: DEFAULT_EXACT_CAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsoResult {
    pub score: f64,
    /// (vertex of g1, vertex of g2), sorted by the g1 vertex.
    pub mapping: Vec<(usize, usize)>,
    pub method: IsoMethod,
}

/// Two graphs with vertex class labels and cross-graph vertex similarity.
#[derive(Debug, Clone)]
pub struct IsoProblem {
    pub labels1: Vec<usize>,
    pub labels2: Vec<usize>,
    pub adj1: Vec<Vec<bool>>,
    pub adj2: Vec<Vec<bool>>,
    /// `sim[u][v]` for u in g1, v in g2; only read for compatible pairs.
    pub sim: Vec<Vec<f64>>,
}

fn adjacency(g: &ReasoningGraph) -> Vec<Vec<bool>> {
    let n = g.len();
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in &g.edges {
        a[u][v] = true;
    }
    a
}

impl IsoProblem {
    /// Labels come from an alignment shared by both graphs; compatible pairs
    /// get similarity 1.
    pub fn from_labels(g1: &ReasoningGraph, g2: &ReasoningGraph, labels1: Vec<usize>, labels2: Vec<usize>) -> Self {
        let sim = labels1
            .iter()
            .map(|a| labels2.iter().map(|b| if a == b { 1.0 } else { 0.0 }).collect())
            .collect();
        IsoProblem {
            labels1,
            labels2,
            adj1: adjacency(g1),
            adj2: adjacency(g2),
            sim,
        }
    }

    /// Aligns the vertices of the two graphs with the provider.
    pub fn with_provider(
        g1: &ReasoningGraph,
        g2: &ReasoningGraph,
        provider: &SimilarityProvider,
    ) -> Result<Self, ProviderError> {
        let all: Vec<&Statement> = g1.vertices.iter().chain(&g2.vertices).collect();
        let labels = cluster_statements(&all, provider)?;
        let (l1, l2) = labels.split_at(g1.len());
        let sim = g1
            .vertices
            .iter()
            .map(|a| {
                g2.vertices
                    .iter()
                    .map(|b| provider.similarity(a, b))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(IsoProblem {
            labels1: l1.to_vec(),
            labels2: l2.to_vec(),
            adj1: adjacency(g1),
            adj2: adjacency(g2),
            sim,
        })
    }

    pub fn n1(&self) -> usize {
        self.labels1.len()
    }

    pub fn n2(&self) -> usize {
        self.labels2.len()
    }

    pub fn swapped(&self) -> IsoProblem {
        let n1 = self.n1();
        IsoProblem {
            labels1: self.labels2.clone(),
            labels2: self.labels1.clone(),
            adj1: self.adj2.clone(),
            adj2: self.adj1.clone(),
            sim: (0..self.n2())
                .map(|v| (0..n1).map(|u| self.sim[u][v]).collect())
                .collect(),
        }
    }

    pub fn compatible(&self, u: usize, v: usize) -> bool {
        self.labels1[u] == self.labels2[v]
    }

    /// Multiset union size of the two label collections.
    pub fn union_size(&self) -> usize {
        let mut counts: std::collections::BTreeMap<usize, (usize, usize)> = Default::default();
        for &l in &self.labels1 {
            counts.entry(l).or_default().0 += 1;
        }
        for &l in &self.labels2 {
            counts.entry(l).or_default().1 += 1;
        }
        counts.values().map(|(a, b)| (*a).max(*b)).sum()
    }

    pub fn score(&self, mapped: usize) -> f64 {
        match (self.n1(), self.n2()) {
            (0, 0) => 1.0,
            (0, _) | (_, 0) => 0.0,
            _ => mapped as f64 / self.union_size() as f64,
        }
    }

    /// Number of g1 edges between mapped vertices.
    pub fn preserved_edges(&self, mapping: &[(usize, usize)]) -> usize {
        let mut count = 0;
        for &(u1, _) in mapping {
            for &(u2, _) in mapping {
                if self.adj1[u1][u2] {
                    count += 1;
                }
            }
        }
        count
    }

    /// True if the mapping is an injective, label-respecting, edge-preserving
    /// partial map between the vertex sets.
    pub fn is_feasible(&self, mapping: &[(usize, usize)]) -> bool {
        let mut used1 = vec![false; self.n1()];
        let mut used2 = vec![false; self.n2()];
        for &(u, v) in mapping {
            if u >= self.n1() || v >= self.n2() || used1[u] || used2[v] || !self.compatible(u, v) {
                return false;
            }
            used1[u] = true;
            used2[v] = true;
        }
        mapping
            .iter()
            .all(|&(u1, v1)| mapping.iter().all(|&(u2, v2)| self.adj1[u1][u2] == self.adj2[v1][v2]))
    }
}

pub fn iso_exact(
    g1: &ReasoningGraph,
    g2: &ReasoningGraph,
    provider: &SimilarityProvider,
) -> Result<IsoResult, IsoError> {
    iso_exact_capped(g1, g2, provider, DEFAULT_EXACT_CAP)
}

pub fn iso_exact_capped(
    g1: &ReasoningGraph,
    g2: &ReasoningGraph,
    provider: &SimilarityProvider,
    cap: usize,
) -> Result<IsoResult, IsoError> {
    let p = IsoProblem::with_provider(g1, g2, provider)?;
    mcs_exact(&p, cap)
}

pub fn iso_spectral(
    g1: &ReasoningGraph,
    g2: &ReasoningGraph,
    provider: &SimilarityProvider,
) -> Result<IsoResult, IsoError> {
    let p = IsoProblem::with_provider(g1, g2, provider)?;
    Ok(mcs_spectral(&p))
}

/// Dispatches on the configured method.
pub fn iso_with(problem: &IsoProblem, cfg: &IsoConfig) -> Result<IsoResult, IsoError> {
    match cfg.method {
        IsoMethod::Exact => mcs_exact(problem, cfg.exact_cap),
        IsoMethod::Spectral => Ok(mcs_spectral(problem)),
        IsoMethod::Auto => {
            if problem.n1() + problem.n2() <= cfg.exact_cap {
                mcs_exact(problem, cfg.exact_cap)
            } else {
                Ok(mcs_spectral(problem))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{build_graph, ReasoningTrace};

    fn chain(texts: &[&str]) -> ReasoningGraph {
        build_graph(&ReasoningTrace::chain("t", "", texts))
    }

    #[test]
    fn identical_chains() {
        let g = chain(&["alpha", "beta", "gamma"]);
        let p = SimilarityProvider::default();
        for r in [iso_exact(&g, &g, &p).unwrap(), iso_spectral(&g, &g, &p).unwrap()] {
            assert_eq!(r.score, 1.0);
            assert_eq!(r.mapping, vec![(0, 0), (1, 1), (2, 2)]);
        }
    }

    #[test]
    fn disjoint_content() {
        let p = SimilarityProvider::default();
        let (a, b) = (chain(&["alpha", "beta"]), chain(&["gamma", "delta"]));
        let r = iso_exact(&a, &b, &p).unwrap();
        assert_eq!(r.score, 0.0);
        assert!(r.mapping.is_empty());
        assert_eq!(iso_spectral(&a, &b, &p).unwrap().score, 0.0);
    }

    #[test]
    fn shared_prefix_chains() {
        let p = SimilarityProvider::default();
        let (a, b) = (chain(&["alpha", "beta", "gamma"]), chain(&["alpha", "beta", "delta"]));
        let r = iso_exact(&a, &b, &p).unwrap();
        assert_eq!(r.score, 0.5);
        assert_eq!(r.mapping, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn empty_graph_conventions() {
        let p = SimilarityProvider::default();
        let empty = chain(&[]);
        let one = chain(&["alpha"]);
        assert_eq!(iso_exact(&empty, &empty, &p).unwrap().score, 1.0);
        assert_eq!(iso_spectral(&empty, &empty, &p).unwrap().score, 1.0);
        assert_eq!(iso_exact(&empty, &one, &p).unwrap().score, 0.0);
        assert_eq!(iso_spectral(&one, &empty, &p).unwrap().score, 0.0);
    }

    #[test]
    fn size_cap_enforced() {
        let p = SimilarityProvider::default();
        let texts: Vec<String> = (0..13).map(|i| format!("step {i}")).collect();
        let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
        let g = chain(&refs);
        assert!(matches!(
            iso_exact(&g, &g, &p),
            Err(IsoError::SizeCap { total: 26, cap: 24 })
        ));
        assert_eq!(iso_spectral(&g, &g, &p).unwrap().score, 1.0);
    }

    #[test]
    fn edge_direction_matters() {
        // a -> b vs b -> a: only one of the two vertices can be kept.
        let p = SimilarityProvider::default();
        let g1 = chain(&["alpha", "beta"]);
        let g2 = chain(&["beta", "alpha"]);
        let r = iso_exact(&g1, &g2, &p).unwrap();
        assert_eq!(r.mapping.len(), 1);
        assert_eq!(r.score, 0.5);
    }

    #[test]
    fn duplicate_statements_keep_score_bounded() {
        let p = SimilarityProvider::default();
        let g = build_graph(&ReasoningTrace::new(
            "t",
            "",
            vec![
                crate::trace::Statement::claim("a", "same"),
                crate::trace::Statement::claim("b", "same"),
            ],
            vec![],
        ));
        let r = iso_exact(&g, &g, &p).unwrap();
        assert_eq!(r.score, 1.0);
    }
}
