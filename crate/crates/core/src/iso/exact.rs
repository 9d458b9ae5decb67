//! Branch-and-bound maximum common induced subgraph.
//!
//! Vertices of g1 are visited in order of fewest compatible candidates. At
//! each vertex the search tries every compatible unused g2 vertex that keeps
//! adjacency consistent with the partial mapping, then tries leaving the
//! vertex unmapped. The bound sums, per label, the smaller of the remaining
//! g1 and unused g2 counts.

use std::collections::BTreeMap;

use super::{IsoError, IsoMethod, IsoProblem, IsoResult};

struct Search<'a> {
    p: &'a IsoProblem,
    order: Vec<usize>,
    candidates: Vec<Vec<usize>>,
    /// Label -> dense index.
    label_ix: BTreeMap<usize, usize>,
    remaining1: Vec<usize>,
    available2: Vec<usize>,
    used2: Vec<bool>,
    current: Vec<(usize, usize)>,
    best: Option<Best>,
}

/// (mapped vertices, preserved edges, mapping) of the best solution so far.
type Best = (usize, usize, Vec<(usize, usize)>);

impl Search<'_> {
    fn bound(&self) -> usize {
        self.remaining1
            .iter()
            .zip(&self.available2)
            .map(|(a, b)| (*a).min(*b))
            .sum()
    }

    fn consistent(&self, u: usize, v: usize) -> bool {
        self.current
            .iter()
            .all(|&(u2, v2)| self.p.adj1[u][u2] == self.p.adj2[v][v2] && self.p.adj1[u2][u] == self.p.adj2[v2][v])
    }

    fn offer(&mut self) {
        let mut mapping = self.current.clone();
        mapping.sort_unstable();
        let edges = self.p.preserved_edges(&mapping);
        let better = match &self.best {
            None => true,
            Some((c, e, m)) => {
                (mapping.len(), edges) > (*c, *e) || ((mapping.len(), edges) == (*c, *e) && mapping < *m)
            }
        };
        if better {
            self.best = Some((mapping.len(), edges, mapping));
        }
    }

    fn run(&mut self, pos: usize) {
        let best_count = self.best.as_ref().map_or(0, |b| b.0);
        if self.current.len() + self.bound() < best_count {
            return;
        }
        if pos == self.order.len() {
            self.offer();
            return;
        }
        let u = self.order[pos];
        let lu = self.label_ix[&self.p.labels1[u]];
        self.remaining1[lu] -= 1;
        for ci in 0..self.candidates[u].len() {
            let v = self.candidates[u][ci];
            if self.used2[v] || !self.consistent(u, v) {
                continue;
            }
            self.used2[v] = true;
            self.available2[lu] -= 1;
            self.current.push((u, v));
            self.run(pos + 1);
            self.current.pop();
            self.available2[lu] += 1;
            self.used2[v] = false;
        }
        self.run(pos + 1);
        self.remaining1[lu] += 1;
    }
}

/// Maximum common induced subgraph by vertex count, ties broken by preserved
/// edge count and then by the lexicographically smallest mapping.
pub fn mcs_exact(p: &IsoProblem, cap: usize) -> Result<IsoResult, IsoError> {
    let total = p.n1() + p.n2();
    if total > cap {
        return Err(IsoError::SizeCap { total, cap });
    }
    let mut label_ix = BTreeMap::new();
    for &l in p.labels1.iter().chain(&p.labels2) {
        let next = label_ix.len();
        label_ix.entry(l).or_insert(next);
    }
    let mut remaining1 = vec![0; label_ix.len()];
    let mut available2 = vec![0; label_ix.len()];
    for l in &p.labels1 {
        remaining1[label_ix[l]] += 1;
    }
    for l in &p.labels2 {
        available2[label_ix[l]] += 1;
    }
    let candidates: Vec<Vec<usize>> = (0..p.n1())
        .map(|u| (0..p.n2()).filter(|&v| p.compatible(u, v)).collect())
        .collect();
    let mut order: Vec<usize> = (0..p.n1()).collect();
    order.sort_by_key(|&u| (candidates[u].is_empty(), candidates[u].len(), u));

    let mut s = Search {
        p,
        order,
        candidates,
        label_ix,
        remaining1,
        available2,
        used2: vec![false; p.n2()],
        current: Vec::new(),
        best: None,
    };
    s.run(0);
    let mapping = s.best.map(|b| b.2).unwrap_or_default();
    Ok(IsoResult {
        score: p.score(mapping.len()),
        mapping,
        method: IsoMethod::Exact,
    })
}
