//! Zhang–Shasha tree edit distance over ordered labeled trees, unit costs.

use super::ast::ExprAst;

/// Post-order flattening of a labeled tree.
struct Flat {
    labels: Vec<String>,
    /// Post-order index of the leftmost leaf of each node's subtree.
    leftmost: Vec<usize>,
    keyroots: Vec<usize>,
}

impl Flat {
    fn new(root: Option<&ExprAst>) -> Self {
        let mut f = Flat {
            labels: vec![],
            leftmost: vec![],
            keyroots: vec![],
        };
        if let Some(r) = root {
            f.visit(r);
        }
        // A keyroot is the highest node for each distinct leftmost leaf.
        let n = f.labels.len();
        let mut seen = vec![false; n];
        for i in (0..n).rev() {
            let l = f.leftmost[i];
            if !seen[l] {
                seen[l] = true;
                f.keyroots.push(i);
            }
        }
        f.keyroots.sort_unstable();
        f
    }

    fn visit(&mut self, node: &ExprAst) -> usize {
        let mut first = None;
        for c in node.children() {
            let l = self.visit(c);
            first.get_or_insert(l);
        }
        let idx = self.labels.len();
        self.labels.push(node.label());
        self.leftmost.push(first.unwrap_or(idx));
        self.leftmost[idx]
    }
}

/// Unit-cost ordered tree edit distance; `None` is the empty tree.
pub fn tree_edit_distance(a: Option<&ExprAst>, b: Option<&ExprAst>) -> usize {
    let (fa, fb) = (Flat::new(a), Flat::new(b));
    let (n, m) = (fa.labels.len(), fb.labels.len());
    if n == 0 || m == 0 {
        return n + m;
    }
    let mut td = vec![vec![0usize; m]; n];
    let mut fd = vec![vec![0usize; m + 1]; n + 1];
    for &i in &fa.keyroots {
        for &j in &fb.keyroots {
            let (li, lj) = (fa.leftmost[i], fb.leftmost[j]);
            // fd[x][y] = distance between forests a[li..li+x) and b[lj..lj+y).
            fd[0][0] = 0;
            for x in 1..=(i - li + 1) {
                fd[x][0] = fd[x - 1][0] + 1;
            }
            for y in 1..=(j - lj + 1) {
                fd[0][y] = fd[0][y - 1] + 1;
            }
            for x in 1..=(i - li + 1) {
                for y in 1..=(j - lj + 1) {
                    let (ai, bj) = (li + x - 1, lj + y - 1);
                    let del = fd[x - 1][y] + 1;
                    let ins = fd[x][y - 1] + 1;
                    if fa.leftmost[ai] == li && fb.leftmost[bj] == lj {
                        let ren = fd[x - 1][y - 1] + usize::from(fa.labels[ai] != fb.labels[bj]);
                        fd[x][y] = del.min(ins).min(ren);
                        td[ai][bj] = fd[x][y];
                    } else {
                        let px = fa.leftmost[ai] - li;
                        let py = fb.leftmost[bj] - lj;
                        fd[x][y] = del.min(ins).min(fd[px][py] + td[ai][bj]);
                    }
                }
            }
        }
    }
    td[n - 1][m - 1]
}

/// `1 - TED / (|a| + |b|)` on canonically ordered trees; two empty trees
/// score 1.
pub fn tree_similarity_opt(a: Option<&ExprAst>, b: Option<&ExprAst>) -> f64 {
    let ca = a.map(ExprAst::canonical_order);
    let cb = b.map(ExprAst::canonical_order);
    let total = ca.as_ref().map_or(0, ExprAst::size) + cb.as_ref().map_or(0, ExprAst::size);
    if total == 0 {
        return 1.0;
    }
    let d = tree_edit_distance(ca.as_ref(), cb.as_ref());
    1.0 - d as f64 / total as f64
}

pub fn tree_similarity(a: &ExprAst, b: &ExprAst) -> f64 {
    tree_similarity_opt(Some(a), Some(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbolic::ast::parse_expr;
    use std::collections::HashMap;

    /// Independent oracle: the textbook forest recursion, memoized on the
    /// (forest, forest) pair. A forest is a sequence of trees; each step
    /// removes the rightmost root.
    fn forest_dist(f: &[ExprAst], g: &[ExprAst], memo: &mut HashMap<(Vec<ExprAst>, Vec<ExprAst>), usize>) -> usize {
        if f.is_empty() {
            return g.iter().map(ExprAst::size).sum();
        }
        if g.is_empty() {
            return f.iter().map(ExprAst::size).sum();
        }
        let key = (f.to_vec(), g.to_vec());
        if let Some(&d) = memo.get(&key) {
            return d;
        }
        let (v, w) = (f.last().unwrap(), g.last().unwrap());
        let split = |forest: &[ExprAst]| {
            let root = forest.last().unwrap();
            let mut rest: Vec<ExprAst> = forest[..forest.len() - 1].to_vec();
            rest.extend(root.children().into_iter().cloned());
            rest
        };
        let (f_minus_v, g_minus_w) = (split(f), split(g));
        let kids = |t: &ExprAst| t.children().into_iter().cloned().collect::<Vec<_>>();
        let del = forest_dist(&f_minus_v, g, memo) + 1;
        let ins = forest_dist(f, &g_minus_w, memo) + 1;
        let ren = forest_dist(&kids(v), &kids(w), memo)
            + forest_dist(&f[..f.len() - 1], &g[..g.len() - 1], memo)
            + usize::from(v.label() != w.label());
        let d = del.min(ins).min(ren);
        memo.insert(key, d);
        d
    }

    fn oracle(a: &ExprAst, b: &ExprAst) -> usize {
        forest_dist(std::slice::from_ref(a), std::slice::from_ref(b), &mut HashMap::new())
    }

    fn p(s: &str) -> ExprAst {
        parse_expr(s).unwrap()
    }

    #[test]
    fn add_x_1_vs_add_x_2() {
        let (a, b) = (p("x+1"), p("x+2"));
        assert_eq!(oracle(&a, &b), 1);
        assert_eq!(tree_edit_distance(Some(&a), Some(&b)), 1);
        assert!((tree_similarity(&a, &b) - (1.0 - 1.0 / 6.0)).abs() < 1e-12);
    }

    #[test]
    fn degenerate_cases() {
        let x = p("x");
        assert_eq!(tree_similarity(&x, &x), 1.0);
        assert_eq!(tree_similarity_opt(Some(&x), None), 0.0);
        assert_eq!(tree_similarity_opt(None, None), 1.0);
    }

    #[test]
    fn commutativity_does_not_inflate_distance() {
        assert_eq!(tree_similarity(&p("a+b*c"), &p("c*b+a")), 1.0);
    }

    #[test]
    fn matches_forest_oracle_on_small_trees() {
        let corpus = [
            "x",
            "x+1",
            "x+2",
            "x*y",
            "x^2+2x+1",
            "(x+1)^2",
            "(a+b)(a-b)",
            "a^2-b^2",
            "-x",
            "sin(x)/2",
            "a/b/c",
            "a/(b/c)",
            "x^2",
            "2x+1",
            "(a-b)(c-d)",
            "ac-ad-bc-bd",
        ];
        for a in corpus {
            for b in corpus {
                let (ta, tb) = (p(a), p(b));
                assert_eq!(tree_edit_distance(Some(&ta), Some(&tb)), oracle(&ta, &tb), "{a} vs {b}");
            }
        }
    }
}
