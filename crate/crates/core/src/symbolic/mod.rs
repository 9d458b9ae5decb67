//! Symbolic-manipulation scoring: expression trees, tree edit distance and
//! algebraic equivalence, blended into one consistency score.

mod ast;
mod equiv;
mod poly;
mod ted;

pub use ast::{parse_expr, render, ExprAst, ParseError, FUNCTIONS};
pub use equiv::{algebraic_equivalence, algebraic_equivalence_with, EquivConfig, EquivError, EquivMethod, Equivalence};
pub use poly::{to_poly, Monomial, Poly, UPoly};
pub use ted::{tree_edit_distance, tree_similarity, tree_similarity_opt};

use serde::Serialize;
use thiserror::Error;

use crate::trace::TraceSet;

#[derive(Debug, Error)]
pub enum SymbolicError {
    #[error("no trace has a parseable final answer")]
    NoParseableAnswers,
    #[error("weight {name} = {value} outside [0, 1]")]
    Domain { name: &'static str, value: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SymbolicScore {
    pub tree_similarity: f64,
    pub algebraic_equivalence: f64,
    pub lambda: f64,
    pub combined: f64,
    pub domain_caveat: bool,
    /// Trace ids whose final answer failed to parse or evaluate.
    pub excluded: Vec<String>,
    pub warnings: Vec<String>,
}

/// Canonical text of an expression: the expanded polynomial when the
/// expression is one, otherwise the canonically ordered rendering.
pub fn canonical_form(e: &ExprAst) -> String {
    match to_poly(e) {
        Some(p) => p.to_string(),
        None => e.canonical_order().to_string(),
    }
}

/// Canonical text of an expression statement, which may be an equation or
/// relation (`lhs = rhs`). `None` if a side fails to parse.
pub fn canonical_statement(text: &str) -> Option<String> {
    for rel in ["<=", ">=", "!=", "=", "<", ">"] {
        if let Some((l, r)) = text.split_once(rel) {
            let (l, r) = (parse_expr(l).ok()?, parse_expr(r).ok()?);
            return Some(format!("{} {rel} {}", canonical_form(&l), canonical_form(&r)));
        }
    }
    parse_expr(text).ok().map(|e| canonical_form(&e))
}

pub fn sc_symbolic(set: &TraceSet, lambda: f64, cfg: &EquivConfig) -> Result<SymbolicScore, SymbolicError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(SymbolicError::Domain {
            name: "lambda",
            value: lambda,
        });
    }
    let mut warnings = Vec::new();
    let mut excluded = Vec::new();
    let mut parsed = Vec::new();
    for t in &set.traces {
        match parse_expr(&t.final_answer) {
            Ok(e) => parsed.push((t.trace_id.clone(), e)),
            Err(err) => {
                warnings.push(format!("trace {} excluded: {err}", t.trace_id));
                excluded.push(t.trace_id.clone());
            }
        }
    }
    if parsed.is_empty() {
        return Err(SymbolicError::NoParseableAnswers);
    }

    let mut ts_sum = 0.0;
    let mut ae_count = 0usize;
    let mut pairs = 0usize;
    let mut caveat = false;
    let mut bad = vec![false; parsed.len()];
    let mut verdicts = Vec::new();
    for i in 0..parsed.len() {
        for j in (i + 1)..parsed.len() {
            match algebraic_equivalence_with(&parsed[i].1, &parsed[j].1, cfg) {
                Ok(v) => verdicts.push((i, j, v)),
                Err(err) => {
                    // Blame the side that cannot be evaluated on its own.
                    for idx in [i, j] {
                        if algebraic_equivalence_with(&parsed[idx].1, &parsed[idx].1, cfg).is_err() {
                            bad[idx] = true;
                        }
                    }
                    if !bad[i] && !bad[j] {
                        warnings.push(format!("pair {} / {}: {err}", parsed[i].0, parsed[j].0));
                        verdicts.push((i, j, Equivalence::NotEquivalent));
                    }
                }
            }
        }
    }
    for (idx, b) in bad.iter().enumerate() {
        if *b {
            warnings.push(format!("trace {} excluded: answer cannot be evaluated", parsed[idx].0));
            excluded.push(parsed[idx].0.clone());
        }
    }
    for (i, j, v) in verdicts {
        if bad[i] || bad[j] {
            continue;
        }
        pairs += 1;
        ts_sum += tree_similarity(&parsed[i].1, &parsed[j].1);
        if v.holds() {
            ae_count += 1;
        }
        caveat |= v == Equivalence::EquivalentWithDomainCaveat;
    }
    let remaining = bad.iter().filter(|b| !**b).count();
    if remaining == 0 {
        return Err(SymbolicError::NoParseableAnswers);
    }
    let (ts, ae) = if pairs == 0 {
        warnings.push("fewer than two usable answers; symbolic score is vacuous".into());
        (1.0, 1.0)
    } else {
        (ts_sum / pairs as f64, ae_count as f64 / pairs as f64)
    };
    excluded.sort();
    Ok(SymbolicScore {
        tree_similarity: ts,
        algebraic_equivalence: ae,
        lambda,
        combined: lambda * ts + (1.0 - lambda) * ae,
        domain_caveat: caveat,
        excluded,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Domain, ReasoningTrace};

    fn answers(list: &[&str]) -> TraceSet {
        TraceSet::new(
            "simplify",
            Domain::Symbolic,
            list.iter()
                .enumerate()
                .map(|(i, a)| ReasoningTrace::new(format!("t{i}"), *a, vec![], vec![]))
                .collect(),
        )
    }

    #[test]
    fn identical_answers_score_one() {
        let s = sc_symbolic(&answers(&["(x+1)^2"; 3]), 0.5, &EquivConfig::default()).unwrap();
        assert_eq!(s.combined, 1.0);
        assert!(!s.domain_caveat);
    }

    #[test]
    fn lambda_zero_is_pairwise_equivalence_fraction() {
        // Pairs: (0,1) equivalent, (0,2) and (1,2) not: AE = 1/3.
        let set = answers(&["x^2+2x+1", "(x+1)^2", "x^2+1"]);
        let s = sc_symbolic(&set, 0.0, &EquivConfig::default()).unwrap();
        assert!((s.algebraic_equivalence - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(s.combined, s.algebraic_equivalence);
    }

    #[test]
    fn unparseable_answers_are_excluded() {
        let set = answers(&["x+1", "x++", "1+x"]);
        let s = sc_symbolic(&set, 0.5, &EquivConfig::default()).unwrap();
        assert_eq!(s.excluded, vec!["t1".to_string()]);
        assert_eq!(s.algebraic_equivalence, 1.0);
        assert_eq!(s.tree_similarity, 1.0);
    }

    #[test]
    fn caveat_propagates() {
        let set = answers(&["(x^2-1)/(x-1)", "x+1"]);
        let s = sc_symbolic(&set, 0.5, &EquivConfig::default()).unwrap();
        assert!(s.domain_caveat);
        assert_eq!(s.algebraic_equivalence, 1.0);
    }

    #[test]
    fn canonical_statement_forms() {
        assert_eq!(canonical_statement("a^2 - b^2"), canonical_statement("(a+b)(a-b)"));
        assert_eq!(canonical_statement("a^2 - b^2 = c").unwrap(), "a^2 - b^2 = c");
        assert!(canonical_statement("x ++ 1").is_none());
    }

    #[test]
    fn rejects_bad_lambda() {
        assert!(sc_symbolic(&answers(&["x"]), 1.5, &EquivConfig::default()).is_err());
    }
}
