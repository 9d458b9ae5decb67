//! Proof checking over a small fragment (propositional rules, substitution
//! of equals, ground arithmetic) and the combined theorem-proving score.
//!
//! Formulas use `->`, `=>`, `→`, `⇒` for implication, `&`, `∧`, `and` for
//! conjunction, `|`, `∨`, `or` for disjunction and `!`, `¬`, `~` for
//! negation. Anything else is an atom, compared by its normalized text.

use std::collections::BTreeMap;
use std::fmt;

use num_rational::BigRational;
use rayon::prelude::*;
use serde::Serialize;

use crate::consistency::{check_unit, psi_global, ConsistencyError};
use crate::equivalence::{align, SimilarityProvider};
use crate::iso::IsoConfig;
use crate::symbolic::{parse_expr, to_poly};
use crate::trace::{build_graph, ReasoningTrace, TraceSet};

pub const DEFAULT_BETA: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    ModusPonens,
    AndIntro,
    AndElim,
    OrIntro,
    SubstitutionOfEquals,
    Hypothesis,
    ArithmeticFact,
    Unknown,
}

impl Rule {
    pub fn parse(tag: Option<&str>) -> Rule {
        match tag.map(|t| t.trim().to_ascii_lowercase()).as_deref() {
            Some("modus_ponens") => Rule::ModusPonens,
            Some("and_intro") => Rule::AndIntro,
            Some("and_elim") => Rule::AndElim,
            Some("or_intro") => Rule::OrIntro,
            Some("substitution_of_equals") => Rule::SubstitutionOfEquals,
            Some("hypothesis") => Rule::Hypothesis,
            Some("arithmetic_fact") => Rule::ArithmeticFact,
            _ => Rule::Unknown,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Formula {
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Implies(Box<Formula>, Box<Formula>),
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(x) => write!(f, "!({x})"),
            Formula::And(a, b) => write!(f, "({a} & {b})"),
            Formula::Or(a, b) => write!(f, "({a} | {b})"),
            Formula::Implies(a, b) => write!(f, "({a} -> {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    LParen,
    RParen,
    Not,
    And,
    Or,
    Implies,
}

fn lex(text: &str) -> Vec<Tok> {
    let mut out = Vec::new();
    let mut word = String::new();
    let flush = |word: &mut String, out: &mut Vec<Tok>| {
        if !word.is_empty() {
            out.push(match word.to_lowercase().as_str() {
                "and" => Tok::And,
                "or" => Tok::Or,
                _ => Tok::Word(std::mem::take(word)),
            });
            word.clear();
        }
    };
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        let op = match (c, next) {
            ('-', Some('>')) | ('=', Some('>')) => {
                i += 1;
                Some(Tok::Implies)
            }
            ('→' | '⇒', _) => Some(Tok::Implies),
            ('&' | '∧', _) => Some(Tok::And),
            ('|' | '∨', _) => Some(Tok::Or),
            ('!', n) if n != Some('=') => Some(Tok::Not),
            ('¬' | '~', _) => Some(Tok::Not),
            ('(', _) => Some(Tok::LParen),
            (')', _) => Some(Tok::RParen),
            _ => None,
        };
        if let Some(op) = op {
            flush(&mut word, &mut out);
            out.push(op);
        } else if c.is_whitespace() {
            flush(&mut word, &mut out);
        } else {
            word.push(c);
        }
        i += 1;
    }
    flush(&mut word, &mut out);
    out
}

struct FormulaParser {
    toks: Vec<Tok>,
    pos: usize,
}

impl FormulaParser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn implication(&mut self) -> Option<Formula> {
        let lhs = self.disjunction()?;
        if self.peek() == Some(&Tok::Implies) {
            self.pos += 1;
            let rhs = self.implication()?;
            return Some(Formula::Implies(Box::new(lhs), Box::new(rhs)));
        }
        Some(lhs)
    }

    fn disjunction(&mut self) -> Option<Formula> {
        let mut lhs = self.conjunction()?;
        while self.peek() == Some(&Tok::Or) {
            self.pos += 1;
            lhs = Formula::Or(Box::new(lhs), Box::new(self.conjunction()?));
        }
        Some(lhs)
    }

    fn conjunction(&mut self) -> Option<Formula> {
        let mut lhs = self.negation()?;
        while self.peek() == Some(&Tok::And) {
            self.pos += 1;
            lhs = Formula::And(Box::new(lhs), Box::new(self.negation()?));
        }
        Some(lhs)
    }

    fn negation(&mut self) -> Option<Formula> {
        match self.peek()? {
            Tok::Not => {
                self.pos += 1;
                Some(Formula::Not(Box::new(self.negation()?)))
            }
            Tok::LParen => {
                self.pos += 1;
                let f = self.implication()?;
                (self.peek() == Some(&Tok::RParen)).then(|| self.pos += 1)?;
                Some(f)
            }
            Tok::Word(_) => {
                let mut words = Vec::new();
                while let Some(Tok::Word(w)) = self.peek() {
                    words.push(w.to_lowercase());
                    self.pos += 1;
                }
                Some(Formula::Atom(words.join(" ")))
            }
            _ => None,
        }
    }
}

/// Parses a formula; `None` on malformed input.
pub fn parse_formula(text: &str) -> Option<Formula> {
    let mut p = FormulaParser {
        toks: lex(text),
        pos: 0,
    };
    let f = p.implication()?;
    (p.pos == p.toks.len()).then_some(f)
}

fn conjuncts(f: &Formula, out: &mut Vec<Formula>) {
    if let Formula::And(a, b) = f {
        conjuncts(a, out);
        conjuncts(b, out);
    } else {
        out.push(f.clone());
    }
}

fn disjuncts(f: &Formula, out: &mut Vec<Formula>) {
    if let Formula::Or(a, b) = f {
        disjuncts(a, out);
        disjuncts(b, out);
    } else {
        out.push(f.clone());
    }
}

/// Lexical tokens for substitution: identifier runs, number runs and single
/// symbols, whitespace dropped.
fn sub_tokens(text: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut cur = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() || c == '_' || c == '.' {
            cur.push(c.to_ascii_lowercase());
            continue;
        }
        if !cur.is_empty() {
            out.push(std::mem::take(&mut cur));
        }
        if !c.is_whitespace() {
            out.push(c.to_string());
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// True if `to` equals `from` with some occurrences of `lhs` replaced by `rhs`.
fn substitutes(from: &[String], to: &[String], lhs: &[String], rhs: &[String]) -> bool {
    let mut memo = BTreeMap::new();
    fn go(
        i: usize,
        j: usize,
        from: &[String],
        to: &[String],
        lhs: &[String],
        rhs: &[String],
        memo: &mut BTreeMap<(usize, usize), bool>,
    ) -> bool {
        if i == from.len() || j == to.len() {
            return i == from.len() && j == to.len();
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let mut ok = from[i] == to[j] && go(i + 1, j + 1, from, to, lhs, rhs, memo);
        if !ok && from[i..].starts_with(lhs) && to[j..].starts_with(rhs) {
            ok = go(i + lhs.len(), j + rhs.len(), from, to, lhs, rhs, memo);
        }
        memo.insert((i, j), ok);
        ok
    }
    go(0, 0, from, to, lhs, rhs, &mut memo)
}

fn equation_sides(text: &str) -> Option<(Vec<String>, Vec<String>)> {
    let toks = sub_tokens(text);
    let pos: Vec<usize> = toks
        .iter()
        .enumerate()
        .filter(|(_, t)| *t == "=")
        .map(|(i, _)| i)
        .collect();
    if pos.len() != 1 {
        return None;
    }
    let (l, r) = toks.split_at(pos[0]);
    let r = &r[1..];
    // Reject `<=`, `>=`, `!=`.
    if l.last().is_some_and(|t| t == "<" || t == ">" || t == "!") || l.is_empty() || r.is_empty() {
        return None;
    }
    Some((l.to_vec(), r.to_vec()))
}

fn ground_value(text: &str) -> Option<BigRational> {
    let e = parse_expr(text).ok()?;
    if !e.variables().is_empty() {
        return None;
    }
    to_poly(&e)?.as_constant()
}

/// Exact check of a ground arithmetic relation such as `3 * 4 = 12`.
pub fn arithmetic_holds(text: &str) -> Option<bool> {
    for rel in ["<=", ">=", "!=", "≠", "≤", "≥", "=", "<", ">"] {
        if let Some((l, r)) = text.split_once(rel) {
            let (a, b) = (ground_value(l)?, ground_value(r)?);
            return Some(match rel {
                "=" => a == b,
                "!=" | "≠" => a != b,
                "<" => a < b,
                ">" => a > b,
                "<=" | "≤" => a <= b,
                _ => a >= b,
            });
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepVerdict {
    pub id: String,
    pub rule: Rule,
    pub valid: bool,
    pub reason: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Soundness {
    pub score: f64,
    pub checked: usize,
    pub valid: usize,
    pub vacuous: bool,
    pub steps: Vec<StepVerdict>,
}

fn check_step(rule: Rule, text: &str, premises: &[&str]) -> Result<(), String> {
    let formula = |t: &str| parse_formula(t).ok_or_else(|| format!("cannot parse {t:?}"));
    match rule {
        Rule::Hypothesis => {
            if premises.is_empty() {
                Ok(())
            } else {
                Err("hypothesis with premises".into())
            }
        }
        Rule::Unknown => Err("no recognized rule".into()),
        Rule::ArithmeticFact => match arithmetic_holds(text) {
            Some(true) => Ok(()),
            Some(false) => Err("arithmetic relation is false".into()),
            None => Err("not a ground arithmetic relation".into()),
        },
        Rule::SubstitutionOfEquals => {
            let target = sub_tokens(text);
            for (i, eq) in premises.iter().enumerate() {
                let Some((l, r)) = equation_sides(eq) else { continue };
                for (j, other) in premises.iter().enumerate() {
                    if i == j {
                        continue;
                    }
                    let src = sub_tokens(other);
                    if substitutes(&src, &target, &l, &r) || substitutes(&src, &target, &r, &l) {
                        return Ok(());
                    }
                }
            }
            Err("not obtained by substituting an equation premise".into())
        }
        Rule::ModusPonens | Rule::AndIntro | Rule::AndElim | Rule::OrIntro => {
            let c = formula(text)?;
            let ps = premises.iter().map(|p| formula(p)).collect::<Result<Vec<_>, _>>()?;
            let ok = match rule {
                Rule::ModusPonens => ps.iter().any(|imp| match imp {
                    Formula::Implies(a, b) => **b == c && ps.contains(a),
                    _ => false,
                }),
                Rule::AndIntro => match &c {
                    Formula::And(..) => {
                        let mut parts = Vec::new();
                        conjuncts(&c, &mut parts);
                        parts.iter().all(|p| {
                            ps.contains(p)
                                || ps.iter().any(|q| {
                                    let mut qs = Vec::new();
                                    conjuncts(q, &mut qs);
                                    qs.len() > 1 && qs.contains(p)
                                })
                        })
                    }
                    _ => false,
                },
                Rule::AndElim => ps.iter().any(|p| {
                    let mut parts = Vec::new();
                    conjuncts(p, &mut parts);
                    parts.len() > 1 && parts.contains(&c)
                }),
                _ => {
                    let mut parts = Vec::new();
                    disjuncts(&c, &mut parts);
                    parts.len() > 1 && parts.iter().any(|d| ps.contains(d))
                }
            };
            if ok {
                Ok(())
            } else {
                Err("rule schema does not match premises".into())
            }
        }
    }
}

/// Checks every step of a proof trace.
///
/// Premises come from the statement's `premises` field, or else from its
/// in-edges, and must precede the step in topological order. Hypotheses are
/// not counted; a proof with nothing to check is vacuously sound.
pub fn check_soundness(trace: &ReasoningTrace) -> Soundness {
    let g = build_graph(trace);
    let mut rank = vec![0; g.len()];
    for (r, &v) in g.topological_order().iter().enumerate() {
        rank[v] = r;
    }
    let mut steps = Vec::new();
    for (i, s) in trace.statements.iter().enumerate() {
        let rule = Rule::parse(s.rule.as_deref());
        let premise_idx: Result<Vec<usize>, String> = match &s.premises {
            Some(ids) => ids
                .iter()
                .map(|id| trace.index_of(id).ok_or_else(|| format!("unknown premise {id:?}")))
                .collect(),
            None => Ok(g.parents(i).collect()),
        };
        let verdict = premise_idx.and_then(|idx| {
            if let Some(&bad) = idx.iter().find(|&&p| rank[p] >= rank[i]) {
                return Err(format!(
                    "premise {:?} does not precede the step",
                    trace.statements[bad].id
                ));
            }
            let texts: Vec<&str> = idx.iter().map(|&p| trace.statements[p].text.as_str()).collect();
            check_step(rule, &s.text, &texts)
        });
        steps.push(StepVerdict {
            id: s.id.clone(),
            rule,
            valid: verdict.is_ok(),
            reason: verdict.err(),
        });
    }
    let counted: Vec<&StepVerdict> = steps
        .iter()
        .filter(|v| !(v.rule == Rule::Hypothesis && v.valid))
        .collect();
    let checked = counted.len();
    let valid = counted.iter().filter(|v| v.valid).count();
    Soundness {
        score: if checked == 0 {
            1.0
        } else {
            valid as f64 / checked as f64
        },
        checked,
        valid,
        vacuous: checked == 0,
        steps,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoremScore {
    pub sc_proof: f64,
    pub soundness: f64,
    pub beta: f64,
    pub combined: f64,
    pub per_trace: Vec<(String, f64)>,
    pub warnings: Vec<String>,
}

pub fn combine_theorem(sc_proof: f64, soundness: f64, beta: f64) -> Result<f64, ConsistencyError> {
    check_unit("sc_proof", sc_proof)?;
    check_unit("soundness", soundness)?;
    check_unit("beta", beta)?;
    Ok(beta * sc_proof + (1.0 - beta) * soundness)
}

pub fn sc_theorem(
    set: &TraceSet,
    beta: f64,
    provider: &SimilarityProvider,
    iso: &IsoConfig,
) -> Result<TheoremScore, ConsistencyError> {
    check_unit("beta", beta)?;
    let map = align(set, provider)?;
    let sc_proof = psi_global(set, &map, iso)?;
    let checks: Vec<Soundness> = set.traces.par_iter().map(check_soundness).collect();
    let mut warnings = Vec::new();
    for (t, c) in set.traces.iter().zip(&checks) {
        if c.vacuous {
            warnings.push(format!(
                "proof {} has no checkable steps; soundness is vacuous",
                t.trace_id
            ));
        }
    }
    let soundness = checks.iter().map(|c| c.score).sum::<f64>() / checks.len() as f64;
    Ok(TheoremScore {
        sc_proof,
        soundness,
        beta,
        combined: combine_theorem(sc_proof, soundness, beta)?,
        per_trace: set
            .traces
            .iter()
            .zip(&checks)
            .map(|(t, c)| (t.trace_id.clone(), c.score))
            .collect(),
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Domain, Edge, Statement};

    fn proof(id: &str, steps: Vec<Statement>) -> ReasoningTrace {
        ReasoningTrace::new(id, "", steps, vec![])
    }

    fn hyp(id: &str, text: &str) -> Statement {
        Statement::claim(id, text).with_rule("hypothesis", &[])
    }

    #[test]
    fn formula_parsing() {
        let f = parse_formula("P -> Q & R").unwrap();
        assert_eq!(f.to_string(), "(p -> (q & r))");
        assert_eq!(parse_formula("a → b → c").unwrap().to_string(), "(a -> (b -> c))");
        assert_eq!(
            parse_formula("!(n is even) or m").unwrap().to_string(),
            "(!(n is even) | m)"
        );
        assert_eq!(parse_formula("x != 3").unwrap(), Formula::Atom("x != 3".into()));
        assert!(parse_formula("a -> ").is_none());
        assert!(parse_formula("(a & b").is_none());
    }

    #[test]
    fn modus_ponens_valid() {
        let t = proof(
            "p",
            vec![
                hyp("h1", "P"),
                hyp("h2", "P -> Q"),
                Statement::claim("c", "Q").with_rule("modus_ponens", &["h1", "h2"]),
            ],
        );
        let s = check_soundness(&t);
        assert_eq!((s.checked, s.valid, s.score), (1, 1, 1.0));
    }

    #[test]
    fn wrong_implication_invalid() {
        // Only P -> R is available; P -> Q does not follow.
        let t = proof(
            "p",
            vec![
                hyp("h", "P -> R"),
                Statement::claim("c", "P -> Q").with_rule("modus_ponens", &["h"]),
            ],
        );
        let s = check_soundness(&t);
        assert_eq!(s.score, 0.0);
        assert!(!s.steps[1].valid);
    }

    #[test]
    fn all_hypotheses_vacuous() {
        let s = check_soundness(&proof("p", vec![hyp("a", "A"), hyp("b", "B")]));
        assert!(s.vacuous);
        assert_eq!(s.score, 1.0);
    }

    #[test]
    fn conjunction_and_disjunction_rules() {
        let t = proof(
            "p",
            vec![
                hyp("a", "A"),
                hyp("b", "B"),
                Statement::claim("ab", "A & B").with_rule("and_intro", &["a", "b"]),
                Statement::claim("b2", "B").with_rule("and_elim", &["ab"]),
                Statement::claim("ac", "A | C").with_rule("or_intro", &["a"]),
                Statement::claim("bad", "C").with_rule("and_elim", &["ab"]),
            ],
        );
        let s = check_soundness(&t);
        assert_eq!((s.checked, s.valid), (4, 3));
        assert_eq!(s.score, 0.75);
    }

    #[test]
    fn substitution_and_arithmetic() {
        let t = proof(
            "p",
            vec![
                hyp("e", "x = 3"),
                hyp("f", "y = 2 * x + 1"),
                Statement::claim("g", "y = 2 * 3 + 1").with_rule("substitution_of_equals", &["e", "f"]),
                Statement::claim("h", "2 * 3 + 1 = 7").with_rule("arithmetic_fact", &[]),
                Statement::claim("i", "2 * 3 + 1 = 8").with_rule("arithmetic_fact", &[]),
                Statement::claim("j", "y = 2 * 4 + 1").with_rule("substitution_of_equals", &["e", "f"]),
            ],
        );
        let s = check_soundness(&t);
        let valid: Vec<bool> = s.steps.iter().map(|v| v.valid).collect();
        assert_eq!(valid, vec![true, true, true, true, false, false]);
        assert_eq!(arithmetic_holds("1/3 + 1/6 = 0.5"), Some(true));
        assert_eq!(arithmetic_holds("2 ≤ 1"), Some(false));
        assert_eq!(arithmetic_holds("x = 1"), None);
    }

    #[test]
    fn premises_default_to_in_edges_and_must_precede() {
        let mut t = proof(
            "p",
            vec![
                hyp("a", "A"),
                hyp("ab", "A -> B"),
                Statement::claim("b", "B").with_rule("modus_ponens", &[]),
            ],
        );
        t.statements[2].premises = None;
        t.edges = vec![Edge::new("a", "b"), Edge::new("ab", "b")];
        assert_eq!(check_soundness(&t).score, 1.0);

        // A premise that is not earlier in the proof.
        let t2 = proof(
            "p",
            vec![
                Statement::claim("b", "B").with_rule("modus_ponens", &["a", "ab"]),
                hyp("a", "A"),
                hyp("ab", "A -> B"),
            ],
        );
        let mut t2 = t2;
        t2.edges = vec![Edge::new("b", "a")];
        assert_eq!(check_soundness(&t2).score, 0.0);
    }

    #[test]
    fn untagged_steps_are_invalid() {
        let s = check_soundness(&proof("p", vec![hyp("a", "A"), Statement::claim("b", "B")]));
        assert_eq!(s.steps[1].rule, Rule::Unknown);
        assert_eq!(s.score, 0.0);
    }

    #[test]
    fn renaming_ids_does_not_change_soundness() {
        let mk = |p: &str| {
            proof(
                "p",
                vec![
                    hyp(&format!("{p}1"), "P"),
                    hyp(&format!("{p}2"), "P -> Q"),
                    Statement::claim(format!("{p}3"), "Q")
                        .with_rule("modus_ponens", &[&format!("{p}1"), &format!("{p}2")]),
                    Statement::claim(format!("{p}4"), "R"),
                ],
            )
        };
        assert_eq!(check_soundness(&mk("a")).score, check_soundness(&mk("zz")).score);
    }

    fn sound_proof(id: &str) -> ReasoningTrace {
        let mut t = proof(
            id,
            vec![
                hyp("h1", "P"),
                hyp("h2", "P -> Q"),
                Statement::claim("c", "Q").with_rule("modus_ponens", &["h1", "h2"]),
            ],
        );
        t.edges = vec![Edge::new("h1", "c"), Edge::new("h2", "c")];
        t
    }

    #[test]
    fn theorem_score_combination() {
        assert!((combine_theorem(0.8, 1.0, 0.5).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(combine_theorem(0.3, 0.9, 1.0).unwrap(), 0.3);
        let set = TraceSet::new(
            "q",
            Domain::Theorem,
            vec![sound_proof("a"), sound_proof("b"), sound_proof("c")],
        );
        let s = sc_theorem(&set, 0.5, &SimilarityProvider::default(), &IsoConfig::default()).unwrap();
        assert_eq!((s.sc_proof, s.soundness, s.combined), (1.0, 1.0, 1.0));
        let one = TraceSet::new("q", Domain::Theorem, vec![sound_proof("a")]);
        assert!(matches!(
            sc_theorem(&one, 0.5, &SimilarityProvider::default(), &IsoConfig::default()),
            Err(ConsistencyError::DegenerateSample { .. })
        ));
    }

    #[test]
    fn inserting_invalid_step_lowers_soundness() {
        let p = SimilarityProvider::default();
        let base = TraceSet::new("q", Domain::Theorem, vec![sound_proof("a"), sound_proof("b")]);
        let mut worse = base.clone();
        for t in &mut worse.traces {
            t.statements
                .push(Statement::claim("x", "Z").with_rule("and_elim", &["c"]));
        }
        for beta in [0.0, 0.3, 0.7] {
            let a = sc_theorem(&base, beta, &p, &IsoConfig::default()).unwrap();
            let b = sc_theorem(&worse, beta, &p, &IsoConfig::default()).unwrap();
            assert!(b.soundness < a.soundness);
            assert!(b.combined <= a.combined);
        }
    }
}
