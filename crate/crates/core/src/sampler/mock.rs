//! Deterministic generator that corrupts a ground-truth trace.
//!
//! Each statement is corrupted independently with the corruption rate, and
//! corruption spreads to every descendant. A corrupted statement gets fresh
//! text that is not equivalent to anything else. The final answer is wrong
//! exactly when the last statement is corrupted.

use rand::Rng;

use super::{sub_rng, BackendError, GeneratorBackend};
use crate::trace::{build_graph, ReasoningTrace, Statement};

#[derive(Debug, Clone)]
pub struct MockBackend {
    truth: ReasoningTrace,
    corruption: f64,
    seed: u64,
}

impl MockBackend {
    pub fn new(truth: ReasoningTrace, corruption: f64, seed: u64) -> Self {
        MockBackend {
            truth,
            corruption: corruption.clamp(0.0, 1.0),
            seed,
        }
    }

    pub fn truth(&self) -> &ReasoningTrace {
        &self.truth
    }

    /// Whether `answer` matches the ground-truth final answer.
    pub fn is_correct(&self, answer: &str) -> bool {
        answer == self.truth.final_answer
    }
}

fn wrong_answer(truth: &str, bump: u32, sign: bool) -> String {
    match truth.trim().parse::<f64>() {
        Ok(v) => {
            let d = f64::from(bump) * if sign { 1.0 } else { -1.0 };
            let w = v + d;
            if w.fract() == 0.0 && w.abs() < 1e15 {
                format!("{}", w as i64)
            } else {
                format!("{w}")
            }
        }
        Err(_) => format!("{truth} (alt {bump})"),
    }
}

impl GeneratorBackend for MockBackend {
    fn name(&self) -> &'static str {
        "mock"
    }

    fn generate(&self, _query: &str, index: usize) -> Result<ReasoningTrace, BackendError> {
        let mut rng = sub_rng(self.seed, index as u64);
        let g = build_graph(&self.truth);
        let mut bad = vec![false; g.len()];
        for &v in g.topological_order() {
            let own = rng.random_bool(self.corruption);
            bad[v] = own || g.parents(v).any(|p| bad[p]);
        }
        let mut out = self.truth.clone();
        for (v, s) in out.statements.iter_mut().enumerate() {
            if bad[v] {
                let tag: u64 = rng.random();
                *s = Statement::claim(s.id.clone(), format!("unsupported step z{tag:016x}"));
            }
        }
        if g.topological_order().last().is_some_and(|&v| bad[v]) {
            let bump = rng.random_range(1..=3);
            out.final_answer = wrong_answer(&self.truth.final_answer, bump, rng.random_bool(0.5));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Edge;

    fn truth() -> ReasoningTrace {
        ReasoningTrace::chain("truth", "12", &["a b c", "d e f", "g h i", "j k l"])
    }

    #[test]
    fn zero_rate_reproduces_truth() {
        let m = MockBackend::new(truth(), 0.0, 3);
        let t = m.generate("q", 5).unwrap();
        assert_eq!(t.statements, truth().statements);
        assert!(m.is_correct(&t.final_answer));
    }

    #[test]
    fn full_rate_corrupts_everything() {
        let m = MockBackend::new(truth(), 1.0, 3);
        let t = m.generate("q", 0).unwrap();
        assert!(t.statements.iter().all(|s| s.text.starts_with("unsupported step")));
        assert_ne!(t.final_answer, "12");
        let v: i64 = t.final_answer.parse().unwrap();
        assert!((9..=15).contains(&v) && v != 12);
        t.validate().unwrap();
    }

    #[test]
    fn corruption_propagates_to_descendants() {
        let m = MockBackend::new(truth(), 0.3, 9);
        for i in 0..200 {
            let t = m.generate("q", i).unwrap();
            let bad: Vec<bool> = t.statements.iter().map(|s| s.text.starts_with("unsupported")).collect();
            for w in bad.windows(2) {
                assert!(!w[0] || w[1], "chain corruption must spread forward");
            }
            assert_eq!(bad[3], t.final_answer != "12");
        }
    }

    #[test]
    fn deterministic_per_index() {
        let m = MockBackend::new(truth(), 0.5, 77);
        assert_eq!(m.generate("q", 4).unwrap(), m.generate("q", 4).unwrap());
        let differ = (0..20).any(|i| m.generate("q", i).unwrap() != m.generate("q", i + 1).unwrap());
        assert!(differ);
    }

    #[test]
    fn branch_corruption_spares_siblings() {
        let t = ReasoningTrace::new(
            "truth",
            "x",
            vec![
                Statement::claim("r", "root"),
                Statement::claim("a", "left"),
                Statement::claim("b", "right"),
            ],
            vec![Edge::new("r", "a"), Edge::new("r", "b")],
        );
        let m = MockBackend::new(t, 0.5, 1);
        let mut saw_one_sided = false;
        for i in 0..100 {
            let s = m.generate("q", i).unwrap();
            let bad: Vec<bool> = s.statements.iter().map(|x| x.text.starts_with("unsupported")).collect();
            if bad[0] {
                assert!(bad[1] && bad[2]);
            }
            saw_one_sided |= !bad[0] && bad[1] != bad[2];
        }
        assert!(saw_one_sided);
        assert_eq!(wrong_answer("x", 2, true), "x (alt 2)");
        assert_eq!(wrong_answer("2.5", 1, false), "1.5");
    }
}
