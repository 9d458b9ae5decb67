use proptest::prelude::*;
use scv_core::consistency::ScoringConfig;
use scv_core::equivalence::SimilarityProvider;
use scv_core::repair::{repair_in_set, RepairError};
use scv_core::trace::{Domain, Edge, ReasoningTrace, Statement, TraceSet};

const PHRASES: [&str; 8] = [
    "n is even",
    "n is odd",
    "n squared is even",
    "n squared is odd",
    "n equals two k",
    "four k squared",
    "so the claim holds",
    "contradiction",
];

fn arb_trace(id: usize) -> impl Strategy<Value = ReasoningTrace> {
    (
        prop::collection::vec(0usize..PHRASES.len(), 1..=5),
        prop::collection::vec(any::<bool>(), 10),
        0usize..2,
    )
        .prop_map(move |(picks, bits, ans)| {
            let stmts: Vec<Statement> = picks
                .iter()
                .enumerate()
                .map(|(i, &p)| Statement::claim(format!("s{i}"), PHRASES[p]))
                .collect();
            let mut edges = Vec::new();
            let mut b = 0;
            for u in 0..stmts.len() {
                for v in (u + 1)..stmts.len() {
                    if bits[b % bits.len()] {
                        edges.push(Edge::new(format!("s{u}"), format!("s{v}")));
                    }
                    b += 1;
                }
            }
            ReasoningTrace::new(format!("t{id}"), ans.to_string(), stmts, edges)
        })
}

fn arb_set() -> impl Strategy<Value = (TraceSet, usize)> {
    (2usize..=6)
        .prop_flat_map(|k| ((0..k).map(arb_trace).collect::<Vec<_>>(), 0..k))
        .prop_map(|(traces, target)| (TraceSet::new("q", Domain::Generic, traces), target))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, rng_seed: proptest::test_runner::RngSeed::Fixed(21), ..ProptestConfig::default() })]

    #[test]
    fn repair_is_valid_monotone_and_idempotent((set, target) in arb_set(), threshold in prop::sample::select(vec![0.3, 0.5, 0.7])) {
        let p = SimilarityProvider::default();
        let cfg = ScoringConfig::default();
        let id = set.traces[target].trace_id.clone();
        match repair_in_set(&id, &set, &p, &cfg, threshold) {
            Err(RepairError::Irreparable(_)) => {}
            Err(e) => prop_assert!(false, "unexpected error {e}"),
            Ok(once) => {
                prop_assert!(once.plan.trace.validate().is_ok());
                prop_assert!(once.set.validate().is_ok());
                prop_assert!(once.after_mean >= once.before_mean - 1e-12);
                let twice = repair_in_set(&id, &once.set, &p, &cfg, threshold).unwrap();
                prop_assert_eq!(&twice.plan.trace, &once.plan.trace);
            }
        }
    }
}
