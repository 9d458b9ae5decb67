//! Error propagation over reasoning DAGs under the worst-case model: a step
//! is wrong if it errs itself or any parent is wrong.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Serialize, Serializer};

use super::{check, count_trials, SimError, SimResult, SimSpec};
use crate::sampler::sub_rng;

#[derive(Debug, Clone, PartialEq)]
pub enum DagSpec {
    Chain(usize),
    Diamond,
    /// `n` nodes; every node after the first has one parent chosen uniformly
    /// among earlier nodes, plus each other earlier node with probability `p`.
    Random {
        n: usize,
        p: f64,
    },
}

impl fmt::Display for DagSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DagSpec::Chain(t) => write!(f, "chain:{t}"),
            DagSpec::Diamond => write!(f, "diamond"),
            DagSpec::Random { n, p } => write!(f, "random:{n},{p}"),
        }
    }
}

impl Serialize for DagSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for DagSpec {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, SimError> {
        let err = || SimError::Dag(s.to_string());
        let s = s.trim();
        if s == "diamond" {
            return Ok(DagSpec::Diamond);
        }
        if let Some(t) = s.strip_prefix("chain:") {
            let t: usize = t.trim().parse().map_err(|_| err())?;
            return if t >= 1 { Ok(DagSpec::Chain(t)) } else { Err(err()) };
        }
        if let Some(rest) = s.strip_prefix("random:") {
            let (n, p) = rest.split_once(',').ok_or_else(err)?;
            let n: usize = n.trim().parse().map_err(|_| err())?;
            let p: f64 = p.trim().parse().map_err(|_| err())?;
            return if n >= 1 && (0.0..=1.0).contains(&p) {
                Ok(DagSpec::Random { n, p })
            } else {
                Err(err())
            };
        }
        Err(err())
    }
}

/// Nodes in topological order; the last node is the final conclusion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Dag {
    pub parents: Vec<Vec<usize>>,
}

impl Dag {
    pub fn nodes(&self) -> usize {
        self.parents.len()
    }

    pub fn edges(&self) -> usize {
        self.parents.iter().map(Vec::len).sum()
    }

    pub fn max_in_degree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Number of nodes whose error reaches the final node, itself included.
    pub fn final_ancestry(&self) -> usize {
        let n = self.nodes();
        if n == 0 {
            return 0;
        }
        let mut seen = vec![false; n];
        let mut stack = vec![n - 1];
        while let Some(v) = stack.pop() {
            if !std::mem::replace(&mut seen[v], true) {
                stack.extend(&self.parents[v]);
            }
        }
        seen.iter().filter(|s| **s).count()
    }
}

impl DagSpec {
    /// Builds the graph; random DAGs draw from a stream tied to `seed`.
    pub fn build(&self, seed: u64) -> Dag {
        match *self {
            DagSpec::Chain(t) => Dag {
                parents: (0..t).map(|i| if i == 0 { vec![] } else { vec![i - 1] }).collect(),
            },
            DagSpec::Diamond => Dag {
                parents: vec![vec![], vec![0], vec![0], vec![1, 2]],
            },
            DagSpec::Random { n, p } => {
                let mut rng = sub_rng(seed, u64::MAX);
                let parents = (0..n)
                    .map(|j| {
                        if j == 0 {
                            return vec![];
                        }
                        let first = rng.random_range(0..j);
                        let mut ps: Vec<usize> = (0..j).filter(|&i| i == first || rng.random_bool(p)).collect();
                        ps.dedup();
                        ps
                    })
                    .collect();
                Dag { parents }
            }
        }
    }
}

/// `1 - (1-eps)^T (1 - d eps)^(|E| - T + 1)`.
pub fn propagation_bound(dag: &Dag, epsilon: f64) -> Result<f64, SimError> {
    let (t, e, d) = (dag.nodes() as i32, dag.edges() as i32, dag.max_in_degree() as f64);
    if d * epsilon >= 1.0 {
        return Err(SimError::BoundInvalid { product: d * epsilon });
    }
    Ok(1.0 - (1.0 - epsilon).powi(t) * (1.0 - d * epsilon).powi(e - t + 1))
}

fn final_error(dag: &Dag, epsilon: f64, rng: &mut impl Rng) -> bool {
    let mut bad = vec![false; dag.nodes()];
    for v in 0..dag.nodes() {
        let own = rng.random_bool(epsilon);
        bad[v] = own || dag.parents[v].iter().any(|&p| bad[p]);
    }
    bad.last().copied().unwrap_or(false)
}

fn empirical_final_error(dag: &Dag, epsilon: f64, trials: usize, seed: u64) -> usize {
    count_trials(trials, seed, |rng| final_error(dag, epsilon, rng))
}

pub fn simulate_propagation(spec: &SimSpec) -> Result<SimResult, SimError> {
    check("epsilon", spec.epsilon, (0.0..=1.0).contains(&spec.epsilon), "[0, 1]")?;
    let dag = spec.dag.build(spec.seed);
    let bound = propagation_bound(&dag, spec.epsilon)?;
    let hits = empirical_final_error(&dag, spec.epsilon, spec.trials, spec.seed);
    let exact = 1.0 - (1.0 - spec.epsilon).powi(dag.final_ancestry() as i32);
    Ok(SimResult::new(
        hits as f64 / spec.trials as f64,
        bound,
        spec.trials,
        Some(exact),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenefitResult {
    pub error_at_epsilon: f64,
    pub error_at_epsilon_prime: f64,
    pub empirical_ratio: f64,
    /// Closed-form ratio of final-error probabilities.
    pub exact_ratio: f64,
    /// `((1 - eps') / (1 - eps))^T`.
    pub factor: f64,
    /// Whether the exact ratio reaches the factor.
    pub factor_reached: bool,
    pub trials: usize,
}

/// Compares final-error rates at `epsilon` and a smaller `epsilon_prime`.
pub fn intermediate_benefit(spec: &SimSpec, epsilon_prime: f64) -> Result<BenefitResult, SimError> {
    let eps = spec.epsilon;
    check("epsilon", eps, (0.0..=1.0).contains(&eps), "[0, 1]")?;
    check(
        "epsilon_prime",
        epsilon_prime,
        (0.0..=eps).contains(&epsilon_prime),
        "[0, epsilon]",
    )?;
    let dag = spec.dag.build(spec.seed);
    let t = dag.nodes() as i32;
    let a = empirical_final_error(&dag, eps, spec.trials, spec.seed) as f64 / spec.trials as f64;
    // A separate stream family for the second arm.
    let b = empirical_final_error(&dag, epsilon_prime, spec.trials, spec.seed ^ 0x9e37_79b9_7f4a_7c15) as f64
        / spec.trials as f64;
    if b == 0.0 {
        return Err(SimError::Degenerate { trials: spec.trials });
    }
    let anc = dag.final_ancestry() as i32;
    let exact = |e: f64| 1.0 - (1.0 - e).powi(anc);
    let exact_ratio = exact(eps) / exact(epsilon_prime);
    let factor = ((1.0 - epsilon_prime) / (1.0 - eps)).powi(t);
    Ok(BenefitResult {
        error_at_epsilon: a,
        error_at_epsilon_prime: b,
        empirical_ratio: a / b,
        exact_ratio,
        factor,
        factor_reached: exact_ratio >= factor - 1e-12,
        trials: spec.trials,
    })
}
