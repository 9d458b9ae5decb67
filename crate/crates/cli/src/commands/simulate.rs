use clap::{Args, ValueEnum};

use scv_core::simlab::{
    convergence_check, entropy_detail, intermediate_benefit, sample_complexity, simulate_majority,
    simulate_propagation, structural_correlation, DagSpec, SimResult, SimSpec, CONVERGENCE_DELTAS, ENTROPY_TOLERANCE,
};

use crate::error::{CliResult, Fail};
use crate::output::num;
use crate::Context;

pub const TAU_GRID: [f64; 4] = [0.1, 0.2, 0.3, 0.4];
pub const K_GRID: [usize; 5] = [1, 3, 5, 11, 25];
pub const CONVERGENCE_K_GRID: [usize; 3] = [10, 50, 200];

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Majority,
    Propagation,
    Benefit,
    Entropy,
    Convergence,
    Structural,
}

impl Kind {
    fn name(self) -> &'static str {
        match self {
            Kind::Majority => "majority",
            Kind::Propagation => "propagation",
            Kind::Benefit => "benefit",
            Kind::Entropy => "entropy",
            Kind::Convergence => "convergence",
            Kind::Structural => "structural",
        }
    }
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(value_enum)]
    kind: Kind,
    /// Per-sample error rate (majority).
    #[arg(long, env = "SCV_TAU")]
    tau: Option<f64>,
    /// Per-step error rate (propagation, benefit).
    #[arg(long, env = "SCV_EPSILON")]
    epsilon: Option<f64>,
    /// Reduced per-step error rate (benefit).
    #[arg(long, env = "SCV_EPSILON_PRIME")]
    epsilon_prime: Option<f64>,
    #[arg(long = "k", env = "SCV_K")]
    k: Option<usize>,
    #[arg(long, env = "SCV_TRIALS")]
    trials: Option<usize>,
    /// chain:T, diamond or random:n,p
    #[arg(long, env = "SCV_DAG")]
    dag: Option<DagSpec>,
    /// True statement frequency (convergence).
    #[arg(long, env = "SCV_FACTUALITY")]
    factuality: Option<f64>,
    /// Target error probability used for the required sample count (majority).
    #[arg(long, env = "SCV_DELTA_TARGET")]
    delta_target: Option<f64>,
    /// Sweep the standard grid instead of a single cell (majority: tau x k;
    /// convergence: k).
    #[arg(long)]
    grid: bool,
}

fn tail(r: &SimResult) -> [String; 4] {
    [
        num(r.empirical),
        num(r.theoretical_bound),
        num(r.ci_halfwidth),
        r.satisfied.to_string(),
    ]
}

fn exact(r: &SimResult) -> String {
    r.exact.map(num).unwrap_or_default()
}

pub fn run(ctx: &Context, a: &SimulateArgs) -> CliResult<()> {
    let c = &ctx.config;
    let d = SimSpec::default();
    let spec = SimSpec {
        tau: c.pick(a.tau, "tau", d.tau)?,
        epsilon: c.pick(a.epsilon, "epsilon", d.epsilon)?,
        k: c.pick(a.k, "k", d.k)?,
        trials: c.pick(a.trials, "trials", d.trials)?,
        dag: c.pick(a.dag.clone(), "dag", d.dag.clone())?,
        delta_target: c.pick(a.delta_target, "delta-target", d.delta_target)?,
        seed: ctx.seed,
    };
    if spec.trials == 0 {
        return Err(Fail::invalid("--trials must be at least 1"));
    }
    let (header, rows, json): (Vec<&str>, Vec<Vec<String>>, serde_json::Value) = match a.kind {
        Kind::Majority => {
            let cells: Vec<(f64, usize)> = if a.grid {
                TAU_GRID
                    .iter()
                    .flat_map(|&t| K_GRID.iter().map(move |&k| (t, k)))
                    .collect()
            } else {
                vec![(spec.tau, spec.k)]
            };
            let mut rows = Vec::new();
            let mut results = Vec::new();
            for (tau, k) in cells {
                let r = simulate_majority(&SimSpec { tau, k, ..spec.clone() })?;
                let need = sample_complexity(tau, spec.delta_target)?.ceil();
                let mut row = vec![num(tau), k.to_string(), spec.trials.to_string(), exact(&r), num(need)];
                row.extend(tail(&r));
                rows.push(row);
                results.push(serde_json::json!({"tau": tau, "k": k, "required_k": need, "result": r}));
            }
            let h = vec![
                "tau",
                "k",
                "trials",
                "exact",
                "required_k",
                "empirical",
                "bound",
                "ci",
                "satisfied",
            ];
            (h, rows, serde_json::Value::Array(results))
        }
        Kind::Propagation => {
            let g = spec.dag.build(spec.seed);
            let r = simulate_propagation(&spec)?;
            let mut row = vec![
                spec.dag.to_string(),
                num(spec.epsilon),
                g.nodes().to_string(),
                g.edges().to_string(),
                g.max_in_degree().to_string(),
                spec.trials.to_string(),
                exact(&r),
            ];
            row.extend(tail(&r));
            let h = vec![
                "dag",
                "epsilon",
                "nodes",
                "edges",
                "max_in_degree",
                "trials",
                "exact",
                "empirical",
                "bound",
                "ci",
                "satisfied",
            ];
            (
                h,
                vec![row],
                serde_json::json!({"spec": spec, "dag_parents": g.parents, "result": r}),
            )
        }
        Kind::Benefit => {
            let eps_prime = c
                .pick_opt(a.epsilon_prime, "epsilon-prime")?
                .ok_or_else(|| Fail::invalid("benefit needs --epsilon-prime"))?;
            let b = intermediate_benefit(&spec, eps_prime)?;
            let row = vec![
                spec.dag.to_string(),
                num(spec.epsilon),
                num(eps_prime),
                spec.trials.to_string(),
                num(b.error_at_epsilon),
                num(b.error_at_epsilon_prime),
                num(b.empirical_ratio),
                num(b.exact_ratio),
                num(b.factor),
                b.factor_reached.to_string(),
            ];
            let h = vec![
                "dag",
                "epsilon",
                "epsilon_prime",
                "trials",
                "error_epsilon",
                "error_epsilon_prime",
                "empirical_ratio",
                "exact_ratio",
                "factor",
                "factor_reached",
            ];
            (
                h,
                vec![row],
                serde_json::json!({"spec": spec, "epsilon_prime": eps_prime, "result": b}),
            )
        }
        Kind::Entropy => {
            let r = entropy_detail(spec.trials, spec.seed);
            let frac = r.violations as f64 / r.trials as f64;
            let row = vec![
                spec.trials.to_string(),
                r.violations.to_string(),
                num(r.max_increase),
                num(r.max_chain_gap),
                num(ENTROPY_TOLERANCE),
                num(frac),
                "0".into(),
                "0".into(),
                (r.violations == 0).to_string(),
            ];
            let h = vec![
                "trials",
                "violations",
                "max_increase",
                "max_chain_gap",
                "tolerance",
                "empirical",
                "bound",
                "ci",
                "satisfied",
            ];
            (h, vec![row], serde_json::json!({"seed": spec.seed, "result": r}))
        }
        Kind::Convergence => {
            let f = c.pick(a.factuality, "factuality", 0.7)?;
            let ks: Vec<usize> = if a.grid {
                CONVERGENCE_K_GRID.to_vec()
            } else {
                vec![spec.k]
            };
            let mut rows = Vec::new();
            let mut results = Vec::new();
            for k in ks {
                for delta in CONVERGENCE_DELTAS {
                    let r = convergence_check(&SimSpec { k, ..spec.clone() }, f, delta)?;
                    let mut row = vec![num(f), k.to_string(), num(delta), spec.trials.to_string(), exact(&r)];
                    row.extend(tail(&r));
                    rows.push(row);
                    results.push(serde_json::json!({"factuality": f, "k": k, "delta": delta, "result": r}));
                }
            }
            let h = vec![
                "factuality",
                "k",
                "delta",
                "trials",
                "exact",
                "empirical",
                "bound",
                "ci",
                "satisfied",
            ];
            (h, rows, serde_json::Value::Array(results))
        }
        Kind::Structural => {
            let r = structural_correlation(spec.trials, spec.k, 0.6, spec.seed)?;
            let deciles: Vec<String> = r.decile_means.iter().map(|m| num(*m)).collect();
            let row = vec![
                r.sets.to_string(),
                spec.k.to_string(),
                num(r.rho),
                num(r.p_value),
                deciles.join(";"),
                r.satisfied.to_string(),
            ];
            (
                vec!["sets", "k", "rho", "p_value", "decile_means", "satisfied"],
                vec![row],
                serde_json::json!(r),
            )
        }
    };
    let name = a.kind.name();
    ctx.output.json(&format!("simulate_{name}.json"), &json)?;
    ctx.output.csv(&format!("simulate_{name}.csv"), &header, &rows)
}
