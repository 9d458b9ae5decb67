//! Exact conditional entropies over small random joint distributions of
//! (X, Y, C1, ..., Cn). Adding constraints never raises the uncertainty of Y,
//! and the total drop equals the sum of conditional mutual informations.

use std::collections::BTreeMap;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::SimResult;
use crate::sampler::sub_rng;

pub const ENTROPY_TOLERANCE: f64 = 1e-9;
const X: usize = 0;
const Y: usize = 1;

/// Full joint table over variables with the given alphabet sizes, stored in
/// row-major order. Variable 0 is X, 1 is Y, the rest are constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub dims: Vec<usize>,
    pub probs: Vec<f64>,
}

impl JointDistribution {
    fn outcomes(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        self.probs.iter().enumerate().map(|(mut flat, &p)| {
            let mut idx = vec![0; self.dims.len()];
            for (slot, &d) in idx.iter_mut().zip(&self.dims).rev() {
                *slot = flat % d;
                flat /= d;
            }
            (idx, p)
        })
    }

    /// Marginal over `vars`, keyed by their values.
    pub fn marginal(&self, vars: &[usize]) -> BTreeMap<Vec<usize>, f64> {
        let mut m = BTreeMap::new();
        for (idx, p) in self.outcomes() {
            *m.entry(vars.iter().map(|&v| idx[v]).collect()).or_insert(0.0) += p;
        }
        m
    }

    /// `H(target | given)` in nats.
    pub fn conditional_entropy(&self, target: usize, given: &[usize]) -> f64 {
        let mut joint_vars = given.to_vec();
        joint_vars.push(target);
        let joint = self.marginal(&joint_vars);
        let cond = self.marginal(given);
        joint
            .iter()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| p * (cond[&k[..given.len()]] / p).ln())
            .sum()
    }

    /// `I(a; b | given)` from its divergence form.
    pub fn conditional_mutual_information(&self, a: usize, b: usize, given: &[usize]) -> f64 {
        let g = given.len();
        let mut vars = given.to_vec();
        vars.extend([a, b]);
        let abz = self.marginal(&vars);
        let az = self.marginal(&[given, &[a]].concat());
        let bz = self.marginal(&[given, &[b]].concat());
        let z = self.marginal(given);
        abz.iter()
            .filter(|(_, &p)| p > 0.0)
            .map(|(k, &p)| {
                let zk = &k[..g];
                let ak = [zk, &k[g..g + 1]].concat();
                let bk = [zk, &k[g + 1..]].concat();
                p * (p * z[zk] / (az[&ak] * bz[&bk])).ln()
            })
            .sum()
    }

    fn from_weights(dims: Vec<usize>, weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        JointDistribution {
            dims,
            probs: weights.into_iter().map(|w| w / total).collect(),
        }
    }

    /// Random joint; some draws make a constraint a copy of Y or independent
    /// of everything so the equality cases are exercised too.
    pub fn random(rng: &mut impl Rng, constraints: usize) -> Self {
        let mut dims = vec![2, 4];
        dims.extend(std::iter::repeat_n(3, constraints));
        let cells: usize = dims.iter().product();
        let sparse = rng.random_bool(0.3);
        let mut weights: Vec<f64> = (0..cells)
            .map(|_| {
                if sparse && rng.random_bool(0.5) {
                    0.0
                } else {
                    rng.random::<f64>()
                }
            })
            .collect();
        if weights.iter().all(|&w| w == 0.0) {
            weights[0] = 1.0;
        }
        let mut d = Self::from_weights(dims, weights);
        match rng.random_range(0..4) {
            0 => d = d.with_copy_of_y(2),
            1 => d = d.with_independent(2 + rng.random_range(0..constraints), rng),
            _ => {}
        }
        d
    }

    /// Sets constraint `c` equal to Y mod its alphabet.
    fn with_copy_of_y(&self, c: usize) -> Self {
        let mut w = vec![0.0; self.probs.len()];
        for (mut idx, p) in self.outcomes() {
            idx[c] = idx[Y] % self.dims[c];
            let flat = idx.iter().zip(&self.dims).fold(0, |acc, (&v, &d)| acc * d + v);
            w[flat] += p;
        }
        Self::from_weights(self.dims.clone(), w)
    }

    /// Replaces constraint `c` by an independent draw.
    fn with_independent(&self, c: usize, rng: &mut impl Rng) -> Self {
        let others: Vec<usize> = (0..self.dims.len()).filter(|&v| v != c).collect();
        let rest = self.marginal(&others);
        let q: Vec<f64> = (0..self.dims[c]).map(|_| rng.random::<f64>() + 0.01).collect();
        let qs: f64 = q.iter().sum();
        let w = self
            .outcomes()
            .map(|(idx, _)| {
                let key: Vec<usize> = others.iter().map(|&v| idx[v]).collect();
                rest[&key] * q[idx[c]] / qs
            })
            .collect();
        Self::from_weights(self.dims.clone(), w)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub trials: usize,
    /// Distributions with at least one violated inequality.
    pub violations: usize,
    /// Largest increase of conditional entropy after adding a constraint.
    pub max_increase: f64,
    /// Largest gap between the total drop and the summed informations.
    pub max_chain_gap: f64,
}

/// Conditional entropies `H(Y | X, C1..Ci)` for i = 0..=n, and the
/// informations `I(Y; Ci | X, C1..Ci-1)`.
pub fn entropy_profile(d: &JointDistribution) -> (Vec<f64>, Vec<f64>) {
    let n = d.dims.len() - 2;
    let mut given = vec![X];
    let mut h = vec![d.conditional_entropy(Y, &given)];
    let mut info = Vec::with_capacity(n);
    for c in 2..2 + n {
        info.push(d.conditional_mutual_information(Y, c, &given));
        given.push(c);
        h.push(d.conditional_entropy(Y, &given));
    }
    (h, info)
}

pub fn entropy_detail(trials: usize, seed: u64) -> EntropyReport {
    let per: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let d = JointDistribution::random(&mut sub_rng(seed, i as u64), 3);
            let (h, info) = entropy_profile(&d);
            let increase = h.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
            let negative_info = info.iter().map(|i| -i).fold(f64::NEG_INFINITY, f64::max);
            let gap = (h[0] - h[h.len() - 1] - info.iter().sum::<f64>()).abs();
            (increase.max(negative_info), gap)
        })
        .collect();
    let violations = per
        .iter()
        .filter(|(inc, gap)| *inc > ENTROPY_TOLERANCE || *gap > ENTROPY_TOLERANCE)
        .count();
    EntropyReport {
        trials,
        violations,
        max_increase: per.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
        max_chain_gap: per.iter().map(|p| p.1).fold(0.0, f64::max),
    }
}

/// Fraction of random distributions violating any inequality; exact
/// computation, so the bound is 0 with no sampling slack.
pub fn entropy_reduction_check(trials: usize, seed: u64) -> SimResult {
    let r = entropy_detail(trials, seed);
    let frac = if trials == 0 {
        0.0
    } else {
        r.violations as f64 / trials as f64
    };
    SimResult {
        empirical: frac,
        theoretical_bound: 0.0,
        satisfied: r.violations == 0,
        ci_halfwidth: 0.0,
        trials,
        exact: Some(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_entropy(p: &[f64]) -> f64 {
        p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()).sum()
    }

    #[test]
    fn conditional_entropy_matches_definition() {
        // H(Y|X) = H(X,Y) - H(X) on a 2x4 table.
        let mut rng = sub_rng(1, 0);
        let w: Vec<f64> = (0..8).map(|_| rng.random::<f64>()).collect();
        let d = JointDistribution::from_weights(vec![2, 4], w);
        let hx = brute_entropy(&d.marginal(&[X]).values().copied().collect::<Vec<_>>());
        let hxy = brute_entropy(&d.probs);
        assert!((d.conditional_entropy(Y, &[X]) - (hxy - hx)).abs() < 1e-12);
    }

    #[test]
    fn independent_constraint_changes_nothing() {
        let mut rng = sub_rng(2, 0);
        let base = JointDistribution::from_weights(vec![2, 4, 3], (0..24).map(|_| rng.random::<f64>()).collect());
        let d = base.with_independent(2, &mut rng);
        let (h, info) = entropy_profile(&d);
        assert!((h[0] - h[1]).abs() < 1e-12);
        assert!(info[0].abs() < 1e-12);
    }

    #[test]
    fn copy_constraint_removes_uncertainty() {
        let mut rng = sub_rng(3, 0);
        // Y uses only values 0..3 so the copy is exact.
        let w: Vec<f64> = (0..24)
            .map(|i| if (i / 3) % 4 == 3 { 0.0 } else { rng.random::<f64>() })
            .collect();
        let d = JointDistribution::from_weights(vec![2, 4, 3], w).with_copy_of_y(2);
        let (h, _) = entropy_profile(&d);
        assert!(h[1].abs() < 1e-12);
        assert!(h[0] > 0.1);
    }

    #[test]
    fn random_suite_holds() {
        let r = entropy_detail(200, 5);
        assert_eq!(r.violations, 0, "{r:?}");
        assert!(r.max_chain_gap < 1e-12);
        assert!(entropy_reduction_check(50, 9).satisfied);
    }
}
