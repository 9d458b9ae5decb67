//! Algebraic equivalence of expressions.
//!
//! Polynomials are compared exactly through their expanded canonical form.
//! Everything else is compared by evaluation at seeded random rational
//! points (exact rational arithmetic wherever the expression allows it, `f64`
//! once a transcendental function is involved). When two expressions agree
//! as functions, their undefined-point sets are compared along a random
//! line; a mismatch is reported as a domain caveat.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{small_int, ExprAst};
use super::poly::{to_poly, UPoly};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equivalence {
    Equivalent,
    NotEquivalent,
    EquivalentWithDomainCaveat,
}

impl Equivalence {
    pub fn holds(self) -> bool {
        !matches!(self, Equivalence::NotEquivalent)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EquivError {
    #[error("evaluation error: expression undefined at {undefined} of {attempts} sample points")]
    Evaluation { undefined: usize, attempts: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivMethod {
    /// Exact expansion when both sides are polynomials, evaluation otherwise.
    Auto,
    /// Always decide by randomized evaluation.
    Randomized,
}

#[derive(Debug, Clone, Copy)]
pub struct EquivConfig {
    pub points: usize,
    pub seed: u64,
    pub method: EquivMethod,
}

impl Default for EquivConfig {
    fn default() -> Self {
        EquivConfig {
            points: 12,
            seed: 0x5eed_a11e,
            method: EquivMethod::Auto,
        }
    }
}

pub fn algebraic_equivalence(a: &ExprAst, b: &ExprAst) -> Result<Equivalence, EquivError> {
    algebraic_equivalence_with(a, b, &EquivConfig::default())
}

pub fn algebraic_equivalence_with(a: &ExprAst, b: &ExprAst, cfg: &EquivConfig) -> Result<Equivalence, EquivError> {
    if cfg.method == EquivMethod::Auto {
        if let (Some(pa), Some(pb)) = (to_poly(a), to_poly(b)) {
            return Ok(if pa == pb {
                Equivalence::Equivalent
            } else {
                Equivalence::NotEquivalent
            });
        }
    }
    let vars: Vec<String> = a.variables().union(&b.variables()).cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let max_attempts = 2 * cfg.points.max(1);
    let (mut good, mut attempts, mut undef_a, mut undef_b) = (0, 0, 0, 0);
    let mut differs = false;
    while good < cfg.points && attempts < max_attempts {
        attempts += 1;
        let point: BTreeMap<String, BigRational> =
            vars.iter().map(|v| (v.clone(), random_rational(&mut rng))).collect();
        let va = eval(a, &point);
        let vb = eval(b, &point);
        undef_a += usize::from(va.is_none());
        undef_b += usize::from(vb.is_none());
        if let (Some(x), Some(y)) = (va, vb) {
            good += 1;
            if !x.approx_eq(&y) {
                differs = true;
            }
        }
    }
    let worst = undef_a.max(undef_b);
    if 2 * worst > attempts || good < cfg.points {
        return Err(EquivError::Evaluation {
            undefined: worst,
            attempts,
        });
    }
    if differs {
        return Ok(Equivalence::NotEquivalent);
    }
    let base: BTreeMap<String, BigRational> = vars.iter().map(|v| (v.clone(), random_rational(&mut rng))).collect();
    let dir: BTreeMap<String, BigRational> = vars.iter().map(|v| (v.clone(), random_rational(&mut rng))).collect();
    match (undefined_locus(a, &base, &dir), undefined_locus(b, &base, &dir)) {
        (Some(ua), Some(ub)) if ua.squarefree_part() != ub.squarefree_part() => {
            Ok(Equivalence::EquivalentWithDomainCaveat)
        }
        _ => Ok(Equivalence::Equivalent),
    }
}

fn random_rational(rng: &mut ChaCha8Rng) -> BigRational {
    let n: i64 = rng.random_range(-60..=60);
    let d: i64 = rng.random_range(1..=16);
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

#[derive(Debug, Clone)]
enum Val {
    Exact(BigRational),
    Approx(f64),
}

impl Val {
    fn to_f64(&self) -> f64 {
        match self {
            Val::Exact(r) => r.to_f64().unwrap_or(f64::NAN),
            Val::Approx(x) => *x,
        }
    }

    fn approx_eq(&self, other: &Val) -> bool {
        match (self, other) {
            (Val::Exact(a), Val::Exact(b)) => a == b,
            _ => {
                let (a, b) = (self.to_f64(), other.to_f64());
                (a - b).abs() <= 1e-9 * 1f64.max(a.abs()).max(b.abs())
            }
        }
    }
}

fn approx(x: f64) -> Option<Val> {
    x.is_finite().then_some(Val::Approx(x))
}

/// Value at a point, `None` where undefined.
fn eval(e: &ExprAst, point: &BTreeMap<String, BigRational>) -> Option<Val> {
    match e {
        ExprAst::Number(n) => Some(Val::Exact(n.clone())),
        ExprAst::Var(v) => Some(Val::Exact(point.get(v)?.clone())),
        ExprAst::Neg(a) => Some(match eval(a, point)? {
            Val::Exact(r) => Val::Exact(-r),
            Val::Approx(x) => Val::Approx(-x),
        }),
        ExprAst::Add(items) => {
            let mut acc = Val::Exact(BigRational::zero());
            for i in items {
                acc = match (acc, eval(i, point)?) {
                    (Val::Exact(a), Val::Exact(b)) => Val::Exact(a + b),
                    (a, b) => approx(a.to_f64() + b.to_f64())?,
                };
            }
            Some(acc)
        }
        ExprAst::Mul(items) => {
            let mut acc = Val::Exact(BigRational::one());
            for i in items {
                acc = match (acc, eval(i, point)?) {
                    (Val::Exact(a), Val::Exact(b)) => Val::Exact(a * b),
                    (a, b) => approx(a.to_f64() * b.to_f64())?,
                };
            }
            Some(acc)
        }
        ExprAst::Div(a, b) => match (eval(a, point)?, eval(b, point)?) {
            (_, Val::Exact(d)) if d.is_zero() => None,
            (Val::Exact(n), Val::Exact(d)) => Some(Val::Exact(n / d)),
            (n, d) => {
                let d = d.to_f64();
                if d.abs() < 1e-300 {
                    None
                } else {
                    approx(n.to_f64() / d)
                }
            }
        },
        ExprAst::Pow(base, exp) => {
            let b = eval(base, point)?;
            if let Some(n) = small_int(exp).filter(|n| n.abs() <= 64) {
                return match b {
                    Val::Exact(r) => {
                        if n < 0 && r.is_zero() {
                            None
                        } else if n < 0 {
                            Some(Val::Exact(num_traits::pow(r.recip(), (-n) as usize)))
                        } else {
                            Some(Val::Exact(num_traits::pow(r, n as usize)))
                        }
                    }
                    Val::Approx(x) => approx(x.powi(n as i32)),
                };
            }
            let x = eval(exp, point)?.to_f64();
            let bf = b.to_f64();
            if bf < 0.0 && x.fract() != 0.0 {
                return None;
            }
            approx(bf.powf(x))
        }
        ExprAst::Func(name, args) => {
            if args.len() != 1 {
                return None;
            }
            let x = eval(&args[0], point)?.to_f64();
            let y = match name.as_str() {
                "sin" => x.sin(),
                "cos" => x.cos(),
                "tan" => {
                    if x.cos().abs() < 1e-12 {
                        return None;
                    }
                    x.tan()
                }
                "exp" => x.exp(),
                "log" | "ln" => {
                    if x <= 0.0 {
                        return None;
                    }
                    x.ln()
                }
                "sqrt" => {
                    if x < 0.0 {
                        return None;
                    }
                    x.sqrt()
                }
                _ => return None,
            };
            approx(y)
        }
    }
}

/// Univariate rational function num/den.
struct RatFn {
    num: UPoly,
    den: UPoly,
}

fn ratfn_on_line(
    e: &ExprAst,
    base: &BTreeMap<String, BigRational>,
    dir: &BTreeMap<String, BigRational>,
) -> Option<RatFn> {
    let one = || UPoly::constant(BigRational::one());
    Some(match e {
        ExprAst::Number(n) => RatFn {
            num: UPoly::constant(n.clone()),
            den: one(),
        },
        ExprAst::Var(v) => RatFn {
            num: UPoly::new(vec![base.get(v)?.clone(), dir.get(v)?.clone()]),
            den: one(),
        },
        ExprAst::Neg(a) => {
            let r = ratfn_on_line(a, base, dir)?;
            RatFn {
                num: UPoly::zero().sub(&r.num),
                den: r.den,
            }
        }
        ExprAst::Add(items) => {
            let mut acc = RatFn {
                num: UPoly::zero(),
                den: one(),
            };
            for i in items {
                let r = ratfn_on_line(i, base, dir)?;
                acc = RatFn {
                    num: acc.num.mul(&r.den).add(&r.num.mul(&acc.den)),
                    den: acc.den.mul(&r.den),
                };
            }
            acc
        }
        ExprAst::Mul(items) => {
            let mut acc = RatFn { num: one(), den: one() };
            for i in items {
                let r = ratfn_on_line(i, base, dir)?;
                acc = RatFn {
                    num: acc.num.mul(&r.num),
                    den: acc.den.mul(&r.den),
                };
            }
            acc
        }
        ExprAst::Div(a, b) => {
            let (ra, rb) = (ratfn_on_line(a, base, dir)?, ratfn_on_line(b, base, dir)?);
            RatFn {
                num: ra.num.mul(&rb.den),
                den: ra.den.mul(&rb.num),
            }
        }
        ExprAst::Pow(b, exp) => {
            let n = small_int(exp).filter(|n| n.abs() <= 64)?;
            let r = ratfn_on_line(b, base, dir)?;
            let (num, den) = if n >= 0 { (r.num, r.den) } else { (r.den, r.num) };
            let mut acc = RatFn { num: one(), den: one() };
            for _ in 0..n.unsigned_abs() {
                acc = RatFn {
                    num: acc.num.mul(&num),
                    den: acc.den.mul(&den),
                };
            }
            acc
        }
        ExprAst::Func(..) => return None,
    })
}

/// Product of the numerators of every divisor in the expression, restricted
/// to the line: its roots are exactly the points where the expression is
/// undefined. `None` when some divisor is not a rational function.
fn undefined_locus(
    e: &ExprAst,
    base: &BTreeMap<String, BigRational>,
    dir: &BTreeMap<String, BigRational>,
) -> Option<UPoly> {
    let mut acc = UPoly::constant(BigRational::one());
    let mut stack = vec![e];
    while let Some(node) = stack.pop() {
        match node {
            ExprAst::Div(_, d) => {
                acc = acc.mul(&ratfn_on_line(d, base, dir)?.num);
            }
            ExprAst::Pow(b, x) if small_int(x).is_some_and(|n| n < 0) => {
                acc = acc.mul(&ratfn_on_line(b, base, dir)?.num);
            }
            _ => {}
        }
        stack.extend(node.children());
    }
    Some(acc)
}
