//! Exact polynomial arithmetic over the rationals.
//!
//! `Poly` is a sparse multivariate polynomial used as the canonical form of
//! polynomial expressions. `UPoly` is a dense univariate polynomial used to
//! compare undefined-point sets along a random line.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use super::ast::{render_number, small_int, ExprAst};

/// Sorted (variable, exponent) pairs; exponents are positive.
pub type Monomial = Vec<(String, u32)>;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, BigRational>,
}

fn mono_mul(a: &Monomial, b: &Monomial) -> Monomial {
    let mut out: BTreeMap<String, u32> = a.iter().cloned().collect();
    for (v, e) in b {
        *out.entry(v.clone()).or_default() += e;
    }
    out.into_iter().collect()
}

fn degree(m: &Monomial) -> u32 {
    m.iter().map(|(_, e)| e).sum()
}

impl Poly {
    pub fn zero() -> Self {
        Poly::default()
    }

    pub fn constant(c: BigRational) -> Self {
        let mut p = Poly::zero();
        if !c.is_zero() {
            p.terms.insert(Vec::new(), c);
        }
        p
    }

    pub fn var(name: &str) -> Self {
        let mut p = Poly::zero();
        p.terms.insert(vec![(name.to_string(), 1)], BigRational::one());
        p
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn as_constant(&self) -> Option<BigRational> {
        match self.terms.len() {
            0 => Some(BigRational::zero()),
            1 => self.terms.get(&Vec::new()).cloned(),
            _ => None,
        }
    }

    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(degree).max().unwrap_or(0)
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter()
    }

    fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        let entry = self.terms.entry(m.clone()).or_insert_with(BigRational::zero);
        *entry += c;
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    pub fn add(&self, other: &Poly) -> Poly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn neg(&self) -> Poly {
        Poly {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }

    pub fn sub(&self, other: &Poly) -> Poly {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Poly) -> Poly {
        let mut out = Poly::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add_term(mono_mul(ma, mb), ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, e: u32) -> Poly {
        let mut acc = Poly::constant(BigRational::one());
        for _ in 0..e {
            acc = acc.mul(self);
        }
        acc
    }

    pub fn scale(&self, c: &BigRational) -> Poly {
        let mut out = Poly::zero();
        for (m, k) in &self.terms {
            out.add_term(m.clone(), k * c);
        }
        out
    }

    pub fn eval(&self, point: &BTreeMap<String, BigRational>) -> BigRational {
        let mut total = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in m {
                let x = point.get(v).cloned().unwrap_or_else(BigRational::zero);
                t *= num_traits::pow(x, *e as usize);
            }
            total += t;
        }
        total
    }

    /// Restricts to the line `v = base[v] + t * dir[v]`, giving a univariate
    /// polynomial in `t`.
    pub fn on_line(&self, base: &BTreeMap<String, BigRational>, dir: &BTreeMap<String, BigRational>) -> UPoly {
        let mut total = UPoly::zero();
        for (m, c) in &self.terms {
            let mut t = UPoly::constant(c.clone());
            for (v, e) in m {
                let lin = UPoly::new(vec![
                    base.get(v).cloned().unwrap_or_else(BigRational::zero),
                    dir.get(v).cloned().unwrap_or_else(BigRational::zero),
                ]);
                for _ in 0..*e {
                    t = t.mul(&lin);
                }
            }
            total = total.add(&t);
        }
        total
    }
}

impl fmt::Display for Poly {
    /// Graded order: higher total degree first, then monomial order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        let mut terms: Vec<_> = self.terms.iter().collect();
        terms.sort_by(|a, b| degree(b.0).cmp(&degree(a.0)).then_with(|| a.0.cmp(b.0)));
        for (i, (m, c)) in terms.into_iter().enumerate() {
            let neg = c.is_negative();
            let mag = c.abs();
            if i == 0 {
                if neg {
                    f.write_str("-")?;
                }
            } else {
                f.write_str(if neg { " - " } else { " + " })?;
            }
            let vars: Vec<String> = m
                .iter()
                .map(|(v, e)| if *e == 1 { v.clone() } else { format!("{v}^{e}") })
                .collect();
            if m.is_empty() {
                f.write_str(&render_number(&mag))?;
            } else if mag.is_one() {
                f.write_str(&vars.join("*"))?;
            } else {
                write!(f, "{}*{}", render_number(&mag), vars.join("*"))?;
            }
        }
        Ok(())
    }
}

/// Expands an expression into a polynomial, or `None` if it is not one
/// (division by a non-constant, a function call, or a non-natural exponent).
pub fn to_poly(e: &ExprAst) -> Option<Poly> {
    Some(match e {
        ExprAst::Number(n) => Poly::constant(n.clone()),
        ExprAst::Var(v) => Poly::var(v),
        ExprAst::Add(items) => items
            .iter()
            .try_fold(Poly::zero(), |acc, i| Some(acc.add(&to_poly(i)?)))?,
        ExprAst::Mul(items) => items
            .iter()
            .try_fold(Poly::constant(BigRational::one()), |acc, i| Some(acc.mul(&to_poly(i)?)))?,
        ExprAst::Neg(a) => to_poly(a)?.neg(),
        ExprAst::Div(a, b) => {
            let d = to_poly(b)?.as_constant()?;
            if d.is_zero() {
                return None;
            }
            to_poly(a)?.scale(&d.recip())
        }
        ExprAst::Pow(base, exp) => {
            let n = small_int(exp)?;
            if !(0..=64).contains(&n) {
                return None;
            }
            to_poly(base)?.pow(n as u32)
        }
        ExprAst::Func(..) => return None,
    })
}

/// Dense univariate polynomial, coefficients in increasing degree, no
/// trailing zeros.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UPoly {
    coeffs: Vec<BigRational>,
}

impl UPoly {
    pub fn new(mut coeffs: Vec<BigRational>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        UPoly { coeffs }
    }

    pub fn zero() -> Self {
        UPoly { coeffs: vec![] }
    }

    pub fn constant(c: BigRational) -> Self {
        UPoly::new(vec![c])
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Degree; the zero polynomial reports 0.
    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn add(&self, o: &UPoly) -> UPoly {
        let n = self.coeffs.len().max(o.coeffs.len());
        let z = BigRational::zero();
        UPoly::new(
            (0..n)
                .map(|i| self.coeffs.get(i).unwrap_or(&z) + o.coeffs.get(i).unwrap_or(&z))
                .collect(),
        )
    }

    pub fn sub(&self, o: &UPoly) -> UPoly {
        self.add(&UPoly::new(o.coeffs.iter().map(|c| -c).collect()))
    }

    pub fn mul(&self, o: &UPoly) -> UPoly {
        if self.is_zero() || o.is_zero() {
            return UPoly::zero();
        }
        let mut out = vec![BigRational::zero(); self.coeffs.len() + o.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in o.coeffs.iter().enumerate() {
                out[i + j] += a * b;
            }
        }
        UPoly::new(out)
    }

    pub fn derivative(&self) -> UPoly {
        UPoly::new(
            self.coeffs
                .iter()
                .enumerate()
                .skip(1)
                .map(|(i, c)| c * BigRational::from_integer(BigInt::from(i)))
                .collect(),
        )
    }

    /// Polynomial long division; panics on a zero divisor.
    pub fn div_rem(&self, d: &UPoly) -> (UPoly, UPoly) {
        assert!(!d.is_zero(), "division by zero polynomial");
        let mut rem = self.coeffs.clone();
        let dl = d.coeffs.len();
        let lead = d.coeffs[dl - 1].clone();
        if rem.len() < dl {
            return (UPoly::zero(), self.clone());
        }
        let mut q = vec![BigRational::zero(); rem.len() - dl + 1];
        for i in (0..q.len()).rev() {
            let c = &rem[i + dl - 1] / &lead;
            if !c.is_zero() {
                for (j, dc) in d.coeffs.iter().enumerate() {
                    rem[i + j] -= &c * dc;
                }
            }
            q[i] = c;
        }
        rem.truncate(dl - 1);
        (UPoly::new(q), UPoly::new(rem))
    }

    pub fn monic(&self) -> UPoly {
        match self.coeffs.last() {
            None => UPoly::zero(),
            Some(lead) => UPoly::new(self.coeffs.iter().map(|c| c / lead).collect()),
        }
    }

    pub fn gcd(&self, o: &UPoly) -> UPoly {
        let (mut a, mut b) = (self.clone(), o.clone());
        while !b.is_zero() {
            let r = a.div_rem(&b).1;
            a = b;
            b = r;
        }
        a.monic()
    }

    /// Monic product of the distinct irreducible factors: same roots, each
    /// with multiplicity one.
    pub fn squarefree_part(&self) -> UPoly {
        if self.is_zero() {
            return UPoly::zero();
        }
        let g = self.gcd(&self.derivative());
        self.div_rem(&g).0.monic()
    }
}
