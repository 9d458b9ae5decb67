//! Expression trees, the expression parser and a renderer whose output parses
//! back to the same tree.
//!
//! Grammar:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/' | <implicit>) unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | variable | function '(' expr (',' expr)* ')' | '(' expr ')'
//! number  := digits ('.' digits)?
//! ```
//!
//! Variables are single letters, optionally with a `_digits` subscript, so
//! `ac` is `a*c`. A letter run naming a known function and followed by `(`
//! is a call. Implicit multiplication applies whenever a factor is directly
//! followed by a number, letter or `(`.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub const FUNCTIONS: &[&str] = &["sin", "cos", "tan", "exp", "log", "ln", "sqrt"];

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ExprAst {
    /// Non-negative exact rational literal.
    Number(BigRational),
    Var(String),
    Add(Vec<ExprAst>),
    Mul(Vec<ExprAst>),
    Pow(Box<ExprAst>, Box<ExprAst>),
    Neg(Box<ExprAst>),
    Div(Box<ExprAst>, Box<ExprAst>),
    Func(String, Vec<ExprAst>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("parse error at offset {offset}: expected {}", expected.join(" or "))]
pub struct ParseError {
    pub offset: usize,
    pub expected: Vec<String>,
}

impl ExprAst {
    pub fn int(n: i64) -> Self {
        ExprAst::Number(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn var(name: &str) -> Self {
        ExprAst::Var(name.to_string())
    }

    pub fn children(&self) -> Vec<&ExprAst> {
        match self {
            ExprAst::Number(_) | ExprAst::Var(_) => vec![],
            ExprAst::Add(c) | ExprAst::Mul(c) | ExprAst::Func(_, c) => c.iter().collect(),
            ExprAst::Pow(a, b) | ExprAst::Div(a, b) => vec![a, b],
            ExprAst::Neg(a) => vec![a],
        }
    }

    /// Node label used by tree edit distance.
    pub fn label(&self) -> String {
        match self {
            ExprAst::Number(n) => format!("#{}", render_number(n)),
            ExprAst::Var(v) => format!("${v}"),
            ExprAst::Add(_) => "+".into(),
            ExprAst::Mul(_) => "*".into(),
            ExprAst::Pow(..) => "^".into(),
            ExprAst::Neg(_) => "neg".into(),
            ExprAst::Div(..) => "/".into(),
            ExprAst::Func(name, _) => format!("{name}()"),
        }
    }

    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }

    fn kind_rank(&self) -> u8 {
        match self {
            ExprAst::Number(_) => 0,
            ExprAst::Var(_) => 1,
            ExprAst::Pow(..) => 2,
            ExprAst::Mul(_) => 3,
            ExprAst::Div(..) => 4,
            ExprAst::Neg(_) => 5,
            ExprAst::Func(..) => 6,
            ExprAst::Add(_) => 7,
        }
    }

    /// Sorts the children of every add/mul node by node kind, then rendered
    /// text, so that commuted operands line up for tree comparison.
    pub fn canonical_order(&self) -> ExprAst {
        let sort = |items: &[ExprAst]| {
            let mut v: Vec<ExprAst> = items.iter().map(|c| c.canonical_order()).collect();
            v.sort_by_cached_key(|c| (c.kind_rank(), c.to_string()));
            v
        };
        match self {
            ExprAst::Number(_) | ExprAst::Var(_) => self.clone(),
            ExprAst::Add(c) => ExprAst::Add(sort(c)),
            ExprAst::Mul(c) => ExprAst::Mul(sort(c)),
            ExprAst::Pow(a, b) => ExprAst::Pow(Box::new(a.canonical_order()), Box::new(b.canonical_order())),
            ExprAst::Div(a, b) => ExprAst::Div(Box::new(a.canonical_order()), Box::new(b.canonical_order())),
            ExprAst::Neg(a) => ExprAst::Neg(Box::new(a.canonical_order())),
            ExprAst::Func(n, args) => ExprAst::Func(n.clone(), args.iter().map(|c| c.canonical_order()).collect()),
        }
    }

    pub fn variables(&self) -> std::collections::BTreeSet<String> {
        let mut out = std::collections::BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut std::collections::BTreeSet<String>) {
        if let ExprAst::Var(v) = self {
            out.insert(v.clone());
        }
        for c in self.children() {
            c.collect_vars(out);
        }
    }
}

/// Decimal rendering of a terminating rational; falls back to `p/q` (which
/// the parser reads as a division, not a literal).
pub fn render_number(n: &BigRational) -> String {
    if n.is_integer() {
        return n.to_integer().to_string();
    }
    // Terminating iff the reduced denominator has only 2 and 5 as factors.
    let mut d = n.denom().clone();
    let (two, five) = (BigInt::from(2), BigInt::from(5));
    let mut digits = 0u32;
    let (mut twos, mut fives) = (0u32, 0u32);
    while (&d % &two).is_zero() {
        d /= &two;
        twos += 1;
    }
    while (&d % &five).is_zero() {
        d /= &five;
        fives += 1;
    }
    if !d.is_one() {
        return format!("{}/{}", n.numer(), n.denom());
    }
    digits += twos.max(fives);
    let scaled = n * BigRational::from_integer(BigInt::from(10).pow(digits));
    let s = scaled.to_integer().abs().to_string();
    let s = format!("{:0>width$}", s, width = digits as usize + 1);
    let (int, frac) = s.split_at(s.len() - digits as usize);
    let sign = if n.is_negative() { "-" } else { "" };
    format!("{sign}{int}.{frac}")
}

impl fmt::Display for ExprAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render(self))
    }
}

fn is_atom(e: &ExprAst) -> bool {
    matches!(e, ExprAst::Number(_) | ExprAst::Var(_) | ExprAst::Func(..))
}

fn paren(s: String) -> String {
    format!("({s})")
}

/// Renders with explicit operators only; `parse(render(t)) == t` for every
/// tree the parser can produce.
pub fn render(e: &ExprAst) -> String {
    match e {
        ExprAst::Number(n) => render_number(n),
        ExprAst::Var(v) => v.clone(),
        ExprAst::Func(name, args) => format!("{name}({})", args.iter().map(render).collect::<Vec<_>>().join(", ")),
        ExprAst::Add(items) => {
            let mut out = String::new();
            for (i, item) in items.iter().enumerate() {
                let piece = match item {
                    ExprAst::Add(_) => paren(render(item)),
                    _ => render(item),
                };
                if i == 0 {
                    out.push_str(&piece);
                } else if let ExprAst::Neg(inner) = item {
                    // `a - t` parses as Add[a, Neg(t)] for any term t.
                    let t = match **inner {
                        ExprAst::Add(_) => paren(render(inner)),
                        _ => render(inner),
                    };
                    out.push_str(" - ");
                    out.push_str(&t);
                } else {
                    out.push_str(" + ");
                    out.push_str(&piece);
                }
            }
            out
        }
        ExprAst::Mul(items) => items
            .iter()
            .enumerate()
            .map(|(i, item)| match item {
                ExprAst::Add(_) | ExprAst::Mul(_) => paren(render(item)),
                ExprAst::Div(..) if i > 0 => paren(render(item)),
                _ => render(item),
            })
            .collect::<Vec<_>>()
            .join("*"),
        ExprAst::Div(num, den) => {
            let n = match **num {
                ExprAst::Add(_) => paren(render(num)),
                _ => render(num),
            };
            let d = match **den {
                ExprAst::Add(_) | ExprAst::Mul(_) | ExprAst::Div(..) => paren(render(den)),
                _ => render(den),
            };
            format!("{n}/{d}")
        }
        ExprAst::Neg(inner) => match **inner {
            ExprAst::Add(_) | ExprAst::Mul(_) | ExprAst::Div(..) => {
                format!("-{}", paren(render(inner)))
            }
            _ => format!("-{}", render(inner)),
        },
        ExprAst::Pow(base, exp) => {
            let b = if is_atom(base) {
                render(base)
            } else {
                paren(render(base))
            };
            let x = match **exp {
                ExprAst::Add(_) | ExprAst::Mul(_) | ExprAst::Div(..) => paren(render(exp)),
                _ => render(exp),
            };
            format!("{b}^{x}")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Var(String),
    Func(String),
    Op(char),
    LParen,
    RParen,
    Comma,
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, ParseError> {
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let (off, c) = bytes[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(|b| b.1.is_ascii_digit())) {
            let start = i;
            while i < bytes.len() && bytes[i].1.is_ascii_digit() {
                i += 1;
            }
            let mut frac_digits = 0u32;
            if i < bytes.len() && bytes[i].1 == '.' {
                i += 1;
                if i >= bytes.len() || !bytes[i].1.is_ascii_digit() {
                    return Err(ParseError {
                        offset: bytes.get(i).map_or(text.len(), |b| b.0),
                        expected: vec!["digit".into()],
                    });
                }
                while i < bytes.len() && bytes[i].1.is_ascii_digit() {
                    i += 1;
                    frac_digits += 1;
                }
            }
            let lit: String = bytes[start..i].iter().map(|b| b.1).filter(|c| *c != '.').collect();
            let numer: BigInt = lit.parse().expect("digits");
            let denom = BigInt::from(10).pow(frac_digits);
            out.push((off, Tok::Num(BigRational::new(numer, denom))));
        } else if c.is_ascii_alphabetic() {
            let start = i;
            while i < bytes.len() && bytes[i].1.is_ascii_alphabetic() {
                i += 1;
            }
            let run: String = bytes[start..i].iter().map(|b| b.1).collect();
            let next_is_paren = bytes[i..]
                .iter()
                .find(|b| !b.1.is_whitespace())
                .is_some_and(|b| b.1 == '(');
            if FUNCTIONS.contains(&run.as_str()) && next_is_paren {
                out.push((off, Tok::Func(run)));
                continue;
            }
            // Split into single-letter variables; the last may take a subscript.
            for (j, ch) in run.chars().enumerate() {
                let at = bytes[start + j].0;
                let mut name = ch.to_string();
                if j + 1 == run.len() && i + 1 < bytes.len() && bytes[i].1 == '_' && bytes[i + 1].1.is_ascii_digit() {
                    name.push('_');
                    i += 1;
                    while i < bytes.len() && bytes[i].1.is_ascii_digit() {
                        name.push(bytes[i].1);
                        i += 1;
                    }
                }
                out.push((at, Tok::Var(name)));
            }
        } else {
            let tok = match c {
                '+' | '-' | '*' | '/' | '^' => Tok::Op(c),
                '−' => Tok::Op('-'),
                '·' | '×' => Tok::Op('*'),
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                _ => {
                    return Err(ParseError {
                        offset: off,
                        expected: vec!["operator".into(), "operand".into()],
                    })
                }
            };
            out.push((off, tok));
            i += 1;
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

const OPERAND: [&str; 4] = ["number", "variable", "'('", "'-'"];

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn err(&self, expected: &[&str]) -> ParseError {
        ParseError {
            offset: self.offset(),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expr(&mut self) -> Result<ExprAst, ParseError> {
        let mut items = vec![self.term()?];
        while let Some(Tok::Op(op @ ('+' | '-'))) = self.peek().cloned() {
            self.pos += 1;
            let t = self.term()?;
            items.push(if op == '-' { ExprAst::Neg(Box::new(t)) } else { t });
        }
        Ok(if items.len() == 1 {
            items.pop().unwrap()
        } else {
            ExprAst::Add(items)
        })
    }

    fn term(&mut self) -> Result<ExprAst, ParseError> {
        let mut acc = self.unary()?;
        // True while `acc` is a Mul built by this chain (safe to extend).
        let mut chain_mul = false;
        loop {
            let op = match self.peek() {
                Some(Tok::Op('*')) => {
                    self.pos += 1;
                    '*'
                }
                Some(Tok::Op('/')) => {
                    self.pos += 1;
                    '/'
                }
                Some(Tok::Num(_) | Tok::Var(_) | Tok::Func(_) | Tok::LParen) => '*',
                _ => break,
            };
            let rhs = self.unary()?;
            if op == '/' {
                acc = ExprAst::Div(Box::new(acc), Box::new(rhs));
                chain_mul = false;
            } else if chain_mul {
                if let ExprAst::Mul(items) = &mut acc {
                    items.push(rhs);
                }
            } else {
                acc = ExprAst::Mul(vec![acc, rhs]);
                chain_mul = true;
            }
        }
        Ok(acc)
    }

    fn unary(&mut self) -> Result<ExprAst, ParseError> {
        if let Some(Tok::Op('-')) = self.peek() {
            self.pos += 1;
            return Ok(ExprAst::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<ExprAst, ParseError> {
        let base = self.primary()?;
        if let Some(Tok::Op('^')) = self.peek() {
            self.pos += 1;
            let exp = self.unary()?;
            return Ok(ExprAst::Pow(Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<ExprAst, ParseError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) => {
                self.pos += 1;
                Ok(ExprAst::Number(n))
            }
            Some(Tok::Var(v)) => {
                self.pos += 1;
                Ok(ExprAst::Var(v))
            }
            Some(Tok::Func(name)) => {
                self.pos += 2; // name and '('
                let mut args = vec![self.expr()?];
                while let Some(Tok::Comma) = self.peek() {
                    self.pos += 1;
                    args.push(self.expr()?);
                }
                self.expect_rparen()?;
                Ok(ExprAst::Func(name, args))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            _ => Err(self.err(&OPERAND)),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::RParen) => {
                self.pos += 1;
                Ok(())
            }
            _ => Err(self.err(&["')'", "operator"])),
        }
    }
}

pub fn parse_expr(text: &str) -> Result<ExprAst, ParseError> {
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        end: text.len(),
    };
    let e = p.expr()?;
    if p.pos != p.toks.len() {
        return Err(p.err(&["operator", "end of input"]));
    }
    Ok(e)
}

/// Integer value of a constant exponent node, if it is one.
pub(crate) fn small_int(e: &ExprAst) -> Option<i64> {
    match e {
        ExprAst::Number(n) if n.is_integer() => n.to_integer().to_i64(),
        ExprAst::Neg(inner) => small_int(inner).map(|v| -v),
        _ => None,
    }
}
