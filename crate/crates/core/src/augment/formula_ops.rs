//! Tree rewrites behind the four formula strategies.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::formula::{FormulaAst, Node, Number, Op};

/// A positive rational scaling factor whose decimal expansion terminates,
/// so scaled literals stay exact (`2`, `3`, `1/2`, `5/4`, ...).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ScaleFactor {
    num: u64,
    den: u64,
}

impl ScaleFactor {
    pub fn new(num: u64, den: u64) -> Result<Self, String> {
        if num == 0 || den == 0 {
            return Err(format!("scale factor {num}/{den} must be positive"));
        }
        let g = gcd(num, den);
        let (num, den) = (num / g, den / g);
        let mut d = den;
        for p in [2, 5] {
            while d % p == 0 {
                d /= p;
            }
        }
        if d != 1 {
            return Err(format!(
                "scale factor {num}/{den} has a non-terminating decimal expansion"
            ));
        }
        Ok(ScaleFactor { num, den })
    }

    pub fn integer(n: u64) -> Self {
        ScaleFactor::new(n, 1).expect("positive integer factor")
    }

    pub fn is_one(self) -> bool {
        self.num == self.den
    }

    pub fn value(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn recip(self) -> Self {
        ScaleFactor::new(self.den, self.num).unwrap_or(self)
    }

    fn as_number(self) -> Number {
        let d = Decimal { mantissa: 1, scale: 0 }.scaled(self);
        Number::new(&d.to_string()).expect("decimal renders as literal")
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

impl fmt::Display for ScaleFactor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for ScaleFactor {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let parse = |t: &str| {
            t.trim()
                .parse::<u64>()
                .map_err(|_| format!("bad scale factor {s:?}"))
        };
        match s.split_once('/') {
            Some((n, d)) => ScaleFactor::new(parse(n)?, parse(d)?),
            None => ScaleFactor::new(parse(s)?, 1),
        }
    }
}

impl TryFrom<String> for ScaleFactor {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<ScaleFactor> for String {
    fn from(f: ScaleFactor) -> String {
        f.to_string()
    }
}

/// Exact decimal `mantissa / 10^scale` for literal arithmetic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct Decimal {
    pub mantissa: u128,
    pub scale: u32,
}

impl Decimal {
    pub fn parse(literal: &str) -> Option<Decimal> {
        let (int, frac) = literal.split_once('.').unwrap_or((literal, ""));
        let digits = format!("{int}{frac}");
        Some(Decimal {
            mantissa: digits.parse().ok()?,
            scale: frac.len() as u32,
        })
    }

    /// Multiply by a terminating rational, trimming trailing fractional zeros.
    pub fn scaled(self, factor: ScaleFactor) -> Decimal {
        let mut mantissa = self.mantissa * factor.num as u128;
        let mut scale = self.scale;
        let den = factor.den as u128;
        while mantissa % den != 0 {
            mantissa *= 10;
            scale += 1;
        }
        mantissa /= den;
        while scale > 0 && mantissa % 10 == 0 {
            mantissa /= 10;
            scale -= 1;
        }
        Decimal { mantissa, scale }
    }
}

impl fmt::Display for Decimal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.scale == 0 {
            return write!(f, "{}", self.mantissa);
        }
        let pow = 10u128.pow(self.scale);
        write!(
            f,
            "{}.{:0width$}",
            self.mantissa / pow,
            self.mantissa % pow,
            width = self.scale as usize
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NameCollision(pub String);

impl fmt::Display for NameCollision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "identifier {:?} already in use", self.0)
    }
}

impl std::error::Error for NameCollision {}

fn contains_identifier(node: &Node, name: &str) -> bool {
    match node {
        Node::Variable(v) => v == name,
        other => other.children().into_iter().any(|c| contains_identifier(c, name)),
    }
}

/// Rename every variable occurrence of `from` to `to`. Function heads are
/// left alone. Fails when `to` already occurs in the formula.
pub fn rename_variable(ast: &FormulaAst, from: &str, to: &str) -> Result<FormulaAst, NameCollision> {
    if from != to && contains_identifier(&ast.root, to) {
        return Err(NameCollision(to.to_string()));
    }
    let mut root = ast.root.clone();
    rename_in(&mut root, from, to, false);
    Ok(FormulaAst::new(root))
}

fn rename_in(node: &mut Node, from: &str, to: &str, is_head: bool) {
    match node {
        Node::Variable(v) if v == from && !is_head => *v = to.to_string(),
        Node::FunctionApp { head, arg } => {
            rename_in(head, from, to, true);
            rename_in(arg, from, to, false);
        }
        other => {
            let n = other.children().len();
            for i in 0..n {
                if let Some(c) = other.child_mut(i) {
                    rename_in(c, from, to, false);
                }
            }
        }
    }
}

/// Occurrences of `name` that scaling would change: everything except
/// function heads and the bare argument of a function application (the
/// formal parameter in `f(x)=...`).
pub fn scalable_occurrences(ast: &FormulaAst, name: &str) -> usize {
    fn count(node: &Node, name: &str) -> usize {
        match node {
            Node::Variable(v) => usize::from(v == name),
            Node::FunctionApp { arg, .. } => match arg.as_ref() {
                Node::Variable(_) => 0,
                other => count(other, name),
            },
            other => other.children().into_iter().map(|c| count(c, name)).sum(),
        }
    }
    count(&ast.root, name)
}

/// Substitute `name -> factor·name`. A numeric coefficient directly in front
/// of the variable absorbs the factor (`2x` by 2 gives `4x`); function
/// heads and formal parameters (`f(x)`) are not touched.
pub fn scale_variable(ast: &FormulaAst, name: &str, factor: ScaleFactor) -> FormulaAst {
    if factor.is_one() {
        return ast.clone();
    }
    let mut root = ast.root.clone();
    scale_in(&mut root, name, factor);
    FormulaAst::new(root)
}

fn scale_in(node: &mut Node, name: &str, factor: ScaleFactor) {
    match node {
        Node::Variable(v) if v == name => {
            let var = std::mem::replace(node, Node::Constant(crate::formula::Constant::Pi));
            *node = Node::binary(Op::ImplicitMul, Node::Number(factor.as_number()), var);
        }
        Node::Operator {
            op: Op::ImplicitMul,
            args,
        } if matches!((&args[0], &args[1]), (Node::Number(_), Node::Variable(v)) if v == name) => {
            if let Node::Number(n) = &mut args[0] {
                let scaled = Decimal::parse(n.literal())
                    .expect("parsed literal")
                    .scaled(factor);
                *n = Number::new(&scaled.to_string()).expect("decimal renders as literal");
            }
        }
        Node::FunctionApp { arg, .. } => {
            if !matches!(arg.as_ref(), Node::Variable(_)) {
                scale_in(arg, name, factor);
            }
        }
        other => {
            let n = other.children().len();
            for i in 0..n {
                if let Some(c) = other.child_mut(i) {
                    scale_in(c, name, factor);
                }
            }
        }
    }
}

/// Replace the operator at `path` with `new_name`; returns None when the
/// path is not an operator or the names differ in kind/arity.
pub fn replace_operator(ast: &FormulaAst, path: &[usize], new_name: &str) -> Option<FormulaAst> {
    let mut root = ast.root.clone();
    let node = root.at_mut(path)?;
    node.set_operator_name(new_name).then(|| FormulaAst::new(root))
}

/// Replace the number literal at `path`.
pub fn replace_number(ast: &FormulaAst, path: &[usize], literal: &str) -> Option<FormulaAst> {
    let mut root = ast.root.clone();
    match root.at_mut(path)? {
        Node::Number(n) => *n = Number::new(literal)?,
        _ => return None,
    }
    Some(FormulaAst::new(root))
}

/// Inclusive mantissa range for replacing `literal` under relative jitter:
/// same sign, nonzero, same number of decimal places (so integers stay
/// integers) and `|new - old| <= jitter * old`. The original mantissa lies
/// inside the range and must be skipped by callers.
fn replacement_range(literal: &str, jitter: f64) -> Option<(Decimal, u128, u128)> {
    let d = Decimal::parse(literal)?;
    if d.mantissa == 0 || !(jitter > 0.0) {
        return None;
    }
    let m = d.mantissa as f64;
    let lo = (m * (1.0 - jitter)).ceil().max(1.0) as u128;
    let hi = (m * (1.0 + jitter)).floor() as u128;
    (hi > lo).then_some((d, lo, hi))
}

pub fn has_replacement(literal: &str, jitter: f64) -> bool {
    replacement_range(literal, jitter).is_some()
}

/// Draw a replacement literal uniformly from the admissible range.
pub fn sample_replacement<R: Rng + ?Sized>(literal: &str, jitter: f64, rng: &mut R) -> Option<String> {
    let (d, lo, hi) = replacement_range(literal, jitter)?;
    // hi > lo and lo <= m <= hi, so at least one other value exists.
    let mut k = rng.gen_range(lo..hi);
    if k >= d.mantissa {
        k += 1;
    }
    Some(
        Decimal {
            mantissa: k,
            scale: d.scale,
        }
        .to_string(),
    )
}
