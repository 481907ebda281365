//! A LaTeX-subset formula language.
//!
//! Supported input: single-letter identifiers (optionally subscripted, `x_1`,
//! `x_{12}`), decimal numbers, `+ - * / ^ = < > \leq \geq \neq`, `\frac`,
//! `\sqrt`, `\sin \cos \tan \log \ln \exp`, the constants `\pi` and `e`,
//! parentheses, brackets, braces and implicit multiplication (`2x`).
//!
//! Braces are purely syntactic: `{a+b}` parses to the same tree as `a+b` in a
//! position that accepts it. Parentheses and brackets produce [`Node::Group`].
//! The renderer relies on this to disambiguate without adding nodes, which
//! is what makes `parse(render(ast)) == ast` hold for every tree.

mod lexer;
mod parser;
mod render;
mod sites;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use lexer::{lex, symbol_tokens, Token, TokenKind};
pub use render::render_node;
pub use sites::{index_sites, index_sites_with, NodePath, SiteIndex, SiteOptions};

/// Identifiers whose base letter marks a function head when followed by `(`.
pub const FUNCTION_NAMES: [char; 3] = ['f', 'g', 'h'];

pub fn is_function_name(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if FUNCTION_NAMES.contains(&c))
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormulaError {
    #[error("unknown token {found:?} at byte {offset}")]
    Lexical { offset: usize, found: String },
    #[error("unbalanced {delimiter:?} opened at byte {offset}")]
    Unbalanced { offset: usize, delimiter: char },
    #[error("unexpected {found} at byte {offset}, expected {expected}")]
    Unexpected {
        offset: usize,
        found: String,
        expected: &'static str,
    },
    #[error("empty formula")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Constant {
    Pi,
    E,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bracket {
    Paren,
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Op {
    Add,
    Sub,
    Mul,
    Div,
    ImplicitMul,
    Neg,
    Sin,
    Cos,
    Tan,
    Log,
    Ln,
    Exp,
    Sqrt,
}

impl Op {
    pub const ALL: [Op; 13] = [
        Op::Add,
        Op::Sub,
        Op::Mul,
        Op::Div,
        Op::ImplicitMul,
        Op::Neg,
        Op::Sin,
        Op::Cos,
        Op::Tan,
        Op::Log,
        Op::Ln,
        Op::Exp,
        Op::Sqrt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Op::Add => "+",
            Op::Sub => "-",
            Op::Mul => "*",
            Op::Div => "/",
            Op::ImplicitMul => "·",
            Op::Neg => "neg",
            Op::Sin => "sin",
            Op::Cos => "cos",
            Op::Tan => "tan",
            Op::Log => "log",
            Op::Ln => "ln",
            Op::Exp => "exp",
            Op::Sqrt => "sqrt",
        }
    }

    pub fn from_name(name: &str) -> Option<Op> {
        Op::ALL.into_iter().find(|op| op.name() == name)
    }

    pub fn arity(self) -> usize {
        match self {
            Op::Add | Op::Sub | Op::Mul | Op::Div | Op::ImplicitMul => 2,
            _ => 1,
        }
    }

    /// The unary functions written as `\name{arg}`.
    pub fn command(self) -> Option<&'static str> {
        match self {
            Op::Sin => Some("\\sin"),
            Op::Cos => Some("\\cos"),
            Op::Tan => Some("\\tan"),
            Op::Log => Some("\\log"),
            Op::Ln => Some("\\ln"),
            Op::Exp => Some("\\exp"),
            Op::Sqrt => Some("\\sqrt"),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Rel {
    Eq,
    Lt,
    Gt,
    Leq,
    Geq,
    Neq,
}

impl Rel {
    pub const ALL: [Rel; 6] = [Rel::Eq, Rel::Lt, Rel::Gt, Rel::Leq, Rel::Geq, Rel::Neq];

    pub fn name(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Lt => "<",
            Rel::Gt => ">",
            Rel::Leq => "leq",
            Rel::Geq => "geq",
            Rel::Neq => "neq",
        }
    }

    pub fn from_name(name: &str) -> Option<Rel> {
        Rel::ALL.into_iter().find(|r| r.name() == name)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Lt => "<",
            Rel::Gt => ">",
            Rel::Leq => "\\leq",
            Rel::Geq => "\\geq",
            Rel::Neq => "\\neq",
        }
    }
}

/// A numeric literal; `value` is always the parse of `literal`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Number {
    literal: String,
    value: f64,
}

impl Number {
    /// Accepts `digits` or `digits.digits`.
    pub fn new(literal: &str) -> Option<Number> {
        let (int, frac) = match literal.split_once('.') {
            Some((i, f)) => (i, Some(f)),
            None => (literal, None),
        };
        let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
        if !digits(int) || frac.is_some_and(|f| !digits(f)) {
            return None;
        }
        Some(Number {
            literal: literal.to_string(),
            value: literal.parse().ok()?,
        })
    }

    pub fn literal(&self) -> &str {
        &self.literal
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn is_integer_literal(&self) -> bool {
        !self.literal.contains('.')
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.literal == other.literal
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Variable(String),
    Constant(Constant),
    Number(Number),
    Operator { op: Op, args: Vec<Node> },
    Group { bracket: Bracket, inner: Box<Node> },
    Relation { rel: Rel, left: Box<Node>, right: Box<Node> },
    FunctionApp { head: Box<Node>, arg: Box<Node> },
    Fraction { num: Box<Node>, den: Box<Node> },
    Power { base: Box<Node>, exp: Box<Node> },
}

impl Node {
    pub fn var(name: &str) -> Node {
        Node::Variable(name.to_string())
    }

    /// Panics on a malformed literal; for building trees in code.
    pub fn num(literal: &str) -> Node {
        Node::Number(Number::new(literal).expect("valid numeric literal"))
    }

    pub fn binary(op: Op, left: Node, right: Node) -> Node {
        debug_assert_eq!(op.arity(), 2);
        Node::Operator {
            op,
            args: vec![left, right],
        }
    }

    pub fn unary(op: Op, arg: Node) -> Node {
        debug_assert_eq!(op.arity(), 1);
        Node::Operator {
            op,
            args: vec![arg],
        }
    }

    pub fn group(inner: Node) -> Node {
        Node::Group {
            bracket: Bracket::Paren,
            inner: Box::new(inner),
        }
    }

    pub fn relation(rel: Rel, left: Node, right: Node) -> Node {
        Node::Relation {
            rel,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    pub fn apply(head: &str, arg: Node) -> Node {
        Node::FunctionApp {
            head: Box::new(Node::var(head)),
            arg: Box::new(arg),
        }
    }

    pub fn fraction(num: Node, den: Node) -> Node {
        Node::Fraction {
            num: Box::new(num),
            den: Box::new(den),
        }
    }

    pub fn power(base: Node, exp: Node) -> Node {
        Node::Power {
            base: Box::new(base),
            exp: Box::new(exp),
        }
    }

    pub fn children(&self) -> Vec<&Node> {
        match self {
            Node::Variable(_) | Node::Constant(_) | Node::Number(_) => vec![],
            Node::Operator { args, .. } => args.iter().collect(),
            Node::Group { inner, .. } => vec![inner],
            Node::Relation { left, right, .. } => vec![left, right],
            Node::FunctionApp { head, arg } => vec![head, arg],
            Node::Fraction { num, den } => vec![num, den],
            Node::Power { base, exp } => vec![base, exp],
        }
    }

    pub fn child(&self, index: usize) -> Option<&Node> {
        self.children().get(index).copied()
    }

    pub fn child_mut(&mut self, index: usize) -> Option<&mut Node> {
        match (self, index) {
            (Node::Operator { args, .. }, i) => args.get_mut(i),
            (Node::Group { inner, .. }, 0) => Some(inner),
            (Node::Relation { left, .. }, 0)
            | (Node::FunctionApp { head: left, .. }, 0)
            | (Node::Fraction { num: left, .. }, 0)
            | (Node::Power { base: left, .. }, 0) => Some(left),
            (Node::Relation { right, .. }, 1)
            | (Node::FunctionApp { arg: right, .. }, 1)
            | (Node::Fraction { den: right, .. }, 1)
            | (Node::Power { exp: right, .. }, 1) => Some(right),
            _ => None,
        }
    }

    pub fn at(&self, path: &[usize]) -> Option<&Node> {
        path.iter().try_fold(self, |node, &i| node.child(i))
    }

    pub fn at_mut(&mut self, path: &[usize]) -> Option<&mut Node> {
        path.iter().try_fold(self, |node, &i| node.child_mut(i))
    }

    /// Operator-like name for sites: arithmetic/function ops, relations,
    /// `frac` and `^`.
    pub fn operator_name(&self) -> Option<&'static str> {
        match self {
            Node::Operator { op, .. } => Some(op.name()),
            Node::Relation { rel, .. } => Some(rel.name()),
            Node::Fraction { .. } => Some("frac"),
            Node::Power { .. } => Some("^"),
            _ => None,
        }
    }

    /// Replace this node's operator by `name` when both share a kind and
    /// arity. Returns false (and leaves the node untouched) otherwise.
    pub fn set_operator_name(&mut self, name: &str) -> bool {
        match self {
            Node::Operator { op, .. } => match Op::from_name(name) {
                Some(new) if new.arity() == op.arity() => {
                    *op = new;
                    true
                }
                _ => false,
            },
            Node::Relation { rel, .. } => match Rel::from_name(name) {
                Some(new) => {
                    *rel = new;
                    true
                }
                None => false,
            },
            _ => false,
        }
    }

    /// Total number of nodes in the subtree.
    pub fn size(&self) -> usize {
        1 + self.children().iter().map(|c| c.size()).sum::<usize>()
    }
}

/// A parsed formula.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormulaAst {
    pub root: Node,
}

impl FormulaAst {
    pub fn new(root: Node) -> Self {
        FormulaAst { root }
    }

    pub fn node_count(&self) -> usize {
        self.root.size()
    }
}

impl fmt::Display for FormulaAst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&render_formula(self))
    }
}

pub fn parse_formula(src: &str) -> Result<FormulaAst, FormulaError> {
    let tokens = lex(src)?;
    parser::parse_tokens(&tokens, src.len()).map(FormulaAst::new)
}

/// Canonical rendering; `parse_formula(&render_formula(a)) == Ok(a)`.
pub fn render_formula(ast: &FormulaAst) -> String {
    render_node(&ast.root)
}
