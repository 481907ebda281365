use super::{is_function_name, Bracket, Constant, Node, Op};

const REL: u8 = 1;
const ADD: u8 = 2;
const MUL: u8 = 3;
const NEG: u8 = 4;
const IMPLICIT: u8 = 5;
const POWER: u8 = 6;
const ATOM: u8 = 7;

fn precedence(node: &Node) -> u8 {
    match node {
        Node::Relation { .. } => REL,
        Node::Operator { op, .. } => match op {
            Op::Add | Op::Sub => ADD,
            Op::Mul | Op::Div => MUL,
            Op::Neg => NEG,
            Op::ImplicitMul => IMPLICIT,
            _ => ATOM,
        },
        Node::Power { .. } => POWER,
        _ => ATOM,
    }
}

/// Append `piece`, separating a trailing `\command` from a following letter.
fn push(out: &mut String, piece: &str) {
    let starts_alpha = piece.chars().next().is_some_and(|c| c.is_ascii_alphabetic());
    if starts_alpha && ends_with_command(out) {
        out.push(' ');
    }
    out.push_str(piece);
}

fn ends_with_command(s: &str) -> bool {
    let trimmed = s.trim_end_matches(|c: char| c.is_ascii_alphabetic());
    trimmed.len() < s.len() && trimmed.ends_with('\\')
}

pub fn render_node(node: &Node) -> String {
    let mut out = String::new();
    render_into(node, &mut out);
    out
}

fn render_min(node: &Node, min: u8) -> String {
    let inner = render_node(node);
    if precedence(node) < min {
        format!("{{{inner}}}")
    } else {
        inner
    }
}

fn variable_spelling(name: &str) -> String {
    match name.split_once('_') {
        Some((base, sub)) if sub.len() > 1 => format!("{base}_{{{sub}}}"),
        _ => name.to_string(),
    }
}

/// True when the rightmost atom printed for `node` is an identifier that
/// would turn a following `(` into a function application.
fn tail_is_function_name(node: &Node) -> bool {
    match node {
        Node::Variable(name) => is_function_name(name),
        Node::Operator {
            op: Op::ImplicitMul,
            args,
        } => tail_is_function_name(&args[1]),
        _ => false,
    }
}

fn render_into(node: &Node, out: &mut String) {
    match node {
        Node::Variable(name) => push(out, &variable_spelling(name)),
        Node::Constant(Constant::Pi) => push(out, "\\pi"),
        Node::Constant(Constant::E) => push(out, "e"),
        Node::Number(n) => push(out, n.literal()),
        Node::Operator { op, args } => match op {
            Op::Add | Op::Sub | Op::Mul | Op::Div => {
                let p = precedence(node);
                push(out, &render_min(&args[0], p));
                push(out, op.name());
                push(out, &render_min(&args[1], p + 1));
            }
            Op::ImplicitMul => {
                let left = render_min(&args[0], IMPLICIT);
                let mut right = render_min(&args[1], POWER);
                let digit_clash = left.ends_with(|c: char| c.is_ascii_digit())
                    && right.starts_with(|c: char| c.is_ascii_digit());
                let call_clash = right.starts_with('(') && tail_is_function_name(&args[0]);
                if digit_clash || call_clash {
                    right = format!("{{{right}}}");
                }
                push(out, &left);
                push(out, &right);
            }
            Op::Neg => {
                push(out, "-");
                push(out, &render_min(&args[0], NEG));
            }
            _ => {
                push(out, op.command().unwrap_or("?"));
                push(out, "{");
                push(out, &render_node(&args[0]));
                push(out, "}");
            }
        },
        Node::Group { bracket, inner } => {
            let (open, close) = match bracket {
                Bracket::Paren => ("(", ")"),
                Bracket::Square => ("[", "]"),
            };
            push(out, open);
            push(out, &render_node(inner));
            push(out, close);
        }
        Node::Relation { rel, left, right } => {
            push(out, &render_min(left, REL));
            push(out, rel.symbol());
            push(out, &render_min(right, REL + 1));
        }
        Node::FunctionApp { head, arg } => {
            push(out, &render_min(head, ATOM));
            push(out, "(");
            push(out, &render_node(arg));
            push(out, ")");
        }
        Node::Fraction { num, den } => {
            push(out, "\\frac{");
            push(out, &render_node(num));
            push(out, "}{");
            push(out, &render_node(den));
            push(out, "}");
        }
        Node::Power { base, exp } => {
            push(out, &render_min(base, ATOM));
            push(out, "^{");
            push(out, &render_node(exp));
            push(out, "}");
        }
    }
}
