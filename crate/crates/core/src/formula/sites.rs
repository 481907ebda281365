use std::collections::BTreeMap;

use super::{FormulaAst, Node};

/// Child indices from the root down to a node.
pub type NodePath = Vec<usize>;

#[derive(Debug, Clone, Copy, Default)]
pub struct SiteOptions {
    /// Count single-letter function heads (`f` in `f(x)`) as variables.
    pub rename_function_heads: bool,
}

/// Augmentation sites, each list in source (left-to-right) order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SiteIndex {
    pub variables: BTreeMap<String, Vec<NodePath>>,
    pub functions: BTreeMap<String, Vec<NodePath>>,
    pub operators: Vec<(String, NodePath)>,
    pub numbers: Vec<(String, NodePath)>,
}

impl SiteIndex {
    pub fn variable_occurrences(&self) -> usize {
        self.variables.values().map(Vec::len).sum()
    }
}

pub fn index_sites(ast: &FormulaAst) -> SiteIndex {
    index_sites_with(ast, SiteOptions::default())
}

pub fn index_sites_with(ast: &FormulaAst, options: SiteOptions) -> SiteIndex {
    let mut index = SiteIndex::default();
    let mut path = Vec::new();
    walk(&ast.root, &mut path, false, options, &mut index);
    index
}

fn walk(node: &Node, path: &mut NodePath, is_head: bool, opts: SiteOptions, idx: &mut SiteIndex) {
    let visit_child = |i: usize, child: &Node, head: bool, path: &mut NodePath, idx: &mut SiteIndex| {
        path.push(i);
        walk(child, path, head, opts, idx);
        path.pop();
    };
    match node {
        Node::Variable(name) => {
            let map = if is_head && !opts.rename_function_heads {
                &mut idx.functions
            } else {
                &mut idx.variables
            };
            map.entry(name.clone()).or_default().push(path.clone());
        }
        Node::Number(n) => idx.numbers.push((n.literal().to_string(), path.clone())),
        Node::Constant(_) => {}
        Node::Operator { op, args } if args.len() == 2 => {
            visit_child(0, &args[0], false, path, idx);
            idx.operators.push((op.name().to_string(), path.clone()));
            visit_child(1, &args[1], false, path, idx);
        }
        Node::Operator { op, args } => {
            idx.operators.push((op.name().to_string(), path.clone()));
            for (i, a) in args.iter().enumerate() {
                visit_child(i, a, false, path, idx);
            }
        }
        Node::Group { inner, .. } => visit_child(0, inner, false, path, idx),
        Node::Relation { rel, left, right } => {
            visit_child(0, left, false, path, idx);
            idx.operators.push((rel.name().to_string(), path.clone()));
            visit_child(1, right, false, path, idx);
        }
        Node::FunctionApp { head, arg } => {
            visit_child(0, head, true, path, idx);
            visit_child(1, arg, false, path, idx);
        }
        Node::Fraction { num, den } => {
            idx.operators.push(("frac".to_string(), path.clone()));
            visit_child(0, num, false, path, idx);
            visit_child(1, den, false, path, idx);
        }
        Node::Power { base, exp } => {
            visit_child(0, base, false, path, idx);
            idx.operators.push(("^".to_string(), path.clone()));
            visit_child(1, exp, false, path, idx);
        }
    }
}
