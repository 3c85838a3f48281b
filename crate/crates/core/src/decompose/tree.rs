use std::collections::HashMap;

use serde::Serialize;
use thiserror::Error;

use super::{decompose_verified, VerificationReport};
use crate::expr::{node_count, Expr};
use crate::problem::{Problem, Rule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TreeError {
    #[error("decomposition of `{root}` exceeded depth bound {limit}")]
    RecursionLimit { root: String, limit: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeEdge {
    pub parent: usize,
    pub child: usize,
    pub rule: Rule,
    pub report: VerificationReport,
}

/// Verified decomposition DAG. Repeated sub-expressions share one node;
/// `multiplicity[i]` counts the root-to-node paths that reach node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecompositionTree {
    pub nodes: Vec<Problem>,
    pub edges: Vec<TreeEdge>,
    pub root: usize,
    pub multiplicity: Vec<u64>,
}

/// Recursively decomposes `problem` until every leaf is a base case.
pub fn build_tree(problem: &Problem) -> Result<DecompositionTree, TreeError> {
    let mut nodes = vec![problem.clone()];
    let mut index: HashMap<Expr, usize> = HashMap::from([(problem.expr.clone(), 0)]);
    let mut edges = Vec::new();
    let mut stack = vec![0usize];
    // Every edge strictly shrinks the node count, so no path is longer.
    let edge_limit = node_count(&problem.expr);
    let mut edge_depth = vec![0usize];

    while let Some(current) = stack.pop() {
        if edge_depth[current] > edge_limit {
            return Err(TreeError::RecursionLimit {
                root: problem.expr.to_string(),
                limit: edge_limit,
            });
        }
        let parent_expr = nodes[current].expr.clone();
        for (child, rule, report) in decompose_verified(&parent_expr) {
            let child_idx = match index.get(&child) {
                Some(&i) => i,
                None => {
                    let i = nodes.len();
                    let id = format!("{}.{}", problem.id, i);
                    nodes.push(Problem::new(id, child.clone()));
                    index.insert(child, i);
                    edge_depth.push(0);
                    stack.push(i);
                    i
                }
            };
            edge_depth[child_idx] = edge_depth[child_idx].max(edge_depth[current] + 1);
            edges.push(TreeEdge { parent: current, child: child_idx, rule, report });
        }
    }

    let mut tree = DecompositionTree { nodes, edges, root: 0, multiplicity: Vec::new() };
    tree.multiplicity = tree.path_counts();
    if problem.depth >= 1 && tree.depth() > problem.depth - 1 {
        return Err(TreeError::RecursionLimit {
            root: problem.expr.to_string(),
            limit: problem.depth - 1,
        });
    }
    Ok(tree)
}

impl DecompositionTree {
    pub fn root(&self) -> &Problem {
        &self.nodes[self.root]
    }

    pub fn children_of(&self, node: usize) -> impl Iterator<Item = &TreeEdge> {
        self.edges.iter().filter(move |e| e.parent == node)
    }

    /// Node indices ordered so that every parent precedes its children.
    /// Node counts strictly decrease along edges, which makes this a
    /// topological order of the DAG.
    pub fn topological_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(node_count(&self.nodes[i].expr)), i));
        order
    }

    fn path_counts(&self) -> Vec<u64> {
        let mut counts = vec![0u64; self.nodes.len()];
        counts[self.root] = 1;
        for i in self.topological_order() {
            for e in self.children_of(i) {
                counts[e.child] += counts[i];
            }
        }
        counts
    }

    fn longest_path(&self, weight: impl Fn(&TreeEdge) -> usize) -> usize {
        let mut best = vec![0usize; self.nodes.len()];
        for i in self.topological_order() {
            for e in self.children_of(i) {
                best[e.child] = best[e.child].max(best[i] + weight(e));
            }
        }
        best.into_iter().max().unwrap_or(0)
    }

    /// The root and its direct children only.
    pub fn first_level(&self) -> DecompositionTree {
        let mut nodes = vec![self.nodes[self.root].clone()];
        let mut edges = Vec::new();
        for e in self.children_of(self.root) {
            nodes.push(self.nodes[e.child].clone());
            edges.push(TreeEdge { parent: 0, child: nodes.len() - 1, ..e.clone() });
        }
        let mut tree = DecompositionTree { nodes, edges, root: 0, multiplicity: Vec::new() };
        tree.multiplicity = tree.path_counts();
        tree
    }

    /// Depth measured in difficulty strata: the largest number of
    /// depth-decreasing edges on any root-to-node path. Product and sum edges
    /// that keep the nesting depth stay within one stratum.
    pub fn depth(&self) -> usize {
        self.longest_path(|e| usize::from(self.nodes[e.child].depth < self.nodes[e.parent].depth))
    }

    /// Longest root-to-node path counted in edges.
    pub fn edge_depth(&self) -> usize {
        self.longest_path(|_| 1)
    }

    /// Checks the structural invariants: all edges verified, acyclic (node
    /// counts strictly decrease), everything reachable, depth bound.
    pub fn check_invariants(&self) -> Result<(), String> {
        for e in &self.edges {
            if !e.report.overall {
                return Err(format!("edge {} -> {} failed verification", e.parent, e.child));
            }
            let (p, c) = (&self.nodes[e.parent], &self.nodes[e.child]);
            if node_count(&c.expr) >= node_count(&p.expr) {
                return Err(format!("edge {} -> {} does not shrink", p.expr, c.expr));
            }
            if e.rule == Rule::Chain && p.depth != c.depth + 1 {
                return Err(format!("chain edge {} -> {} skips a level", p.expr, c.expr));
            }
        }
        if let Some(i) = self.multiplicity.iter().position(|&m| m == 0) {
            return Err(format!("node {} is unreachable", self.nodes[i].expr));
        }
        let root_depth = self.root().depth;
        if root_depth >= 1 && self.depth() > root_depth - 1 {
            return Err(format!("tree depth {} exceeds {}", self.depth(), root_depth - 1));
        }
        Ok(())
    }
}
