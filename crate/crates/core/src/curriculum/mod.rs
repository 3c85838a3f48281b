//! Problem generation per difficulty level and curriculum compilation.
//!
//! A curriculum is the union of the decomposition trees of a set of target
//! problems, deduplicated by canonical expression and sorted so that every
//! child comes before each of its parents and levels never decrease.

mod generate;
mod io;

use std::collections::{BTreeMap, HashMap};
use std::ops::Range;

use serde::Serialize;
use thiserror::Error;

pub use generate::{
    generate_dataset, generate_expr, generate_problem, level_rng, GenError, GeneratorConfig,
    MAX_LEVEL,
};
pub use io::{
    export_curriculum, export_problems, import_curriculum, import_problems, read_curriculum,
    read_problems, write_atomic, write_curriculum, write_problems, CurriculumRecord, DatasetError,
    ProblemRecord,
};

use crate::decompose::{build_tree, decompose, TreeError};
use crate::expr::{node_count, render, Expr};
use crate::problem::{Problem, Rule};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CurriculumEntry {
    pub order: usize,
    pub problem: Problem,
    /// Root-to-node path count, summed over all target trees.
    pub multiplicity: u64,
    /// Ids of the entries that decompose directly into this one.
    pub parents: Vec<String>,
    /// Rule of the edge from the earliest parent; `None` for pure targets.
    pub rule: Option<Rule>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Curriculum {
    pub entries: Vec<CurriculumEntry>,
}

/// Sort key: (level, node_count, rendered). Node counts strictly drop along
/// every edge and levels never rise, so this order is topological.
fn order_key(e: &Expr) -> (usize, usize, String) {
    (crate::problem::level_of(crate::expr::depth(e)), node_count(e), render(e))
}

pub fn build_curriculum(targets: &[Problem]) -> Result<Curriculum, TreeError> {
    struct Node {
        problem: Problem,
        multiplicity: u64,
        // (parent expr, rule)
        parents: Vec<(Expr, Rule)>,
    }
    let mut nodes: HashMap<Expr, Node> = HashMap::new();
    let mut target_ids: HashMap<Expr, String> = HashMap::new();
    for t in targets {
        target_ids.entry(t.expr.clone()).or_insert_with(|| t.id.clone());
    }

    for target in targets {
        let tree = build_tree(target)?;
        for (i, problem) in tree.nodes.iter().enumerate() {
            let node = nodes.entry(problem.expr.clone()).or_insert_with(|| Node {
                problem: problem.clone(),
                multiplicity: 0,
                parents: Vec::new(),
            });
            node.multiplicity += tree.multiplicity[i];
        }
        for edge in &tree.edges {
            let parent = tree.nodes[edge.parent].expr.clone();
            let node = nodes.get_mut(&tree.nodes[edge.child].expr).expect("child node");
            if !node.parents.iter().any(|(p, _)| *p == parent) {
                node.parents.push((parent, edge.rule));
            }
        }
    }

    let mut sorted: Vec<Node> = nodes.into_values().collect();
    sorted.sort_by_cached_key(|n| order_key(&n.problem.expr));

    let ids: HashMap<Expr, String> = sorted
        .iter()
        .enumerate()
        .map(|(order, n)| {
            let id =
                target_ids.get(&n.problem.expr).cloned().unwrap_or_else(|| format!("c{order:04}"));
            (n.problem.expr.clone(), id)
        })
        .collect();
    let position: HashMap<&Expr, usize> =
        sorted.iter().enumerate().map(|(i, n)| (&n.problem.expr, i)).collect();

    let entries = sorted
        .iter()
        .enumerate()
        .map(|(order, n)| {
            let mut parents = n.parents.clone();
            parents.sort_by_key(|(p, _)| position[p]);
            let mut problem = n.problem.clone();
            problem.id = ids[&problem.expr].clone();
            CurriculumEntry {
                order,
                problem,
                multiplicity: n.multiplicity,
                rule: parents.first().map(|(_, r)| *r),
                parents: parents.iter().map(|(p, _)| ids[p].clone()).collect(),
            }
        })
        .collect();
    Ok(Curriculum { entries })
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CurriculumViolation {
    #[error("entry {index} has order field {found}")]
    OrderField { index: usize, found: usize },
    #[error("level drops from D{prev} to D{next} at entry {index}")]
    LevelDecrease { index: usize, prev: usize, next: usize },
    #[error("entry `{child}` lists unknown parent `{parent}`")]
    UnknownParent { child: String, parent: String },
    #[error(
        "child `{child}` (#{child_index}) does not precede parent `{parent}` (#{parent_index})"
    )]
    ChildAfterParent { child: String, child_index: usize, parent: String, parent_index: usize },
    #[error("entry `{0}` appears more than once")]
    Duplicate(String),
    #[error("entry `{0}` has zero multiplicity")]
    ZeroMultiplicity(String),
    #[error("level-{level} entry `{expr}` has no verified child earlier in the order")]
    NoPrerequisite { expr: String, level: usize },
}

impl Curriculum {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Index range of each level's stratum.
    pub fn strata(&self) -> BTreeMap<usize, Range<usize>> {
        let mut out: BTreeMap<usize, Range<usize>> = BTreeMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            out.entry(e.problem.level).and_modify(|r| r.end = i + 1).or_insert(i..i + 1);
        }
        out
    }

    /// Verified decomposition edges `(child index, parent index, rule)` among
    /// the entries, recomputed from the expressions.
    pub fn edges(&self) -> Vec<(usize, usize, Rule)> {
        let position: HashMap<&Expr, usize> =
            self.entries.iter().enumerate().map(|(i, e)| (&e.problem.expr, i)).collect();
        let mut out = Vec::new();
        for (pi, entry) in self.entries.iter().enumerate() {
            for (child, rule) in decompose(&entry.problem.expr) {
                if let Some(&ci) = position.get(&child) {
                    out.push((ci, pi, rule));
                }
            }
        }
        out
    }

    /// Audits ordering, deduplication and prerequisite invariants.
    pub fn check(&self) -> Result<(), CurriculumViolation> {
        let mut index: HashMap<&str, usize> = HashMap::new();
        let mut exprs: HashMap<&Expr, usize> = HashMap::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.order != i {
                return Err(CurriculumViolation::OrderField { index: i, found: e.order });
            }
            if i > 0 && self.entries[i - 1].problem.level > e.problem.level {
                return Err(CurriculumViolation::LevelDecrease {
                    index: i,
                    prev: self.entries[i - 1].problem.level,
                    next: e.problem.level,
                });
            }
            if e.multiplicity == 0 {
                return Err(CurriculumViolation::ZeroMultiplicity(e.problem.id.clone()));
            }
            let dup_id = index.insert(e.problem.id.as_str(), i).is_some();
            if dup_id || exprs.insert(&e.problem.expr, i).is_some() {
                return Err(CurriculumViolation::Duplicate(e.problem.expr.to_string()));
            }
        }
        for (i, e) in self.entries.iter().enumerate() {
            for parent in &e.parents {
                let Some(&pi) = index.get(parent.as_str()) else {
                    return Err(CurriculumViolation::UnknownParent {
                        child: e.problem.id.clone(),
                        parent: parent.clone(),
                    });
                };
                if pi <= i {
                    return Err(self.misordered(i, pi));
                }
            }
        }
        let mut has_child = vec![false; self.entries.len()];
        for (ci, pi, _) in self.edges() {
            if ci >= pi {
                return Err(self.misordered(ci, pi));
            }
            has_child[pi] = true;
        }
        for (i, e) in self.entries.iter().enumerate() {
            if e.problem.level >= 2 && !has_child[i] {
                return Err(CurriculumViolation::NoPrerequisite {
                    expr: e.problem.expr.to_string(),
                    level: e.problem.level,
                });
            }
        }
        Ok(())
    }

    fn misordered(&self, child: usize, parent: usize) -> CurriculumViolation {
        CurriculumViolation::ChildAfterParent {
            child: self.entries[child].problem.id.clone(),
            child_index: child,
            parent: self.entries[parent].problem.id.clone(),
            parent_index: parent,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LevelStats {
    pub count: usize,
    pub multiplicity: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CurriculumStats {
    pub levels: BTreeMap<usize, LevelStats>,
    pub edges: BTreeMap<Rule, usize>,
    pub total: usize,
}

pub fn curriculum_stats(c: &Curriculum) -> CurriculumStats {
    let mut stats = CurriculumStats { total: c.len(), ..CurriculumStats::default() };
    for k in 1..=MAX_LEVEL {
        stats.levels.insert(k, LevelStats::default());
    }
    for e in &c.entries {
        let level = stats.levels.entry(e.problem.level).or_default();
        level.count += 1;
        level.multiplicity += e.multiplicity;
    }
    for rule in Rule::ALL {
        stats.edges.insert(rule, 0);
    }
    for (_, _, rule) in c.edges() {
        *stats.edges.entry(rule).or_default() += 1;
    }
    stats
}
