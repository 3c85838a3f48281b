//! Rule-based grading of free-text responses and per-level accuracy metrics.
//!
//! Reward components are multiples of 0.1, so they are held as integer
//! tenths ([`Tenths`]) and only converted to `f64` at the edges. Totals such
//! as 1.1 then compare exactly.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decompose::DecompositionTree;
use crate::expr::{equivalent, parse, render, Expr, Outcome};
use crate::problem::{Problem, Rule};

/// A non-negative multiple of 0.1.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Tenths(pub u32);

impl Tenths {
    pub const ZERO: Tenths = Tenths(0);

    pub fn as_f64(self) -> f64 {
        // n / 10 is correctly rounded, so Tenths(11).as_f64() == 1.1 exactly
        f64::from(self.0) / 10.0
    }
}

impl std::ops::Add for Tenths {
    type Output = Tenths;
    fn add(self, rhs: Tenths) -> Tenths {
        Tenths(self.0 + rhs.0)
    }
}

impl fmt::Display for Tenths {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.0 / 10, self.0 % 10)
    }
}

pub const ACCURACY: Tenths = Tenths(10);
pub const FORMAT: Tenths = Tenths(1);
pub const RULE_BONUS: Tenths = Tenths(2);
pub const CHILD_BONUS: Tenths = Tenths(3);
pub const STEP_BONUS: Tenths = Tenths(1);

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RewardBreakdown {
    pub r_acc: Tenths,
    pub r_fmt: Tenths,
    pub rule_bonus: Tenths,
    pub child_bonus: Tenths,
    pub step_bonus: Tenths,
}

impl RewardBreakdown {
    pub fn base_total(&self) -> Tenths {
        self.r_acc + self.r_fmt
    }

    pub fn extended_total(&self) -> Tenths {
        self.base_total() + self.rule_bonus + self.child_bonus + self.step_bonus
    }
}

/// Where the graded final answer came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AnswerSource {
    Boxed,
    TrailingExpression,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub source: AnswerSource,
    /// Parse failure of the final payload, if any.
    pub parse_error: Option<String>,
    /// The equivalence check could not find enough admissible points; graded
    /// as incorrect.
    pub insufficient_domain: bool,
    /// Boxed steps that failed to parse.
    pub unparsed_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradedResponse {
    pub id: String,
    pub final_answer: Option<Expr>,
    pub breakdown: RewardBreakdown,
    pub steps: Vec<Expr>,
    pub diagnostics: Diagnostics,
}

impl GradedResponse {
    pub fn is_correct(&self) -> bool {
        self.breakdown.r_acc == ACCURACY
    }
}

const BOX_OPEN: &str = "\\boxed{";

/// Every maximal `\boxed{...}` payload with balanced braces, in order.
/// An occurrence whose braces never balance yields nothing.
pub fn extract_boxed(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find(BOX_OPEN) {
        let body = &rest[start + BOX_OPEN.len()..];
        let mut level = 1usize;
        let mut close = None;
        for (i, ch) in body.char_indices() {
            match ch {
                '{' => level += 1,
                '}' => {
                    level -= 1;
                    if level == 0 {
                        close = Some(i);
                        break;
                    }
                }
                _ => {}
            }
        }
        match close {
            Some(i) => {
                out.push(body[..i].trim().to_string());
                rest = &body[i + 1..];
            }
            None => rest = body,
        }
    }
    out
}

/// Longest parseable suffix of the last non-empty line, cut at a word,
/// `=` or `:` boundary, with trailing sentence punctuation and `$` removed.
pub fn trailing_expression(text: &str) -> Option<Expr> {
    let line = text.lines().rev().map(str::trim).find(|l| !l.is_empty())?;
    let line = line.trim_end_matches(['.', '$', ' ']);
    let starts = std::iter::once(0).chain(
        line.char_indices()
            .filter(|(_, c)| c.is_whitespace() || matches!(c, '=' | ':' | '$'))
            .map(|(i, c)| i + c.len_utf8()),
    );
    starts
        .filter_map(|i| {
            let candidate = line[i..].trim();
            (!candidate.is_empty()).then(|| parse(candidate).ok()).flatten()
        })
        .next()
}

fn is_equivalent(a: &Expr, b: &Expr) -> (bool, bool) {
    let v = equivalent(a, b);
    (v.outcome == Outcome::Equivalent, v.outcome == Outcome::InsufficientDomain)
}

/// Accuracy plus format reward.
pub fn grade_base(p: &Problem, response: &str) -> GradedResponse {
    let boxes = extract_boxed(response);
    let mut diagnostics = Diagnostics {
        source: AnswerSource::Missing,
        parse_error: None,
        insufficient_domain: false,
        unparsed_steps: 0,
    };
    let mut breakdown = RewardBreakdown::default();
    if !boxes.is_empty() {
        // format is syntactic: awarded even when the payload does not parse
        breakdown.r_fmt = FORMAT;
    }

    let final_answer = match boxes.last() {
        Some(payload) => {
            diagnostics.source = AnswerSource::Boxed;
            match parse(payload) {
                Ok(e) => Some(e),
                Err(err) => {
                    diagnostics.parse_error = Some(err.to_string());
                    None
                }
            }
        }
        None => {
            let found = trailing_expression(response);
            if found.is_some() {
                diagnostics.source = AnswerSource::TrailingExpression;
            }
            found
        }
    };
    if let Some(answer) = &final_answer {
        let (ok, insufficient) = is_equivalent(answer, &p.solution);
        diagnostics.insufficient_domain = insufficient;
        if ok {
            breakdown.r_acc = ACCURACY;
        }
    }

    let mut steps = Vec::new();
    for payload in boxes.iter().take(boxes.len().saturating_sub(1)) {
        match parse(payload) {
            Ok(e) => steps.push(e),
            Err(_) => diagnostics.unparsed_steps += 1,
        }
    }
    GradedResponse { id: p.id.clone(), final_answer, breakdown, steps, diagnostics }
}

/// Keywords that identify each rule when adjacent to the word "rule".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleKeywords(pub BTreeMap<Rule, Vec<String>>);

impl Default for RuleKeywords {
    fn default() -> Self {
        RuleKeywords(Rule::ALL.into_iter().map(|r| (r, vec![r.as_str().to_string()])).collect())
    }
}

impl RuleKeywords {
    /// True when some keyword for `rule` directly precedes or follows the
    /// word "rule" (case-insensitive, punctuation ignored).
    pub fn mentions(&self, text: &str, rule: Rule) -> bool {
        let lower = text.to_lowercase();
        let words: Vec<&str> =
            lower.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).collect();
        let Some(keywords) = self.0.get(&rule) else { return false };
        words.windows(2).any(|w| {
            let kw = |s: &str| keywords.iter().any(|k| k == s);
            (kw(w[0]) && w[1] == "rule") || (w[0] == "rule" && kw(w[1]))
        })
    }
}

/// Base reward plus the decomposition-aware bonuses. `tree` must be the
/// decomposition tree of `p`.
pub fn grade_extended(p: &Problem, response: &str, tree: &DecompositionTree) -> GradedResponse {
    grade_extended_with(p, response, tree, &RuleKeywords::default())
}

pub fn grade_extended_with(
    p: &Problem,
    response: &str,
    tree: &DecompositionTree,
    keywords: &RuleKeywords,
) -> GradedResponse {
    let mut graded = grade_base(p, response);
    let root = tree.root;
    let Some(first_edge) = tree.children_of(root).next() else {
        return graded;
    };
    if keywords.mentions(response, first_edge.rule) {
        graded.breakdown.rule_bonus = RULE_BONUS;
    }

    let children: HashSet<usize> = tree.children_of(root).map(|e| e.child).collect();
    let mut credited: HashSet<usize> = HashSet::new();
    let mut child_used = false;
    for step in &graded.steps {
        // each step credits at most one node, each node at most once
        let hit = (0..tree.nodes.len())
            .filter(|&i| i != root && !credited.contains(&i))
            .find(|&i| is_equivalent(step, &tree.nodes[i].solution).0);
        if let Some(i) = hit {
            credited.insert(i);
            child_used |= children.contains(&i);
        }
    }
    if !child_used {
        // a step may match a child that was already credited as another node
        child_used = graded
            .steps
            .iter()
            .any(|s| children.iter().any(|&c| is_equivalent(s, &tree.nodes[c].solution).0));
    }
    if child_used {
        graded.breakdown.child_bonus = CHILD_BONUS;
    }
    graded.breakdown.step_bonus = Tenths(STEP_BONUS.0 * credited.len() as u32);
    graded
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RewardError {
    #[error("graded response `{0}` matches no problem")]
    UnknownProblem(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelAccuracy {
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub baseline: Option<f64>,
    /// Relative improvement over the baseline in percent.
    pub delta_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AccuracyReport {
    pub levels: BTreeMap<usize, LevelAccuracy>,
    pub overall: f64,
    pub baseline_overall: Option<f64>,
    pub overall_delta_pct: Option<f64>,
}

/// Anything that records a problem id and whether it was answered correctly.
pub trait Outcomed {
    fn problem_id(&self) -> &str;
    fn is_correct(&self) -> bool;
}

impl Outcomed for GradedResponse {
    fn problem_id(&self) -> &str {
        &self.id
    }
    fn is_correct(&self) -> bool {
        GradedResponse::is_correct(self)
    }
}

impl Outcomed for GradedRecord {
    fn problem_id(&self) -> &str {
        &self.id
    }
    fn is_correct(&self) -> bool {
        self.r_acc == ACCURACY.as_f64()
    }
}

fn counts_by_level<G: Outcomed>(
    graded: &[G],
    levels: &HashMap<&str, usize>,
) -> Result<BTreeMap<usize, (usize, usize)>, RewardError> {
    let mut out: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for g in graded {
        let level = *levels
            .get(g.problem_id())
            .ok_or_else(|| RewardError::UnknownProblem(g.problem_id().to_string()))?;
        let slot = out.entry(level).or_default();
        slot.0 += 1;
        slot.1 += usize::from(g.is_correct());
    }
    Ok(out)
}

/// `(trained - base) / base * 100` from exact counts; `None` when the
/// baseline accuracy is zero.
fn relative_delta(
    correct: usize,
    total: usize,
    base_correct: usize,
    base_total: usize,
) -> Option<f64> {
    if base_correct == 0 || total == 0 {
        return None;
    }
    let trained = (correct * base_total) as f64;
    let base = (base_correct * total) as f64;
    Some((trained - base) / base * 100.0)
}

fn ratio(correct: usize, total: usize) -> f64 {
    if total == 0 {
        0.0
    } else {
        correct as f64 / total as f64
    }
}

/// Per-level accuracy, the level-size-weighted overall accuracy, and the
/// relative change against an optional baseline run.
pub fn accuracy_by_level<G: Outcomed, B: Outcomed>(
    graded: &[G],
    problems: &[Problem],
    baseline: Option<&[B]>,
) -> Result<AccuracyReport, RewardError> {
    let levels: HashMap<&str, usize> = problems.iter().map(|p| (p.id.as_str(), p.level)).collect();
    let trained = counts_by_level(graded, &levels)?;
    let base = baseline.map(|b| counts_by_level(b, &levels)).transpose()?;

    let mut report_levels = BTreeMap::new();
    for (&level, &(total, correct)) in &trained {
        let b = base.as_ref().and_then(|m| m.get(&level)).copied();
        report_levels.insert(
            level,
            LevelAccuracy {
                total,
                correct,
                accuracy: ratio(correct, total),
                baseline: b.map(|(t, c)| ratio(c, t)),
                delta_pct: b.and_then(|(t, c)| relative_delta(correct, total, c, t)),
            },
        );
    }
    let sum = |m: &BTreeMap<usize, (usize, usize)>| {
        m.values().fold((0, 0), |(t, c), &(lt, lc)| (t + lt, c + lc))
    };
    let (total, correct) = sum(&trained);
    let base_sum = base.as_ref().map(sum);
    Ok(AccuracyReport {
        levels: report_levels,
        overall: ratio(correct, total),
        baseline_overall: base_sum.map(|(t, c)| ratio(c, t)),
        overall_delta_pct: base_sum.and_then(|(t, c)| relative_delta(correct, total, c, t)),
    })
}

/// One line of a responses file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub id: String,
    pub response: String,
}

/// One line of a graded-output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradedRecord {
    pub id: String,
    pub r_acc: f64,
    pub r_fmt: f64,
    pub rule_bonus: f64,
    pub child_bonus: f64,
    pub step_bonus: f64,
    pub total: f64,
    pub final_answer: Option<String>,
}

impl From<&GradedResponse> for GradedRecord {
    fn from(g: &GradedResponse) -> Self {
        let b = &g.breakdown;
        GradedRecord {
            id: g.id.clone(),
            r_acc: b.r_acc.as_f64(),
            r_fmt: b.r_fmt.as_f64(),
            rule_bonus: b.rule_bonus.as_f64(),
            child_bonus: b.child_bonus.as_f64(),
            step_bonus: b.step_bonus.as_f64(),
            total: b.extended_total().as_f64(),
            final_answer: g.final_answer.as_ref().map(render),
        }
    }
}
