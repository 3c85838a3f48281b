use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::differentiate;
use crate::expr::{default_points, depth, eval_at, Expr, Func};
use crate::problem::Problem;

pub const MAX_LEVEL: usize = 5;

const FUNCS: [Func; 5] = [Func::Sin, Func::Cos, Func::Tan, Func::Exp, Func::Log];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("level {0} is outside 1..=5")]
    BadLevel(usize),
    #[error("invalid generator config: {0}")]
    Config(String),
    #[error("no acceptable level-{level} problem after {attempts} draws")]
    ResampleLimit { level: usize, attempts: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub per_level: BTreeMap<usize, usize>,
    pub seed: u64,
    pub exponent_range: (i32, i32),
    /// Composition, product, sum.
    pub weights: [f64; 3],
    pub constant_range: (i64, i64),
    /// Probability that a level-1 base form gets a constant coefficient.
    pub coefficient_prob: f64,
    /// Problems whose value or derivative exceeds this magnitude at any
    /// sample point are rejected as numerically ill-conditioned.
    pub max_magnitude: f64,
    /// Minimum number of the 32 equivalence sample points where both the
    /// problem and its derivative must be defined.
    pub min_admissible: usize,
    pub max_attempts: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            per_level: (1..=MAX_LEVEL).map(|k| (k, 100)).collect(),
            seed: 0,
            exponent_range: (2, 5),
            weights: [0.5, 0.25, 0.25],
            constant_range: (-5, 5),
            coefficient_prob: 0.5,
            max_magnitude: 1e4,
            min_admissible: 16,
            max_attempts: 200,
        }
    }
}

impl GeneratorConfig {
    pub fn with_per_level(seed: u64, count: usize) -> Self {
        Self { per_level: (1..=MAX_LEVEL).map(|k| (k, count)).collect(), seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        let bad = |m: &str| Err(GenError::Config(m.to_string()));
        if let Some(k) = self.per_level.keys().find(|k| !(1..=MAX_LEVEL).contains(*k)) {
            return Err(GenError::BadLevel(*k));
        }
        let (lo, hi) = self.exponent_range;
        if lo < 2 || hi < lo {
            return bad("exponent range must satisfy 2 <= lo <= hi");
        }
        if self.weights.iter().any(|w| !w.is_finite() || *w < 0.0)
            || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return bad("operator weights must be non-negative and sum to 1");
        }
        let (clo, chi) = self.constant_range;
        if clo > chi || (clo == 0 && chi == 0) {
            return bad("constant range must contain a nonzero integer");
        }
        if !(0.0..=1.0).contains(&self.coefficient_prob) {
            return bad("coefficient probability must lie in [0, 1]");
        }
        if self.min_admissible > default_points().len() {
            return bad("min_admissible exceeds the number of sample points");
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Op {
    Compose,
    Product,
    Sum,
}

fn pick_op(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> Op {
    let [c, p, _] = cfg.weights;
    let r: f64 = rng.gen();
    if r < c {
        Op::Compose
    } else if r < c + p {
        Op::Product
    } else {
        Op::Sum
    }
}

fn nonzero_constant(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng) -> i64 {
    let (lo, hi) = cfg.constant_range;
    loop {
        let c = rng.gen_range(lo..=hi);
        if c != 0 {
            return c;
        }
    }
}

/// Wraps `inner` in one basis application: a function or an integer power.
fn compose(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng, inner: Expr) -> Expr {
    // six outer forms: five functions plus the power
    match rng.gen_range(0..FUNCS.len() + 1) {
        i if i < FUNCS.len() => Expr::apply(FUNCS[i], inner),
        _ => {
            let (lo, hi) = cfg.exponent_range;
            Expr::pow(inner, rng.gen_range(lo..=hi))
        }
    }
}

/// A single basis application of exact depth `level`: a possibly scaled
/// base form at level 1, otherwise a function or power of a shallower draw.
fn draw_atom(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng, level: usize) -> Expr {
    if level == 1 {
        let base = compose(cfg, rng, Expr::x());
        return if rng.gen_bool(cfg.coefficient_prob) {
            Expr::product(vec![Expr::int(nonzero_constant(cfg, rng)), base])
        } else {
            base
        };
    }
    let inner = draw(cfg, rng, level - 1);
    compose(cfg, rng, inner)
}

/// Raw draw with nesting depth aimed at `level`; not yet filtered.
fn draw(cfg: &GeneratorConfig, rng: &mut ChaCha8Rng, level: usize) -> Expr {
    match pick_op(cfg, rng) {
        Op::Compose => draw_atom(cfg, rng, level),
        op => {
            // one operand carries the full depth, the other any depth in 1..=level
            let other = rng.gen_range(1..=level);
            let mut ops = vec![draw_atom(cfg, rng, level), draw_atom(cfg, rng, other)];
            ops.shuffle(rng);
            match op {
                Op::Product => Expr::product(ops),
                _ => Expr::sum(ops),
            }
        }
    }
}

fn well_conditioned(cfg: &GeneratorConfig, e: &Expr) -> bool {
    let d = differentiate(e);
    let mut admissible = 0;
    for &x0 in default_points() {
        match (eval_at(e, x0), eval_at(&d, x0)) {
            (Ok(v), Ok(dv)) => {
                if v.abs() > cfg.max_magnitude || dv.abs() > cfg.max_magnitude {
                    return false;
                }
                admissible += 1;
            }
            _ => continue,
        }
    }
    admissible >= cfg.min_admissible
}

fn acceptable(cfg: &GeneratorConfig, e: &Expr, level: usize) -> bool {
    if depth(e) != level || *e == Expr::x() || !e.depends_on_x() {
        return false;
    }
    !has_repeated_operand(e) && well_conditioned(cfg, e)
}

/// Repeated operands such as `sin(x) + sin(x)` or `x^3*x^3` are degenerate
/// since canonical form keeps them unmerged.
fn has_repeated_operand(e: &Expr) -> bool {
    let ops = e.children();
    let repeated =
        matches!(e, Expr::Sum(_) | Expr::Product(_)) && ops.windows(2).any(|w| w[0] == w[1]);
    repeated || ops.iter().any(has_repeated_operand)
}

/// Draws one canonical expression of nesting depth exactly `level`,
/// resampling degenerate or ill-conditioned draws.
pub fn generate_expr(
    cfg: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
    level: usize,
) -> Result<Expr, GenError> {
    if !(1..=MAX_LEVEL).contains(&level) {
        return Err(GenError::BadLevel(level));
    }
    for _ in 0..cfg.max_attempts {
        let e = draw(cfg, rng, level);
        if acceptable(cfg, &e, level) {
            return Ok(e);
        }
    }
    Err(GenError::ResampleLimit { level, attempts: cfg.max_attempts })
}

pub fn generate_problem(
    cfg: &GeneratorConfig,
    rng: &mut ChaCha8Rng,
    level: usize,
    id: impl Into<String>,
) -> Result<Problem, GenError> {
    generate_expr(cfg, rng, level).map(|e| Problem::new(id, e))
}

/// The generator stream for one level: master seed plus level as stream id.
pub fn level_rng(seed: u64, level: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(level as u64);
    rng
}

/// Deduplicated problems, levels ascending, ids `d{level}-{index:03}`.
///
/// A level whose distinct population runs dry before reaching its count is
/// capped with a warning instead of failing.
pub fn generate_dataset(cfg: &GeneratorConfig) -> Result<Vec<Problem>, GenError> {
    cfg.validate()?;
    let mut out = Vec::new();
    for (&level, &count) in &cfg.per_level {
        let mut rng = level_rng(cfg.seed, level);
        let mut seen = HashSet::new();
        let mut misses = 0;
        while seen.len() < count {
            let e = generate_expr(cfg, &mut rng, level)?;
            if seen.insert(e.clone()) {
                misses = 0;
                out.push(Problem::new(format!("d{level}-{:03}", seen.len() - 1), e));
            } else {
                misses += 1;
                if misses >= cfg.max_attempts {
                    log::warn!("level {level}: only {} distinct problems found", seen.len());
                    break;
                }
            }
        }
    }
    Ok(out)
}
