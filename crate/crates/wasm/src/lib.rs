//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Each export is a thin wrapper over a plain Rust function so the logic can
//! be tested natively.

use serde::Serialize;
use thiserror::Error;
use wasm_bindgen::prelude::*;

use derivtree::calculus::{differentiate, finite_difference};
use derivtree::decompose::{build_tree, render_table};
use derivtree::expr::{eval_at, parse, ParseError};
use derivtree::problem::Problem;
use derivtree::rl::{group_advantages, RlError};

const MAX_SAMPLES: usize = 4096;

#[derive(Debug, Error)]
pub enum DemoError {
    #[error("{0}")]
    Parse(#[from] ParseError),
    #[error("{0}")]
    Rl(#[from] RlError),
    #[error("{0}")]
    Input(String),
}

/// Full decomposition table of `expr`.
pub fn decomposition_table(expr: &str) -> Result<String, DemoError> {
    let problem = Problem::new("input", parse(expr)?);
    let tree = build_tree(&problem).map_err(|e| DemoError::Input(e.to_string()))?;
    Ok(render_table(&tree))
}

#[derive(Debug, Serialize)]
pub struct Curve {
    pub derivative: String,
    pub xs: Vec<f64>,
    /// `None` where the point is outside the domain.
    pub f: Vec<Option<f64>>,
    pub df: Vec<Option<f64>>,
    pub fd: Vec<Option<f64>>,
}

/// Samples `f`, its symbolic derivative and a central finite difference on
/// an even grid over `[lo, hi]`.
pub fn derivative_curve(expr: &str, lo: f64, hi: f64, samples: usize) -> Result<Curve, DemoError> {
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(DemoError::Input("need finite lo < hi".into()));
    }
    if !(2..=MAX_SAMPLES).contains(&samples) {
        return Err(DemoError::Input(format!("samples must lie in 2..={MAX_SAMPLES}")));
    }
    let e = parse(expr)?;
    let d = differentiate(&e);
    let step = (hi - lo) / (samples - 1) as f64;
    let xs: Vec<f64> = (0..samples).map(|i| lo + step * i as f64).collect();
    Ok(Curve {
        derivative: d.to_string(),
        f: xs.iter().map(|&x| eval_at(&e, x).ok()).collect(),
        df: xs.iter().map(|&x| eval_at(&d, x).ok()).collect(),
        fd: xs.iter().map(|&x| finite_difference(&e, x, 1e-5).ok()).collect(),
        xs,
    })
}

/// Group-normalized advantages of comma-separated rewards.
pub fn advantages(rewards: &str, eps_norm: f64) -> Result<Vec<f64>, DemoError> {
    let values = rewards
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<f64>().map_err(|e| DemoError::Input(format!("`{s}`: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(group_advantages(&values, eps_norm)?)
}

fn js<T>(r: Result<T, DemoError>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = decompositionTable)]
pub fn decomposition_table_js(expr: &str) -> Result<String, JsError> {
    js(decomposition_table(expr))
}

/// JSON-encoded [`Curve`].
#[wasm_bindgen(js_name = derivativeCurve)]
pub fn derivative_curve_js(
    expr: &str,
    lo: f64,
    hi: f64,
    samples: usize,
) -> Result<String, JsError> {
    let curve = js(derivative_curve(expr, lo, hi, samples))?;
    Ok(serde_json::to_string(&curve).expect("curve serializes"))
}

#[wasm_bindgen(js_name = groupAdvantages)]
pub fn advantages_js(rewards: &str, eps_norm: f64) -> Result<Vec<f64>, JsError> {
    js(advantages(rewards, eps_norm))
}
