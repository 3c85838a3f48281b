//! Group-relative policy optimization arithmetic and preference pairing.
//!
//! These are the numbers an external trainer needs: normalized advantages,
//! the clipped surrogate, a sampled KL penalty and the combined objective.
//! Nothing here touches gradients or models.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::reward::GradedResponse;

/// Bound on the log-ratio fed to `exp` in the KL estimator.
pub const KL_CLAMP: f64 = 30.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RlError {
    #[error("group has {0} samples; at least 2 are required")]
    GroupTooSmall(usize),
    #[error("group {index} has {found} samples, expected {expected}")]
    GroupSize { index: usize, found: usize, expected: usize },
    #[error("probability ratio must be positive, got {0}")]
    NonPositiveRatio(f64),
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("invalid config: {0}")]
    Config(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSample {
    pub reward: f64,
    /// Summed token log-probability under the current policy.
    pub logp: f64,
    /// Summed token log-probability under the reference policy.
    pub logp_ref: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RlConfig {
    pub group_size: usize,
    pub clip: f64,
    pub beta: f64,
    pub eps_norm: f64,
}

impl Default for RlConfig {
    fn default() -> Self {
        Self { group_size: 4, clip: 0.2, beta: 0.001, eps_norm: 1e-8 }
    }
}

impl RlConfig {
    pub fn validate(&self) -> Result<(), RlError> {
        if self.group_size < 2 {
            return Err(RlError::Config("group size must be at least 2"));
        }
        if !(self.clip > 0.0 && self.clip < 1.0) {
            return Err(RlError::Config("clip must lie in (0, 1)"));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(RlError::Config("beta must be finite and non-negative"));
        }
        if !(self.eps_norm > 0.0 && self.eps_norm.is_finite()) {
            return Err(RlError::Config("eps_norm must be finite and positive"));
        }
        Ok(())
    }
}

/// `(R_i - mean) / (std + eps_norm)` with the population standard deviation.
pub fn group_advantages(rewards: &[f64], eps_norm: f64) -> Result<Vec<f64>, RlError> {
    if rewards.len() < 2 {
        return Err(RlError::GroupTooSmall(rewards.len()));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(RlError::NonFinite("reward"));
    }
    if rewards.iter().all(|r| *r == rewards[0]) {
        // exact zeros; the rounded mean of equal values can differ from them
        return Ok(vec![0.0; rewards.len()]);
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let denom = var.sqrt() + eps_norm;
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// `min(ratio * A, clip(ratio, 1 - clip, 1 + clip) * A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip: f64) -> Result<f64, RlError> {
    if !ratio.is_finite() || !advantage.is_finite() {
        return Err(RlError::NonFinite("ratio or advantage"));
    }
    if ratio <= 0.0 {
        return Err(RlError::NonPositiveRatio(ratio));
    }
    let clipped = ratio.clamp(1.0 - clip, 1.0 + clip);
    Ok((ratio * advantage).min(clipped * advantage))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlEstimate {
    pub value: f64,
    /// The log-ratio was clamped to `±KL_CLAMP`.
    pub clamped: bool,
}

/// Sampled KL penalty `exp(d) - d - 1` with `d = logp_ref - logp`. Never
/// negative, zero exactly when the log-probs agree.
pub fn kl_penalty(sample: &GroupSample) -> Result<KlEstimate, RlError> {
    if !sample.logp.is_finite() || !sample.logp_ref.is_finite() {
        return Err(RlError::NonFinite("log-probability"));
    }
    let raw = sample.logp_ref - sample.logp;
    let d = raw.clamp(-KL_CLAMP, KL_CLAMP);
    // exp_m1 keeps precision for small d, where exp(d) - 1 cancels
    Ok(KlEstimate { value: (d.exp_m1() - d).max(0.0), clamped: d != raw })
}

/// Mean over groups of the averaged clipped surrogate, minus `beta` times
/// the mean KL penalty over all samples.
pub fn grpo_objective(groups: &[Vec<GroupSample>], cfg: &RlConfig) -> Result<f64, RlError> {
    cfg.validate()?;
    if groups.is_empty() {
        return Ok(0.0);
    }
    let mut surrogate = 0.0;
    let mut kl = 0.0;
    let mut samples = 0usize;
    for (index, group) in groups.iter().enumerate() {
        if group.len() != cfg.group_size {
            return Err(RlError::GroupSize { index, found: group.len(), expected: cfg.group_size });
        }
        let rewards: Vec<f64> = group.iter().map(|s| s.reward).collect();
        let adv = group_advantages(&rewards, cfg.eps_norm)?;
        let mut group_sum = 0.0;
        for (s, a) in group.iter().zip(&adv) {
            group_sum += clipped_surrogate((s.logp - s.logp_ref).exp(), *a, cfg.clip)?;
            kl += kl_penalty(s)?.value;
            samples += 1;
        }
        surrogate += group_sum / group.len() as f64;
    }
    Ok(surrogate / groups.len() as f64 - cfg.beta * kl / samples as f64)
}

/// Correct-versus-incorrect response pairs for one problem: the cross
/// product in input order, truncated to `cap`.
pub fn build_preference_pairs<'a>(
    responses: impl IntoIterator<Item = &'a GradedResponse>,
    cap: usize,
) -> Vec<(&'a GradedResponse, &'a GradedResponse)> {
    let (correct, wrong): (Vec<_>, Vec<_>) = responses.into_iter().partition(|g| g.is_correct());
    correct.iter().flat_map(|c| wrong.iter().map(move |w| (*c, *w))).take(cap).collect()
}

pub const DEFAULT_PAIR_CAP: usize = 4;

/// Groups responses by problem id (first-appearance order) and pairs each.
pub fn preference_pairs_by_problem(
    responses: &[GradedResponse],
    cap: usize,
) -> Vec<(&GradedResponse, &GradedResponse)> {
    let mut ids: Vec<&str> = Vec::new();
    for g in responses {
        if !ids.contains(&g.id.as_str()) {
            ids.push(&g.id);
        }
    }
    ids.into_iter()
        .flat_map(|id| build_preference_pairs(responses.iter().filter(|g| g.id == id), cap))
        .collect()
}

/// One line of a samples file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub problem_id: String,
    pub reward: f64,
    pub logp: f64,
    pub logp_ref: f64,
}

/// Groups sample records by problem id, keeping first-appearance order.
pub fn group_records(records: &[SampleRecord]) -> Vec<(String, Vec<GroupSample>)> {
    let mut out: Vec<(String, Vec<GroupSample>)> = Vec::new();
    for r in records {
        let s = GroupSample { reward: r.reward, logp: r.logp, logp_ref: r.logp_ref };
        match out.iter_mut().find(|(id, _)| *id == r.problem_id) {
            Some((_, g)) => g.push(s),
            None => out.push((r.problem_id.clone(), vec![s])),
        }
    }
    out
}
