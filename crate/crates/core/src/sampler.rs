//! Modified rejection sampling at session granularity.
//!
//! Classical rejection sampling accepts with probability f_goal(x) / (c f(x));
//! here the data density is dropped from the denominator and the ratio is
//! taken against M, the peak of the fitted base density. A session is kept or
//! dropped as a whole, driven by the transacted item's goal features: if that
//! item were rejected alone, the leftover negatives would carry no ranking
//! signal.
//!
//! Each session owns a uniform draw keyed by (seed, session_id), so the
//! accept/reject decisions do not depend on iteration order or thread count.

use serde::{Deserialize, Serialize};

use crate::data_model::SessionDataset;
use crate::error::{Error, Result};
use crate::stats::{GaussianModel, GmmModel};
use crate::stream;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Whether accept ratios above 1 are clamped to 1. `On` treats the ratio as
/// a probability; `Off` reproduces the literal accept step, where ratios
/// above 1 simply always accept.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Clamp {
    On,
    Off,
}

/// Which feature vector drives the session-level decision.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPolicy {
    PositiveExample,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub seed: u64,
    pub clamp: Clamp,
    pub session_policy: SessionPolicy,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            seed: 0,
            clamp: Clamp::On,
            session_policy: SessionPolicy::PositiveExample,
        }
    }
}

/// What the sampler did: counts, acceptance rate, and the goal-feature means
/// of the decision variable (the positive examples) before and after.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleReport {
    pub input_sessions: usize,
    pub accepted_sessions: usize,
    pub acceptance_rate: f64,
    pub clamped_count: usize,
    pub goal_feature_names: Vec<String>,
    pub per_feature_mean_before: Vec<f64>,
    pub per_feature_mean_after: Vec<f64>,
}

/// Accept probability f_goal(x) / M, clamped to 1 when `clamp` is on.
pub fn accept_prob(goal: &GaussianModel, m: f64, x: &[f64], clamp: Clamp) -> Result<f64> {
    if !(m > 0.0) {
        return Err(Error::NonpositivePeak(m));
    }
    let ratio = (goal.log_density(x)? - m.ln()).exp();
    Ok(match clamp {
        Clamp::On => ratio.min(1.0),
        Clamp::Off => ratio,
    })
}

/// Per-session uniform draw; shared by both sampling algorithms so the
/// single-component mixture reduces to the plain sampler bit-for-bit.
fn session_uniform(seed: u64, session_id: &str) -> f64 {
    stream::uniform01("sampler.session", seed, session_id.as_bytes())
}

struct Decision {
    accept: bool,
    clamped: bool,
}

fn decide(log_ratio: f64, u: f64, clamp: Clamp) -> Decision {
    let ratio = log_ratio.exp();
    let clamped = ratio > 1.0;
    let p = match clamp {
        Clamp::On => ratio.min(1.0),
        Clamp::Off => ratio,
    };
    Decision {
        accept: u < p,
        clamped,
    }
}

fn collect_decisions<F>(ds: &SessionDataset, per_session: F) -> Result<Vec<Decision>>
where
    F: Fn(&crate::data_model::Session) -> Result<Decision> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        ds.sessions.par_iter().map(per_session).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ds.sessions.iter().map(per_session).collect()
    }
}

fn positive_goal_features(
    session: &crate::data_model::Session,
    ds: &SessionDataset,
) -> Result<Vec<f64>> {
    let pos = session.positive().ok_or_else(|| Error::Integrity {
        session_id: session.session_id.clone(),
        line: 0,
        rule: "expected exactly one positive item".into(),
    })?;
    Ok(ds.schema.project_goal(&pos.features))
}

fn assemble(
    ds: &SessionDataset,
    decisions: Vec<Decision>,
) -> Result<(SessionDataset, SampleReport)> {
    let d = ds.schema.goal_dim();
    let mut accepted = Vec::new();
    let mut clamped_count = 0usize;
    let mut before = vec![0.0; d];
    let mut after = vec![0.0; d];
    let mut n_after = 0usize;

    for (session, decision) in ds.sessions.iter().zip(&decisions) {
        let x = positive_goal_features(session, ds)?;
        for (acc, v) in before.iter_mut().zip(&x) {
            *acc += v;
        }
        if decision.clamped {
            clamped_count += 1;
        }
        if decision.accept {
            for (acc, v) in after.iter_mut().zip(&x) {
                *acc += v;
            }
            n_after += 1;
            accepted.push(session.clone());
        }
    }

    let n = ds.sessions.len();
    if n_after == 0 {
        return Err(Error::EmptySample);
    }
    before.iter_mut().for_each(|v| *v /= n as f64);
    after.iter_mut().for_each(|v| *v /= n_after as f64);

    let report = SampleReport {
        input_sessions: n,
        accepted_sessions: n_after,
        acceptance_rate: n_after as f64 / n as f64,
        clamped_count,
        goal_feature_names: ds
            .schema
            .goal_feature_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
        per_feature_mean_before: before,
        per_feature_mean_after: after,
    };
    Ok((
        SessionDataset::new(ds.schema.clone(), accepted),
        report,
    ))
}

fn check_dims(ds: &SessionDataset, base_dim: usize, goal_dim: usize) -> Result<()> {
    let d = ds.schema.goal_dim();
    if base_dim != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: base_dim,
        });
    }
    if goal_dim != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: goal_dim,
        });
    }
    Ok(())
}

/// Rejection-sample whole sessions toward the goal distribution.
///
/// For each session, a uniform draw keyed by (seed, session_id) is compared
/// against f_goal(x+) / M, where x+ is the transacted item's goal-feature
/// projection and M is the base density's peak. Output preserves session
/// order and is deterministic for a fixed seed regardless of parallelism.
pub fn sample_rank(
    ds: &SessionDataset,
    base: &GaussianModel,
    goal: &GaussianModel,
    cfg: &SamplerConfig,
) -> Result<(SessionDataset, SampleReport)> {
    check_dims(ds, base.dim(), goal.dim())?;
    let log_m = base.log_peak_density();
    if !log_m.is_finite() {
        return Err(Error::NonpositivePeak(log_m.exp()));
    }
    let decisions = collect_decisions(ds, |session| {
        let x = positive_goal_features(session, ds)?;
        let log_ratio = goal.log_density(&x)? - log_m;
        let u = session_uniform(cfg.seed, &session.session_id);
        Ok(decide(log_ratio, u, cfg.clamp))
    })?;
    assemble(ds, decisions)
}

/// Mixture generalization: assign each session's positive to the goal
/// component with the smallest squared Mahalanobis distance (ties to the
/// lowest index), then accept against that component's ratio
/// f_goal_k*(x+) / M_k*, with M_k* the base component's peak.
pub fn generalized_sample_rank(
    ds: &SessionDataset,
    base: &GmmModel,
    goal: &GmmModel,
    cfg: &SamplerConfig,
) -> Result<(SessionDataset, SampleReport)> {
    if base.p() != goal.p() {
        return Err(Error::DimensionMismatch {
            expected: base.p(),
            got: goal.p(),
        });
    }
    check_dims(ds, base.dim(), goal.dim())?;
    let log_peaks: Vec<f64> = base
        .components()
        .iter()
        .map(GaussianModel::log_peak_density)
        .collect();
    let decisions = collect_decisions(ds, |session| {
        let x = positive_goal_features(session, ds)?;
        let k_star = nearest_component(goal, &x)?;
        let log_ratio = goal.component(k_star)?.log_density(&x)? - log_peaks[k_star];
        let u = session_uniform(cfg.seed, &session.session_id);
        Ok(decide(log_ratio, u, cfg.clamp))
    })?;
    assemble(ds, decisions)
}

/// argmin_k t2_k against the goal components; ties break to the lowest index.
pub fn nearest_component(goal: &GmmModel, x: &[f64]) -> Result<usize> {
    let mut best = 0usize;
    let mut best_t2 = f64::INFINITY;
    for k in 0..goal.p() {
        let t2 = goal.component(k)?.mahalanobis_sq(x)?;
        if t2 < best_t2 {
            best_t2 = t2;
            best = k;
        }
    }
    Ok(best)
}
