//! Interactive browser demo for goal-distribution session sampling.
//!
//! Three operations are exported to JavaScript:
//! - [`Demo::new`] generates a bimodal marketplace dataset (a budget and a
//!   premium customer segment over last-mile distance and revenue per order)
//!   and fits both a single Gaussian and a 2-component mixture to the
//!   transacted items.
//! - [`Demo::sample`] tilts the single-Gaussian fit by the given deltas and
//!   rejection-samples the sessions, returning the accept/reject mask.
//! - [`Demo::sample_mixture`] does the same against the mixture, assigning
//!   each session to its nearest goal component first.
//!
//! Everything crosses the boundary as JSON strings; the page does the
//! drawing. The same methods run natively, which is how the crate is tested.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use samplerank_core::data_model::{goal_matrix, RowSelection, SessionDataset};
use samplerank_core::goal::{
    build_goal_gaussian, build_goal_gmm, ComponentRules, DeltaRule, GoalSpec,
};
use samplerank_core::sampler::{
    generalized_sample_rank, nearest_component, sample_rank, Clamp, SamplerConfig, SessionPolicy,
};
use samplerank_core::stats::{fit_gaussian, fit_gmm, EmConfig, GaussianModel, GmmModel};
use samplerank_core::synth::{generate, FeatureMarginal, SynthConfig};

const LM: &str = "last_mile";
const RPO: &str = "rpo";

fn segment_config(seed: u64, customers: usize, lm_mean: f64, rpo_mean: f64) -> SynthConfig {
    let features = vec![
        FeatureMarginal {
            name: LM.into(),
            mean: lm_mean,
            sd: 0.7,
            clip_min: Some(0.2),
            clip_max: None,
        },
        FeatureMarginal {
            name: RPO.into(),
            mean: rpo_mean,
            sd: 45.0,
            clip_min: Some(30.0),
            clip_max: None,
        },
        FeatureMarginal {
            name: "affinity".into(),
            mean: 0.0,
            sd: 1.0,
            clip_min: None,
            clip_max: None,
        },
    ];
    let correlation = vec![
        vec![1.0, 0.25, 0.0],
        vec![0.25, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    SynthConfig {
        n_customers: customers,
        sessions_per_customer: 1,
        items_per_session: (4, 7),
        features,
        correlation,
        goal_features: vec![LM.into(), RPO.into()],
        choice_beta: vec![-0.3, 0.0, 0.9],
        temperature: 1.0,
        seed,
    }
}

/// Two customer segments merged into one dataset: budget orders nearby,
/// premium orders farther out.
fn bimodal_sessions(seed: u64, n_sessions: usize) -> SessionDataset {
    let budget = n_sessions.div_ceil(2);
    let premium = n_sessions - budget;
    let mut a = generate(&segment_config(seed, budget.max(1), 2.2, 180.0)).expect("valid config");
    let mut b = generate(&segment_config(seed ^ 0x9e37_79b9, premium.max(1), 4.6, 360.0))
        .expect("valid config");
    for (tag, sessions) in [("a", &mut a.sessions), ("b", &mut b.sessions)] {
        for s in sessions.iter_mut() {
            s.session_id = format!("{tag}-{}", s.session_id);
            s.customer_id = format!("{tag}-{}", s.customer_id);
        }
    }
    let mut sessions = a.sessions;
    sessions.append(&mut b.sessions);
    SessionDataset::new(a.schema, sessions)
}

/// 1-sigma ellipse of a 2x2 covariance, ready to draw.
#[derive(Serialize, Clone, Copy)]
struct Ellipse {
    cx: f64,
    cy: f64,
    rx: f64,
    ry: f64,
    /// radians, counter-clockwise from the x axis
    angle: f64,
}

fn ellipse_of(model: &GaussianModel) -> Ellipse {
    let s = model.sigma();
    let (a, b, c) = (s.get(0, 0), s.get(0, 1), s.get(1, 1));
    let trace = a + c;
    let gap = (((a - c) / 2.0).powi(2) + b * b).sqrt();
    let l1 = trace / 2.0 + gap;
    let l2 = (trace / 2.0 - gap).max(1e-12);
    let angle = if b.abs() < 1e-15 && a >= c {
        0.0
    } else if b.abs() < 1e-15 {
        std::f64::consts::FRAC_PI_2
    } else {
        (l1 - a).atan2(b)
    };
    Ellipse {
        cx: model.mu()[0],
        cy: model.mu()[1],
        rx: l1.sqrt(),
        ry: l2.sqrt(),
        angle,
    }
}

#[derive(Serialize)]
struct DatasetView {
    feature_names: [String; 2],
    /// (last_mile, rpo) of each session's transacted item, in session order
    points: Vec<[f64; 2]>,
    gaussian: Ellipse,
    mixture: Vec<Ellipse>,
    mixture_weights: Vec<f64>,
}

#[derive(Serialize)]
struct SampleView {
    accepted: Vec<bool>,
    acceptance_rate: f64,
    accepted_sessions: usize,
    clamped_count: usize,
    mean_before: Vec<f64>,
    mean_after: Vec<f64>,
    goal: Vec<Ellipse>,
    /// nearest goal component per session (mixture mode only)
    assignment: Option<Vec<u8>>,
}

fn goal_spec(lm_delta: f64, rpo_delta: f64, sigma_shrink: f64) -> GoalSpec {
    let mut spec = GoalSpec::default();
    spec.mu_rules
        .insert(LM.into(), DeltaRule::Additive { delta: lm_delta });
    spec.mu_rules
        .insert(RPO.into(), DeltaRule::Additive { delta: rpo_delta });
    if sigma_shrink < 1.0 {
        spec.sigma_rule = Some(DeltaRule::Shrinkage {
            delta: sigma_shrink.max(1e-3),
        });
    }
    spec
}

/// A generated dataset with its fitted densities, held across interactions.
#[wasm_bindgen]
pub struct Demo {
    sessions: SessionDataset,
    gaussian: GaussianModel,
    mixture: GmmModel,
    seed: u64,
}

#[wasm_bindgen]
impl Demo {
    /// Generate `n_sessions` bimodal marketplace sessions and fit the
    /// transacted items' (last_mile, rpo) density both ways.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, n_sessions: u32) -> Result<Demo, JsError> {
        let n = (n_sessions as usize).clamp(50, 20_000);
        let sessions = bimodal_sessions(seed as u64, n);
        let x = goal_matrix(&sessions, RowSelection::PositivesOnly);
        let gaussian = fit_gaussian(&x).map_err(|e| JsError::new(&e.to_string()))?;
        let em = EmConfig {
            seed: seed as u64,
            n_init: 2,
            ..EmConfig::default()
        };
        let mixture = fit_gmm(&x, 2, &em).map_err(|e| JsError::new(&e.to_string()))?;
        Ok(Demo {
            sessions,
            gaussian,
            mixture,
            seed: seed as u64,
        })
    }

    /// The scatter data and both fits, as JSON.
    pub fn dataset(&self) -> String {
        let points = self
            .sessions
            .sessions
            .iter()
            .map(|s| {
                let p = self
                    .sessions
                    .schema
                    .project_goal(&s.positive().expect("generated sessions are valid").features);
                [p[0], p[1]]
            })
            .collect();
        let view = DatasetView {
            feature_names: [LM.to_string(), RPO.to_string()],
            points,
            gaussian: ellipse_of(&self.gaussian),
            mixture: self.mixture.components().iter().map(ellipse_of).collect(),
            mixture_weights: self.mixture.weights().to_vec(),
        };
        serde_json::to_string(&view).expect("view serializes")
    }

    /// Tilt the single-Gaussian fit and rejection-sample the sessions.
    pub fn sample(
        &self,
        lm_delta: f64,
        rpo_delta: f64,
        sigma_shrink: f64,
        clamp: bool,
    ) -> Result<String, JsError> {
        let spec = goal_spec(lm_delta, rpo_delta, sigma_shrink);
        let goal = build_goal_gaussian(&self.gaussian, &spec, &self.sessions.schema)
            .map_err(|e| JsError::new(&e.to_string()))?;
        let cfg = self.sampler_config(clamp);
        let (kept, report) = sample_rank(&self.sessions, &self.gaussian, &goal, &cfg)
            .map_err(|e| JsError::new(&e.to_string()))?;
        let view = SampleView {
            accepted: self.accept_mask(&kept),
            acceptance_rate: report.acceptance_rate,
            accepted_sessions: report.accepted_sessions,
            clamped_count: report.clamped_count,
            mean_before: report.per_feature_mean_before,
            mean_after: report.per_feature_mean_after,
            goal: vec![ellipse_of(&goal)],
            assignment: None,
        };
        Ok(serde_json::to_string(&view).expect("view serializes"))
    }

    /// Tilt the mixture fit per component and rejection-sample: each session
    /// is matched to its nearest goal component, then accepted against that
    /// component's density ratio. `premium_only` scopes the deltas to the
    /// component with the higher rpo mean.
    pub fn sample_mixture(
        &self,
        lm_delta: f64,
        rpo_delta: f64,
        sigma_shrink: f64,
        clamp: bool,
        premium_only: bool,
    ) -> Result<String, JsError> {
        let spec = if premium_only {
            let premium = self.premium_component();
            GoalSpec {
                per_component: Some(
                    [(
                        premium,
                        ComponentRules {
                            mu_rules: goal_spec(lm_delta, rpo_delta, sigma_shrink).mu_rules,
                            sigma_rule: goal_spec(lm_delta, rpo_delta, sigma_shrink).sigma_rule,
                        },
                    )]
                    .into_iter()
                    .collect(),
                ),
                ..GoalSpec::default()
            }
        } else {
            goal_spec(lm_delta, rpo_delta, sigma_shrink)
        };
        let goal = build_goal_gmm(&self.mixture, &spec, &self.sessions.schema)
            .map_err(|e| JsError::new(&e.to_string()))?;
        let cfg = self.sampler_config(clamp);
        let (kept, report) = generalized_sample_rank(&self.sessions, &self.mixture, &goal, &cfg)
            .map_err(|e| JsError::new(&e.to_string()))?;
        let assignment = self
            .sessions
            .sessions
            .iter()
            .map(|s| {
                let x = self
                    .sessions
                    .schema
                    .project_goal(&s.positive().expect("valid").features);
                nearest_component(&goal, &x).expect("2 components") as u8
            })
            .collect();
        let view = SampleView {
            accepted: self.accept_mask(&kept),
            acceptance_rate: report.acceptance_rate,
            accepted_sessions: report.accepted_sessions,
            clamped_count: report.clamped_count,
            mean_before: report.per_feature_mean_before,
            mean_after: report.per_feature_mean_after,
            goal: goal.components().iter().map(ellipse_of).collect(),
            assignment: Some(assignment),
        };
        Ok(serde_json::to_string(&view).expect("view serializes"))
    }

    fn sampler_config(&self, clamp: bool) -> SamplerConfig {
        SamplerConfig {
            seed: self.seed,
            clamp: if clamp { Clamp::On } else { Clamp::Off },
            session_policy: SessionPolicy::PositiveExample,
        }
    }

    fn accept_mask(&self, kept: &SessionDataset) -> Vec<bool> {
        let mut mask = vec![false; self.sessions.n_sessions()];
        let mut cursor = 0usize;
        for (i, s) in self.sessions.sessions.iter().enumerate() {
            if cursor < kept.sessions.len() && kept.sessions[cursor].session_id == s.session_id {
                mask[i] = true;
                cursor += 1;
            }
        }
        mask
    }

    fn premium_component(&self) -> usize {
        let mus: Vec<f64> = self.mixture.components().iter().map(|c| c.mu()[1]).collect();
        if mus[1] > mus[0] {
            1
        } else {
            0
        }
    }
}
