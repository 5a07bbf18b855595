//! Synthetic marketplace session generator with a known ground-truth choice
//! model.
//!
//! Items are drawn from a correlated Gaussian over marketplace-shaped
//! features (ratings, last-mile distance, revenue per order, nuisance noise),
//! clipped to plausible ranges. Exactly one item per session transacts,
//! chosen with probability proportional to exp(utility / temperature) where
//! utility is a linear function of the features. Generation parallelizes
//! across customers; every customer owns a seeded stream, so output is
//! deterministic regardless of thread count.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data_model::{Example, FeatureSchema, Session, SessionDataset};
use crate::error::{Error, Result};
use crate::linalg::{cholesky, Matrix};
use crate::stream;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Marginal shape of one generated feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMarginal {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clip_max: Option<f64>,
}

impl FeatureMarginal {
    fn new(name: &str, mean: f64, sd: f64, clip_min: Option<f64>, clip_max: Option<f64>) -> Self {
        FeatureMarginal {
            name: name.into(),
            mean,
            sd,
            clip_min,
            clip_max,
        }
    }

    fn clip(&self, v: f64) -> f64 {
        let v = self.clip_min.map_or(v, |lo| v.max(lo));
        self.clip_max.map_or(v, |hi| v.min(hi))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub n_customers: usize,
    pub sessions_per_customer: usize,
    /// Inclusive range of items per session.
    pub items_per_session: (usize, usize),
    pub features: Vec<FeatureMarginal>,
    /// Full correlation matrix over `features`, row-major by feature order.
    pub correlation: Vec<Vec<f64>>,
    /// Which features the schema marks for density fitting.
    pub goal_features: Vec<String>,
    /// Per-feature utility weights of the choice model.
    pub choice_beta: Vec<f64>,
    pub temperature: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        let features = vec![
            FeatureMarginal::new("item_rating", 4.0, 0.3, Some(1.0), Some(5.0)),
            FeatureMarginal::new("restaurant_rating", 4.1, 0.35, Some(1.0), Some(5.0)),
            FeatureMarginal::new("last_mile", 3.0, 1.2, Some(0.2), None),
            FeatureMarginal::new("rpo", 250.0, 90.0, Some(30.0), None),
            FeatureMarginal::new("affinity", 0.0, 1.0, None, None),
            FeatureMarginal::new("noise_0", 0.0, 1.0, None, None),
        ];
        // identity except corr(last_mile, rpo) = +0.3: farther restaurants
        // skew premium, so distance and revenue goals trade off for real
        let mut correlation = vec![vec![0.0; 6]; 6];
        for (i, row) in correlation.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        correlation[2][3] = 0.3;
        correlation[3][2] = 0.3;
        // ratings carry a small slice of the utility; affinity (a personal
        // taste signal outside the goal features) and distance carry the
        // rest. Nudging toward ratings then trades off against relevance by
        // teaching the ranker a rating signal stronger than the choice model
        // warrants, and the trade-off grows with the nudge.
        SynthConfig {
            n_customers: 2000,
            sessions_per_customer: 2,
            items_per_session: (6, 10),
            features,
            correlation,
            goal_features: vec!["item_rating".into(), "restaurant_rating".into()],
            choice_beta: vec![0.35, 0.2, -0.45, 0.0, 0.75, 0.0],
            temperature: 1.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_customers < 1 || self.sessions_per_customer < 1 {
            return Err(Error::Config("need at least one customer and session".into()));
        }
        let (lo, hi) = self.items_per_session;
        if lo < 2 || hi < lo {
            return Err(Error::Config(
                "items_per_session must be an increasing range with min >= 2".into(),
            ));
        }
        if self.features.is_empty() {
            return Err(Error::Config("no features configured".into()));
        }
        for f in &self.features {
            if !(f.sd > 0.0) {
                return Err(Error::Config(format!("feature {} needs sd > 0", f.name)));
            }
        }
        let d = self.features.len();
        if self.correlation.len() != d || self.correlation.iter().any(|r| r.len() != d) {
            return Err(Error::Config(format!("correlation matrix must be {d}x{d}")));
        }
        if self.choice_beta.len() != d {
            return Err(Error::Config(format!("choice_beta must have {d} entries")));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::Config("temperature must be positive".into()));
        }
        if self.goal_features.is_empty() {
            return Err(Error::Config("goal_features must be non-empty".into()));
        }
        // positive-definiteness is checked by the Cholesky in covariance()
        Ok(())
    }

    pub fn schema(&self) -> Result<FeatureSchema> {
        FeatureSchema::new(
            self.features.iter().map(|f| f.name.clone()).collect(),
            &self.goal_features,
        )
    }

    fn covariance_factor(&self) -> Result<Matrix> {
        let d = self.features.len();
        let mut cov = Matrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                cov.set(
                    i,
                    j,
                    self.correlation[i][j] * self.features[i].sd * self.features[j].sd,
                );
            }
        }
        if !cov.is_symmetric(1e-9) {
            return Err(Error::Config("correlation matrix is not symmetric".into()));
        }
        cholesky(&cov).map_err(|_| Error::Config("correlation matrix is not positive-definite".into()))
    }
}

/// beta . x, the generative utility an item offers.
pub fn ground_truth_utility(cfg: &SynthConfig, x: &[f64]) -> Result<f64> {
    if x.len() != cfg.choice_beta.len() {
        return Err(Error::DimensionMismatch {
            expected: cfg.choice_beta.len(),
            got: x.len(),
        });
    }
    Ok(cfg.choice_beta.iter().zip(x).map(|(b, v)| b * v).sum())
}

/// Draw the positive index with probability proportional to
/// exp(utility / temperature).
pub fn softmax_choice(utilities: &[f64], temperature: f64, rng: &mut impl Rng) -> usize {
    let max = utilities
        .iter()
        .map(|u| u / temperature)
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = utilities
        .iter()
        .map(|u| (u / temperature - max).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    let mut target = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if target < *w {
            return i;
        }
        target -= w;
    }
    weights.len() - 1
}

fn generate_customer(cfg: &SynthConfig, chol: &Matrix, customer: usize) -> Vec<Session> {
    let d = cfg.features.len();
    let mut rng = stream::rng("synth.customer", cfg.seed, &(customer as u64).to_le_bytes());
    let customer_id = format!("c{customer:05}");
    let (lo, hi) = cfg.items_per_session;
    let mut sessions = Vec::with_capacity(cfg.sessions_per_customer);
    let mut z = vec![0.0; d];
    for s in 0..cfg.sessions_per_customer {
        let n_items = rng.random_range(lo..=hi);
        let mut examples = Vec::with_capacity(n_items);
        let mut utilities = Vec::with_capacity(n_items);
        for _ in 0..n_items {
            for zv in z.iter_mut() {
                *zv = rng.sample(StandardNormal);
            }
            let shift = chol.matvec(&z);
            let features: Vec<f64> = cfg
                .features
                .iter()
                .zip(&shift)
                .map(|(f, s)| f.clip(f.mean + s))
                .collect();
            utilities.push(
                cfg.choice_beta
                    .iter()
                    .zip(&features)
                    .map(|(b, v)| b * v)
                    .sum::<f64>(),
            );
            examples.push(Example { features, label: 0 });
        }
        let winner = softmax_choice(&utilities, cfg.temperature, &mut rng);
        examples[winner].label = 1;
        sessions.push(Session {
            session_id: format!("{customer_id}-s{s:02}"),
            customer_id: customer_id.clone(),
            examples,
        });
    }
    sessions
}

/// Generate a full synthetic dataset; deterministic per seed.
pub fn generate(cfg: &SynthConfig) -> Result<SessionDataset> {
    cfg.validate()?;
    let schema = cfg.schema()?;
    let chol = cfg.covariance_factor()?;

    #[cfg(feature = "parallel")]
    let per_customer: Vec<Vec<Session>> = (0..cfg.n_customers)
        .into_par_iter()
        .map(|c| generate_customer(cfg, &chol, c))
        .collect();
    #[cfg(not(feature = "parallel"))]
    let per_customer: Vec<Vec<Session>> = (0..cfg.n_customers)
        .map(|c| generate_customer(cfg, &chol, c))
        .collect();

    let sessions: Vec<Session> = per_customer.into_iter().flatten().collect();
    Ok(SessionDataset::new(schema, sessions))
}
