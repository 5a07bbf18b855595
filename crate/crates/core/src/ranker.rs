//! Pointwise learning-to-rank: a gradient-boosted-tree binary classifier
//! scores items independently and sessions are ranked by score.
//!
//! Boosting is Newton-style on logistic loss with exact greedy split search
//! over sorted feature values. Everything is deterministic for a fixed seed:
//! split ties break to the lowest feature index, then the lowest threshold.

use serde::{Deserialize, Serialize};

use crate::data_model::{Session, SessionDataset};
use crate::error::{Error, Result};
use crate::stream;

/// L2 regularization on leaf weights; keeps Newton steps bounded when a
/// leaf's hessian mass is tiny.
const LAMBDA: f64 = 1.0;
const MIN_GAIN: f64 = 1e-12;
const HESS_FLOOR: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub subsample: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_trees: 100,
            max_depth: 4,
            learning_rate: 0.1,
            min_samples_leaf: 20,
            subsample: 1.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::Config("n_trees must be >= 1".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::Config("max_depth must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.min_samples_leaf < 1 {
            return Err(Error::Config("min_samples_leaf must be >= 1".into()));
        }
        if !(self.subsample > 0.0 && self.subsample <= 1.0) {
            return Err(Error::Config("subsample must be in (0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_value(&self, x: &[f64]) -> f64 {
        let mut idx = 0usize;
        loop {
            match &self.nodes[idx] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    idx = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

/// The ranking function: log-odds prior plus a scaled sum of tree outputs,
/// squashed through a sigmoid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    pub n_features: usize,
    pub schema_hash: String,
    pub base_score: f64,
    pub learning_rate: f64,
    pub trees: Vec<Tree>,
}

impl GbtModel {
    pub fn validate(&self) -> Result<()> {
        if !self.base_score.is_finite() {
            return Err(Error::Corrupt("non-finite base score".into()));
        }
        for tree in &self.trees {
            if tree.nodes.is_empty() {
                return Err(Error::Corrupt("empty tree".into()));
            }
            for node in &tree.nodes {
                match node {
                    Node::Leaf { value } => {
                        if !value.is_finite() {
                            return Err(Error::Corrupt("non-finite leaf value".into()));
                        }
                    }
                    Node::Split {
                        feature,
                        threshold,
                        left,
                        right,
                    } => {
                        if *feature >= self.n_features {
                            return Err(Error::Corrupt(format!(
                                "split on feature {feature}, model has {}",
                                self.n_features
                            )));
                        }
                        if !threshold.is_finite()
                            || *left >= tree.nodes.len()
                            || *right >= tree.nodes.len()
                        {
                            return Err(Error::Corrupt("malformed split node".into()));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Predicted transaction probability in (0, 1).
    pub fn score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.leaf_value(x)).sum();
        Ok(sigmoid(self.base_score + self.learning_rate * sum))
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + e^x), overflow-safe.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Train the pointwise GBT on all examples pooled across sessions.
pub fn train_pointwise(ds: &SessionDataset, cfg: &TrainConfig) -> Result<GbtModel> {
    Ok(train_pointwise_traced(ds, cfg)?.0)
}

/// As [`train_pointwise`], also returning the per-round mean training
/// log-loss (the boosting trace).
pub fn train_pointwise_traced(
    ds: &SessionDataset,
    cfg: &TrainConfig,
) -> Result<(GbtModel, Vec<f64>)> {
    cfg.validate()?;
    let n_features = ds.schema.feature_count();

    let mut feats: Vec<&[f64]> = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    for session in &ds.sessions {
        for ex in &session.examples {
            feats.push(&ex.features);
            labels.push(ex.label as f64);
        }
    }
    let n = feats.len();
    let positives = labels.iter().filter(|&&y| y == 1.0).count();
    if positives == 0 || positives == n {
        return Err(Error::SingleClass(format!(
            "{positives} positives out of {n} examples"
        )));
    }

    let prior = positives as f64 / n as f64;
    let base_score = (prior / (1.0 - prior)).ln();
    let mut raw = vec![base_score; n];
    let mut grad = vec![0.0; n];
    let mut hess = vec![0.0; n];

    let mut trees = Vec::with_capacity(cfg.n_trees);
    let mut losses = Vec::with_capacity(cfg.n_trees);

    for round in 0..cfg.n_trees {
        for i in 0..n {
            let p = sigmoid(raw[i]);
            grad[i] = p - labels[i];
            hess[i] = (p * (1.0 - p)).max(HESS_FLOOR);
        }
        let rows = sample_rows(n, cfg.subsample, cfg.seed, round as u64);
        let tree = build_tree(&feats, &grad, &hess, rows, cfg);
        for i in 0..n {
            raw[i] += cfg.learning_rate * tree.leaf_value(feats[i]);
        }
        trees.push(tree);
        let loss: f64 = (0..n)
            .map(|i| softplus(raw[i]) - labels[i] * raw[i])
            .sum::<f64>()
            / n as f64;
        losses.push(loss);
    }

    let model = GbtModel {
        n_features,
        schema_hash: ds.schema.hash_token(),
        base_score,
        learning_rate: cfg.learning_rate,
        trees,
    };
    Ok((model, losses))
}

fn sample_rows(n: usize, subsample: f64, seed: u64, round: u64) -> Vec<usize> {
    if subsample >= 1.0 {
        return (0..n).collect();
    }
    let m = ((subsample * n as f64).floor() as usize).max(1);
    let mut rng = stream::rng("gbt.subsample", seed, &round.to_le_bytes());
    let mut idx: Vec<usize> = (0..n).collect();
    // partial Fisher-Yates for the first m entries
    use rand::Rng;
    for i in 0..m {
        let j = rng.random_range(i..n);
        idx.swap(i, j);
    }
    let mut rows = idx[..m].to_vec();
    rows.sort_unstable();
    rows
}

struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
    n_left: usize,
}

fn build_tree(feats: &[&[f64]], grad: &[f64], hess: &[f64], rows: Vec<usize>, cfg: &TrainConfig) -> Tree {
    let mut nodes = Vec::new();
    grow(&mut nodes, feats, grad, hess, rows, 0, cfg);
    Tree { nodes }
}

fn leaf_of(rows: &[usize], grad: &[f64], hess: &[f64]) -> Node {
    let g: f64 = rows.iter().map(|&i| grad[i]).sum();
    let h: f64 = rows.iter().map(|&i| hess[i]).sum();
    Node::Leaf {
        value: -g / (h + LAMBDA),
    }
}

fn grow(
    nodes: &mut Vec<Node>,
    feats: &[&[f64]],
    grad: &[f64],
    hess: &[f64],
    rows: Vec<usize>,
    depth: usize,
    cfg: &TrainConfig,
) -> usize {
    let slot = nodes.len();
    if depth >= cfg.max_depth || rows.len() < 2 * cfg.min_samples_leaf {
        nodes.push(leaf_of(&rows, grad, hess));
        return slot;
    }
    let Some(best) = best_split(feats, grad, hess, &rows, cfg) else {
        nodes.push(leaf_of(&rows, grad, hess));
        return slot;
    };

    let mut left_rows = Vec::with_capacity(best.n_left);
    let mut right_rows = Vec::with_capacity(rows.len() - best.n_left);
    for &i in &rows {
        if feats[i][best.feature] <= best.threshold {
            left_rows.push(i);
        } else {
            right_rows.push(i);
        }
    }

    nodes.push(Node::Leaf { value: 0.0 }); // placeholder until children exist
    let left = grow(nodes, feats, grad, hess, left_rows, depth + 1, cfg);
    let right = grow(nodes, feats, grad, hess, right_rows, depth + 1, cfg);
    nodes[slot] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left,
        right,
    };
    slot
}

fn best_split(
    feats: &[&[f64]],
    grad: &[f64],
    hess: &[f64],
    rows: &[usize],
    cfg: &TrainConfig,
) -> Option<Candidate> {
    let n_features = feats[rows[0]].len();
    let g_total: f64 = rows.iter().map(|&i| grad[i]).sum();
    let h_total: f64 = rows.iter().map(|&i| hess[i]).sum();
    let parent_obj = g_total * g_total / (h_total + LAMBDA);

    let mut best: Option<Candidate> = None;
    let mut sorted: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
    for feature in 0..n_features {
        sorted.clear();
        sorted.extend(rows.iter().map(|&i| (feats[i][feature], grad[i], hess[i])));
        sorted.sort_unstable_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));

        let mut gl = 0.0;
        let mut hl = 0.0;
        for split_at in 1..sorted.len() {
            gl += sorted[split_at - 1].1;
            hl += sorted[split_at - 1].2;
            if sorted[split_at].0 <= sorted[split_at - 1].0 {
                continue; // not a value boundary
            }
            if split_at < cfg.min_samples_leaf || sorted.len() - split_at < cfg.min_samples_leaf {
                continue;
            }
            let gr = g_total - gl;
            let hr = h_total - hl;
            let gain = 0.5 * (gl * gl / (hl + LAMBDA) + gr * gr / (hr + LAMBDA) - parent_obj);
            if gain <= MIN_GAIN {
                continue;
            }
            let threshold = 0.5 * (sorted[split_at - 1].0 + sorted[split_at].0);
            let better = match &best {
                None => true,
                Some(b) => {
                    gain > b.gain
                        || (gain == b.gain
                            && (feature < b.feature
                                || (feature == b.feature && threshold < b.threshold)))
                }
            };
            if better {
                best = Some(Candidate {
                    gain,
                    feature,
                    threshold,
                    n_left: split_at,
                });
            }
        }
    }
    best
}

/// Rank a session's items by score, descending; ties keep the original item
/// order (stable).
pub fn rank_session(model: &GbtModel, session: &Session) -> Result<Vec<usize>> {
    let scores: Result<Vec<f64>> = session
        .examples
        .iter()
        .map(|ex| model.score(&ex.features))
        .collect();
    let scores = scores?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .expect("sigmoid scores are finite")
            .then(a.cmp(&b))
    });
    Ok(order)
}
