//! Offline ranking evaluation: pooled AUC, per-session NDCG, top@k goal
//! feature means, and incremental (variant minus baseline) reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data_model::SessionDataset;
use crate::error::{Error, Result};
use crate::ranker::{rank_session, GbtModel};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// feature name -> k -> mean feature value over the top k ranked items.
pub type TopkMeans = BTreeMap<String, BTreeMap<usize, f64>>;

/// Evaluation summary for one model against one test set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc: f64,
    pub ndcg: f64,
    pub topk_means: TopkMeans,
    pub n_sessions: usize,
    pub n_examples: usize,
}

/// Element-wise variant minus baseline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaReport {
    pub auc: f64,
    pub ndcg: f64,
    pub topk_means: TopkMeans,
}

/// Pooled AUC: probability a uniformly random positive outscores a random
/// negative, ties counted half (Mann-Whitney form via tie-averaged ranks).
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            got: labels.len(),
        });
    }
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::SingleClass(format!(
            "{n_pos} positives, {n_neg} negatives"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    // average ranks within tie groups; sum positive ranks
    let mut rank_sum_pos = 0.0;
    let mut i = 0usize;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the average
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if labels[idx] == 1 {
                rank_sum_pos += avg_rank;
            }
        }
        i = j + 1;
    }
    let p = n_pos as f64;
    Ok((rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n_neg as f64))
}

/// NDCG of one session given the 1-based rank of its single positive:
/// 1 / log2(1 + rank). IDCG is 1 because there is exactly one positive.
pub fn ndcg_at_rank(rank: usize) -> f64 {
    1.0 / ((1 + rank) as f64).log2()
}

fn rank_of_positive(order: &[usize], positive_index: usize) -> usize {
    order
        .iter()
        .position(|&i| i == positive_index)
        .expect("positive index is a session item")
        + 1
}

fn session_rankings(model: &GbtModel, ds: &SessionDataset) -> Result<Vec<Vec<usize>>> {
    #[cfg(feature = "parallel")]
    {
        ds.sessions
            .par_iter()
            .map(|s| rank_session(model, s))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        ds.sessions.iter().map(|s| rank_session(model, s)).collect()
    }
}

/// Mean NDCG over sessions with binary relevance and a single positive.
pub fn ndcg(model: &GbtModel, ds: &SessionDataset) -> Result<f64> {
    let rankings = session_rankings(model, ds)?;
    ndcg_from_rankings(&rankings, ds)
}

fn ndcg_from_rankings(rankings: &[Vec<usize>], ds: &SessionDataset) -> Result<f64> {
    let mut total = 0.0;
    for (session, order) in ds.sessions.iter().zip(rankings) {
        let pos = session.positive_index().ok_or_else(|| Error::Integrity {
            session_id: session.session_id.clone(),
            line: 0,
            rule: "expected exactly one positive item".into(),
        })?;
        total += ndcg_at_rank(rank_of_positive(order, pos));
    }
    Ok(total / ds.n_sessions() as f64)
}

/// For each (feature, k): rank each session, average the raw feature over
/// the top min(k, session size) items, then average across sessions.
pub fn topk_feature_means(
    model: &GbtModel,
    ds: &SessionDataset,
    features: &[String],
    ks: &[usize],
) -> Result<TopkMeans> {
    let rankings = session_rankings(model, ds)?;
    topk_means_from_rankings(&rankings, ds, features, ks)
}

/// Ranking-agnostic core of [`topk_feature_means`]; also used to probe null
/// models in tests.
pub fn topk_means_from_rankings(
    rankings: &[Vec<usize>],
    ds: &SessionDataset,
    features: &[String],
    ks: &[usize],
) -> Result<TopkMeans> {
    for &k in ks {
        if k < 1 {
            return Err(Error::Config("k must be >= 1".into()));
        }
    }
    let mut out = TopkMeans::new();
    for name in features {
        let feature_idx = ds
            .schema
            .index_of(name)
            .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
        let mut per_k = BTreeMap::new();
        for &k in ks {
            let mut total = 0.0;
            for (session, order) in ds.sessions.iter().zip(rankings) {
                let take = k.min(order.len());
                let sum: f64 = order[..take]
                    .iter()
                    .map(|&i| session.examples[i].features[feature_idx])
                    .sum();
                total += sum / take as f64;
            }
            per_k.insert(k, total / ds.n_sessions() as f64);
        }
        out.insert(name.clone(), per_k);
    }
    Ok(out)
}

/// Full evaluation of a model on a dataset: pooled AUC over all examples,
/// mean NDCG, and top@k means of the named features.
pub fn evaluate(
    model: &GbtModel,
    ds: &SessionDataset,
    features: &[String],
    ks: &[usize],
) -> Result<EvalReport> {
    let mut scores = Vec::with_capacity(ds.n_examples());
    let mut labels = Vec::with_capacity(ds.n_examples());
    for session in &ds.sessions {
        for ex in &session.examples {
            scores.push(model.score(&ex.features)?);
            labels.push(ex.label);
        }
    }
    let rankings = session_rankings(model, ds)?;
    Ok(EvalReport {
        auc: auc(&scores, &labels)?,
        ndcg: ndcg_from_rankings(&rankings, ds)?,
        topk_means: topk_means_from_rankings(&rankings, ds, features, ks)?,
        n_sessions: ds.n_sessions(),
        n_examples: ds.n_examples(),
    })
}

/// Incremental report: variant minus baseline, element-wise. The two
/// reports must share the same feature list and k grid.
pub fn incremental(variant: &EvalReport, baseline: &EvalReport) -> Result<DeltaReport> {
    let vars: Vec<(&String, Vec<usize>)> = variant
        .topk_means
        .iter()
        .map(|(f, m)| (f, m.keys().copied().collect()))
        .collect();
    let bases: Vec<(&String, Vec<usize>)> = baseline
        .topk_means
        .iter()
        .map(|(f, m)| (f, m.keys().copied().collect()))
        .collect();
    if vars != bases {
        return Err(Error::GridMismatch(format!(
            "variant {:?} vs baseline {:?}",
            vars, bases
        )));
    }
    let mut topk = TopkMeans::new();
    for (feature, per_k) in &variant.topk_means {
        let base_k = &baseline.topk_means[feature];
        topk.insert(
            feature.clone(),
            per_k.iter().map(|(&k, &v)| (k, v - base_k[&k])).collect(),
        );
    }
    Ok(DeltaReport {
        auc: variant.auc - baseline.auc,
        ndcg: variant.ndcg - baseline.ndcg,
        topk_means: topk,
    })
}
