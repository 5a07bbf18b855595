//! Config-driven experiment runner: split -> fit -> goal -> sample -> train
//! -> evaluate on held-out original data -> report.
//!
//! Evaluating on the sampled data would be biased in the sampler's favor, so
//! every model (baseline and goals) is scored against the same unsampled
//! test split. All artifacts are written with a config hash and the seeds
//! needed to reproduce them; two runs with the same config are byte-identical
//! regardless of thread count.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data_model::{
    goal_matrix, load_sessions, split_by_customer, write_sessions, DataFormat, FeatureSchema,
    RowSelection, SessionDataset,
};
use crate::error::{Error, Result};
use crate::goal::{build_goal, GoalSpec};
use crate::metrics::{evaluate, incremental, DeltaReport, EvalReport};
use crate::ranker::{train_pointwise, GbtModel, TrainConfig};
use crate::sampler::{generalized_sample_rank, sample_rank, SampleReport, SamplerConfig};
use crate::stats::{fit_gaussian, fit_gmm, DensityModel, EmConfig};
use crate::stream;
use crate::synth::{generate, SynthConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Versioned model files
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct VersionedFile<T> {
    format_version: u32,
    model: T,
}

fn save_versioned<T: Serialize>(path: &Path, model: &T) -> Result<()> {
    let file = VersionedFile {
        format_version: MODEL_FORMAT_VERSION,
        model,
    };
    write_json(path, &file)
}

fn load_versioned<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Error::Corrupt(e.to_string()))?;
    let version = value
        .get("format_version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Corrupt("missing format_version".into()))?;
    if version != MODEL_FORMAT_VERSION as u64 {
        return Err(Error::FormatVersion {
            expected: MODEL_FORMAT_VERSION,
            got: version as u32,
        });
    }
    let model = value
        .get("model")
        .cloned()
        .ok_or_else(|| Error::Corrupt("missing model payload".into()))?;
    serde_json::from_value(model).map_err(|e| Error::Corrupt(e.to_string()))
}

pub fn save_density_model(path: &Path, model: &DensityModel) -> Result<()> {
    save_versioned(path, model)
}

pub fn load_density_model(path: &Path) -> Result<DensityModel> {
    load_versioned(path)
}

pub fn save_gbt_model(path: &Path, model: &GbtModel) -> Result<()> {
    save_versioned(path, model)
}

pub fn load_gbt_model(path: &Path) -> Result<GbtModel> {
    let model: GbtModel = load_versioned(path)?;
    model.validate()?;
    Ok(model)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Experiment configuration
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    /// Generate sessions with the synthetic marketplace generator.
    Synth(SynthConfig),
    /// Load sessions and schema from files.
    Path {
        sessions: PathBuf,
        schema: PathBuf,
        #[serde(default = "default_format")]
        format: DataFormat,
    },
}

fn default_format() -> DataFormat {
    DataFormat::Jsonl
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityFamily {
    Gaussian,
    Gmm { p: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DensityConfig {
    pub family: DensityFamily,
    /// Which rows of the train split feed the fit. The sampler's decision
    /// variable is the positive example, so positives-only is the default.
    pub rows: RowSelection,
    pub em: EmConfig,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            family: DensityFamily::Gaussian,
            rows: RowSelection::PositivesOnly,
            em: EmConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedGoal {
    pub name: String,
    #[serde(flatten)]
    pub spec: GoalSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricsConfig {
    pub ks: Vec<usize>,
    /// Features for the top@k tables; defaults to the schema's goal features.
    pub features: Option<Vec<String>>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            ks: vec![1, 2, 3, 4, 8, 12, 16, 20],
            features: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub data: DataSource,
    #[serde(default)]
    pub split: SplitConfig,
    #[serde(default)]
    pub density: DensityConfig,
    #[serde(default)]
    pub goals: Vec<NamedGoal>,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    /// Also train per-goal controls on uniform subsamples of the train split
    /// matched to each goal's accepted-session count.
    #[serde(default)]
    pub size_matched_baseline: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
    /// Worker threads: None = library default, Some(0) = all cores,
    /// Some(1) = serial.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for goal in &self.goals {
            if goal.name.is_empty() {
                return Err(Error::Config("goal names must be non-empty".into()));
            }
            if goal.name.eq_ignore_ascii_case("baseline") {
                return Err(Error::Config("the goal name 'baseline' is reserved".into()));
            }
            if !seen.insert(goal.name.as_str()) {
                return Err(Error::Config(format!("duplicate goal name {}", goal.name)));
            }
        }
        if self.metrics.ks.is_empty() {
            return Err(Error::Config("metrics.ks must be non-empty".into()));
        }
        self.train.validate()?;
        self.density.em.validate()?;
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Artifacts
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SizeMatchedArtifact {
    pub n_sessions: usize,
    pub eval: EvalReport,
    pub incremental: DeltaReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalArtifact {
    pub name: String,
    pub spec: GoalSpec,
    pub sample: SampleReport,
    pub eval: EvalReport,
    pub incremental: DeltaReport,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size_matched: Option<SizeMatchedArtifact>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentArtifacts {
    pub config_hash: String,
    pub seeds: BTreeMap<String, u64>,
    pub metric_features: Vec<String>,
    pub ks: Vec<usize>,
    pub n_train_sessions: usize,
    pub n_test_sessions: usize,
    pub baseline: EvalReport,
    pub goals: Vec<GoalArtifact>,
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

/// Run the full experiment, writing all artifacts under `out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentArtifacts> {
    #[cfg(feature = "parallel")]
    if let Some(n) = cfg.threads {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
        return pool.install(|| run_experiment_inner(cfg, out_dir));
    }
    run_experiment_inner(cfg, out_dir)
}

fn run_experiment_inner(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentArtifacts> {
    cfg.validate()?;
    for sub in ["split", "density", "sampled", "models", "eval"] {
        fs::create_dir_all(out_dir.join(sub))?;
    }
    let config_hash = config_hash(cfg)?;
    write_json(out_dir.join("config.json").as_path(), cfg)?;

    // data
    let ds = obtain_data(cfg).map_err(|e| e.in_stage("data"))?;
    ds.schema.to_json_file(&out_dir.join("schema.json"))?;

    // split
    let (train, test) = split_by_customer(&ds, cfg.split.train_fraction, cfg.split.seed)
        .map_err(|e| e.in_stage("split"))?;
    write_sessions(&train, &out_dir.join("split/train.jsonl"), DataFormat::Jsonl)?;
    write_sessions(&test, &out_dir.join("split/test.jsonl"), DataFormat::Jsonl)?;

    // fit base density on the train goal matrix
    let base = fit_base_density(&train, &cfg.density).map_err(|e| e.in_stage("fit"))?;
    save_density_model(&out_dir.join("density/base.json"), &base)?;

    let metric_features: Vec<String> = match &cfg.metrics.features {
        Some(fs) => fs.clone(),
        None => ds
            .schema
            .goal_feature_names()
            .iter()
            .map(|s| s.to_string())
            .collect(),
    };
    let ks = cfg.metrics.ks.clone();

    // baseline trains on the identical unsampled train split
    let baseline_model =
        train_pointwise(&train, &cfg.train).map_err(|e| e.in_stage("baseline"))?;
    save_gbt_model(&out_dir.join("models/baseline.json"), &baseline_model)?;
    let baseline_eval = evaluate(&baseline_model, &test, &metric_features, &ks)
        .map_err(|e| e.in_stage("baseline"))?;
    write_json(&out_dir.join("eval/baseline.json"), &baseline_eval)?;

    let mut goals = Vec::with_capacity(cfg.goals.len());
    for goal in &cfg.goals {
        let artifact = run_goal(
            cfg,
            out_dir,
            goal,
            &base,
            &train,
            &test,
            &baseline_eval,
            &metric_features,
            &ks,
        )
        .map_err(|e| e.in_stage(&format!("goal:{}", goal.name)))?;
        goals.push(artifact);
    }

    let mut seeds = BTreeMap::new();
    seeds.insert("split".to_string(), cfg.split.seed);
    seeds.insert("sampler".to_string(), cfg.sampler.seed);
    seeds.insert("train".to_string(), cfg.train.seed);
    seeds.insert("em".to_string(), cfg.density.em.seed);
    if let DataSource::Synth(synth) = &cfg.data {
        seeds.insert("synth".to_string(), synth.seed);
    }

    let artifacts = ExperimentArtifacts {
        config_hash,
        seeds,
        metric_features,
        ks,
        n_train_sessions: train.n_sessions(),
        n_test_sessions: test.n_sessions(),
        baseline: baseline_eval,
        goals,
    };
    write_json(&out_dir.join("report.json"), &artifacts)?;
    fs::write(out_dir.join("report.md"), render_report(&artifacts))?;
    Ok(artifacts)
}

fn obtain_data(cfg: &ExperimentConfig) -> Result<SessionDataset> {
    match &cfg.data {
        DataSource::Synth(synth) => generate(synth),
        DataSource::Path {
            sessions,
            schema,
            format,
        } => {
            let schema = FeatureSchema::from_json_file(schema)?;
            load_sessions(sessions, &schema, *format)
        }
    }
}

fn fit_base_density(train: &SessionDataset, density: &DensityConfig) -> Result<DensityModel> {
    let x = goal_matrix(train, density.rows);
    match density.family {
        DensityFamily::Gaussian => Ok(DensityModel::Gaussian(fit_gaussian(&x)?)),
        DensityFamily::Gmm { p } => Ok(DensityModel::Gmm(fit_gmm(&x, p, &density.em)?)),
    }
}

#[allow(clippy::too_many_arguments)]
fn run_goal(
    cfg: &ExperimentConfig,
    out_dir: &Path,
    goal: &NamedGoal,
    base: &DensityModel,
    train: &SessionDataset,
    test: &SessionDataset,
    baseline_eval: &EvalReport,
    metric_features: &[String],
    ks: &[usize],
) -> Result<GoalArtifact> {
    let slug = slugify(&goal.name);
    let goal_model = build_goal(base, &goal.spec, &train.schema)?;
    save_density_model(&out_dir.join(format!("density/goal-{slug}.json")), &goal_model)?;

    let (sampled, sample_report) = match (&base, &goal_model) {
        (DensityModel::Gaussian(b), DensityModel::Gaussian(g)) => {
            sample_rank(train, b, g, &cfg.sampler)?
        }
        (DensityModel::Gmm(b), DensityModel::Gmm(g)) => {
            generalized_sample_rank(train, b, g, &cfg.sampler)?
        }
        _ => unreachable!("goal model family always matches its base"),
    };
    write_sessions(
        &sampled,
        &out_dir.join(format!("sampled/goal-{slug}.jsonl")),
        DataFormat::Jsonl,
    )?;
    write_json(
        &out_dir.join(format!("sampled/goal-{slug}.report.json")),
        &sample_report,
    )?;

    let model = train_pointwise(&sampled, &cfg.train)?;
    save_gbt_model(&out_dir.join(format!("models/goal-{slug}.json")), &model)?;
    let eval = evaluate(&model, test, metric_features, ks)?;
    write_json(&out_dir.join(format!("eval/goal-{slug}.json")), &eval)?;
    let delta = incremental(&eval, baseline_eval)?;

    let size_matched = if cfg.size_matched_baseline {
        let control = uniform_session_subsample(
            train,
            sample_report.accepted_sessions,
            cfg.sampler.seed,
            &goal.name,
        );
        let control_model = train_pointwise(&control, &cfg.train)?;
        save_gbt_model(
            &out_dir.join(format!("models/goal-{slug}.size-matched.json")),
            &control_model,
        )?;
        let control_eval = evaluate(&control_model, test, metric_features, ks)?;
        write_json(
            &out_dir.join(format!("eval/goal-{slug}.size-matched.json")),
            &control_eval,
        )?;
        Some(SizeMatchedArtifact {
            n_sessions: control.n_sessions(),
            incremental: incremental(&control_eval, baseline_eval)?,
            eval: control_eval,
        })
    } else {
        None
    };

    Ok(GoalArtifact {
        name: goal.name.clone(),
        spec: goal.spec.clone(),
        sample: sample_report,
        eval,
        incremental: delta,
        size_matched,
    })
}

/// Uniform random subsample of `n` sessions, order preserved.
fn uniform_session_subsample(
    ds: &SessionDataset,
    n: usize,
    seed: u64,
    tag: &str,
) -> SessionDataset {
    use rand::Rng;
    let total = ds.n_sessions();
    let n = n.min(total);
    let mut rng = stream::rng("pipeline.size-matched", seed, tag.as_bytes());
    let mut idx: Vec<usize> = (0..total).collect();
    for i in 0..n {
        let j = rng.random_range(i..total);
        idx.swap(i, j);
    }
    let mut picked = idx[..n].to_vec();
    picked.sort_unstable();
    SessionDataset::new(
        ds.schema.clone(),
        picked.into_iter().map(|i| ds.sessions[i].clone()).collect(),
    )
}

fn slugify(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '-'
            }
        })
        .collect()
}

/// Hash of the experiment definition. Execution-environment fields (threads,
/// output directory) are excluded: they must not change any result byte.
fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut semantic = cfg.clone();
    semantic.threads = None;
    semantic.out_dir = None;
    let canonical = serde_json::to_string(&semantic)?;
    let mut h = Sha256::new();
    h.update(canonical.as_bytes());
    let digest = h.finalize();
    Ok(digest.iter().take(8).map(|b| format!("{b:02x}")).collect())
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

/// Render the markdown report. A pure function of the artifacts, so parsing
/// report.json and re-rendering reproduces the file byte for byte.
pub fn render_report(artifacts: &ExperimentArtifacts) -> String {
    let mut out = String::new();
    out.push_str("# Sample-Rank experiment report\n\n");
    out.push_str(&format!("- config hash: `{}`\n", artifacts.config_hash));
    let seeds: Vec<String> = artifacts
        .seeds
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect();
    out.push_str(&format!("- seeds: {}\n", seeds.join(", ")));
    out.push_str(&format!(
        "- sessions: {} train / {} test\n\n",
        artifacts.n_train_sessions, artifacts.n_test_sessions
    ));

    out.push_str("## AUC / NDCG (held-out test set)\n\n");
    out.push_str("| Experiment | AUC | NDCG |\n|---|---:|---:|\n");
    out.push_str(&format!(
        "| Baseline | {:.3} | {:.3} |\n",
        artifacts.baseline.auc, artifacts.baseline.ndcg
    ));
    for goal in &artifacts.goals {
        out.push_str(&format!(
            "| {} | {:.3} | {:.3} |\n",
            goal.name, goal.eval.auc, goal.eval.ndcg
        ));
        if let Some(sm) = &goal.size_matched {
            out.push_str(&format!(
                "| {} (size-matched control) | {:.3} | {:.3} |\n",
                goal.name, sm.eval.auc, sm.eval.ndcg
            ));
        }
    }
    out.push('\n');

    if !artifacts.goals.is_empty() {
        out.push_str("## Sampling\n\n");
        out.push_str("| Goal | input sessions | accepted | rate | clamped |\n");
        out.push_str("|---|---:|---:|---:|---:|\n");
        for goal in &artifacts.goals {
            out.push_str(&format!(
                "| {} | {} | {} | {:.3} | {} |\n",
                goal.name,
                goal.sample.input_sessions,
                goal.sample.accepted_sessions,
                goal.sample.acceptance_rate,
                goal.sample.clamped_count
            ));
        }
        out.push('\n');

        out.push_str("## top@k incremental vs baseline (feature means)\n\n");
        out.push_str("| top@k |");
        for goal in &artifacts.goals {
            for feature in &artifacts.metric_features {
                out.push_str(&format!(" {} {} |", goal.name, feature));
            }
        }
        out.push_str("\n|---:|");
        for _ in 0..artifacts.goals.len() * artifacts.metric_features.len() {
            out.push_str("---:|");
        }
        out.push('\n');
        for &k in &artifacts.ks {
            out.push_str(&format!("| {k} |"));
            for goal in &artifacts.goals {
                for feature in &artifacts.metric_features {
                    let v = goal
                        .incremental
                        .topk_means
                        .get(feature)
                        .and_then(|m| m.get(&k));
                    match v {
                        Some(v) => out.push_str(&format!(" {v:.3} |")),
                        None => out.push_str(" - |"),
                    }
                }
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}
