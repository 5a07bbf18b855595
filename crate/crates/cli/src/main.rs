//! `samplerank` command-line pipeline.
//!
//! Subcommands mirror the library stages: generate (`synth`), check
//! (`validate`), partition (`split`), fit the density (`fit`), rejection-
//! sample toward a goal (`sample`), train the ranker (`train`), score a
//! model (`eval`), run the whole experiment from one config (`run`), and
//! re-render a report (`report`). Exit code is 0 on success, nonzero with a
//! stage-tagged diagnostic otherwise.

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use samplerank_core::data_model::{
    self, DataFormat, FeatureSchema, RowSelection, SessionDataset,
};
use samplerank_core::goal::{build_goal, GoalSpec};
use samplerank_core::metrics::evaluate;
use samplerank_core::pipeline::{
    self, load_density_model, load_gbt_model, run_experiment, save_density_model, save_gbt_model,
    ExperimentArtifacts, ExperimentConfig,
};
use samplerank_core::ranker::{train_pointwise, TrainConfig};
use samplerank_core::sampler::{
    generalized_sample_rank, sample_rank, Clamp, SamplerConfig, SessionPolicy,
};
use samplerank_core::stats::{fit_gaussian, fit_gmm, DensityModel, EmConfig};
use samplerank_core::synth::{generate, SynthConfig};

#[derive(Parser)]
#[command(
    name = "samplerank",
    version,
    about = "Nudge rankings toward multi-stakeholder goals by sampling the training data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Jsonl,
    Csv,
}

impl From<FormatArg> for DataFormat {
    fn from(f: FormatArg) -> DataFormat {
        match f {
            FormatArg::Jsonl => DataFormat::Jsonl,
            FormatArg::Csv => DataFormat::Csv,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Gaussian,
    Gmm,
}

#[derive(Clone, Copy, ValueEnum)]
enum RowsArg {
    PositivesOnly,
    AllRows,
}

impl From<RowsArg> for RowSelection {
    fn from(r: RowsArg) -> RowSelection {
        match r {
            RowsArg::PositivesOnly => RowSelection::PositivesOnly,
            RowsArg::AllRows => RowSelection::AllRows,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ClampArg {
    On,
    Off,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic session dataset (sessions.jsonl + schema.json)
    Synth {
        /// Generator config JSON; defaults to the built-in marketplace shape
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Check a dataset against its schema invariants
    Validate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: FormatArg,
    },
    /// Split a dataset by customer into train/test files
    Split {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: FormatArg,
        #[arg(long, default_value_t = 0.7)]
        fraction: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit the base density on the goal-feature matrix
    Fit {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: FormatArg,
        #[arg(long, value_enum, default_value = "gaussian")]
        family: FamilyArg,
        /// Mixture components (gmm family only)
        #[arg(long, default_value_t = 2)]
        components: usize,
        #[arg(long, value_enum, default_value = "positives-only")]
        rows: RowsArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output model file
        #[arg(long)]
        out: PathBuf,
    },
    /// Rejection-sample sessions toward a goal distribution
    Sample {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: FormatArg,
        /// Fitted base density model file
        #[arg(long)]
        base: PathBuf,
        /// Goal spec JSON ({"mu": {...}, "sigma": {...}})
        #[arg(long)]
        goal: PathBuf,
        #[arg(long, value_enum, default_value = "on")]
        clamp: ClampArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory (sampled.jsonl + sample_report.json + goal.json)
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the pointwise GBT ranker
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: FormatArg,
        /// TrainConfig JSON; defaults apply otherwise
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a trained model on a dataset
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        #[arg(long, value_enum, default_value = "jsonl")]
        format: FormatArg,
        #[arg(long)]
        model: PathBuf,
        /// top@k grid
        #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 3, 4, 8, 12, 16, 20])]
        ks: Vec<usize>,
        /// Features for the top@k means; defaults to the schema's goal features
        #[arg(long, value_delimiter = ',')]
        features: Option<Vec<String>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a full experiment from a config file
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's out_dir
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override every stage seed with one value
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (0 = all cores, 1 = serial)
        #[arg(long)]
        threads: Option<usize>,
        /// Train per-goal size-matched controls
        #[arg(long)]
        size_matched_baseline: bool,
    },
    /// Re-render report.md from a report.json
    Report {
        #[arg(long)]
        artifacts: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Synth { config, seed, out } => synth(config, seed, out),
        Command::Validate {
            data,
            schema,
            format,
        } => validate(data, schema, format),
        Command::Split {
            data,
            schema,
            format,
            fraction,
            seed,
            out,
        } => split(data, schema, format, fraction, seed, out),
        Command::Fit {
            data,
            schema,
            format,
            family,
            components,
            rows,
            seed,
            out,
        } => fit(data, schema, format, family, components, rows, seed, out),
        Command::Sample {
            data,
            schema,
            format,
            base,
            goal,
            clamp,
            seed,
            out,
        } => sample(data, schema, format, base, goal, clamp, seed, out),
        Command::Train {
            data,
            schema,
            format,
            config,
            seed,
            out,
        } => train(data, schema, format, config, seed, out),
        Command::Eval {
            data,
            schema,
            format,
            model,
            ks,
            features,
            out,
        } => eval(data, schema, format, model, ks, features, out),
        Command::Run {
            config,
            out,
            seed,
            threads,
            size_matched_baseline,
        } => run(config, out, seed, threads, size_matched_baseline),
        Command::Report { artifacts, out } => report(artifacts, out),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &std::path::Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {what} {path:?}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {what} {path:?}"))
}

fn write_json_pretty<T: serde::Serialize>(path: &std::path::Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {path:?}"))?;
    Ok(())
}

fn load_data(data: &std::path::Path, schema: &std::path::Path, format: FormatArg) -> Result<SessionDataset> {
    let schema = FeatureSchema::from_json_file(schema).context("loading schema")?;
    Ok(data_model::load_sessions(data, &schema, format.into())?)
}

fn synth(config: Option<PathBuf>, seed: Option<u64>, out: PathBuf) -> Result<()> {
    let mut cfg: SynthConfig = match config {
        Some(path) => read_json(&path, "synth config")?,
        None => SynthConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let ds = generate(&cfg)?;
    fs::create_dir_all(&out)?;
    data_model::write_sessions(&ds, &out.join("sessions.jsonl"), DataFormat::Jsonl)?;
    ds.schema.to_json_file(&out.join("schema.json"))?;
    write_json_pretty(&out.join("synth_config.json"), &cfg)?;
    println!(
        "wrote {} sessions ({} examples) to {:?}",
        ds.n_sessions(),
        ds.n_examples(),
        out.join("sessions.jsonl")
    );
    Ok(())
}

fn validate(data: PathBuf, schema: PathBuf, format: FormatArg) -> Result<()> {
    // Loading enforces invariants one by one; to report all violations,
    // fall back to the permissive path only when loading already failed.
    let schema = FeatureSchema::from_json_file(&schema).context("loading schema")?;
    match data_model::load_sessions(&data, &schema, format.into()) {
        Ok(ds) => {
            let report = data_model::validate(&ds);
            if report.is_empty() {
                println!("ok: {} sessions, {} examples", ds.n_sessions(), ds.n_examples());
                Ok(())
            } else {
                for v in &report.violations {
                    eprintln!("violation: {v}");
                }
                bail!("{} violation(s) found", report.violations.len());
            }
        }
        Err(err) => {
            eprintln!("violation: {err}");
            bail!("dataset failed to load");
        }
    }
}

fn split(
    data: PathBuf,
    schema: PathBuf,
    format: FormatArg,
    fraction: f64,
    seed: u64,
    out: PathBuf,
) -> Result<()> {
    let ds = load_data(&data, &schema, format)?;
    let (train, test) = data_model::split_by_customer(&ds, fraction, seed)?;
    fs::create_dir_all(&out)?;
    data_model::write_sessions(&train, &out.join("train.jsonl"), DataFormat::Jsonl)?;
    data_model::write_sessions(&test, &out.join("test.jsonl"), DataFormat::Jsonl)?;
    println!(
        "train: {} sessions, test: {} sessions",
        train.n_sessions(),
        test.n_sessions()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn fit(
    data: PathBuf,
    schema: PathBuf,
    format: FormatArg,
    family: FamilyArg,
    components: usize,
    rows: RowsArg,
    seed: u64,
    out: PathBuf,
) -> Result<()> {
    let ds = load_data(&data, &schema, format)?;
    let x = data_model::goal_matrix(&ds, rows.into());
    let model = match family {
        FamilyArg::Gaussian => DensityModel::Gaussian(fit_gaussian(&x)?),
        FamilyArg::Gmm => {
            let em = EmConfig {
                seed,
                ..EmConfig::default()
            };
            DensityModel::Gmm(fit_gmm(&x, components, &em)?)
        }
    };
    save_density_model(&out, &model)?;
    println!("fit {} rows x {} goal features -> {:?}", x.rows(), x.cols(), out);
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sample(
    data: PathBuf,
    schema: PathBuf,
    format: FormatArg,
    base: PathBuf,
    goal: PathBuf,
    clamp: ClampArg,
    seed: u64,
    out: PathBuf,
) -> Result<()> {
    let ds = load_data(&data, &schema, format)?;
    let base = load_density_model(&base)?;
    let spec: GoalSpec = read_json(&goal, "goal spec")?;
    let goal_model = build_goal(&base, &spec, &ds.schema)?;
    let cfg = SamplerConfig {
        seed,
        clamp: match clamp {
            ClampArg::On => Clamp::On,
            ClampArg::Off => Clamp::Off,
        },
        session_policy: SessionPolicy::PositiveExample,
    };
    let (sampled, report) = match (&base, &goal_model) {
        (DensityModel::Gaussian(b), DensityModel::Gaussian(g)) => sample_rank(&ds, b, g, &cfg)?,
        (DensityModel::Gmm(b), DensityModel::Gmm(g)) => generalized_sample_rank(&ds, b, g, &cfg)?,
        _ => unreachable!("goal model family always matches its base"),
    };
    fs::create_dir_all(&out)?;
    data_model::write_sessions(&sampled, &out.join("sampled.jsonl"), DataFormat::Jsonl)?;
    write_json_pretty(&out.join("sample_report.json"), &report)?;
    save_density_model(&out.join("goal.json"), &goal_model)?;
    println!(
        "accepted {}/{} sessions (rate {:.3}, {} clamped)",
        report.accepted_sessions,
        report.input_sessions,
        report.acceptance_rate,
        report.clamped_count
    );
    Ok(())
}

fn train(
    data: PathBuf,
    schema: PathBuf,
    format: FormatArg,
    config: Option<PathBuf>,
    seed: Option<u64>,
    out: PathBuf,
) -> Result<()> {
    let ds = load_data(&data, &schema, format)?;
    let mut cfg: TrainConfig = match config {
        Some(path) => read_json(&path, "train config")?,
        None => TrainConfig::default(),
    };
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let model = train_pointwise(&ds, &cfg)?;
    save_gbt_model(&out, &model)?;
    println!(
        "trained {} trees on {} examples -> {:?}",
        model.trees.len(),
        ds.n_examples(),
        out
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn eval(
    data: PathBuf,
    schema: PathBuf,
    format: FormatArg,
    model: PathBuf,
    ks: Vec<usize>,
    features: Option<Vec<String>>,
    out: PathBuf,
) -> Result<()> {
    let ds = load_data(&data, &schema, format)?;
    let model = load_gbt_model(&model)?;
    if !model.schema_hash.is_empty() && model.schema_hash != ds.schema.hash_token() {
        return Err(samplerank_core::Error::SchemaHash {
            model: model.schema_hash.clone(),
            data: ds.schema.hash_token(),
        }
        .into());
    }
    let features = features.unwrap_or_else(|| {
        ds.schema
            .goal_feature_names()
            .iter()
            .map(|s| s.to_string())
            .collect()
    });
    let report = evaluate(&model, &ds, &features, &ks)?;
    write_json_pretty(&out, &report)?;
    println!("auc {:.4}  ndcg {:.4}  ({} sessions)", report.auc, report.ndcg, report.n_sessions);
    Ok(())
}

fn run(
    config: PathBuf,
    out: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
    size_matched_baseline: bool,
) -> Result<()> {
    let mut cfg: ExperimentConfig = read_json(&config, "experiment config")?;
    if let Some(seed) = seed {
        cfg.split.seed = seed;
        cfg.sampler.seed = seed;
        cfg.train.seed = seed;
        cfg.density.em.seed = seed;
        if let pipeline::DataSource::Synth(synth) = &mut cfg.data {
            synth.seed = seed;
        }
    }
    if threads.is_some() {
        cfg.threads = threads;
    }
    cfg.size_matched_baseline |= size_matched_baseline;
    let out_dir = out
        .or_else(|| cfg.out_dir.clone())
        .context("no output directory: pass --out or set out_dir in the config")?;
    fs::create_dir_all(&out_dir)?;
    let artifacts = run_experiment(&cfg, &out_dir)?;
    println!(
        "baseline auc {:.4} ndcg {:.4}",
        artifacts.baseline.auc, artifacts.baseline.ndcg
    );
    for goal in &artifacts.goals {
        println!(
            "{}: auc {:.4} ndcg {:.4} (rate {:.3})",
            goal.name, goal.eval.auc, goal.eval.ndcg, goal.sample.acceptance_rate
        );
    }
    println!("report: {:?}", out_dir.join("report.md"));
    Ok(())
}

fn report(artifacts: PathBuf, out: PathBuf) -> Result<()> {
    let artifacts: ExperimentArtifacts = read_json(&artifacts, "artifacts")?;
    fs::write(&out, pipeline::render_report(&artifacts))?;
    println!("wrote {out:?}");
    Ok(())
}
