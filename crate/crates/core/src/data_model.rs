//! Session-structured datasets: schema, ingestion, validation, and
//! customer-level splitting.
//!
//! A session is one user visit in which a set of items was shown and exactly
//! one was transacted (the positive example). Datasets are immutable after
//! construction; every operation returns new values.

use std::collections::BTreeSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::stream;

/// Ordered feature names plus the subset used for density fitting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "SchemaRepr", into = "SchemaRepr")]
pub struct FeatureSchema {
    feature_names: Vec<String>,
    goal_feature_indices: Vec<usize>,
}

/// On-disk schema form: `{"features": [...], "goal_features": [...]}`.
#[derive(Serialize, Deserialize)]
struct SchemaRepr {
    features: Vec<String>,
    goal_features: Vec<String>,
}

impl TryFrom<SchemaRepr> for FeatureSchema {
    type Error = Error;
    fn try_from(raw: SchemaRepr) -> Result<Self> {
        FeatureSchema::new(raw.features, &raw.goal_features)
    }
}

impl From<FeatureSchema> for SchemaRepr {
    fn from(s: FeatureSchema) -> SchemaRepr {
        SchemaRepr {
            goal_features: s.goal_feature_names().iter().map(|n| n.to_string()).collect(),
            features: s.feature_names,
        }
    }
}

impl FeatureSchema {
    pub fn new(feature_names: Vec<String>, goal_features: &[String]) -> Result<Self> {
        if feature_names.is_empty() {
            return Err(Error::Schema("no features declared".into()));
        }
        let mut seen = BTreeSet::new();
        for name in &feature_names {
            if name.is_empty() {
                return Err(Error::Schema("empty feature name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name: {name}")));
            }
        }
        if goal_features.is_empty() {
            return Err(Error::Schema("goal_features must be non-empty".into()));
        }
        let mut goal_feature_indices = Vec::with_capacity(goal_features.len());
        for name in goal_features {
            let idx = feature_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::Schema(format!("goal feature {name} not in features")))?;
            goal_feature_indices.push(idx);
        }
        // strictly increasing also rules out duplicates
        if goal_feature_indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Schema(
                "goal_features must follow schema order without repeats".into(),
            ));
        }
        Ok(FeatureSchema {
            feature_names,
            goal_feature_indices,
        })
    }

    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn goal_feature_indices(&self) -> &[usize] {
        &self.goal_feature_indices
    }

    pub fn goal_feature_names(&self) -> Vec<&str> {
        self.goal_feature_indices
            .iter()
            .map(|&i| self.feature_names[i].as_str())
            .collect()
    }

    pub fn goal_dim(&self) -> usize {
        self.goal_feature_indices.len()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Position of `name` within the goal subspace, if it is a goal feature.
    pub fn goal_position(&self, name: &str) -> Option<usize> {
        let idx = self.index_of(name)?;
        self.goal_feature_indices.iter().position(|&i| i == idx)
    }

    /// Project a full feature vector onto the goal subspace.
    pub fn project_goal(&self, features: &[f64]) -> Vec<f64> {
        self.goal_feature_indices.iter().map(|&i| features[i]).collect()
    }

    /// Stable integrity token over the ordered feature names.
    pub fn hash_token(&self) -> String {
        let mut h = Sha256::new();
        for name in &self.feature_names {
            h.update(name.as_bytes());
            h.update([0u8]);
        }
        let digest = h.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let file = File::open(path)?;
        Ok(serde_json::from_reader(BufReader::new(file))?)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let mut file = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut file, self)?;
        file.write_all(b"\n")?;
        Ok(())
    }
}

/// One displayed item: feature vector plus binary transacted label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Example {
    pub features: Vec<f64>,
    pub label: u8,
}

/// All items shown in one customer visit; exactly one carries label 1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub customer_id: String,
    #[serde(rename = "items")]
    pub examples: Vec<Example>,
}

impl Session {
    /// Index of the transacted item, if the session is well-formed.
    pub fn positive_index(&self) -> Option<usize> {
        let mut found = None;
        for (i, ex) in self.examples.iter().enumerate() {
            if ex.label == 1 {
                if found.is_some() {
                    return None;
                }
                found = Some(i);
            }
        }
        found
    }

    pub fn positive(&self) -> Option<&Example> {
        self.positive_index().map(|i| &self.examples[i])
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }
}

/// The dataset D: sessions sharing one schema.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionDataset {
    pub schema: FeatureSchema,
    pub sessions: Vec<Session>,
}

impl SessionDataset {
    pub fn new(schema: FeatureSchema, sessions: Vec<Session>) -> Self {
        SessionDataset { schema, sessions }
    }

    /// Total example count across sessions.
    pub fn n_examples(&self) -> usize {
        self.sessions.iter().map(Session::len).sum()
    }

    pub fn n_sessions(&self) -> usize {
        self.sessions.len()
    }

    pub fn customer_ids(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for s in &self.sessions {
            if seen.insert(s.customer_id.as_str()) {
                out.push(s.customer_id.as_str());
            }
        }
        out
    }
}

/// One invariant violation found by [`validate`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub session_id: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "session {}: {}", self.session_id, self.rule)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Jsonl,
    Csv,
}

/// Which rows feed [`goal_matrix`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowSelection {
    PositivesOnly,
    AllRows,
}

fn check_session(session: &Session, schema: &FeatureSchema, line: usize) -> Result<()> {
    let n = schema.feature_count();
    if session.examples.len() < 2 {
        return Err(Error::Integrity {
            session_id: session.session_id.clone(),
            line,
            rule: "session has fewer than 2 items".into(),
        });
    }
    for ex in &session.examples {
        if ex.features.len() != n {
            return Err(Error::SchemaMismatch {
                line,
                expected: n,
                got: ex.features.len(),
            });
        }
        if let Some(j) = ex.features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                line,
                msg: format!("non-finite value in feature {j}"),
            });
        }
        if ex.label > 1 {
            return Err(Error::Parse {
                line,
                msg: format!("label must be 0 or 1, got {}", ex.label),
            });
        }
    }
    let positives = session.examples.iter().filter(|e| e.label == 1).count();
    if positives != 1 {
        return Err(Error::Integrity {
            session_id: session.session_id.clone(),
            line,
            rule: format!("expected exactly one positive item, found {positives}"),
        });
    }
    Ok(())
}

/// Load sessions from a JSONL or CSV file, enforcing all invariants.
/// Row order within each session is preserved.
pub fn load_sessions(path: &Path, schema: &FeatureSchema, format: DataFormat) -> Result<SessionDataset> {
    match format {
        DataFormat::Jsonl => load_jsonl(path, schema),
        DataFormat::Csv => load_csv(path, schema),
    }
}

fn load_jsonl(path: &Path, schema: &FeatureSchema) -> Result<SessionDataset> {
    let file = File::open(path)?;
    let reader = BufReader::new(file);
    let mut sessions = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let session: Session = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        check_session(&session, schema, line_no)?;
        sessions.push(session);
    }
    Ok(SessionDataset::new(schema.clone(), sessions))
}

fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<SessionDataset> {
    let file = File::open(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(BufReader::new(file));

    let headers = reader.headers()?.clone();
    let expected: Vec<&str> = ["session_id", "customer_id", "label"]
        .into_iter()
        .chain(schema.feature_names().iter().map(String::as_str))
        .collect();
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::Parse {
            line: 1,
            msg: format!("csv header mismatch: expected {expected:?}, got {got:?}"),
        });
    }

    let n = schema.feature_count();
    let mut sessions: Vec<Session> = Vec::new();
    let mut current: Option<(Session, usize)> = None; // session + first line number
    let mut seen_ids = BTreeSet::new();

    for (idx, record) in reader.records().enumerate() {
        let line_no = idx + 2; // header is line 1
        let record = record.map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if record.len() != n + 3 {
            return Err(Error::SchemaMismatch {
                line: line_no,
                expected: n,
                got: record.len().saturating_sub(3),
            });
        }
        let session_id = record[0].to_string();
        let customer_id = record[1].to_string();
        let label: u8 = record[2].parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("invalid label {:?}", &record[2]),
        })?;
        let mut features = Vec::with_capacity(n);
        for (j, cell) in record.iter().skip(3).enumerate() {
            let v: f64 = cell.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("non-numeric value {:?} in feature {}", cell, j),
            })?;
            features.push(v);
        }
        let example = Example { features, label };

        match current.as_mut() {
            Some((session, first_line)) if session.session_id == session_id => {
                if session.customer_id != customer_id {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!(
                            "session {session_id} spans customers {} and {customer_id}",
                            session.customer_id
                        ),
                    });
                }
                let _ = first_line;
                session.examples.push(example);
            }
            _ => {
                if let Some((done, first_line)) = current.take() {
                    check_session(&done, schema, first_line)?;
                    sessions.push(done);
                }
                if !seen_ids.insert(session_id.clone()) {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("rows of session {session_id} are not contiguous"),
                    });
                }
                current = Some((
                    Session {
                        session_id,
                        customer_id,
                        examples: vec![example],
                    },
                    line_no,
                ));
            }
        }
    }
    if let Some((done, first_line)) = current.take() {
        check_session(&done, schema, first_line)?;
        sessions.push(done);
    }
    Ok(SessionDataset::new(schema.clone(), sessions))
}

/// Write sessions to JSONL or CSV; the inverse of [`load_sessions`].
pub fn write_sessions(ds: &SessionDataset, path: &Path, format: DataFormat) -> Result<()> {
    match format {
        DataFormat::Jsonl => {
            let mut out = BufWriter::new(File::create(path)?);
            for session in &ds.sessions {
                serde_json::to_writer(&mut out, session)?;
                out.write_all(b"\n")?;
            }
            out.flush()?;
            Ok(())
        }
        DataFormat::Csv => {
            let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path)?));
            let header: Vec<&str> = ["session_id", "customer_id", "label"]
                .into_iter()
                .chain(ds.schema.feature_names().iter().map(String::as_str))
                .collect();
            w.write_record(&header)?;
            let mut row: Vec<String> = Vec::new();
            for session in &ds.sessions {
                for ex in &session.examples {
                    row.clear();
                    row.push(session.session_id.clone());
                    row.push(session.customer_id.clone());
                    row.push(ex.label.to_string());
                    row.extend(ex.features.iter().map(|v| v.to_string()));
                    w.write_record(&row)?;
                }
            }
            w.flush()?;
            Ok(())
        }
    }
}

/// Report every invariant violation in `ds`; empty iff well-formed.
pub fn validate(ds: &SessionDataset) -> ValidationReport {
    let n = ds.schema.feature_count();
    let mut violations = Vec::new();
    for session in &ds.sessions {
        let sid = &session.session_id;
        if session.examples.len() < 2 {
            violations.push(Violation {
                session_id: sid.clone(),
                rule: "fewer than 2 items".into(),
            });
        }
        let mut positives = 0usize;
        for (i, ex) in session.examples.iter().enumerate() {
            if ex.features.len() != n {
                violations.push(Violation {
                    session_id: sid.clone(),
                    rule: format!("item {i} has {} features, schema has {n}", ex.features.len()),
                });
            }
            for (j, v) in ex.features.iter().enumerate() {
                if !v.is_finite() {
                    violations.push(Violation {
                        session_id: sid.clone(),
                        rule: format!("item {i} feature {j} is not finite"),
                    });
                }
            }
            match ex.label {
                0 => {}
                1 => positives += 1,
                other => violations.push(Violation {
                    session_id: sid.clone(),
                    rule: format!("item {i} label {other} is not binary"),
                }),
            }
        }
        if positives != 1 {
            violations.push(Violation {
                session_id: sid.clone(),
                rule: format!("expected exactly one positive item, found {positives}"),
            });
        }
    }
    ValidationReport { violations }
}

/// Split sessions into train/test so that every customer lands entirely on
/// one side. Customers are ranked by a hash of (seed, customer_id), so the
/// split is stable under dataset reordering; the train side gets exactly
/// round(train_fraction x #customers) customers.
pub fn split_by_customer(
    ds: &SessionDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(SessionDataset, SessionDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train_fraction must be in (0,1), got {train_fraction}"
        )));
    }
    let customers = ds.customer_ids();
    if customers.len() < 2 {
        return Err(Error::DegenerateSplit(format!(
            "need at least 2 distinct customers, got {}",
            customers.len()
        )));
    }
    let mut ranked: Vec<(&str, u64)> = customers
        .iter()
        .map(|&c| (c, stream::hash64("split.customer", seed, c.as_bytes())))
        .collect();
    ranked.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));

    let n_train = (train_fraction * customers.len() as f64).round() as usize;
    if n_train == 0 || n_train == customers.len() {
        return Err(Error::DegenerateSplit(format!(
            "{} customers at fraction {train_fraction} leaves one side empty",
            customers.len()
        )));
    }
    let train_set: BTreeSet<&str> = ranked[..n_train].iter().map(|&(c, _)| c).collect();

    let mut train = Vec::new();
    let mut test = Vec::new();
    for session in &ds.sessions {
        if train_set.contains(session.customer_id.as_str()) {
            train.push(session.clone());
        } else {
            test.push(session.clone());
        }
    }
    Ok((
        SessionDataset::new(ds.schema.clone(), train),
        SessionDataset::new(ds.schema.clone(), test),
    ))
}

/// Goal-feature projections of the selected examples, in dataset order.
pub fn goal_matrix(ds: &SessionDataset, which: RowSelection) -> Matrix {
    let d = ds.schema.goal_dim();
    let mut data = Vec::new();
    let mut rows = 0usize;
    for session in &ds.sessions {
        match which {
            RowSelection::AllRows => {
                for ex in &session.examples {
                    data.extend(ds.schema.project_goal(&ex.features));
                    rows += 1;
                }
            }
            RowSelection::PositivesOnly => {
                if let Some(pos) = session.positive() {
                    data.extend(ds.schema.project_goal(&pos.features));
                    rows += 1;
                }
            }
        }
    }
    Matrix::from_vec(rows, d, data).expect("projection arity is schema-checked")
}
