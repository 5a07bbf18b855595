//! Goal-distribution construction: delta rules that tilt a fitted model's
//! parameters toward multi-stakeholder objectives.
//!
//! A mean can be moved additively or by percentage; a covariance can be
//! shrunk by a factor in (0, 1). Features without a rule keep their fitted
//! parameters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data_model::FeatureSchema;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::stats::{DensityModel, GaussianModel, GmmModel};

/// One parameter-change rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DeltaRule {
    /// mu -> mu + delta
    Additive { delta: f64 },
    /// mu -> mu (1 + delta)
    Percentage { delta: f64 },
    /// Sigma -> delta Sigma, 0 < delta < 1
    Shrinkage { delta: f64 },
}

impl DeltaRule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            DeltaRule::Additive { delta } | DeltaRule::Percentage { delta } => {
                if !delta.is_finite() {
                    return Err(Error::DeltaOutOfRange(format!("delta {delta} is not finite")));
                }
            }
            DeltaRule::Shrinkage { delta } => {
                if !(delta > 0.0 && delta < 1.0) {
                    return Err(Error::DeltaOutOfRange(format!(
                        "shrinkage delta must lie in (0,1), got {delta}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Mean rules plus optional covariance shrinkage for one model (or one
/// mixture component).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ComponentRules {
    #[serde(default, rename = "mu")]
    pub mu_rules: BTreeMap<String, DeltaRule>,
    #[serde(default, rename = "sigma", skip_serializing_if = "Option::is_none")]
    pub sigma_rule: Option<DeltaRule>,
}

/// The goal specification: global rules, optionally overridden per mixture
/// component.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    #[serde(default, rename = "mu")]
    pub mu_rules: BTreeMap<String, DeltaRule>,
    #[serde(default, rename = "sigma", skip_serializing_if = "Option::is_none")]
    pub sigma_rule: Option<DeltaRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub per_component: Option<BTreeMap<usize, ComponentRules>>,
}

impl GoalSpec {
    /// Check rule kinds, ranges, and that every key names a goal feature.
    pub fn validate(&self, schema: &FeatureSchema) -> Result<()> {
        validate_rules(&self.mu_rules, self.sigma_rule.as_ref(), schema)?;
        if let Some(per) = &self.per_component {
            for rules in per.values() {
                validate_rules(&rules.mu_rules, rules.sigma_rule.as_ref(), schema)?;
            }
        }
        Ok(())
    }

    fn rules_for_component(&self, k: usize) -> (&BTreeMap<String, DeltaRule>, Option<&DeltaRule>) {
        match self.per_component.as_ref().and_then(|per| per.get(&k)) {
            Some(rules) => (&rules.mu_rules, rules.sigma_rule.as_ref()),
            None => (&self.mu_rules, self.sigma_rule.as_ref()),
        }
    }
}

fn validate_rules(
    mu_rules: &BTreeMap<String, DeltaRule>,
    sigma_rule: Option<&DeltaRule>,
    schema: &FeatureSchema,
) -> Result<()> {
    for (name, rule) in mu_rules {
        if schema.goal_position(name).is_none() {
            return Err(Error::UnknownFeature(name.clone()));
        }
        rule.validate()?;
        if matches!(rule, DeltaRule::Shrinkage { .. }) {
            return Err(Error::Config(format!(
                "mu rule for {name} must be additive or percentage"
            )));
        }
    }
    if let Some(rule) = sigma_rule {
        rule.validate()?;
        if !matches!(rule, DeltaRule::Shrinkage { .. }) {
            return Err(Error::Config("sigma rule must be shrinkage".into()));
        }
    }
    Ok(())
}

fn apply_mu_rules(
    mu: &[f64],
    rules: &BTreeMap<String, DeltaRule>,
    schema: &FeatureSchema,
) -> Result<Vec<f64>> {
    let mut out = mu.to_vec();
    for (name, rule) in rules {
        let pos = schema
            .goal_position(name)
            .ok_or_else(|| Error::UnknownFeature(name.clone()))?;
        if pos >= out.len() {
            return Err(Error::DimensionMismatch {
                expected: schema.goal_dim(),
                got: out.len(),
            });
        }
        rule.validate()?;
        match *rule {
            DeltaRule::Additive { delta } => out[pos] += delta,
            DeltaRule::Percentage { delta } => out[pos] *= 1.0 + delta,
            DeltaRule::Shrinkage { .. } => {
                return Err(Error::Config(format!(
                    "mu rule for {name} must be additive or percentage"
                )))
            }
        }
    }
    Ok(out)
}

/// Apply the spec's global mean rules to `mu` (goal-subspace coordinates).
/// Coordinates without a rule are copied verbatim.
pub fn apply_mu_delta(mu: &[f64], spec: &GoalSpec, schema: &FeatureSchema) -> Result<Vec<f64>> {
    apply_mu_rules(mu, &spec.mu_rules, schema)
}

/// Apply an optional shrinkage rule to a covariance. Absent rule copies.
pub fn apply_sigma_delta(sigma: &Matrix, rule: Option<&DeltaRule>) -> Result<Matrix> {
    match rule {
        None => Ok(sigma.clone()),
        Some(rule) => {
            rule.validate()?;
            match *rule {
                DeltaRule::Shrinkage { delta } => Ok(sigma.scale(delta)),
                _ => Err(Error::Config("sigma rule must be shrinkage".into())),
            }
        }
    }
}

fn tilt_gaussian(
    base: &GaussianModel,
    mu_rules: &BTreeMap<String, DeltaRule>,
    sigma_rule: Option<&DeltaRule>,
    schema: &FeatureSchema,
) -> Result<GaussianModel> {
    if base.dim() != schema.goal_dim() {
        return Err(Error::DimensionMismatch {
            expected: schema.goal_dim(),
            got: base.dim(),
        });
    }
    let mu = apply_mu_rules(base.mu(), mu_rules, schema)?;
    let sigma = apply_sigma_delta(base.sigma(), sigma_rule)?;
    GaussianModel::new(mu, sigma)
}

/// Build the goal distribution from a fitted single Gaussian.
pub fn build_goal_gaussian(
    base: &GaussianModel,
    spec: &GoalSpec,
    schema: &FeatureSchema,
) -> Result<GaussianModel> {
    spec.validate(schema)?;
    tilt_gaussian(base, &spec.mu_rules, spec.sigma_rule.as_ref(), schema)
}

/// Build the goal mixture: per-component rules where given, global rules
/// otherwise. Weights carry over unchanged.
pub fn build_goal_gmm(base: &GmmModel, spec: &GoalSpec, schema: &FeatureSchema) -> Result<GmmModel> {
    spec.validate(schema)?;
    if let Some(per) = &spec.per_component {
        if let Some(&k) = per.keys().find(|&&k| k >= base.p()) {
            return Err(Error::ComponentIndex { k, p: base.p() });
        }
    }
    let components: Result<Vec<GaussianModel>> = (0..base.p())
        .map(|k| {
            let (mu_rules, sigma_rule) = spec.rules_for_component(k);
            tilt_gaussian(base.component(k)?, mu_rules, sigma_rule, schema)
        })
        .collect();
    GmmModel::new(components?, base.weights().to_vec())
}

/// Build the goal distribution for either model family; the base model is
/// left untouched.
pub fn build_goal(base: &DensityModel, spec: &GoalSpec, schema: &FeatureSchema) -> Result<DensityModel> {
    match base {
        DensityModel::Gaussian(g) => Ok(DensityModel::Gaussian(build_goal_gaussian(g, spec, schema)?)),
        DensityModel::Gmm(g) => Ok(DensityModel::Gmm(build_goal_gmm(g, spec, schema)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::fit_gaussian_reg;

    fn ratings_schema() -> FeatureSchema {
        FeatureSchema::new(
            vec!["item_rating".into(), "restaurant_rating".into()],
            &["item_rating".into(), "restaurant_rating".into()],
        )
        .unwrap()
    }

    fn additive(delta: f64) -> DeltaRule {
        DeltaRule::Additive { delta }
    }

    #[test]
    fn additive_rules_match_goal3_sweep() {
        let schema = ratings_schema();
        let spec = GoalSpec {
            mu_rules: BTreeMap::from([
                ("item_rating".into(), additive(0.3)),
                ("restaurant_rating".into(), additive(0.3)),
            ]),
            ..GoalSpec::default()
        };
        let out = apply_mu_delta(&[4.2, 3.9], &spec, &schema).unwrap();
        assert!((out[0] - 4.5).abs() < 1e-12);
        assert!((out[1] - 4.2).abs() < 1e-12);
    }

    #[test]
    fn absent_rules_are_identity() {
        let schema = ratings_schema();
        let spec = GoalSpec::default();
        let mu = [4.2, 3.9];
        assert_eq!(apply_mu_delta(&mu, &spec, &schema).unwrap(), mu.to_vec());
    }

    #[test]
    fn percentage_rule() {
        let schema = FeatureSchema::new(vec!["x".into()], &["x".into()]).unwrap();
        let spec = GoalSpec {
            mu_rules: BTreeMap::from([("x".into(), DeltaRule::Percentage { delta: 0.5 })]),
            ..GoalSpec::default()
        };
        assert_eq!(apply_mu_delta(&[10.0], &spec, &schema).unwrap(), vec![15.0]);
    }

    #[test]
    fn unknown_feature_is_rejected() {
        let schema = ratings_schema();
        let spec = GoalSpec {
            mu_rules: BTreeMap::from([("lm".into(), additive(1.0))]),
            ..GoalSpec::default()
        };
        assert!(matches!(
            apply_mu_delta(&[0.0, 0.0], &spec, &schema),
            Err(Error::UnknownFeature(_))
        ));
    }

    #[test]
    fn sigma_shrinkage() {
        let sigma = Matrix::from_rows(vec![vec![2.0, 0.0], vec![0.0, 2.0]]).unwrap();
        let out = apply_sigma_delta(&sigma, Some(&DeltaRule::Shrinkage { delta: 0.5 })).unwrap();
        assert_eq!(out, Matrix::identity(2));
        // absent rule: unchanged
        assert_eq!(apply_sigma_delta(&sigma, None).unwrap(), sigma);
        // expansion is out of domain
        assert!(matches!(
            apply_sigma_delta(&sigma, Some(&DeltaRule::Shrinkage { delta: 1.5 })),
            Err(Error::DeltaOutOfRange(_))
        ));
    }

    #[test]
    fn build_goal_gaussian_tilts_mu_only() {
        let schema = ratings_schema();
        let x = Matrix::from_rows(vec![
            vec![4.0, 3.9],
            vec![4.2, 4.1],
            vec![4.1, 4.0],
            vec![4.1, 4.0],
        ])
        .unwrap();
        let base = fit_gaussian_reg(&x, 1e-9).unwrap();
        let spec = GoalSpec {
            mu_rules: BTreeMap::from([
                ("item_rating".into(), additive(0.5)),
                ("restaurant_rating".into(), additive(0.5)),
            ]),
            ..GoalSpec::default()
        };
        let goal = build_goal_gaussian(&base, &spec, &schema).unwrap();
        assert!((goal.mu()[0] - (base.mu()[0] + 0.5)).abs() < 1e-12);
        assert!((goal.mu()[1] - (base.mu()[1] + 0.5)).abs() < 1e-12);
        assert_eq!(goal.sigma(), base.sigma());
    }

    #[test]
    fn empty_spec_reproduces_base_bit_for_bit() {
        let schema = ratings_schema();
        let x = Matrix::from_rows(vec![
            vec![1.0, 2.0],
            vec![2.0, 1.0],
            vec![3.0, 3.0],
            vec![0.5, 2.5],
        ])
        .unwrap();
        let base = fit_gaussian_reg(&x, 1e-8).unwrap();
        let before = serde_json::to_string(&base).unwrap();
        let goal = build_goal_gaussian(&base, &GoalSpec::default(), &schema).unwrap();
        assert_eq!(goal, base);
        // purity: base unchanged
        assert_eq!(serde_json::to_string(&base).unwrap(), before);
    }

    #[test]
    fn per_component_rules_scope_to_their_component() {
        let schema = ratings_schema();
        let c0 = GaussianModel::new(vec![1.0, 1.0], Matrix::identity(2)).unwrap();
        let c1 = GaussianModel::new(vec![5.0, 5.0], Matrix::identity(2)).unwrap();
        let base = GmmModel::new(vec![c0, c1], vec![0.5, 0.5]).unwrap();
        let spec = GoalSpec {
            per_component: Some(BTreeMap::from([(
                0usize,
                ComponentRules {
                    mu_rules: BTreeMap::from([("item_rating".into(), additive(1.0))]),
                    sigma_rule: None,
                },
            )])),
            ..GoalSpec::default()
        };
        let goal = build_goal_gmm(&base, &spec, &schema).unwrap();
        assert_eq!(goal.components()[0].mu(), &[2.0, 1.0]);
        assert_eq!(goal.components()[1].mu(), &[5.0, 5.0]);
        assert_eq!(goal.components()[1], base.components()[1]);
    }

    #[test]
    fn additive_composition_is_additive() {
        let schema = ratings_schema();
        let spec = |d: f64| GoalSpec {
            mu_rules: BTreeMap::from([("item_rating".into(), additive(d))]),
            ..GoalSpec::default()
        };
        let mu = [4.13];
        let once = apply_mu_delta(
            &apply_mu_delta(&mu[..1], &spec(0.17), &schema).unwrap(),
            &spec(0.21),
            &schema,
        )
        .unwrap();
        let combined = apply_mu_delta(&mu[..1], &spec(0.38), &schema).unwrap();
        assert!((once[0] - combined[0]).abs() < 1e-12);
    }

    #[test]
    fn goal_covariance_stays_positive_definite() {
        let sigma = Matrix::from_rows(vec![vec![2.0, 0.9], vec![0.9, 1.0]]).unwrap();
        for delta in [0.01, 0.25, 0.5, 0.99] {
            let shrunk = apply_sigma_delta(&sigma, Some(&DeltaRule::Shrinkage { delta })).unwrap();
            // factorization succeeds
            GaussianModel::new(vec![0.0, 0.0], shrunk).unwrap();
        }
    }

    #[test]
    fn spec_json_shape() {
        let json = r#"{"mu": {"last_mile": {"kind": "additive", "delta": -0.5}},
                       "sigma": {"kind": "shrinkage", "delta": 0.9}}"#;
        let spec: GoalSpec = serde_json::from_str(json).unwrap();
        assert_eq!(
            spec.mu_rules["last_mile"],
            DeltaRule::Additive { delta: -0.5 }
        );
        assert_eq!(spec.sigma_rule, Some(DeltaRule::Shrinkage { delta: 0.9 }));
    }
}
