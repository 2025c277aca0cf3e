//! Datasets with a sensitive feature, their partition into subgroups, and
//! empirical subgroup risks.
//!
//! The subgroup-risk variable has one atom per group: the group's mean loss,
//! weighted by the group's probability (empirical share by default, or a
//! caller-supplied weighting). Real-valued sensitive features are handled by
//! treating every row as its own group.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riskvar::{expectation, DiscreteRandomVariable};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "values", rename_all = "snake_case")]
pub enum SensitiveValues {
    /// Group codes; groups are indexed in order of first appearance.
    Categorical(Vec<u32>),
    Real(Vec<f64>),
}

impl SensitiveValues {
    pub fn len(&self) -> usize {
        match self {
            SensitiveValues::Categorical(v) => v.len(),
            SensitiveValues::Real(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Numeric view used by covariance-style metrics.
    pub fn as_reals(&self) -> Vec<f64> {
        match self {
            SensitiveValues::Categorical(v) => v.iter().map(|&c| c as f64).collect(),
            SensitiveValues::Real(v) => v.clone(),
        }
    }

    fn select(&self, rows: &[usize]) -> Self {
        match self {
            SensitiveValues::Categorical(v) => {
                SensitiveValues::Categorical(rows.iter().map(|&i| v[i]).collect())
            }
            SensitiveValues::Real(v) => SensitiveValues::Real(rows.iter().map(|&i| v[i]).collect()),
        }
    }
}

/// Dense features, `±1` labels and one sensitive value per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    labels: Vec<f64>,
    sensitive: SensitiveValues,
    group_weighting: Option<BTreeMap<u32, f64>>,
    feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<f64>,
        sensitive: SensitiveValues,
    ) -> Result<Self> {
        let m = features.len();
        if m == 0 {
            return Err(Error::input("dataset has no rows"));
        }
        let d = features[0].len();
        if d == 0 {
            return Err(Error::input("dataset has no feature columns"));
        }
        if let Some(i) = features.iter().position(|r| r.len() != d) {
            return Err(Error::input(format!(
                "row {i} has {} features, expected {d}",
                features[i].len()
            )));
        }
        if let Some(i) = features
            .iter()
            .position(|r| r.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::input(format!("row {i} has a non-finite feature")));
        }
        if labels.len() != m || sensitive.len() != m {
            return Err(Error::input(format!(
                "{m} rows but {} labels and {} sensitive values",
                labels.len(),
                sensitive.len()
            )));
        }
        if let Some(i) = labels.iter().position(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::input(format!(
                "label at row {i} is {}, expected ±1",
                labels[i]
            )));
        }
        if let SensitiveValues::Real(v) = &sensitive {
            if v.iter().any(|s| !s.is_finite()) {
                return Err(Error::input("non-finite sensitive value"));
            }
        }
        let feature_names = (0..d).map(|j| format!("x{j}")).collect();
        Ok(Self {
            features,
            labels,
            sensitive,
            group_weighting: None,
            feature_names,
        })
    }

    /// Attaches a group weighting `ν_S`. Keys must be exactly the observed
    /// categorical codes; weights non-negative and summing to one.
    pub fn with_group_weighting(mut self, weighting: BTreeMap<u32, f64>) -> Result<Self> {
        let SensitiveValues::Categorical(codes) = &self.sensitive else {
            return Err(Error::input(
                "group weighting needs a categorical sensitive feature",
            ));
        };
        let mut observed: Vec<u32> = codes.clone();
        observed.sort_unstable();
        observed.dedup();
        if !weighting.keys().copied().eq(observed.iter().copied()) {
            return Err(Error::input(format!(
                "group weighting keys {:?} do not match observed groups {:?}",
                weighting.keys().collect::<Vec<_>>(),
                observed
            )));
        }
        if weighting.values().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::input("group weights must be non-negative"));
        }
        let total: f64 = weighting.values().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!(
                "group weights sum to {total}, expected 1"
            )));
        }
        self.group_weighting = Some(weighting);
        Ok(self)
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.n_features() {
            return Err(Error::input(format!(
                "{} feature names for {} columns",
                names.len(),
                self.n_features()
            )));
        }
        self.feature_names = names;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.features.len()
    }

    pub fn n_features(&self) -> usize {
        self.features[0].len()
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn sensitive(&self) -> &SensitiveValues {
        &self.sensitive
    }

    pub fn group_weighting(&self) -> Option<&BTreeMap<u32, f64>> {
        self.group_weighting.as_ref()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Rows in the given order. A weighting is kept only while its keys
    /// still match the groups present.
    pub fn select(&self, rows: &[usize]) -> Result<Self> {
        let mut out = Dataset::new(
            rows.iter().map(|&i| self.features[i].clone()).collect(),
            rows.iter().map(|&i| self.labels[i]).collect(),
            self.sensitive.select(rows),
        )?;
        out.feature_names = self.feature_names.clone();
        if let Some(w) = &self.group_weighting {
            out = out.clone().with_group_weighting(w.clone()).unwrap_or(out);
        }
        Ok(out)
    }

    /// Same rows with transformed features.
    pub(crate) fn with_features(&self, features: Vec<Vec<f64>>) -> Result<Self> {
        let mut out = Dataset::new(features, self.labels.clone(), self.sensitive.clone())?;
        out.group_weighting = self.group_weighting.clone();
        out.feature_names = self.feature_names.clone();
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionMode {
    Categorical,
    PerInstance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPartition {
    pub group_ids: Vec<usize>,
    pub group_sizes: Vec<usize>,
    pub group_probs: Vec<f64>,
    /// Sensitive code of each group, or the row index in per-instance mode.
    pub keys: Vec<u32>,
}

impl GroupPartition {
    pub fn n_groups(&self) -> usize {
        self.group_sizes.len()
    }
}

pub fn partition(dataset: &Dataset, mode: PartitionMode) -> Result<GroupPartition> {
    let m = dataset.n_rows();
    if m == 0 {
        return Err(Error::input("cannot partition an empty dataset"));
    }
    match mode {
        PartitionMode::PerInstance => Ok(GroupPartition {
            group_ids: (0..m).collect(),
            group_sizes: vec![1; m],
            group_probs: vec![1.0 / m as f64; m],
            keys: (0..m as u32).collect(),
        }),
        PartitionMode::Categorical => {
            let SensitiveValues::Categorical(codes) = dataset.sensitive() else {
                return Err(Error::param(
                    "categorical partition needs a categorical sensitive feature",
                ));
            };
            let mut index: HashMap<u32, usize> = HashMap::new();
            let mut keys = Vec::new();
            let mut sizes = Vec::new();
            let group_ids = codes
                .iter()
                .map(|&c| {
                    let g = *index.entry(c).or_insert_with(|| {
                        keys.push(c);
                        sizes.push(0);
                        keys.len() - 1
                    });
                    sizes[g] += 1;
                    g
                })
                .collect();
            let probs = match dataset.group_weighting() {
                Some(w) => keys
                    .iter()
                    .map(|k| {
                        w.get(k)
                            .copied()
                            .ok_or_else(|| Error::input(format!("no group weight for group {k}")))
                    })
                    .collect::<Result<Vec<_>>>()?,
                None => sizes.iter().map(|&s| s as f64 / m as f64).collect(),
            };
            Ok(GroupPartition {
                group_ids,
                group_sizes: sizes,
                group_probs: probs,
                keys,
            })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn zeros(d: usize) -> Self {
        Self {
            weights: vec![0.0; d],
            intercept: 0.0,
        }
    }

    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.intercept
    }

    pub fn scores(&self, dataset: &Dataset) -> Vec<f64> {
        dataset.features().iter().map(|x| self.score(x)).collect()
    }

    /// `sign(score)` with `sign(0) = +1`.
    pub fn predict(&self, dataset: &Dataset) -> Vec<f64> {
        self.scores(dataset)
            .into_iter()
            .map(|s| if s >= 0.0 { 1.0 } else { -1.0 })
            .collect()
    }

    pub(crate) fn check_dims(&self, dataset: &Dataset) -> Result<()> {
        if self.weights.len() != dataset.n_features() {
            return Err(Error::param(format!(
                "model has {} weights but dataset has {} features",
                self.weights.len(),
                dataset.n_features()
            )));
        }
        if self.weights.iter().any(|w| !w.is_finite()) || !self.intercept.is_finite() {
            return Err(Error::param("model has non-finite parameters"));
        }
        Ok(())
    }
}

/// Base loss `ℓ(y, score)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossSpec {
    ZeroOne,
    Hinge,
    SquaredHinge,
    Logistic,
    Linear,
}

impl LossSpec {
    pub fn is_convex(self) -> bool {
        self != LossSpec::ZeroOne
    }

    pub fn value(self, y: f64, score: f64) -> f64 {
        let margin = y * score;
        match self {
            LossSpec::ZeroOne => {
                let pred = if score >= 0.0 { 1.0 } else { -1.0 };
                if pred != y {
                    1.0
                } else {
                    0.0
                }
            }
            LossSpec::Hinge => (1.0 - margin).max(0.0),
            LossSpec::SquaredHinge => (1.0 - margin).max(0.0).powi(2),
            LossSpec::Logistic => {
                if margin > 0.0 {
                    (-margin).exp().ln_1p()
                } else {
                    -margin + margin.exp().ln_1p()
                }
            }
            LossSpec::Linear => -margin,
        }
    }

    /// A subgradient with respect to the score; `None` for the 0-1 loss.
    /// The hinge kink at margin 1 takes 0.
    pub fn derivative(self, y: f64, score: f64) -> Option<f64> {
        let margin = y * score;
        match self {
            LossSpec::ZeroOne => None,
            LossSpec::Hinge => Some(if margin < 1.0 { -y } else { 0.0 }),
            LossSpec::SquaredHinge => Some(-2.0 * y * (1.0 - margin).max(0.0)),
            LossSpec::Logistic => {
                let sigma_neg = if margin >= 0.0 {
                    let e = (-margin).exp();
                    e / (1.0 + e)
                } else {
                    1.0 / (1.0 + margin.exp())
                };
                Some(-y * sigma_neg)
            }
            LossSpec::Linear => Some(-y),
        }
    }
}

fn check_partition(dataset: &Dataset, partition: &GroupPartition) -> Result<()> {
    if partition.group_ids.len() != dataset.n_rows() {
        return Err(Error::param(format!(
            "partition covers {} rows, dataset has {}",
            partition.group_ids.len(),
            dataset.n_rows()
        )));
    }
    Ok(())
}

/// Mean loss of each group, in group order.
pub fn group_mean_losses(
    model: &LinearModel,
    dataset: &Dataset,
    partition: &GroupPartition,
    loss: LossSpec,
) -> Result<Vec<f64>> {
    model.check_dims(dataset)?;
    check_partition(dataset, partition)?;
    let mut sums = vec![0.0; partition.n_groups()];
    for ((x, &y), &g) in dataset
        .features()
        .iter()
        .zip(dataset.labels())
        .zip(&partition.group_ids)
    {
        sums[g] += loss.value(y, model.score(x));
    }
    Ok(sums
        .into_iter()
        .zip(&partition.group_sizes)
        .map(|(s, &n)| s / n as f64)
        .collect())
}

/// The subgroup-risk random variable: atoms `(mean loss of s, ν(s))`.
pub fn subgroup_risks(
    model: &LinearModel,
    dataset: &Dataset,
    partition: &GroupPartition,
    loss: LossSpec,
) -> Result<DiscreteRandomVariable> {
    let risks = group_mean_losses(model, dataset, partition, loss)?;
    DiscreteRandomVariable::with_probs(&risks, &partition.group_probs)
}

/// Expected subgroup risk under the partition's group weighting.
pub fn weighted_risk(
    model: &LinearModel,
    dataset: &Dataset,
    partition: &GroupPartition,
    loss: LossSpec,
) -> Result<f64> {
    Ok(expectation(&subgroup_risks(
        model, dataset, partition, loss,
    )?))
}

/// Per-instance margins `-y * score`, each with probability `1/m`.
pub fn margins(model: &LinearModel, dataset: &Dataset) -> Result<DiscreteRandomVariable> {
    model.check_dims(dataset)?;
    let m = dataset.n_rows() as f64;
    DiscreteRandomVariable::new(
        dataset
            .features()
            .iter()
            .zip(dataset.labels())
            .map(|(x, &y)| (-y * model.score(x), 1.0 / m)),
    )
}
