//! CSV ingestion, the synthetic two-group benchmark, stratified splitting and
//! feature standardization.

use std::collections::{HashMap, HashSet};
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::subgroup::{Dataset, SensitiveValues};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitiveKind {
    Categorical,
    Real,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureColumns {
    AllRemaining,
    Explicit(Vec<String>),
}

/// How to read a CSV file into a [`Dataset`].
///
/// Several sensitive columns are combined into one categorical key
/// (`a|b|...`); a real sensitive feature must be a single column.
/// Non-numeric feature columns are one-hot encoded, one column per distinct
/// value in order of first appearance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: String,
    pub sensitive_columns: Vec<String>,
    pub positive_label_token: String,
    pub sensitive_kind: SensitiveKind,
    pub feature_columns: FeatureColumns,
    /// Keep the sensitive column(s) among the features.
    pub include_sensitive_as_feature: bool,
}

impl CsvSchema {
    pub fn new(label_column: impl Into<String>, sensitive_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            sensitive_columns: vec![sensitive_column.into()],
            positive_label_token: "1".into(),
            sensitive_kind: SensitiveKind::Categorical,
            feature_columns: FeatureColumns::AllRemaining,
            include_sensitive_as_feature: true,
        }
    }
}

fn ingest(row: Option<usize>, column: Option<&str>, message: impl Into<String>) -> Error {
    Error::Ingestion {
        row,
        column: column.map(str::to_string),
        message: message.into(),
    }
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| ingest(None, None, format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| ingest(None, None, format!("cannot read header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() || headers.iter().all(String::is_empty) {
        return Err(ingest(None, None, "empty file"));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = headers.iter().find(|h| !seen.insert(h.as_str())) {
        return Err(ingest(None, Some(dup), "duplicate header name"));
    }
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ingest(None, Some(name), "column not found"))
    };

    let label_idx = col(&schema.label_column)?;
    if schema.sensitive_columns.is_empty() {
        return Err(Error::param("at least one sensitive column is required"));
    }
    let sens_idx: Vec<usize> = schema
        .sensitive_columns
        .iter()
        .map(|c| col(c))
        .collect::<Result<_>>()?;
    if sens_idx.contains(&label_idx) {
        return Err(Error::param("label and sensitive columns must differ"));
    }
    if schema.sensitive_kind == SensitiveKind::Real && sens_idx.len() != 1 {
        return Err(Error::param(
            "a real sensitive feature must be a single column",
        ));
    }

    let mut feature_idx: Vec<usize> = match &schema.feature_columns {
        FeatureColumns::AllRemaining => (0..headers.len())
            .filter(|i| *i != label_idx && !sens_idx.contains(i))
            .collect(),
        FeatureColumns::Explicit(names) => names.iter().map(|c| col(c)).collect::<Result<_>>()?,
    };
    if feature_idx.contains(&label_idx) {
        return Err(Error::param("the label column cannot be a feature"));
    }
    if schema.include_sensitive_as_feature {
        for &s in &sens_idx {
            if !feature_idx.contains(&s) {
                feature_idx.push(s);
            }
        }
        if matches!(schema.feature_columns, FeatureColumns::AllRemaining) {
            feature_idx.sort_unstable();
        }
    } else {
        feature_idx.retain(|i| !sens_idx.contains(i));
    }

    let mut rows: Vec<Vec<String>> = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| ingest(Some(r + 1), None, e.to_string()))?;
        let fields: Vec<String> = rec.iter().map(|f| f.trim().to_string()).collect();
        if let Some(c) = fields.iter().position(String::is_empty) {
            return Err(ingest(Some(r + 1), Some(&headers[c]), "missing value"));
        }
        rows.push(fields);
    }
    if rows.is_empty() {
        return Err(ingest(None, None, "no data rows"));
    }

    let labels: Vec<f64> = rows
        .iter()
        .map(|f| {
            if f[label_idx] == schema.positive_label_token {
                1.0
            } else {
                -1.0
            }
        })
        .collect();

    let sensitive = match schema.sensitive_kind {
        SensitiveKind::Real => {
            let c = sens_idx[0];
            SensitiveValues::Real(
                rows.iter()
                    .enumerate()
                    .map(|(r, f)| parse_number(&f[c], r, &headers[c]))
                    .collect::<Result<_>>()?,
            )
        }
        SensitiveKind::Categorical => {
            let mut codes: HashMap<String, u32> = HashMap::new();
            SensitiveValues::Categorical(
                rows.iter()
                    .map(|f| {
                        let key = sens_idx
                            .iter()
                            .map(|&c| f[c].as_str())
                            .collect::<Vec<_>>()
                            .join("|");
                        let next = codes.len() as u32;
                        *codes.entry(key).or_insert(next)
                    })
                    .collect(),
            )
        }
    };

    let m = rows.len();
    let mut features: Vec<Vec<f64>> = vec![Vec::new(); m];
    let mut names = Vec::new();
    for &c in &feature_idx {
        let name = &headers[c];
        let numeric = rows[0][c].parse::<f64>().is_ok();
        if numeric {
            for (r, f) in rows.iter().enumerate() {
                features[r].push(parse_number(&f[c], r, name)?);
            }
            names.push(name.clone());
        } else {
            let mut levels: Vec<&str> = Vec::new();
            let mut index: HashMap<&str, usize> = HashMap::new();
            let ids: Vec<usize> = rows
                .iter()
                .map(|f| {
                    *index.entry(f[c].as_str()).or_insert_with(|| {
                        levels.push(f[c].as_str());
                        levels.len() - 1
                    })
                })
                .collect();
            for (r, &id) in ids.iter().enumerate() {
                features[r].extend((0..levels.len()).map(|l| if l == id { 1.0 } else { 0.0 }));
            }
            names.extend(levels.iter().map(|l| format!("{name}={l}")));
        }
    }
    if names.is_empty() {
        return Err(Error::param("no feature columns selected"));
    }

    Dataset::new(features, labels, sensitive)?.with_feature_names(names)
}

fn parse_number(field: &str, row: usize, column: &str) -> Result<f64> {
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ingest(
            Some(row + 1),
            Some(column),
            format!("cannot parse '{field}' as a number"),
        )),
    }
}

/// Two-group synthetic benchmark with group-dependent difficulty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub m: usize,
    pub group_fractions: [f64; 2],
    /// `class_means[group][class]`, class 0 for label -1 and 1 for +1.
    pub class_means: [[[f64; 2]; 2]; 2],
    /// Label-flip probability per group.
    pub noise_rates: [f64; 2],
    pub seed: u64,
}

impl Default for SynthSpec {
    /// Group 0 is separated along the first axis at distance 4 with 5% flips;
    /// group 1 along the second axis at distance 1 with 25% flips.
    fn default() -> Self {
        Self {
            m: 600,
            group_fractions: [0.5, 0.5],
            class_means: [[[-2.0, 0.0], [2.0, 0.0]], [[0.0, -0.5], [0.0, 0.5]]],
            noise_rates: [0.05, 0.25],
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::param("m must be positive"));
        }
        let [a, b] = self.group_fractions;
        if !(a > 0.0 && a < 1.0 && b > 0.0 && b < 1.0 && (a + b - 1.0).abs() < 1e-12) {
            return Err(Error::param(
                "group fractions must lie in (0, 1) and sum to 1",
            ));
        }
        if self.noise_rates.iter().any(|&e| !(0.0..0.5).contains(&e)) {
            return Err(Error::param("noise rates must lie in [0, 0.5)"));
        }
        if self
            .class_means
            .iter()
            .flatten()
            .flatten()
            .any(|v| !v.is_finite())
        {
            return Err(Error::param("class means must be finite"));
        }
        Ok(())
    }
}

pub fn generate_synth(spec: &SynthSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut features = Vec::with_capacity(spec.m);
    let mut labels = Vec::with_capacity(spec.m);
    let mut groups = Vec::with_capacity(spec.m);
    for _ in 0..spec.m {
        let g = usize::from(rng.random::<f64>() >= spec.group_fractions[0]);
        let positive = rng.random_bool(0.5);
        let mean = spec.class_means[g][usize::from(positive)];
        let x: Vec<f64> = mean
            .iter()
            .map(|mu| mu + rng.sample::<f64, _>(StandardNormal))
            .collect();
        let flip = rng.random_bool(spec.noise_rates[g]);
        let y = if positive != flip { 1.0 } else { -1.0 };
        features.push(x);
        labels.push(y);
        groups.push(g as u32);
    }
    Dataset::new(features, labels, SensitiveValues::Categorical(groups))
}

#[derive(Debug, Clone)]
pub struct Split {
    pub train: Dataset,
    pub test: Dataset,
    /// False when some stratum had fewer than two rows and the split fell
    /// back to a plain shuffle.
    pub stratified: bool,
}

/// Stratified by (label, group) for categorical sensitive features and by
/// label for real ones.
pub fn split(dataset: &Dataset, train_fraction: f64, seed: u64) -> Result<Split> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::param(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let m = dataset.n_rows();
    if m < 2 {
        return Err(Error::input("need at least two rows to split"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let key = |i: usize| -> (bool, u32) {
        let g = match dataset.sensitive() {
            SensitiveValues::Categorical(c) => c[i],
            SensitiveValues::Real(_) => 0,
        };
        (dataset.labels()[i] > 0.0, g)
    };
    let mut strata: Vec<((bool, u32), Vec<usize>)> = Vec::new();
    for i in 0..m {
        let k = key(i);
        match strata.iter_mut().find(|(s, _)| *s == k) {
            Some((_, rows)) => rows.push(i),
            None => strata.push((k, vec![i])),
        }
    }
    let take = |n: usize| ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);

    let stratified = strata.iter().all(|(_, rows)| rows.len() >= 2);
    let (mut train_rows, mut test_rows) = (Vec::new(), Vec::new());
    if stratified {
        for (_, mut rows) in strata {
            rows.shuffle(&mut rng);
            let n = take(rows.len());
            train_rows.extend_from_slice(&rows[..n]);
            test_rows.extend_from_slice(&rows[n..]);
        }
    } else {
        let mut rows: Vec<usize> = (0..m).collect();
        rows.shuffle(&mut rng);
        let n = take(m);
        train_rows.extend_from_slice(&rows[..n]);
        test_rows.extend_from_slice(&rows[n..]);
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok(Split {
        train: dataset.select(&train_rows)?,
        test: dataset.select(&test_rows)?,
        stratified,
    })
}

/// Per-column mean and (population) standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Columns with no spread are passed through unchanged.
    pub passthrough: Vec<bool>,
}

impl Scaler {
    pub fn fit(dataset: &Dataset) -> Self {
        let m = dataset.n_rows() as f64;
        let d = dataset.n_features();
        let mut means = vec![0.0; d];
        for x in dataset.features() {
            for (acc, v) in means.iter_mut().zip(x) {
                *acc += v;
            }
        }
        means.iter_mut().for_each(|v| *v /= m);
        let mut vars = vec![0.0; d];
        for x in dataset.features() {
            for ((acc, v), mu) in vars.iter_mut().zip(x).zip(&means) {
                *acc += (v - mu).powi(2);
            }
        }
        let stds: Vec<f64> = vars.iter().map(|v| (v / m).sqrt()).collect();
        let passthrough = stds
            .iter()
            .zip(&means)
            .map(|(s, mu)| *s <= 1e-12 * 1f64.max(mu.abs()))
            .collect();
        Self {
            means,
            stds,
            passthrough,
        }
    }

    pub fn apply(&self, dataset: &Dataset) -> Result<Dataset> {
        if dataset.n_features() != self.means.len() {
            return Err(Error::param("scaler and dataset disagree on feature count"));
        }
        let features = dataset
            .features()
            .iter()
            .map(|x| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        if self.passthrough[j] {
                            *v
                        } else {
                            (v - self.means[j]) / self.stds[j]
                        }
                    })
                    .collect()
            })
            .collect();
        dataset.with_features(features)
    }
}

/// Fits on `train` only and applies to both.
pub fn standardize(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset, Scaler)> {
    let scaler = Scaler::fit(train);
    Ok((scaler.apply(train)?, scaler.apply(test)?, scaler))
}
