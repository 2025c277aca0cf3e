//! Post-hoc fairness and accuracy metrics. None of these enter training.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riskvar::DiscreteRandomVariable;
use crate::subgroup::{
    group_mean_losses, subgroup_risks, Dataset, GroupPartition, LinearModel, LossSpec,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub zero_one_risk: f64,
    /// Keyed by group key (sensitive code, or row index per instance).
    pub subgroup_zero_one: BTreeMap<u32, f64>,
    /// Only defined for exactly two groups.
    pub mean_difference: Option<f64>,
    pub dp_violation: f64,
    pub covariance: f64,
    pub mutual_information_nats: f64,
    /// Undefined when the labels hold a single class.
    pub pairwise_disagreement: Option<f64>,
    pub subgroup_loss_gap: f64,
}

fn check_len(a: usize, b: usize, what: &str) -> Result<()> {
    if a != b {
        return Err(Error::param(format!("{what}: lengths {a} and {b} differ")));
    }
    Ok(())
}

fn group_error_rates(predictions: &[f64], labels: &[f64], partition: &GroupPartition) -> Vec<f64> {
    let mut wrong = vec![0usize; partition.n_groups()];
    for ((p, y), &g) in predictions.iter().zip(labels).zip(&partition.group_ids) {
        if p != y {
            wrong[g] += 1;
        }
    }
    wrong
        .iter()
        .zip(&partition.group_sizes)
        .map(|(&w, &n)| w as f64 / n as f64)
        .collect()
}

/// `|err_0 - err_1|` of the subgroup 0-1 errors.
pub fn mean_difference_01(
    predictions: &[f64],
    labels: &[f64],
    partition: &GroupPartition,
) -> Result<f64> {
    check_len(predictions.len(), labels.len(), "predictions vs labels")?;
    check_len(
        predictions.len(),
        partition.group_ids.len(),
        "predictions vs partition",
    )?;
    if partition.n_groups() != 2 {
        return Err(Error::param(format!(
            "mean difference needs exactly 2 groups, got {}",
            partition.n_groups()
        )));
    }
    let err = group_error_rates(predictions, labels, partition);
    Ok((err[0] - err[1]).abs())
}

/// Largest gap in `P(A = a | S = s)` over prediction values `a` and group
/// pairs. Zero for a single group.
pub fn dp_violation(predictions: &[f64], partition: &GroupPartition) -> Result<f64> {
    check_len(
        predictions.len(),
        partition.group_ids.len(),
        "predictions vs partition",
    )?;
    let mut positive = vec![0usize; partition.n_groups()];
    for (p, &g) in predictions.iter().zip(&partition.group_ids) {
        if *p > 0.0 {
            positive[g] += 1;
        }
    }
    let mut worst = 0.0f64;
    for value_is_positive in [true, false] {
        let rates: Vec<f64> = positive
            .iter()
            .zip(&partition.group_sizes)
            .map(|(&k, &n)| {
                let r = k as f64 / n as f64;
                if value_is_positive {
                    r
                } else {
                    1.0 - r
                }
            })
            .collect();
        let hi = rates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = rates.iter().copied().fold(f64::INFINITY, f64::min);
        worst = worst.max(hi - lo);
    }
    Ok(worst)
}

/// Empirical `E[A S] - E[A] E[S]`.
pub fn covariance_metric(a: &[f64], s: &[f64]) -> Result<f64> {
    check_len(a.len(), s.len(), "covariance")?;
    if a.is_empty() {
        return Err(Error::param("covariance of empty vectors"));
    }
    let n = a.len() as f64;
    let mean_a = a.iter().sum::<f64>() / n;
    let mean_s = s.iter().sum::<f64>() / n;
    // centred form; algebraically equal to E[AS] - E[A]E[S]
    Ok(a.iter()
        .zip(s)
        .map(|(x, y)| (x - mean_a) * (y - mean_s))
        .sum::<f64>()
        / n)
}

/// Plug-in mutual information between binary predictions and group, in nats.
pub fn mutual_information_metric(predictions: &[f64], partition: &GroupPartition) -> Result<f64> {
    check_len(
        predictions.len(),
        partition.group_ids.len(),
        "predictions vs partition",
    )?;
    let m = predictions.len() as f64;
    let n = partition.n_groups();
    let mut joint = vec![[0usize; 2]; n];
    for (p, &g) in predictions.iter().zip(&partition.group_ids) {
        joint[g][usize::from(*p > 0.0)] += 1;
    }
    let marginal_a = [0, 1].map(|a| joint.iter().map(|row| row[a]).sum::<usize>() as f64 / m);
    let mut mi = 0.0;
    for (row, &size) in joint.iter().zip(&partition.group_sizes) {
        let p_s = size as f64 / m;
        for a in 0..2 {
            if row[a] == 0 {
                continue;
            }
            let p_as = row[a] as f64 / m;
            mi += p_as * (p_as / (p_s * marginal_a[a])).ln();
        }
    }
    Ok(mi.max(0.0))
}

/// One minus the ROC AUC: the fraction of (positive, negative) pairs where
/// the negative scores higher. Ties count one half.
pub fn pairwise_disagreement(scores: &[f64], labels: &[f64]) -> Result<f64> {
    check_len(scores.len(), labels.len(), "scores vs labels")?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let total_pos = labels.iter().filter(|&&y| y > 0.0).count() as f64;
    let total_neg = labels.len() as f64 - total_pos;
    if total_pos == 0.0 || total_neg == 0.0 {
        return Err(Error::UndefinedMetric(
            "pairwise disagreement needs both classes".into(),
        ));
    }
    // Scan ascending; a positive is misranked against every negative above it.
    let mut wrong = 0.0;
    let mut neg_below = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0.0, 0.0);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if labels[order[j]] > 0.0 {
                pos += 1.0;
            } else {
                neg += 1.0;
            }
            j += 1;
        }
        let neg_above = total_neg - neg_below - neg;
        wrong += pos * neg_above + 0.5 * pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok(wrong / (total_pos * total_neg))
}

/// Spread between the largest and smallest subgroup risk.
pub fn subgroup_loss_gap(risks: &DiscreteRandomVariable) -> f64 {
    risks.max() - risks.min()
}

/// All metrics for `model` on `dataset`; `loss` sets the subgroup loss gap.
pub fn evaluate(
    model: &LinearModel,
    dataset: &Dataset,
    partition: &GroupPartition,
    loss: LossSpec,
) -> Result<EvaluationReport> {
    let predictions = model.predict(dataset);
    let labels = dataset.labels();
    let zero_one = group_mean_losses(model, dataset, partition, LossSpec::ZeroOne)?;
    let overall = predictions
        .iter()
        .zip(labels)
        .filter(|(p, y)| p != y)
        .count() as f64
        / labels.len() as f64;
    let pairwise = match pairwise_disagreement(&model.scores(dataset), labels) {
        Ok(v) => Some(v),
        Err(Error::UndefinedMetric(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(EvaluationReport {
        zero_one_risk: overall,
        subgroup_zero_one: partition.keys.iter().copied().zip(zero_one).collect(),
        mean_difference: if partition.n_groups() == 2 {
            Some(mean_difference_01(&predictions, labels, partition)?)
        } else {
            None
        },
        dp_violation: dp_violation(&predictions, partition)?,
        covariance: covariance_metric(&predictions, &dataset.sensitive().as_reals())?,
        mutual_information_nats: mutual_information_metric(&predictions, partition)?,
        pairwise_disagreement: pairwise,
        subgroup_loss_gap: subgroup_loss_gap(&subgroup_risks(model, dataset, partition, loss)?),
    })
}
