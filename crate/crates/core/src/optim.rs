//! Subgradient training of linear models under subgroup risk aggregators.
//!
//! The CVaR objective is minimized jointly over the model and a threshold
//! `rho`:
//!
//! ```text
//! rho + 1/(1 - alpha) * sum_s nu(s) * [L_s(f) - rho]_+
//! ```
//!
//! For a fixed model the best `rho` is the alpha-quantile of the subgroup
//! risks, so each epoch sets `rho` exactly and then takes one subgradient
//! step in the model parameters. The other aggregators (mean, mean plus
//! standard deviation, maximum, top-k) share the same loop; they differ only
//! in the per-group coefficients used to combine the group gradients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::riskvar::{self, cvar_weights, lower_quantile, AggregatorSpec, DiscreteRandomVariable};
use crate::subgroup::{
    group_mean_losses, partition, Dataset, GroupPartition, LinearModel, LossSpec, PartitionMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepDecay {
    Constant,
    InvSqrt,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub aggregator: AggregatorSpec,
    pub loss: LossSpec,
    pub l2_reg: f64,
    pub epochs: usize,
    pub step_size: f64,
    pub step_decay: StepDecay,
    pub seed: u64,
    pub partition_mode: PartitionMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            aggregator: AggregatorSpec::Expectation,
            loss: LossSpec::SquaredHinge,
            l2_reg: 1e-4,
            epochs: 300,
            step_size: 0.5,
            step_decay: StepDecay::InvSqrt,
            seed: 0,
            partition_mode: PartitionMode::Categorical,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.aggregator.validate()?;
        if !self.loss.is_convex() {
            return Err(Error::param(format!(
                "{:?} loss cannot be trained",
                self.loss
            )));
        }
        if self.epochs == 0 {
            return Err(Error::param("epochs must be at least 1"));
        }
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::param("step size must be positive"));
        }
        if !(self.l2_reg >= 0.0 && self.l2_reg.is_finite()) {
            return Err(Error::param("l2 regularization must be >= 0"));
        }
        Ok(())
    }

    fn step(&self, epoch: usize) -> f64 {
        match self.step_decay {
            StepDecay::Constant => self.step_size,
            StepDecay::InvSqrt => self.step_size / ((epoch + 1) as f64).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub aggregator: AggregatorSpec,
    pub model: LinearModel,
    /// CVaR threshold at the returned model (CVaR and top-k only).
    pub rho: Option<f64>,
    pub objective_trace: Vec<f64>,
    pub best_epoch: usize,
    pub best_objective: f64,
    pub final_subgroup_risks: DiscreteRandomVariable,
    pub metrics: BTreeMap<String, f64>,
    /// False for the mean-plus-standard-deviation baseline, whose composition
    /// with convex losses is not convex in the model.
    pub convex_objective: bool,
}

/// Subgradient of the CVaR objective in the model parameters and `rho`.
#[derive(Debug, Clone, PartialEq)]
pub struct Subgradient {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub rho: f64,
}

fn check_open_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

fn hinge_sum(risks: &[f64], probs: &[f64], rho: f64) -> f64 {
    risks
        .iter()
        .zip(probs)
        .map(|(l, p)| p * (l - rho).max(0.0))
        .sum()
}

/// Empirical CVaR objective at `(model, rho)`, without regularization.
pub fn cvar_objective(
    model: &LinearModel,
    rho: f64,
    dataset: &Dataset,
    partition: &GroupPartition,
    loss: LossSpec,
    alpha: f64,
) -> Result<f64> {
    check_open_alpha(alpha)?;
    let risks = group_mean_losses(model, dataset, partition, loss)?;
    Ok(rho + hinge_sum(&risks, &partition.group_probs, rho) / (1.0 - alpha))
}

/// Gradient of `sum_s c_s * L_s(f)` in `(weights, intercept)`.
fn combined_gradient(
    model: &LinearModel,
    dataset: &Dataset,
    partition: &GroupPartition,
    loss: LossSpec,
    coeffs: &[f64],
) -> Result<(Vec<f64>, f64)> {
    let mut gw = vec![0.0; model.weights.len()];
    let mut gb = 0.0;
    for ((x, &y), &g) in dataset
        .features()
        .iter()
        .zip(dataset.labels())
        .zip(&partition.group_ids)
    {
        let c = coeffs[g];
        if c == 0.0 {
            continue;
        }
        let d = loss
            .derivative(y, model.score(x))
            .ok_or_else(|| Error::param(format!("{loss:?} loss has no subgradient")))?;
        let scale = c * d / partition.group_sizes[g] as f64;
        if scale == 0.0 {
            continue;
        }
        for (gj, xj) in gw.iter_mut().zip(x) {
            *gj += scale * xj;
        }
        gb += scale;
    }
    Ok((gw, gb))
}

/// Subgradient of the CVaR objective plus `l2_reg/2 * |w|^2` at an arbitrary
/// `(model, rho)`. Groups exactly at `rho` contribute nothing.
pub fn subgradient(
    model: &LinearModel,
    rho: f64,
    dataset: &Dataset,
    partition: &GroupPartition,
    loss: LossSpec,
    alpha: f64,
    l2_reg: f64,
) -> Result<Subgradient> {
    check_open_alpha(alpha)?;
    let risks = group_mean_losses(model, dataset, partition, loss)?;
    let scale = 1.0 / (1.0 - alpha);
    let coeffs: Vec<f64> = risks
        .iter()
        .zip(&partition.group_probs)
        .map(|(&l, &p)| if l > rho { p * scale } else { 0.0 })
        .collect();
    let active: f64 = risks
        .iter()
        .zip(&partition.group_probs)
        .filter(|(&l, _)| l > rho)
        .map(|(_, &p)| p)
        .sum();
    let (mut gw, gb) = combined_gradient(model, dataset, partition, loss, &coeffs)?;
    for (g, w) in gw.iter_mut().zip(&model.weights) {
        *g += l2_reg * w;
    }
    Ok(Subgradient {
        weights: gw,
        intercept: gb,
        rho: 1.0 - scale * active,
    })
}

fn l2_penalty(model: &LinearModel, l2_reg: f64) -> f64 {
    0.5 * l2_reg * model.weights.iter().map(|w| w * w).sum::<f64>()
}

/// Aggregated objective at the current risks, the per-group gradient
/// coefficients, and the threshold where one applies.
struct Evaluation {
    objective: f64,
    coeffs: Vec<f64>,
    rho: Option<f64>,
}

fn evaluate_tail(risks: &[f64], probs: &[f64], alpha: f64) -> Result<Evaluation> {
    let z = DiscreteRandomVariable::with_probs(risks, probs)?;
    let rho = lower_quantile(&z.support(), alpha);
    Ok(Evaluation {
        objective: rho + hinge_sum(risks, probs, rho) / (1.0 - alpha),
        // The envelope weights pick a subgradient of [L_s - rho]_+ at the
        // quantile group, so a single group or a full tail reduces to the mean.
        coeffs: cvar_weights(risks, probs, alpha),
        rho: Some(rho),
    })
}

fn evaluate(spec: &AggregatorSpec, risks: &[f64], probs: &[f64], m: usize) -> Result<Evaluation> {
    match *spec {
        AggregatorSpec::Expectation => Ok(Evaluation {
            objective: risks.iter().zip(probs).map(|(l, p)| l * p).sum(),
            coeffs: probs.to_vec(),
            rho: None,
        }),
        AggregatorSpec::Cvar { alpha } => evaluate_tail(risks, probs, alpha),
        AggregatorSpec::TopK { k } => {
            if k > m {
                return Err(Error::param(format!("k = {k} exceeds sample count {m}")));
            }
            evaluate_tail(risks, probs, top_k_alpha(k, m))
        }
        AggregatorSpec::SdPenalty { lambda } => {
            let mean: f64 = risks.iter().zip(probs).map(|(l, p)| l * p).sum();
            let sd = risks
                .iter()
                .zip(probs)
                .map(|(l, p)| p * (l - mean).powi(2))
                .sum::<f64>()
                .sqrt();
            let coeffs = risks
                .iter()
                .zip(probs)
                .map(|(l, p)| {
                    if sd > 0.0 {
                        p + lambda * p * (l - mean) / sd
                    } else {
                        *p
                    }
                })
                .collect();
            Ok(Evaluation {
                objective: mean + lambda * sd,
                coeffs,
                rho: None,
            })
        }
        AggregatorSpec::Max => {
            let top = risks
                .iter()
                .zip(probs)
                .filter(|(_, &p)| p > 0.0)
                .map(|(&l, _)| l)
                .fold(f64::NEG_INFINITY, f64::max);
            let ties: Vec<bool> = risks
                .iter()
                .zip(probs)
                .map(|(&l, &p)| p > 0.0 && top - l <= 1e-12)
                .collect();
            let count = ties.iter().filter(|&&t| t).count() as f64;
            Ok(Evaluation {
                objective: top,
                coeffs: ties
                    .iter()
                    .map(|&t| if t { 1.0 / count } else { 0.0 })
                    .collect(),
                rho: None,
            })
        }
    }
}

/// CVaR level whose upper tail holds exactly `k` of `m` equally likely atoms.
pub fn top_k_alpha(k: usize, m: usize) -> f64 {
    1.0 - k as f64 / m as f64
}

/// Subgradient descent from the zero model. Returns the best iterate.
pub fn train(config: &TrainConfig, dataset: &Dataset) -> Result<TrainReport> {
    config.validate()?;
    let mode = match config.aggregator {
        AggregatorSpec::TopK { .. } => PartitionMode::PerInstance,
        _ => config.partition_mode,
    };
    let part = partition(dataset, mode)?;
    let m = dataset.n_rows();

    let mut model = LinearModel::zeros(dataset.n_features());
    let mut trace = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, LinearModel, Option<f64>)> = None;

    for epoch in 0..config.epochs {
        let risks = group_mean_losses(&model, dataset, &part, config.loss)?;
        let eval = evaluate(&config.aggregator, &risks, &part.group_probs, m)?;
        let objective = eval.objective + l2_penalty(&model, config.l2_reg);
        if !objective.is_finite() {
            return Err(Error::Numerical {
                epoch,
                message: format!("objective became {objective}"),
                trace,
            });
        }
        trace.push(objective);
        if best.as_ref().is_none_or(|b| objective < b.0) {
            best = Some((objective, epoch, model.clone(), eval.rho));
        }

        let (mut gw, gb) = combined_gradient(&model, dataset, &part, config.loss, &eval.coeffs)?;
        for (g, w) in gw.iter_mut().zip(&model.weights) {
            *g += config.l2_reg * w;
        }
        let step = config.step(epoch);
        for (w, g) in model.weights.iter_mut().zip(&gw) {
            *w -= step * g;
        }
        model.intercept -= step * gb;
    }

    let (best_objective, best_epoch, model, rho) = best.expect("at least one epoch");
    let risks = group_mean_losses(&model, dataset, &part, config.loss)?;
    let final_subgroup_risks = DiscreteRandomVariable::with_probs(&risks, &part.group_probs)?;
    let zero_one = {
        let preds = model.predict(dataset);
        preds
            .iter()
            .zip(dataset.labels())
            .filter(|(p, y)| p != y)
            .count() as f64
            / m as f64
    };
    let metrics = BTreeMap::from([
        ("objective".to_string(), best_objective),
        (
            "weighted_risk".to_string(),
            riskvar::expectation(&final_subgroup_risks),
        ),
        ("max_subgroup_risk".to_string(), final_subgroup_risks.max()),
        (
            "subgroup_gap".to_string(),
            final_subgroup_risks.max() - final_subgroup_risks.min(),
        ),
        ("zero_one_risk".to_string(), zero_one),
    ]);

    Ok(TrainReport {
        aggregator: config.aggregator,
        model,
        rho,
        objective_trace: trace,
        best_epoch,
        best_objective,
        final_subgroup_risks,
        metrics,
        convex_objective: !matches!(config.aggregator, AggregatorSpec::SdPenalty { .. }),
    })
}

/// One CVaR run per alpha, all from the same template. Runs execute on
/// separate threads; the result is sorted by alpha.
pub fn alpha_sweep(
    template: &TrainConfig,
    dataset: &Dataset,
    alphas: &[f64],
) -> Result<Vec<TrainReport>> {
    for &a in alphas {
        check_open_alpha(a)?;
    }
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    std::thread::scope(|scope| {
        let handles: Vec<_> = sorted
            .iter()
            .map(|&alpha| {
                let config = TrainConfig {
                    aggregator: AggregatorSpec::Cvar { alpha },
                    ..template.clone()
                };
                scope.spawn(move || train(&config, dataset))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("training thread panicked"))
            .collect()
    })
}
