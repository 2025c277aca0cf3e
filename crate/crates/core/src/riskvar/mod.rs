//! Finite discrete random variables and the risk and deviation measures
//! defined on them.
//!
//! A [`DiscreteRandomVariable`] is a finite list of `(value, probability)`
//! atoms. It is used for the subgroup-risk variable (one atom per sensitive
//! group), for per-instance loss variables, and for margins.
//!
//! CVaR is evaluated through its variational form
//!
//! ```text
//! CVaR_a(Z) = min_rho { rho + E[Z - rho]_+ / (1 - a) }
//! ```
//!
//! which for a discrete variable is minimized at an atom value. Every distinct
//! atom value is tried and the smallest objective wins, so the result is exact
//! up to floating point rounding.

pub mod axioms;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use axioms::{check_axiom, Counterexample, FairnessAxiom, FalsificationReport};

/// Tolerance on the total probability mass. Widens slightly with the atom
/// count to absorb summation rounding on large per-instance variables.
fn mass_tolerance(n: usize) -> f64 {
    1e-12_f64.max(4.0 * n as f64 * f64::EPSILON)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub value: f64,
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Atom>", into = "Vec<Atom>")]
pub struct DiscreteRandomVariable {
    atoms: Vec<Atom>,
}

impl TryFrom<Vec<Atom>> for DiscreteRandomVariable {
    type Error = Error;

    fn try_from(atoms: Vec<Atom>) -> Result<Self> {
        Self::from_atoms(atoms)
    }
}

impl From<DiscreteRandomVariable> for Vec<Atom> {
    fn from(z: DiscreteRandomVariable) -> Self {
        z.atoms
    }
}

impl DiscreteRandomVariable {
    /// Builds a variable from `(value, prob)` pairs.
    pub fn new(atoms: impl IntoIterator<Item = (f64, f64)>) -> Result<Self> {
        Self::from_atoms(
            atoms
                .into_iter()
                .map(|(value, prob)| Atom { value, prob })
                .collect(),
        )
    }

    pub fn from_atoms(atoms: Vec<Atom>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::input("random variable needs at least one atom"));
        }
        let mut total = 0.0;
        for (i, a) in atoms.iter().enumerate() {
            if !a.value.is_finite() {
                return Err(Error::input(format!("atom {i} has non-finite value")));
            }
            if !a.prob.is_finite() || a.prob < 0.0 {
                return Err(Error::input(format!(
                    "atom {i} has invalid probability {}",
                    a.prob
                )));
            }
            total += a.prob;
        }
        if (total - 1.0).abs() > mass_tolerance(atoms.len()) {
            return Err(Error::input(format!(
                "probabilities sum to {total}, expected 1"
            )));
        }
        Ok(Self { atoms })
    }

    /// Pairs `values[i]` with `probs[i]`.
    pub fn with_probs(values: &[f64], probs: &[f64]) -> Result<Self> {
        if values.len() != probs.len() {
            return Err(Error::param(format!(
                "{} values but {} probabilities",
                values.len(),
                probs.len()
            )));
        }
        Self::new(values.iter().copied().zip(probs.iter().copied()))
    }

    /// Equal probability `1/n` on each value.
    pub fn uniform(values: &[f64]) -> Result<Self> {
        let p = 1.0 / values.len().max(1) as f64;
        Self::new(values.iter().map(|&v| (v, p)))
    }

    pub fn constant(value: f64) -> Result<Self> {
        Self::new([(value, 1.0)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.value).collect()
    }

    pub fn probs(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.prob).collect()
    }

    /// Applies `f` to every value, keeping probabilities.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_atoms(
            self.atoms
                .iter()
                .map(|a| Atom {
                    value: f(a.value),
                    prob: a.prob,
                })
                .collect(),
        )
    }

    /// Positive-probability atoms sorted by value with equal values merged.
    pub fn support(&self) -> Vec<Atom> {
        let mut live: Vec<Atom> = self
            .atoms
            .iter()
            .copied()
            .filter(|a| a.prob > 0.0)
            .collect();
        live.sort_by(|a, b| a.value.total_cmp(&b.value));
        let mut merged: Vec<Atom> = Vec::with_capacity(live.len());
        for a in live {
            match merged.last_mut() {
                Some(last) if last.value == a.value => last.prob += a.prob,
                _ => merged.push(a),
            }
        }
        merged
    }

    pub fn min(&self) -> f64 {
        self.live_values().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.live_values().fold(f64::NEG_INFINITY, f64::max)
    }

    /// True when all positive-probability atoms share one value.
    pub fn is_constant(&self) -> bool {
        self.min() == self.max()
    }

    fn live_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.atoms.iter().filter(|a| a.prob > 0.0).map(|a| a.value)
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(Error::param(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )))
    }
}

pub fn expectation(z: &DiscreteRandomVariable) -> f64 {
    z.atoms.iter().map(|a| a.value * a.prob).sum()
}

/// Lower quantile `inf { z : F(z) >= alpha }`.
pub fn quantile(z: &DiscreteRandomVariable, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(lower_quantile(&z.support(), alpha))
}

/// Lower quantile over a sorted, merged support. `alpha <= 0` yields the
/// smallest value. A 1e-12 slack on the CDF comparison keeps accumulated
/// rounding from skipping past an atom whose CDF is exactly `alpha`.
pub(crate) fn lower_quantile(support: &[Atom], alpha: f64) -> f64 {
    let mut cdf = 0.0;
    for a in support {
        cdf += a.prob;
        if cdf >= alpha - 1e-12 {
            return a.value;
        }
    }
    support.last().map(|a| a.value).unwrap_or(f64::NAN)
}

/// Variational objective `rho + E[Z - rho]_+ / (1 - alpha)`.
pub fn cvar_variational(z: &DiscreteRandomVariable, alpha: f64, rho: f64) -> f64 {
    let excess: f64 = z
        .atoms
        .iter()
        .map(|a| a.prob * (a.value - rho).max(0.0))
        .sum();
    rho + excess / (1.0 - alpha)
}

pub fn cvar(z: &DiscreteRandomVariable, alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(cvar_unchecked(z, alpha))
}

/// CVaR for `alpha` in `[0, 1)`. At `alpha = 0` this is the mean.
pub(crate) fn cvar_unchecked(z: &DiscreteRandomVariable, alpha: f64) -> f64 {
    let support = z.support();
    let scale = 1.0 / (1.0 - alpha);
    // Walk candidates from the top so the tail sums accumulate in one pass.
    let mut tail_mass = 0.0;
    let mut tail_moment = 0.0;
    let mut best = f64::INFINITY;
    for a in support.iter().rev() {
        let excess = (tail_moment - a.value * tail_mass).max(0.0);
        let objective = a.value + scale * excess;
        if objective < best {
            best = objective;
        }
        tail_mass += a.prob;
        tail_moment += a.prob * a.value;
    }
    best
}

/// `CVaR_a(Z) - E(Z)`.
pub fn cvar_deviation(z: &DiscreteRandomVariable, alpha: f64) -> Result<f64> {
    Ok(cvar(z, alpha)? - expectation(z))
}

pub fn sd_deviation(z: &DiscreteRandomVariable) -> f64 {
    let mean = expectation(z);
    z.atoms
        .iter()
        .map(|a| a.prob * (a.value - mean).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Risk-envelope weights of CVaR: a probability vector `q` over the atoms
/// with `CVaR_a(Z) = sum_i q_i z_i`. Atoms above the quantile get
/// `p_i / (1 - a)`, the quantile level takes the leftover tail mass, atoms
/// below get 0. Tied values share their block's weight pro rata.
pub fn cvar_weights(values: &[f64], probs: &[f64], alpha: f64) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut weights = vec![0.0; values.len()];
    let mut remaining = 1.0 - alpha;
    let scale = 1.0 / (1.0 - alpha);
    let mut start = 0;
    while start < order.len() && remaining > 0.0 {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        let block = &order[start..end];
        let block_mass: f64 = block.iter().map(|&i| probs[i]).sum();
        if block_mass > 0.0 {
            let taken = block_mass.min(remaining);
            let share = taken / block_mass;
            for &i in block {
                weights[i] = probs[i] * share * scale;
            }
            remaining -= taken;
        }
        start = end;
    }
    weights
}

/// Subgroup risk aggregator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AggregatorSpec {
    Expectation,
    Cvar { alpha: f64 },
    SdPenalty { lambda: f64 },
    TopK { k: usize },
    Max,
}

impl AggregatorSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AggregatorSpec::Cvar { alpha } => check_alpha(alpha),
            AggregatorSpec::SdPenalty { lambda } if !(lambda >= 0.0 && lambda.is_finite()) => {
                Err(Error::param(format!("lambda must be >= 0, got {lambda}")))
            }
            AggregatorSpec::TopK { k: 0 } => Err(Error::param("k must be at least 1")),
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            AggregatorSpec::Expectation => "expectation".into(),
            AggregatorSpec::Cvar { alpha } => format!("cvar:{alpha}"),
            AggregatorSpec::SdPenalty { lambda } => format!("sd:{lambda}"),
            AggregatorSpec::TopK { k } => format!("topk:{k}"),
            AggregatorSpec::Max => "max".into(),
        }
    }
}

pub fn aggregate(z: &DiscreteRandomVariable, spec: &AggregatorSpec) -> Result<f64> {
    spec.validate()?;
    match *spec {
        AggregatorSpec::Expectation => Ok(expectation(z)),
        AggregatorSpec::Cvar { alpha } => cvar(z, alpha),
        AggregatorSpec::SdPenalty { lambda } => Ok(expectation(z) + lambda * sd_deviation(z)),
        AggregatorSpec::Max => Ok(z.max()),
        AggregatorSpec::TopK { k } => top_k_mean(z, k),
    }
}

/// Deviation paired with an aggregator: `R(Z) - E(Z)`.
pub fn deviation(z: &DiscreteRandomVariable, spec: &AggregatorSpec) -> Result<f64> {
    Ok(aggregate(z, spec)? - expectation(z))
}

fn top_k_mean(z: &DiscreteRandomVariable, k: usize) -> Result<f64> {
    let n = z.len();
    if k > n {
        return Err(Error::param(format!("k = {k} exceeds atom count {n}")));
    }
    let p = 1.0 / n as f64;
    if z.atoms.iter().any(|a| (a.prob - p).abs() > 1e-12) {
        return Err(Error::param("top-k needs equal-probability atoms"));
    }
    let mut values = z.values();
    values.sort_by(|a, b| b.total_cmp(a));
    Ok(values[..k].iter().sum::<f64>() / k as f64)
}
