//! Inequality measures over non-negative income vectors and their
//! correspondence with deviation and risk measures.
//!
//! An income vector `x` of length `n` is read as a random variable with
//! probability `1/n` on each entry. A deviation measure `D` induces the
//! inequality measure `I_D(x) = D(x) / E(x)` (zero when `E(x) = 0`), and an
//! inequality measure `I` induces `D_I(x) = E(x) I(x)` and
//! `R_I(x) = E(x) + D_I(x)`. The standard deviation induces the coefficient
//! of variation.
//!
//! Also here: Lorenz curves, majorization, and sampling falsifiers for the
//! inequality axioms I1-I7 and I11.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::riskvar::{cvar_deviation, expectation, sd_deviation, DiscreteRandomVariable};

const EQ_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncomeVector(Vec<f64>);

impl IncomeVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::input("income vector must be non-empty"));
        }
        if let Some(v) = entries.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::input(format!(
                "income entries must be finite and >= 0, got {v}"
            )));
        }
        Ok(Self(entries))
    }

    pub fn entries(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.0.iter().sum::<f64>() / self.0.len() as f64
    }

    pub fn as_random_variable(&self) -> DiscreteRandomVariable {
        DiscreteRandomVariable::uniform(&self.0).expect("validated entries")
    }
}

/// A deviation measure over uniform-probability variables.
#[derive(Clone)]
pub enum Deviation {
    StandardDeviation,
    CvarDeviation {
        alpha: f64,
    },
    Custom {
        name: String,
        eval: Arc<dyn Fn(&DiscreteRandomVariable) -> f64 + Send + Sync>,
    },
}

impl fmt::Debug for Deviation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl Deviation {
    pub fn custom(
        name: impl Into<String>,
        eval: impl Fn(&DiscreteRandomVariable) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Deviation::Custom {
            name: name.into(),
            eval: Arc::new(eval),
        }
    }

    pub fn name(&self) -> String {
        match self {
            Deviation::StandardDeviation => "sd".into(),
            Deviation::CvarDeviation { alpha } => format!("cvar_deviation:{alpha}"),
            Deviation::Custom { name, .. } => name.clone(),
        }
    }

    pub fn eval(&self, z: &DiscreteRandomVariable) -> Result<f64> {
        match self {
            Deviation::StandardDeviation => Ok(sd_deviation(z)),
            Deviation::CvarDeviation { alpha } => cvar_deviation(z, *alpha),
            Deviation::Custom { eval, .. } => Ok(eval(z)),
        }
    }
}

/// Named inequality measures plus a wrapper around any deviation measure.
#[derive(Clone, Debug)]
pub enum InequalityMeasure {
    CoefficientOfVariation,
    /// `I_D` for the CVaR deviation at level `alpha`.
    CvarInduced {
        alpha: f64,
    },
    /// `(max - min) / mean`.
    SpreadOverMean,
    Induced(Deviation),
}

impl InequalityMeasure {
    pub fn name(&self) -> String {
        match self {
            InequalityMeasure::CoefficientOfVariation => "coefficient_of_variation".into(),
            InequalityMeasure::CvarInduced { alpha } => format!("cvar_induced:{alpha}"),
            InequalityMeasure::SpreadOverMean => "spread_over_mean".into(),
            InequalityMeasure::Induced(d) => format!("induced:{}", d.name()),
        }
    }

    pub fn eval(&self, x: &IncomeVector) -> Result<f64> {
        match self {
            InequalityMeasure::CoefficientOfVariation => {
                inequality_from_deviation(x, &Deviation::StandardDeviation)
            }
            InequalityMeasure::CvarInduced { alpha } => {
                inequality_from_deviation(x, &Deviation::CvarDeviation { alpha: *alpha })
            }
            InequalityMeasure::SpreadOverMean => {
                let mean = x.mean();
                if mean == 0.0 {
                    return Ok(0.0);
                }
                let hi = x.0.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let lo = x.0.iter().copied().fold(f64::INFINITY, f64::min);
                Ok((hi - lo) / mean)
            }
            InequalityMeasure::Induced(d) => inequality_from_deviation(x, d),
        }
    }

    /// `D_I` as a [`Deviation`] over uniform variables.
    pub fn induced_deviation(&self) -> Deviation {
        let measure = self.clone();
        Deviation::custom(format!("D[{}]", self.name()), move |z| {
            let x = IncomeVector::new(z.values()).expect("non-negative income values");
            deviation_from_inequality(&x, &measure).unwrap_or(f64::NAN)
        })
    }
}

/// `I_D(x) = D(x) / E(x)`, or 0 when the mean is 0.
pub fn inequality_from_deviation(x: &IncomeVector, deviation: &Deviation) -> Result<f64> {
    let z = x.as_random_variable();
    let mean = expectation(&z);
    if mean == 0.0 {
        return Ok(0.0);
    }
    Ok(deviation.eval(&z)? / mean)
}

/// `D_I(x) = E(x) I(x)`.
pub fn deviation_from_inequality(x: &IncomeVector, measure: &InequalityMeasure) -> Result<f64> {
    Ok(expectation(&x.as_random_variable()) * measure.eval(x)?)
}

/// `R_I(x) = E(x) + D_I(x)`.
pub fn risk_from_inequality(x: &IncomeVector, measure: &InequalityMeasure) -> Result<f64> {
    Ok(expectation(&x.as_random_variable()) + deviation_from_inequality(x, measure)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LorenzCurve {
    pub knots: Vec<(f64, f64)>,
}

impl LorenzCurve {
    /// Piecewise-linear value at `p` in `[0, 1]`.
    pub fn eval(&self, p: f64) -> f64 {
        let p = p.clamp(0.0, 1.0);
        let i = self.knots.partition_point(|&(q, _)| q < p);
        if i == 0 {
            return self.knots[0].1;
        }
        if i == self.knots.len() {
            return self.knots[i - 1].1;
        }
        let (p0, l0) = self.knots[i - 1];
        let (p1, l1) = self.knots[i];
        if p1 == p0 {
            return l1;
        }
        l0 + (l1 - l0) * (p - p0) / (p1 - p0)
    }
}

/// Knots at `k/n` holding the share of the `k` smallest entries.
pub fn lorenz_curve(x: &IncomeVector) -> Result<LorenzCurve> {
    let total: f64 = x.0.iter().sum();
    if total <= 0.0 {
        return Err(Error::UndefinedMetric(
            "Lorenz curve of an all-zero vector".into(),
        ));
    }
    let mut sorted = x.0.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut knots = Vec::with_capacity(n + 1);
    knots.push((0.0, 0.0));
    let mut cum = 0.0;
    for (k, v) in sorted.iter().enumerate() {
        cum += v;
        let share = if k + 1 == n { 1.0 } else { cum / total };
        knots.push(((k + 1) as f64 / n as f64, share));
    }
    Ok(LorenzCurve { knots })
}

fn descending(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// True when `x` is majorized by `y`: equal totals and every top-k partial
/// sum of `x` at most that of `y` (tolerance 1e-12, scaled by the total).
pub fn majorized_by(x: &IncomeVector, y: &IncomeVector) -> Result<bool> {
    if x.len() != y.len() {
        return Err(Error::param(format!(
            "majorization needs equal lengths, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let (xs, ys) = (descending(&x.0), descending(&y.0));
    let tol = 1e-12 * 1f64.max(ys.iter().sum::<f64>());
    let (mut sx, mut sy) = (0.0, 0.0);
    for (a, b) in xs.iter().zip(&ys) {
        sx += a;
        sy += b;
        if sx > sy + tol {
            return Ok(false);
        }
    }
    Ok((sx - sy).abs() <= tol)
}

/// True when the Lorenz curve of `x` lies on or above that of `y` at every
/// knot of either curve.
pub fn lorenz_dominates(x: &IncomeVector, y: &IncomeVector) -> Result<bool> {
    let (lx, ly) = (lorenz_curve(x)?, lorenz_curve(y)?);
    let ok = lx
        .knots
        .iter()
        .chain(&ly.knots)
        .all(|&(p, _)| lx.eval(p) >= ly.eval(p) - 1e-12);
    Ok(ok)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum InequalityAxiom {
    I1,
    I2,
    I3,
    I4,
    I5,
    I6,
    I7,
    I8,
    I9,
    I10,
    I11,
}

impl InequalityAxiom {
    pub const ALL: [InequalityAxiom; 11] = [
        InequalityAxiom::I1,
        InequalityAxiom::I2,
        InequalityAxiom::I3,
        InequalityAxiom::I4,
        InequalityAxiom::I5,
        InequalityAxiom::I6,
        InequalityAxiom::I7,
        InequalityAxiom::I8,
        InequalityAxiom::I9,
        InequalityAxiom::I10,
        InequalityAxiom::I11,
    ];

    /// The axioms that have a sampling falsifier.
    pub const CHECKABLE: [InequalityAxiom; 8] = [
        InequalityAxiom::I1,
        InequalityAxiom::I2,
        InequalityAxiom::I3,
        InequalityAxiom::I4,
        InequalityAxiom::I5,
        InequalityAxiom::I6,
        InequalityAxiom::I7,
        InequalityAxiom::I11,
    ];
}

impl fmt::Display for InequalityAxiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for InequalityAxiom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        InequalityAxiom::ALL
            .into_iter()
            .find(|a| a.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::param(format!("unknown inequality axiom '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IncomeCounterexample {
    pub x: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub y: Option<Vec<f64>>,
    pub params: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub axiom: String,
    pub trials: usize,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<IncomeCounterexample>,
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EQ_TOL * 1f64.max(a.abs()).max(b.abs())
}

fn income(v: Vec<f64>) -> Result<IncomeVector> {
    IncomeVector::new(v)
}

struct IncomeSampler {
    rng: ChaCha8Rng,
}

impl IncomeSampler {
    fn vector(&mut self) -> Vec<f64> {
        let n = self.rng.random_range(2..=8);
        loop {
            let v: Vec<f64> = match self.rng.random_range(0..3) {
                0 => (0..n).map(|_| self.rng.random_range(0.0..10.0)).collect(),
                1 => (0..n)
                    .map(|_| self.rng.random_range(0u32..=10) as f64)
                    .collect(),
                _ => (0..n)
                    .map(|_| {
                        if self.rng.random_bool(0.3) {
                            0.0
                        } else {
                            self.rng.random_range(0.0..100.0)
                        }
                    })
                    .collect(),
            };
            if v.iter().any(|&a| a > 0.0) {
                return v;
            }
        }
    }

    fn non_constant(&mut self) -> Vec<f64> {
        loop {
            let v = self.vector();
            if v.iter().any(|&a| a != v[0]) {
                return v;
            }
        }
    }

    /// Mean-preserving transfers from richer to poorer entries, never
    /// crossing, so the result is majorized by `y`.
    fn transfers(&mut self, y: &[f64]) -> Vec<f64> {
        let mut x = y.to_vec();
        let count = self.rng.random_range(1..=3);
        for _ in 0..count {
            let i = self.rng.random_range(0..x.len());
            let j = self.rng.random_range(0..x.len());
            let (rich, poor) = if x[i] >= x[j] { (i, j) } else { (j, i) };
            let gap = x[rich] - x[poor];
            if gap <= 0.0 {
                continue;
            }
            let delta = gap * self.rng.random_range(0.01..0.49);
            x[rich] -= delta;
            x[poor] += delta;
        }
        x
    }
}

/// Attempts to falsify `axiom` for `measure`. I8-I10 are structural and have
/// no falsifier.
pub fn check_inequality_axiom(
    measure: &InequalityMeasure,
    axiom: InequalityAxiom,
    trials: usize,
    seed: u64,
) -> Result<InequalityReport> {
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    use InequalityAxiom::*;
    if matches!(axiom, I8 | I9 | I10) {
        return Err(Error::UnsupportedAxiom(format!(
            "{axiom} quantifies over partitions and aggregation maps; no falsifier"
        )));
    }
    if axiom == I7 {
        // Lorenz compatibility holds iff I1, I2, I3 and I4 all hold.
        for (k, part) in [I1, I2, I3, I4].into_iter().enumerate() {
            let rep = check_inequality_axiom(measure, part, trials, seed.wrapping_add(k as u64))?;
            if !rep.passed {
                return Ok(InequalityReport {
                    axiom: I7.to_string(),
                    trials,
                    passed: false,
                    counterexample: rep.counterexample.map(|mut c| {
                        c.detail = format!("via {part}: {}", c.detail);
                        c
                    }),
                });
            }
        }
        return Ok(InequalityReport {
            axiom: I7.to_string(),
            trials,
            passed: true,
            counterexample: None,
        });
    }
    if axiom == I3 {
        return check_schur_convexity(measure, trials, seed, true);
    }

    let mut s = IncomeSampler {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    for _ in 0..trials {
        let found = match axiom {
            I1 => trial_symmetry(&mut s, measure)?,
            I2 => trial_scale(&mut s, measure)?,
            I4 => trial_population(&mut s, measure)?,
            I5 => trial_normalization(&mut s, measure)?,
            I6 => trial_constant_addition(&mut s, measure)?,
            I11 => trial_constant_sum_convexity(&mut s, measure)?,
            _ => unreachable!("handled above"),
        };
        if let Some(cx) = found {
            return Ok(InequalityReport {
                axiom: axiom.to_string(),
                trials,
                passed: false,
                counterexample: Some(cx),
            });
        }
    }
    Ok(InequalityReport {
        axiom: axiom.to_string(),
        trials,
        passed: true,
        counterexample: None,
    })
}

/// Schur-convexity on sampled majorization pairs `x ≺ y`. With `strict`,
/// pairs where `x` is not a permutation of `y` must satisfy `I(x) < I(y)`;
/// otherwise `I(x) <= I(y)` up to 1e-9.
pub fn check_schur_convexity(
    measure: &InequalityMeasure,
    trials: usize,
    seed: u64,
    strict: bool,
) -> Result<InequalityReport> {
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let mut s = IncomeSampler {
        rng: ChaCha8Rng::seed_from_u64(seed),
    };
    let label = if strict { "I3" } else { "schur_convexity" };
    for _ in 0..trials {
        let y = s.non_constant();
        let x = s.transfers(&y);
        let (xv, yv) = (income(x.clone())?, income(y.clone())?);
        let permutation = descending(&x) == descending(&y);
        let (ix, iy) = (measure.eval(&xv)?, measure.eval(&yv)?);
        let violated = if strict {
            !permutation && ix >= iy
        } else {
            ix > iy + EQ_TOL * 1f64.max(iy.abs())
        };
        if violated {
            return Ok(InequalityReport {
                axiom: label.into(),
                trials,
                passed: false,
                counterexample: Some(IncomeCounterexample {
                    x,
                    y: Some(y),
                    params: BTreeMap::new(),
                    lhs: ix,
                    rhs: iy,
                    detail: if strict {
                        "x majorized by y (not a permutation) but I(x) >= I(y)".into()
                    } else {
                        "x majorized by y but I(x) > I(y)".into()
                    },
                }),
            });
        }
    }
    Ok(InequalityReport {
        axiom: label.into(),
        trials,
        passed: true,
        counterexample: None,
    })
}

type Trial = Result<Option<IncomeCounterexample>>;

fn cx(
    x: Vec<f64>,
    y: Option<Vec<f64>>,
    params: &[(&str, f64)],
    lhs: f64,
    rhs: f64,
    detail: &str,
) -> IncomeCounterexample {
    IncomeCounterexample {
        x,
        y,
        params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        lhs,
        rhs,
        detail: detail.into(),
    }
}

fn trial_symmetry(s: &mut IncomeSampler, m: &InequalityMeasure) -> Trial {
    let x = s.vector();
    let mut y = x.clone();
    y.shuffle(&mut s.rng);
    let (a, b) = (m.eval(&income(x.clone())?)?, m.eval(&income(y.clone())?)?);
    Ok((!approx_eq(a, b)).then(|| cx(x, Some(y), &[], a, b, "permutation changes I")))
}

fn trial_scale(s: &mut IncomeSampler, m: &InequalityMeasure) -> Trial {
    let x = s.vector();
    let lambda = s.rng.random_range(0.01..100.0);
    let y: Vec<f64> = x.iter().map(|v| lambda * v).collect();
    let (a, b) = (m.eval(&income(x.clone())?)?, m.eval(&income(y)?)?);
    Ok((!approx_eq(a, b)).then(|| cx(x, None, &[("lambda", lambda)], b, a, "I(λx) != I(x)")))
}

fn trial_population(s: &mut IncomeSampler, m: &InequalityMeasure) -> Trial {
    let x = s.vector();
    let r = [2usize, 3, 5][s.rng.random_range(0..3)];
    let tiled: Vec<f64> = x.iter().copied().cycle().take(x.len() * r).collect();
    let (a, b) = (m.eval(&income(x.clone())?)?, m.eval(&income(tiled)?)?);
    Ok((!approx_eq(a, b)).then(|| cx(x, None, &[("r", r as f64)], b, a, "replication changes I")))
}

fn trial_normalization(s: &mut IncomeSampler, m: &InequalityMeasure) -> Trial {
    if s.rng.random_bool(0.2) {
        let n = s.rng.random_range(1..=8);
        let c = s.rng.random_range(0.0..10.0);
        let x = vec![c; n];
        let v = m.eval(&income(x.clone())?)?;
        return Ok(
            (v.abs() > EQ_TOL).then(|| cx(x, None, &[], v, 0.0, "I non-zero on a constant vector"))
        );
    }
    let x = s.non_constant();
    let v = m.eval(&income(x.clone())?)?;
    Ok((v <= 0.0).then(|| {
        cx(
            x,
            None,
            &[],
            v,
            0.0,
            "I not positive on a non-constant vector",
        )
    }))
}

fn trial_constant_addition(s: &mut IncomeSampler, m: &InequalityMeasure) -> Trial {
    let x = s.vector();
    let c = s.rng.random_range(0.01..10.0);
    let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
    let (a, b) = (m.eval(&income(shifted)?)?, m.eval(&income(x.clone())?)?);
    Ok((a > b + EQ_TOL * 1f64.max(b.abs()))
        .then(|| cx(x, None, &[("c", c)], a, b, "I(x + c) > I(x)")))
}

fn trial_constant_sum_convexity(s: &mut IncomeSampler, m: &InequalityMeasure) -> Trial {
    let x = s.vector();
    let raw: Vec<f64> = (0..x.len())
        .map(|_| s.rng.random_range(0.0..10.0))
        .collect();
    let (sx, sr): (f64, f64) = (x.iter().sum(), raw.iter().sum());
    if sr == 0.0 {
        return Ok(None);
    }
    let y: Vec<f64> = raw.iter().map(|v| v * sx / sr).collect();
    let t = s.rng.random_range(0.01..0.99);
    let mix: Vec<f64> = x
        .iter()
        .zip(&y)
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect();
    let lhs = m.eval(&income(mix)?)?;
    let rhs = (1.0 - t) * m.eval(&income(x.clone())?)? + t * m.eval(&income(y.clone())?)?;
    Ok((lhs > rhs + EQ_TOL * 1f64.max(rhs.abs())).then(|| {
        cx(
            x,
            Some(y),
            &[("t", t)],
            lhs,
            rhs,
            "I not convex on the constant-sum slice",
        )
    }))
}
