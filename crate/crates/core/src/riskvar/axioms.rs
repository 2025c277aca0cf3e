//! Falsification-by-sampling of the fairness risk measure axioms.
//!
//! Each check draws random discrete variables on a shared finite sample space
//! (shared probabilities, so pointwise order and convex combinations make
//! sense) and searches for a violation. A pass means no counterexample was
//! found in the given number of trials, nothing more.
//!
//! | axiom | property checked |
//! |-------|------------------|
//! | F1 | `R((1-t)Z + tZ') <= (1-t)R(Z) + tR(Z')` |
//! | F2 | `R(0) = 0`, `R(cZ) = cR(Z)` for `c > 0` |
//! | F3 | `Z <= Z'` pointwise implies `R(Z) <= R(Z')` |
//! | F4 | continuity along sampled line segments |
//! | F5 | `R(Z + C) = R(Z) + C` |
//! | F6 | `R(Z) > E(Z)` for non-constant `Z` |
//! | F7 | `R` unchanged by permuting or splitting atoms |
//! | F8 | `R(C) = C` on constants |
//! | F9 | `R(Z) - E(Z) >= 0`, zero exactly on constants |

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{aggregate, expectation, AggregatorSpec, Atom, DiscreteRandomVariable};
use crate::error::{Error, Result};

const EQ_TOL: f64 = 1e-9;
const INEQ_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum FairnessAxiom {
    F1,
    F2,
    F3,
    F4,
    F5,
    F6,
    F7,
    F8,
    F9,
}

impl FairnessAxiom {
    pub const ALL: [FairnessAxiom; 9] = [
        FairnessAxiom::F1,
        FairnessAxiom::F2,
        FairnessAxiom::F3,
        FairnessAxiom::F4,
        FairnessAxiom::F5,
        FairnessAxiom::F6,
        FairnessAxiom::F7,
        FairnessAxiom::F8,
        FairnessAxiom::F9,
    ];

    /// Whether `measure` is expected to survive falsification of this axiom.
    ///
    /// Expectation is not averse (F6) and has zero deviation (F9). Mean plus
    /// a positive multiple of the standard deviation is convex but not
    /// monotone, so F3 fails. Top-k with `k >= 2` degenerates to the mean
    /// when the sample space has exactly `k` atoms.
    pub fn expected_to_hold(self, measure: &AggregatorSpec) -> bool {
        use FairnessAxiom::*;
        match *measure {
            AggregatorSpec::Expectation => !matches!(self, F6 | F9),
            AggregatorSpec::SdPenalty { lambda: 0.0 } => !matches!(self, F6 | F9),
            AggregatorSpec::SdPenalty { .. } => self != F3,
            AggregatorSpec::TopK { k } if k >= 2 => !matches!(self, F6 | F9),
            AggregatorSpec::Cvar { .. } | AggregatorSpec::TopK { .. } | AggregatorSpec::Max => true,
        }
    }
}

impl fmt::Display for FairnessAxiom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

impl FromStr for FairnessAxiom {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FairnessAxiom::ALL
            .into_iter()
            .find(|a| a.to_string().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::param(format!("unknown fairness axiom '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Counterexample {
    pub z: Vec<Atom>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub z_prime: Option<Vec<Atom>>,
    pub params: BTreeMap<String, f64>,
    pub lhs: f64,
    pub rhs: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FalsificationReport {
    pub axiom: String,
    pub trials: usize,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub counterexample: Option<Counterexample>,
}

fn approx_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= EQ_TOL * 1f64.max(a.abs()).max(b.abs())
}

fn le_slack(a: f64, b: f64) -> bool {
    a <= b + INEQ_SLACK * 1f64.max(b.abs())
}

/// Random variables on a shared sample space.
struct Sampler {
    rng: ChaCha8Rng,
    /// Top-k needs equal probabilities and at least `k` atoms.
    uniform_k: Option<usize>,
}

impl Sampler {
    fn size(&mut self) -> usize {
        match self.uniform_k {
            Some(k) => self.rng.random_range(k.max(2)..=k + 6),
            None => self.rng.random_range(2..=8),
        }
    }

    fn probs(&mut self, n: usize) -> Vec<f64> {
        if self.uniform_k.is_some() {
            return vec![1.0 / n as f64; n];
        }
        let raw: Vec<f64> = match self.rng.random_range(0..4) {
            0 => vec![1.0; n],
            1 => {
                // one heavy atom carrying almost all the mass
                let heavy = self.rng.random_range(0..n);
                let mass = self.rng.random_range(0.9..0.999);
                let rest = (1.0 - mass) / (n - 1) as f64;
                (0..n)
                    .map(|i| if i == heavy { mass } else { rest })
                    .collect()
            }
            _ => (0..n).map(|_| self.rng.random_range(0.05..1.0)).collect(),
        };
        let total: f64 = raw.iter().sum();
        raw.iter().map(|w| w / total).collect()
    }

    fn values(&mut self, n: usize) -> Vec<f64> {
        match self.rng.random_range(0..3) {
            0 => (0..n).map(|_| self.rng.random_range(-10.0..10.0)).collect(),
            1 => (0..n)
                .map(|_| self.rng.random_range(-5i32..=5) as f64)
                .collect(),
            _ => (0..n).map(|_| self.rng.random_range(0.0..10.0)).collect(),
        }
    }

    fn non_constant_values(&mut self, n: usize) -> Vec<f64> {
        loop {
            let v = self.values(n);
            if v.iter().any(|&x| x != v[0]) {
                return v;
            }
        }
    }
}

fn drv(values: &[f64], probs: &[f64]) -> Result<DiscreteRandomVariable> {
    DiscreteRandomVariable::with_probs(values, probs)
}

fn atoms(values: &[f64], probs: &[f64]) -> Vec<Atom> {
    values
        .iter()
        .zip(probs)
        .map(|(&value, &prob)| Atom { value, prob })
        .collect()
}

/// Attempts to falsify `axiom` for `measure` with `trials` random draws.
pub fn check_axiom(
    measure: &AggregatorSpec,
    axiom: FairnessAxiom,
    trials: usize,
    seed: u64,
) -> Result<FalsificationReport> {
    measure.validate()?;
    if trials == 0 {
        return Err(Error::param("trials must be at least 1"));
    }
    let mut sampler = Sampler {
        rng: ChaCha8Rng::seed_from_u64(seed),
        uniform_k: match *measure {
            AggregatorSpec::TopK { k } => Some(k),
            _ => None,
        },
    };
    let r = |z: &DiscreteRandomVariable| aggregate(z, measure);

    for _ in 0..trials {
        let n = sampler.size();
        let probs = sampler.probs(n);
        let found = match axiom {
            FairnessAxiom::F1 => trial_convexity(&mut sampler, &probs, &r)?,
            FairnessAxiom::F2 => trial_homogeneity(&mut sampler, &probs, &r)?,
            FairnessAxiom::F3 => trial_monotonicity(&mut sampler, &probs, &r)?,
            FairnessAxiom::F4 => trial_continuity(&mut sampler, &probs, &r)?,
            FairnessAxiom::F5 => trial_translation(&mut sampler, &probs, &r)?,
            FairnessAxiom::F6 => trial_aversity(&mut sampler, &probs, &r)?,
            FairnessAxiom::F7 => trial_law_invariance(&mut sampler, &probs, &r)?,
            FairnessAxiom::F8 => trial_constants(&mut sampler, &probs, &r)?,
            FairnessAxiom::F9 => trial_positivity(&mut sampler, &probs, &r)?,
        };
        if let Some(cx) = found {
            return Ok(FalsificationReport {
                axiom: axiom.to_string(),
                trials,
                passed: false,
                counterexample: Some(cx),
            });
        }
    }
    Ok(FalsificationReport {
        axiom: axiom.to_string(),
        trials,
        passed: true,
        counterexample: None,
    })
}

type Measure<'a> = dyn Fn(&DiscreteRandomVariable) -> Result<f64> + 'a;
type Trial = Result<Option<Counterexample>>;

fn trial_convexity(s: &mut Sampler, probs: &[f64], r: &Measure) -> Trial {
    let n = probs.len();
    let z = s.values(n);
    let zp: Vec<f64> = if s.rng.random_bool(0.25) {
        z.iter().map(|v| -v).collect()
    } else {
        s.values(n)
    };
    let t = if s.rng.random_bool(0.25) {
        0.5
    } else {
        s.rng.random_range(0.01..0.99)
    };
    let mix: Vec<f64> = z
        .iter()
        .zip(&zp)
        .map(|(a, b)| (1.0 - t) * a + t * b)
        .collect();
    let lhs = r(&drv(&mix, probs)?)?;
    let rhs = (1.0 - t) * r(&drv(&z, probs)?)? + t * r(&drv(&zp, probs)?)?;
    Ok((!le_slack(lhs, rhs)).then(|| Counterexample {
        z: atoms(&z, probs),
        z_prime: Some(atoms(&zp, probs)),
        params: BTreeMap::from([("t".to_string(), t)]),
        lhs,
        rhs,
        detail: "R of mixture exceeds mixture of R".into(),
    }))
}

fn trial_homogeneity(s: &mut Sampler, probs: &[f64], r: &Measure) -> Trial {
    let n = probs.len();
    let zero = r(&drv(&vec![0.0; n], probs)?)?;
    if !approx_eq(zero, 0.0) {
        return Ok(Some(Counterexample {
            z: atoms(&vec![0.0; n], probs),
            z_prime: None,
            params: BTreeMap::new(),
            lhs: zero,
            rhs: 0.0,
            detail: "R(0) != 0".into(),
        }));
    }
    let z = s.values(n);
    let c = s.rng.random_range(0.01..10.0);
    let scaled: Vec<f64> = z.iter().map(|v| c * v).collect();
    let lhs = r(&drv(&scaled, probs)?)?;
    let rhs = c * r(&drv(&z, probs)?)?;
    Ok((!approx_eq(lhs, rhs)).then(|| Counterexample {
        z: atoms(&z, probs),
        z_prime: None,
        params: BTreeMap::from([("c".to_string(), c)]),
        lhs,
        rhs,
        detail: "R(cZ) != c R(Z)".into(),
    }))
}

fn trial_monotonicity(s: &mut Sampler, probs: &[f64], r: &Measure) -> Trial {
    let n = probs.len();
    let z = s.values(n);
    let zp: Vec<f64> = if s.rng.random_bool(0.5) {
        // the constant at the supremum dominates everything below it
        let top = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        vec![top; n]
    } else {
        z.iter()
            .map(|v| {
                if s.rng.random_bool(0.3) {
                    *v
                } else {
                    v + s.rng.random_range(0.0..3.0)
                }
            })
            .collect()
    };
    let lhs = r(&drv(&z, probs)?)?;
    let rhs = r(&drv(&zp, probs)?)?;
    Ok((!le_slack(lhs, rhs)).then(|| Counterexample {
        z: atoms(&z, probs),
        z_prime: Some(atoms(&zp, probs)),
        params: BTreeMap::new(),
        lhs,
        rhs,
        detail: "Z <= Z' pointwise but R(Z) > R(Z')".into(),
    }))
}

fn trial_continuity(s: &mut Sampler, probs: &[f64], r: &Measure) -> Trial {
    let n = probs.len();
    let z = s.values(n);
    let dir: Vec<f64> = (0..n).map(|_| s.rng.random_range(-1.0..1.0)).collect();
    let eps = 1e-8;
    let moved: Vec<f64> = z.iter().zip(&dir).map(|(a, d)| a + eps * d).collect();
    let lhs = r(&drv(&moved, probs)?)?;
    let rhs = r(&drv(&z, probs)?)?;
    let close = (lhs - rhs).abs() <= 1e-6 * 1f64.max(rhs.abs());
    Ok((!close).then(|| Counterexample {
        z: atoms(&z, probs),
        z_prime: Some(atoms(&moved, probs)),
        params: BTreeMap::from([("eps".to_string(), eps)]),
        lhs,
        rhs,
        detail: "R jumps under an infinitesimal perturbation".into(),
    }))
}

fn trial_translation(s: &mut Sampler, probs: &[f64], r: &Measure) -> Trial {
    let z = s.values(probs.len());
    let c = s.rng.random_range(-10.0..10.0);
    let shifted: Vec<f64> = z.iter().map(|v| v + c).collect();
    let lhs = r(&drv(&shifted, probs)?)?;
    let rhs = r(&drv(&z, probs)?)? + c;
    Ok((!approx_eq(lhs, rhs)).then(|| Counterexample {
        z: atoms(&z, probs),
        z_prime: None,
        params: BTreeMap::from([("C".to_string(), c)]),
        lhs,
        rhs,
        detail: "R(Z + C) != R(Z) + C".into(),
    }))
}

fn trial_aversity(s: &mut Sampler, probs: &[f64], r: &Measure) -> Trial {
    let z = s.non_constant_values(probs.len());
    let var = drv(&z, probs)?;
    let lhs = r(&var)?;
    let rhs = expectation(&var);
    Ok((lhs <= rhs).then(|| Counterexample {
        z: atoms(&z, probs),
        z_prime: None,
        params: BTreeMap::new(),
        lhs,
        rhs,
        detail: "R(Z) <= E(Z) for non-constant Z".into(),
    }))
}

fn trial_law_invariance(s: &mut Sampler, probs: &[f64], r: &Measure) -> Trial {
    let n = probs.len();
    let z = s.values(n);
    let mut pairs = atoms(&z, probs);
    pairs.shuffle(&mut s.rng);
    // Splitting an atom in two keeps the law but changes the sample space;
    // top-k only accepts equal-probability atoms so it is skipped there.
    let split = s.uniform_k.is_none() && s.rng.random_bool(0.3);
    if split {
        let i = s.rng.random_range(0..n);
        let half = pairs[i].prob / 2.0;
        pairs[i].prob = half;
        pairs.push(Atom {
            value: pairs[i].value,
            prob: half,
        });
    }
    let lhs = r(&DiscreteRandomVariable::from_atoms(pairs.clone())?)?;
    let rhs = r(&drv(&z, probs)?)?;
    Ok((!approx_eq(lhs, rhs)).then(|| Counterexample {
        z: atoms(&z, probs),
        z_prime: Some(pairs),
        params: BTreeMap::new(),
        lhs,
        rhs,
        detail: "equal laws give different R".into(),
    }))
}

fn trial_constants(s: &mut Sampler, probs: &[f64], r: &Measure) -> Trial {
    let c = s.rng.random_range(-10.0..10.0);
    let z = vec![c; probs.len()];
    let lhs = r(&drv(&z, probs)?)?;
    Ok((!approx_eq(lhs, c)).then(|| Counterexample {
        z: atoms(&z, probs),
        z_prime: None,
        params: BTreeMap::from([("C".to_string(), c)]),
        lhs,
        rhs: c,
        detail: "R(C) != C".into(),
    }))
}

fn trial_positivity(s: &mut Sampler, probs: &[f64], r: &Measure) -> Trial {
    let n = probs.len();
    let constant = s.rng.random_bool(0.2);
    let z = if constant {
        vec![s.rng.random_range(-10.0..10.0); n]
    } else {
        s.non_constant_values(n)
    };
    let var = drv(&z, probs)?;
    let dev = r(&var)? - expectation(&var);
    let scale = 1f64.max(z.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let ok = if constant {
        dev.abs() <= EQ_TOL * scale
    } else {
        dev > 0.0
    };
    Ok((!ok).then(|| Counterexample {
        z: atoms(&z, probs),
        z_prime: None,
        params: BTreeMap::new(),
        lhs: dev,
        rhs: 0.0,
        detail: if constant {
            "non-zero deviation on a constant".into()
        } else {
            "non-positive deviation on a non-constant variable".into()
        },
    }))
}
