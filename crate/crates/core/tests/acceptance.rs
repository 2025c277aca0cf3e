//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! with the measured quantities before asserting.

use std::process::Command;
use std::time::{Duration, Instant};

use fairrisk::data::{generate_synth, SynthSpec};
use fairrisk::inequality::{
    check_inequality_axiom, check_schur_convexity, deviation_from_inequality,
    inequality_from_deviation, lorenz_dominates, majorized_by, Deviation, IncomeVector,
    InequalityAxiom, InequalityMeasure,
};
use fairrisk::optim::{cvar_objective, subgradient, top_k_alpha, train, TrainConfig};
use fairrisk::riskvar::{
    aggregate, check_axiom, cvar, cvar_deviation, expectation, AggregatorSpec,
    DiscreteRandomVariable, FairnessAxiom,
};
use fairrisk::subgroup::{
    partition, Dataset, LinearModel, LossSpec, PartitionMode, SensitiveValues,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(criterion: u32, ok: bool, summary: &str) {
    println!(
        "criterion {criterion:>2}: {} {summary}",
        if ok { "PASS" } else { "FAIL" }
    );
}

/// Atom values and probabilities, with occasional ties among the values.
fn random_case(rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>, f64) {
    let n = rng.random_range(1..=20);
    let integer = rng.random_bool(0.3);
    let values: Vec<f64> = (0..n)
        .map(|_| {
            if integer {
                rng.random_range(-4..=4) as f64
            } else {
                rng.random_range(-10.0..10.0)
            }
        })
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let probs = raw.iter().map(|p| p / total).collect();
    (values, probs, rng.random_range(0.01..0.99))
}

fn variational(values: &[f64], probs: &[f64], alpha: f64, rho: f64) -> f64 {
    let tail: f64 = values
        .iter()
        .zip(probs)
        .map(|(v, p)| p * (v - rho).max(0.0))
        .sum();
    rho + tail / (1.0 - alpha)
}

/// Minimizes the variational objective on a uniform grid, then repeatedly
/// regrids the bracket around the best point.
fn grid_cvar(values: &[f64], probs: &[f64], alpha: f64) -> f64 {
    let (mut lo, mut hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    lo -= 1.0;
    hi += 1.0;
    let points = 401;
    let mut best = f64::INFINITY;
    for _ in 0..8 {
        let h = (hi - lo) / (points - 1) as f64;
        let (i, f) = (0..points)
            .map(|i| (i, variational(values, probs, alpha, lo + h * i as f64)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        best = best.min(f);
        let centre = lo + h * i as f64;
        lo = centre - h;
        hi = centre + h;
    }
    best
}

fn cases() -> Vec<(DiscreteRandomVariable, Vec<f64>, Vec<f64>, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_601);
    (0..1000)
        .map(|_| {
            let (v, p, a) = random_case(&mut rng);
            let z = DiscreteRandomVariable::new(v.iter().copied().zip(p.iter().copied())).unwrap();
            (z, v, p, a)
        })
        .collect()
}

#[test]
fn criterion_01_cvar_matches_grid_minimization() {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (z, v, p, a) in cases() {
        worst = worst.max((cvar(&z, a).unwrap() - grid_cvar(&v, &p, a)).abs());
    }
    let elapsed = start.elapsed();
    let ok = worst <= 1e-6 && elapsed < Duration::from_secs(5);
    report(
        1,
        ok,
        &format!("max |cvar - grid| = {worst:.2e} over 1000 cases in {elapsed:.2?}"),
    );
    assert!(ok);
}

#[test]
fn criterion_02_quadrangle_identity() {
    let mut worst: f64 = 0.0;
    for (z, _, _, a) in cases() {
        let r = aggregate(&z, &AggregatorSpec::Cvar { alpha: a }).unwrap();
        let split = expectation(&z) + cvar_deviation(&z, a).unwrap();
        worst = worst.max((r - split).abs());
    }
    let ok = worst <= 1e-12;
    report(2, ok, &format!("max |R - (E + D)| = {worst:.2e}"));
    assert!(ok);
}

#[test]
fn criterion_03_limits_are_max_and_mean() {
    let (mut top, mut bottom): (f64, f64) = (0.0, 0.0);
    for (z, v, p, _) in cases() {
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean: f64 = v.iter().zip(&p).map(|(a, b)| a * b).sum();
        top = top.max((cvar(&z, 1.0 - 1e-9).unwrap() - max).abs());
        bottom = bottom.max((cvar(&z, 1e-9).unwrap() - mean).abs());
    }
    let ok = top <= 1e-6 && bottom <= 1e-6;
    report(
        3,
        ok,
        &format!("near 1: {top:.2e} from max; near 0: {bottom:.2e} from mean"),
    );
    assert!(ok);
}

#[test]
fn criterion_04_axiom_suite() {
    let start = Instant::now();
    let cvar_spec = AggregatorSpec::Cvar { alpha: 0.7 };
    let mut cvar_failures = Vec::new();
    for axiom in [
        FairnessAxiom::F1,
        FairnessAxiom::F2,
        FairnessAxiom::F3,
        FairnessAxiom::F5,
        FairnessAxiom::F6,
        FairnessAxiom::F7,
        FairnessAxiom::F8,
        FairnessAxiom::F9,
    ] {
        if !check_axiom(&cvar_spec, axiom, 1000, 7).unwrap().passed {
            cvar_failures.push(axiom.to_string());
        }
    }
    let sd_spec = AggregatorSpec::SdPenalty { lambda: 1.0 };
    let sd_f1 = check_axiom(&sd_spec, FairnessAxiom::F1, 1000, 7).unwrap();
    let sd_f3 = check_axiom(&sd_spec, FairnessAxiom::F3, 1000, 7).unwrap();
    let elapsed = start.elapsed();

    let cvar_ok = cvar_failures.is_empty();
    let sd_ok = !sd_f1.passed;
    let ok = cvar_ok && sd_ok && elapsed < Duration::from_secs(30);
    report(
        4,
        ok,
        &format!(
            "cvar failures {cvar_failures:?}; sd F1 counterexample found: {}; \
             sd F3 counterexample found: {}; {elapsed:.2?}",
            !sd_f1.passed, !sd_f3.passed
        ),
    );
    if let Some(c) = &sd_f3.counterexample {
        println!("    sd F3 counterexample: {}", c.detail);
    }
    assert!(ok);
}

fn top_k_mean(losses: &[f64], k: usize) -> f64 {
    let mut sorted = losses.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    sorted[..k].iter().sum::<f64>() / k as f64
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * 1f64.max(a.abs()).max(b.abs())
}

#[test]
fn criterion_05_top_k_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut mismatches = 0;
    for _ in 0..100 {
        let m = rng.random_range(2..=30);
        let k = rng.random_range(1..=m);
        let losses: Vec<f64> = (0..m)
            .map(|_| {
                if rng.random_bool(0.3) {
                    rng.random_range(0..4) as f64
                } else {
                    rng.random_range(0.0..5.0)
                }
            })
            .collect();
        let oracle = top_k_mean(&losses, k);
        let alpha = top_k_alpha(k, m);
        let z = DiscreteRandomVariable::uniform(&losses).unwrap();

        // Per-instance dataset whose linear loss at w = -1 is exactly `losses`.
        let ds = Dataset::new(
            losses.iter().map(|l| vec![*l]).collect(),
            vec![1.0; m],
            SensitiveValues::Real(vec![0.0; m]),
        )
        .unwrap();
        let part = partition(&ds, PartitionMode::PerInstance).unwrap();
        let model = LinearModel {
            weights: vec![-1.0],
            intercept: 0.0,
        };
        let mut sorted = losses.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let rho = sorted[k - 1];
        let objective = if k < m {
            cvar_objective(&model, rho, &ds, &part, LossSpec::Linear, alpha).unwrap()
        } else {
            oracle
        };

        let top = aggregate(&z, &AggregatorSpec::TopK { k }).unwrap();
        let tail = if k < m {
            cvar(&z, alpha).unwrap()
        } else {
            expectation(&z)
        };
        if !(close(top, oracle) && close(tail, oracle) && close(objective, oracle)) {
            mismatches += 1;
        }
    }

    let ds = generate_synth(&SynthSpec {
        m: 80,
        seed: 3,
        ..SynthSpec::default()
    })
    .unwrap();
    let (k, m) = (12, ds.n_rows());
    let base = TrainConfig {
        epochs: 60,
        seed: 11,
        ..TrainConfig::default()
    };
    let topk = train(
        &TrainConfig {
            aggregator: AggregatorSpec::TopK { k },
            ..base.clone()
        },
        &ds,
    )
    .unwrap();
    let tail = train(
        &TrainConfig {
            aggregator: AggregatorSpec::Cvar {
                alpha: 1.0 - k as f64 / m as f64,
            },
            partition_mode: PartitionMode::PerInstance,
            ..base
        },
        &ds,
    )
    .unwrap();
    let traces_equal = topk.objective_trace == tail.objective_trace && topk.model == tail.model;

    let ok = mismatches == 0 && traces_equal;
    report(
        5,
        ok,
        &format!(
            "{mismatches} of 100 loss vectors disagree; optimizer traces identical: {traces_equal}"
        ),
    );
    assert!(ok);
}

fn random_model(rng: &mut ChaCha8Rng, d: usize) -> (LinearModel, f64) {
    let weights = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
    (
        LinearModel {
            weights,
            intercept: rng.random_range(-3.0..3.0),
        },
        rng.random_range(-1.0..6.0),
    )
}

#[test]
fn criterion_06_objective_is_convex() {
    let ds = generate_synth(&SynthSpec::default()).unwrap();
    let part = partition(&ds, PartitionMode::Categorical).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..200 {
        let alpha = rng.random_range(0.05..0.95);
        let (m1, r1) = random_model(&mut rng, 2);
        let (m2, r2) = random_model(&mut rng, 2);
        let mid = LinearModel {
            weights: m1
                .weights
                .iter()
                .zip(&m2.weights)
                .map(|(a, b)| 0.5 * (a + b))
                .collect(),
            intercept: 0.5 * (m1.intercept + m2.intercept),
        };
        let f = |m: &LinearModel, r: f64| {
            cvar_objective(m, r, &ds, &part, LossSpec::SquaredHinge, alpha).unwrap()
        };
        let excess = f(&mid, 0.5 * (r1 + r2)) - 0.5 * (f(&m1, r1) + f(&m2, r2));
        worst = worst.max(excess);
    }
    let ok = worst <= 1e-9;
    report(
        6,
        ok,
        &format!("largest midpoint excess over chord = {worst:.2e}"),
    );
    assert!(ok);
}

#[test]
fn criterion_07_subgradient_matches_finite_differences() {
    let ds = generate_synth(&SynthSpec {
        m: 200,
        seed: 7,
        ..SynthSpec::default()
    })
    .unwrap();
    let part = partition(&ds, PartitionMode::Categorical).unwrap();
    let loss = LossSpec::Logistic;
    let l2 = 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut points = 0;
    while points < 100 {
        let alpha = rng.random_range(0.05..0.95);
        let (model, rho) = random_model(&mut rng, 2);
        let risks = fairrisk::subgroup::group_mean_losses(&model, &ds, &part, loss).unwrap();
        if risks.iter().any(|l| (l - rho).abs() < 1e-3) {
            continue;
        }
        points += 1;
        let f = |w: &[f64], b: f64, r: f64| {
            let m = LinearModel {
                weights: w.to_vec(),
                intercept: b,
            };
            cvar_objective(&m, r, &ds, &part, loss, alpha).unwrap()
                + 0.5 * l2 * w.iter().map(|x| x * x).sum::<f64>()
        };
        let g = subgradient(&model, rho, &ds, &part, loss, alpha, l2).unwrap();
        let h = 1e-6;
        let mut analytic = g.weights.clone();
        analytic.push(g.intercept);
        analytic.push(g.rho);
        for (j, a) in analytic.iter().enumerate() {
            let mut w_hi = model.weights.clone();
            let mut w_lo = model.weights.clone();
            let (mut b_hi, mut b_lo, mut r_hi, mut r_lo) =
                (model.intercept, model.intercept, rho, rho);
            match j {
                0 | 1 => {
                    w_hi[j] += h;
                    w_lo[j] -= h;
                }
                2 => {
                    b_hi += h;
                    b_lo -= h;
                }
                _ => {
                    r_hi += h;
                    r_lo -= h;
                }
            }
            let fd = (f(&w_hi, b_hi, r_hi) - f(&w_lo, b_lo, r_lo)) / (2.0 * h);
            worst = worst.max((fd - a).abs() / 1f64.max(a.abs()));
        }
    }
    let ok = worst <= 1e-4;
    report(
        7,
        ok,
        &format!("max relative gap to central differences = {worst:.2e} at 100 points"),
    );
    assert!(ok);
}

fn inversions(seq: &[f64], increasing: bool) -> usize {
    seq.windows(2)
        .filter(|w| {
            if increasing {
                w[1] < w[0] - 1e-12
            } else {
                w[1] > w[0] + 1e-12
            }
        })
        .count()
}

#[test]
fn criterion_08_tradeoff_trend() {
    let start = Instant::now();
    let alphas = [0.1, 0.3, 0.5, 0.7, 0.9];
    let seeds = 10;
    let mut gap = vec![0.0; alphas.len()];
    let mut risk = vec![0.0; alphas.len()];
    for seed in 0..seeds {
        let ds = generate_synth(&SynthSpec {
            seed,
            ..SynthSpec::default()
        })
        .unwrap();
        let template = TrainConfig {
            seed,
            ..TrainConfig::default()
        };
        let reports = fairrisk::optim::alpha_sweep(&template, &ds, &alphas).unwrap();
        for (i, r) in reports.iter().enumerate() {
            let risks = &r.final_subgroup_risks;
            gap[i] += (risks.max() - risks.min()) / seeds as f64;
            risk[i] += expectation(risks) / seeds as f64;
        }
    }
    let elapsed = start.elapsed();
    let (gi, ri) = (inversions(&gap, false), inversions(&risk, true));
    let ok = gi <= 1 && ri <= 1 && elapsed < Duration::from_secs(120);
    report(
        8,
        ok,
        &format!(
            "gap {gap:.4?} ({gi} inversions); risk {risk:.4?} ({ri} inversions); {elapsed:.2?}"
        ),
    );
    assert!(ok);
}

fn random_income(rng: &mut ChaCha8Rng) -> IncomeVector {
    let n = rng.random_range(1..=15);
    let mut x: Vec<f64> = (0..n)
        .map(|_| {
            if rng.random_bool(0.1) {
                0.0
            } else {
                rng.random_range(0.0..10.0)
            }
        })
        .collect();
    if x.iter().all(|v| *v == 0.0) {
        x[0] = 1.0;
    }
    IncomeVector::new(x).unwrap()
}

#[test]
fn criterion_09_inequality_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let (mut worst_i, mut worst_d, mut worst_cv): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..500 {
        let x = random_income(&mut rng);
        let alpha = rng.random_range(0.05..0.95);
        let measures = [
            InequalityMeasure::CoefficientOfVariation,
            InequalityMeasure::CvarInduced { alpha },
            InequalityMeasure::SpreadOverMean,
        ];
        for m in &measures {
            let direct = m.eval(&x).unwrap();
            let round = inequality_from_deviation(&x, &m.induced_deviation()).unwrap();
            worst_i = worst_i.max((direct - round).abs() / 1f64.max(direct.abs()));
        }
        for d in [
            Deviation::StandardDeviation,
            Deviation::CvarDeviation { alpha },
        ] {
            let direct = d.eval(&x.as_random_variable()).unwrap();
            let round = deviation_from_inequality(&x, &InequalityMeasure::Induced(d)).unwrap();
            worst_d = worst_d.max((direct - round).abs() / 1f64.max(direct.abs()));
        }
        let v = x.entries();
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let sd = (v.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n).sqrt();
        let cv = inequality_from_deviation(&x, &Deviation::StandardDeviation).unwrap();
        worst_cv = worst_cv.max((cv - sd / mean).abs());
    }
    let ok = worst_i <= 1e-12 && worst_d <= 1e-12 && worst_cv <= 1e-12;
    report(
        9,
        ok,
        &format!(
            "I round trip {worst_i:.2e}; D round trip {worst_d:.2e}; cv vs direct {worst_cv:.2e}"
        ),
    );
    assert!(ok);
}

/// `y` with a few mean-preserving transfers from richer to poorer entries
/// that never reverse their order.
fn pigou_dalton_pair(rng: &mut ChaCha8Rng) -> (IncomeVector, IncomeVector) {
    let n = rng.random_range(2..=10);
    let y: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..10.0)).collect();
    let mut x = y.clone();
    for _ in 0..rng.random_range(1..=4) {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let (rich, poor) = if x[i] >= x[j] { (i, j) } else { (j, i) };
        let room = (x[rich] - x[poor]) / 2.0;
        if room > 0.0 {
            let delta = rng.random_range(0.0..room);
            x[rich] -= delta;
            x[poor] += delta;
        }
    }
    (IncomeVector::new(x).unwrap(), IncomeVector::new(y).unwrap())
}

#[test]
fn criterion_10_majorization_and_schur_convexity() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut broken = 0;
    for _ in 0..500 {
        let (x, y) = pigou_dalton_pair(&mut rng);
        if majorized_by(&x, &y).unwrap() && !lorenz_dominates(&x, &y).unwrap() {
            broken += 1;
        }
    }
    let measure = InequalityMeasure::CvarInduced { alpha: 0.5 };
    let strict = check_inequality_axiom(&measure, InequalityAxiom::I3, 1000, 10).unwrap();
    let weak = check_schur_convexity(&measure, 1000, 10, false).unwrap();
    let ok = broken == 0 && strict.passed;
    report(
        10,
        ok,
        &format!(
            "majorization without Lorenz dominance: {broken} of 500; cvar-induced strict I3 passed: {}; \
             weak Schur-convexity passed: {}",
            strict.passed, weak.passed
        ),
    );
    if let Some(c) = &strict.counterexample {
        println!(
            "    I3 counterexample: x = {:?}, y = {:?}, I(x) = {}, I(y) = {}",
            c.x, c.y, c.lhs, c.rhs
        );
    }
    assert!(ok);
}

fn train_once(dir: &std::path::Path, name: &str) -> String {
    let out = dir.join(name);
    let status = Command::new(env!("CARGO_BIN_EXE_fairrisk"))
        .args([
            "train",
            "--data",
            "synth",
            "--aggregator",
            "cvar",
            "--alpha",
            "0.9",
        ])
        .args([
            "--loss",
            "squared_hinge",
            "--seed",
            "1",
            "--epochs",
            "100",
            "--output",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    std::fs::read_to_string(out).unwrap()
}

#[test]
fn criterion_11_train_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let strip = |s: &str| -> String {
        s.lines()
            .filter(|l| !l.contains("_seconds"))
            .collect::<Vec<_>>()
            .join("\n")
    };
    let a = train_once(dir.path(), "a.json");
    let b = train_once(dir.path(), "b.json");
    let ok = strip(&a) == strip(&b);
    report(
        11,
        ok,
        &format!("two runs, {} bytes each outside timings", strip(&a).len()),
    );
    assert!(ok);
}
