use fairrisk::data::{generate_synth, read_csv, CsvSchema, SynthSpec};
use fairrisk::inequality::{
    deviation_from_inequality, inequality_from_deviation, lorenz_curve, lorenz_dominates,
    majorized_by, risk_from_inequality, Deviation, IncomeVector, InequalityMeasure,
};
use fairrisk::metrics::{
    dp_violation, mean_difference_01, mutual_information_metric, pairwise_disagreement,
};
use fairrisk::riskvar::{
    aggregate, cvar, cvar_deviation, cvar_weights, expectation, quantile, sd_deviation,
    AggregatorSpec, DiscreteRandomVariable,
};
use fairrisk::subgroup::{partition, Dataset, PartitionMode, SensitiveValues};
use proptest::prelude::*;

fn atoms() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..16).prop_flat_map(|n| {
        (
            prop::collection::vec(
                prop_oneof![-50.0..50.0f64, (-3i32..3).prop_map(f64::from)],
                n,
            ),
            prop::collection::vec(0.01..1.0f64, n),
        )
            .prop_map(|(v, w)| {
                let t: f64 = w.iter().sum();
                (v, w.iter().map(|x| x / t).collect())
            })
    })
}

fn drv(v: &[f64], p: &[f64]) -> DiscreteRandomVariable {
    DiscreteRandomVariable::new(v.iter().copied().zip(p.iter().copied())).unwrap()
}

/// Minimum of the variational objective over every atom value, computed
/// without any library helper.
fn min_over_atoms(v: &[f64], p: &[f64], alpha: f64) -> f64 {
    v.iter()
        .map(|&rho| {
            rho + v
                .iter()
                .zip(p)
                .map(|(z, q)| q * (z - rho).max(0.0))
                .sum::<f64>()
                / (1.0 - alpha)
        })
        .fold(f64::INFINITY, f64::min)
}

fn tol(a: f64) -> f64 {
    1e-9 * 1f64.max(a.abs())
}

proptest! {
    #[test]
    fn cvar_is_the_variational_minimum((v, p) in atoms(), alpha in 0.01..0.99f64) {
        let c = cvar(&drv(&v, &p), alpha).unwrap();
        let oracle = min_over_atoms(&v, &p, alpha);
        prop_assert!((c - oracle).abs() <= tol(oracle), "{c} vs {oracle}");
    }

    #[test]
    fn cvar_monotone_in_alpha_and_bracketed((v, p) in atoms(), a in 0.0..0.98f64, b in 0.0..0.98f64) {
        let z = drv(&v, &p);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (c_lo, c_hi) = (cvar(&z, lo.max(1e-6)).unwrap(), cvar(&z, hi.max(1e-6)).unwrap());
        prop_assert!(c_lo <= c_hi + tol(c_hi));
        prop_assert!(expectation(&z) <= c_lo + tol(c_lo));
        prop_assert!(c_hi <= z.max() + tol(c_hi));
        prop_assert!(quantile(&z, hi.max(1e-6)).unwrap() <= c_hi + tol(c_hi));
    }

    #[test]
    fn cvar_is_tail_mean_on_uniform_atoms(v in prop::collection::vec(-20.0..20.0f64, 2..30), k in 1usize..30) {
        let n = v.len();
        let k = 1 + (k - 1) % (n - 1);
        let mut sorted = v.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let oracle = sorted[..k].iter().sum::<f64>() / k as f64;
        let z = DiscreteRandomVariable::uniform(&v).unwrap();
        let c = cvar(&z, 1.0 - k as f64 / n as f64).unwrap();
        prop_assert!((c - oracle).abs() <= 1e-12 * 1f64.max(oracle.abs()));
        let t = aggregate(&z, &AggregatorSpec::TopK { k }).unwrap();
        prop_assert!((t - oracle).abs() <= 1e-12 * 1f64.max(oracle.abs()));
    }

    #[test]
    fn aggregates_ignore_atom_order((v, p) in atoms(), alpha in 0.01..0.99f64, shift in 0usize..16) {
        let n = v.len();
        let rot = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| x[(i + shift) % n]).collect() };
        let (z, w) = (drv(&v, &p), drv(&rot(&v), &rot(&p)));
        for spec in [
            AggregatorSpec::Expectation,
            AggregatorSpec::Cvar { alpha },
            AggregatorSpec::SdPenalty { lambda: 0.7 },
            AggregatorSpec::Max,
        ] {
            let (a, b) = (aggregate(&z, &spec).unwrap(), aggregate(&w, &spec).unwrap());
            prop_assert!((a - b).abs() <= tol(a));
        }
    }

    #[test]
    fn cvar_is_convex_along_chords(
        (v, p) in atoms(),
        u in prop::collection::vec(-50.0..50.0f64, 16),
        t in 0.0..1.0f64,
        alpha in 0.01..0.99f64,
    ) {
        let w: Vec<f64> = u[..v.len()].to_vec();
        let mix: Vec<f64> = v.iter().zip(&w).map(|(a, b)| t * a + (1.0 - t) * b).collect();
        let f = |x: &[f64]| cvar(&drv(x, &p), alpha).unwrap();
        let chord = t * f(&v) + (1.0 - t) * f(&w);
        prop_assert!(f(&mix) <= chord + tol(chord));
    }

    #[test]
    fn quantile_threshold_attains_the_minimum((v, p) in atoms(), alpha in 0.01..0.99f64) {
        let z = drv(&v, &p);
        let rho = quantile(&z, alpha).unwrap();
        let at_rho = rho + v.iter().zip(&p).map(|(x, q)| q * (x - rho).max(0.0)).sum::<f64>() / (1.0 - alpha);
        let c = cvar(&z, alpha).unwrap();
        prop_assert!((at_rho - c).abs() <= tol(c));
    }

    #[test]
    fn envelope_weights_form_a_distribution((v, p) in atoms(), alpha in 0.0..0.99f64) {
        let w = cvar_weights(&v, &p, alpha);
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        for (wi, pi) in w.iter().zip(&p) {
            prop_assert!(*wi >= -1e-15 && *wi <= pi / (1.0 - alpha) + 1e-12);
        }
        if alpha > 0.0 {
            let weighted: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            let c = cvar(&drv(&v, &p), alpha).unwrap();
            prop_assert!((weighted - c).abs() <= tol(c));
        }
    }

    #[test]
    fn deviations_vanish_only_on_constants((v, p) in atoms(), alpha in 0.01..0.99f64) {
        let z = drv(&v, &p);
        let d = cvar_deviation(&z, alpha).unwrap();
        let s = sd_deviation(&z);
        prop_assert!(d >= -1e-12 && s >= 0.0);
        if z.is_constant() {
            prop_assert!(d.abs() <= 1e-12 && s <= 1e-12);
        }
    }

    #[test]
    fn inequality_round_trip(x in prop::collection::vec(0.0..10.0f64, 1..12), alpha in 0.05..0.95f64) {
        prop_assume!(x.iter().sum::<f64>() > 0.0);
        let x = IncomeVector::new(x).unwrap();
        for d in [Deviation::StandardDeviation, Deviation::CvarDeviation { alpha }] {
            let i = inequality_from_deviation(&x, &d).unwrap();
            let back = deviation_from_inequality(&x, &InequalityMeasure::Induced(d.clone())).unwrap();
            let direct = d.eval(&x.as_random_variable()).unwrap();
            prop_assert!((back - direct).abs() <= 1e-12 * 1f64.max(direct));
            let r = risk_from_inequality(&x, &InequalityMeasure::Induced(d)).unwrap();
            prop_assert!((r - x.mean() * (1.0 + i)).abs() <= 1e-12 * 1f64.max(r));
        }
    }

    #[test]
    fn scale_invariance_of_induced_measures(x in prop::collection::vec(0.0..10.0f64, 1..12), lambda in 0.01..100.0f64) {
        prop_assume!(x.iter().sum::<f64>() > 0.0);
        let scaled = IncomeVector::new(x.iter().map(|v| v * lambda).collect()).unwrap();
        let x = IncomeVector::new(x).unwrap();
        for m in [InequalityMeasure::CoefficientOfVariation, InequalityMeasure::CvarInduced { alpha: 0.3 }] {
            let (a, b) = (m.eval(&x).unwrap(), m.eval(&scaled).unwrap());
            prop_assert!((a - b).abs() <= 1e-9 * 1f64.max(a));
        }
    }

    #[test]
    fn lorenz_curve_is_convex(x in prop::collection::vec(0.0..10.0f64, 1..20)) {
        prop_assume!(x.iter().sum::<f64>() > 0.0);
        let curve = lorenz_curve(&IncomeVector::new(x).unwrap()).unwrap();
        let k = &curve.knots;
        prop_assert_eq!(k[0], (0.0, 0.0));
        prop_assert!((k.last().unwrap().1 - 1.0).abs() <= 1e-12);
        let slopes: Vec<f64> = k.windows(2).map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0)).collect();
        for s in slopes.windows(2) {
            prop_assert!(s[1] >= s[0] - 1e-9);
        }
    }

    #[test]
    fn permutations_majorize_each_other(x in prop::collection::vec(0.0..10.0f64, 1..12), shift in 0usize..12) {
        prop_assume!(x.iter().sum::<f64>() > 0.0);
        let n = x.len();
        let y: Vec<f64> = (0..n).map(|i| x[(i + shift) % n]).collect();
        let (x, y) = (IncomeVector::new(x).unwrap(), IncomeVector::new(y).unwrap());
        prop_assert!(majorized_by(&x, &y).unwrap() && majorized_by(&y, &x).unwrap());
        prop_assert!(lorenz_dominates(&x, &y).unwrap() && lorenz_dominates(&y, &x).unwrap());
    }

    #[test]
    fn pairwise_disagreement_is_complementary(
        scores in prop::collection::hash_set(-1000i32..1000, 2..40),
        flips in prop::collection::vec(any::<bool>(), 40),
    ) {
        let scores: Vec<f64> = scores.into_iter().map(f64::from).collect();
        let mut labels: Vec<f64> = scores.iter().zip(&flips).map(|(_, f)| if *f { 1.0 } else { -1.0 }).collect();
        labels[0] = 1.0;
        labels[1] = -1.0;
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let sum = pairwise_disagreement(&scores, &labels).unwrap() + pairwise_disagreement(&neg, &labels).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn group_metrics_stay_in_range(
        rows in prop::collection::vec((any::<bool>(), any::<bool>(), 0u32..2), 4..60),
    ) {
        let groups: Vec<u32> = rows.iter().map(|r| r.2).collect();
        prop_assume!(groups.contains(&0) && groups.contains(&1));
        let preds: Vec<f64> = rows.iter().map(|r| if r.0 { 1.0 } else { -1.0 }).collect();
        let labels: Vec<f64> = rows.iter().map(|r| if r.1 { 1.0 } else { -1.0 }).collect();
        let ds = Dataset::new(vec![vec![0.0]; rows.len()], labels.clone(), SensitiveValues::Categorical(groups)).unwrap();
        let part = partition(&ds, PartitionMode::Categorical).unwrap();
        let dp = dp_violation(&preds, &part).unwrap();
        let md = mean_difference_01(&preds, &labels, &part).unwrap();
        let mi = mutual_information_metric(&preds, &part).unwrap();
        prop_assert!((0.0..=1.0).contains(&dp) && (0.0..=1.0).contains(&md));
        prop_assert!(mi >= -1e-12 && mi <= 2f64.ln() + 1e-12);
    }

    #[test]
    fn csv_numbers_round_trip(values in prop::collection::vec(-1e6..1e6f64, 1..20)) {
        let mut text = String::from("x,group,label\n");
        for (i, v) in values.iter().enumerate() {
            text.push_str(&format!("{v},{},1\n", i % 2));
        }
        let ds = read_csv(text.as_bytes(), &CsvSchema::new("label", "group")).unwrap();
        for (row, v) in ds.features().iter().zip(&values) {
            prop_assert_eq!(row[0], *v);
        }
    }
}

#[test]
fn synth_depends_only_on_its_spec() {
    let spec = SynthSpec {
        m: 50,
        seed: 42,
        ..SynthSpec::default()
    };
    assert_eq!(
        generate_synth(&spec).unwrap(),
        generate_synth(&spec.clone()).unwrap()
    );
}
