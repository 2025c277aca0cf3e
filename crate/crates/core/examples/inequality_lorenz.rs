//! Inequality measures on income vectors: Lorenz curves, majorization, the
//! deviation/inequality correspondence, and the axiom falsifiers.

use fairrisk::inequality::{
    check_inequality_axiom, check_schur_convexity, deviation_from_inequality, lorenz_curve,
    lorenz_dominates, majorized_by, IncomeVector, InequalityAxiom, InequalityMeasure,
};

fn main() -> fairrisk::Result<()> {
    let equal = IncomeVector::new(vec![2.0, 2.0, 2.0, 2.0])?;
    let spread = IncomeVector::new(vec![1.0, 2.0, 2.0, 3.0])?;
    let skewed = IncomeVector::new(vec![0.0, 0.0, 1.0, 7.0])?;

    for (name, x) in [("equal", &equal), ("spread", &spread), ("skewed", &skewed)] {
        let knots: Vec<String> = lorenz_curve(x)?
            .knots
            .iter()
            .map(|(p, l)| format!("({p:.2}, {l:.3})"))
            .collect();
        println!("{name:<7} L = {}", knots.join(" "));
    }
    println!(
        "spread majorized by skewed: {}",
        majorized_by(&spread, &skewed)?
    );
    println!(
        "spread Lorenz-dominates skewed: {}",
        lorenz_dominates(&spread, &skewed)?
    );

    let measures = [
        InequalityMeasure::CoefficientOfVariation,
        InequalityMeasure::CvarInduced { alpha: 0.5 },
        InequalityMeasure::SpreadOverMean,
    ];
    for m in &measures {
        println!(
            "{:<26} I(spread) = {:.4}  I(skewed) = {:.4}  D(skewed) = {:.4}",
            m.name(),
            m.eval(&spread)?,
            m.eval(&skewed)?,
            deviation_from_inequality(&skewed, m)?
        );
        let failing: Vec<String> = InequalityAxiom::CHECKABLE
            .into_iter()
            .filter_map(|a| match check_inequality_axiom(m, a, 300, 2) {
                Ok(r) if !r.passed => Some(a.to_string()),
                _ => None,
            })
            .collect();
        println!("    falsified: {failing:?}");
    }

    // The CVaR-induced measure is Schur-convex, but not strictly.
    let cvar_induced = InequalityMeasure::CvarInduced { alpha: 0.5 };
    let x = IncomeVector::new(vec![1.0, 2.0, 3.0, 10.0])?;
    let y = IncomeVector::new(vec![0.5, 2.5, 3.0, 10.0])?;
    println!(
        "x majorized by y: {}, I(x) = {:.4}, I(y) = {:.4}, weak check passes: {}",
        majorized_by(&x, &y)?,
        cvar_induced.eval(&x)?,
        cvar_induced.eval(&y)?,
        check_schur_convexity(&cvar_induced, 300, 2, false)?.passed
    );
    Ok(())
}
