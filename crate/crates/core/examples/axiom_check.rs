//! Seeded falsification of the fairness axioms for a few aggregators.
//! A found counterexample is printed next to its axiom.

use fairrisk::riskvar::{check_axiom, AggregatorSpec, FairnessAxiom};

fn main() -> fairrisk::Result<()> {
    let measures = [
        AggregatorSpec::Cvar { alpha: 0.7 },
        AggregatorSpec::SdPenalty { lambda: 1.0 },
        AggregatorSpec::Expectation,
        AggregatorSpec::TopK { k: 3 },
    ];
    for measure in &measures {
        println!("{}", measure.name());
        for axiom in FairnessAxiom::ALL {
            let report = check_axiom(measure, axiom, 500, 1)?;
            let expected = if axiom.expected_to_hold(measure) {
                "holds"
            } else {
                "fails"
            };
            match &report.counterexample {
                None => println!("  {axiom}: no counterexample (expected: {expected})"),
                Some(c) => println!(
                    "  {axiom}: {} [lhs {:.4}, rhs {:.4}] (expected: {expected})",
                    c.detail, c.lhs, c.rhs
                ),
            }
        }
    }
    Ok(())
}
