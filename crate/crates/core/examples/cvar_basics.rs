//! Risk aggregates of a small subgroup-risk variable: expectation, quantile,
//! CVaR across levels, the mean-plus-deviation split, and top-k averaging.

use fairrisk::riskvar::{
    aggregate, cvar, cvar_deviation, expectation, quantile, sd_deviation, AggregatorSpec,
    DiscreteRandomVariable,
};

fn main() -> fairrisk::Result<()> {
    // Four groups with unequal weight and unequal average loss.
    let risks = DiscreteRandomVariable::new([(0.12, 0.4), (0.18, 0.3), (0.35, 0.2), (0.60, 0.1)])?;
    println!(
        "E = {:.4}, sd = {:.4}, max = {:.4}",
        expectation(&risks),
        sd_deviation(&risks),
        risks.max()
    );

    for alpha in [0.1, 0.5, 0.7, 0.9, 0.99] {
        let c = cvar(&risks, alpha)?;
        let d = cvar_deviation(&risks, alpha)?;
        println!(
            "alpha {alpha:<4}  q = {:.4}  cvar = {c:.4}  = {:.4} + {d:.4}",
            quantile(&risks, alpha)?,
            expectation(&risks)
        );
    }

    let losses = DiscreteRandomVariable::uniform(&[0.3, 2.0, 0.1, 1.4, 0.9, 0.0])?;
    for spec in [
        AggregatorSpec::Expectation,
        AggregatorSpec::TopK { k: 2 },
        AggregatorSpec::Cvar {
            alpha: 1.0 - 2.0 / 6.0,
        },
        AggregatorSpec::SdPenalty { lambda: 0.5 },
        AggregatorSpec::Max,
    ] {
        println!("{:<24} {:.4}", spec.name(), aggregate(&losses, &spec)?);
    }
    Ok(())
}
