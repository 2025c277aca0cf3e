//! Train the same linear classifier under each aggregator on the synthetic
//! two-group benchmark and compare held-out accuracy and group disparity.

use fairrisk::data::{generate_synth, split, standardize, SynthSpec};
use fairrisk::metrics::evaluate;
use fairrisk::optim::{train, TrainConfig};
use fairrisk::riskvar::AggregatorSpec;
use fairrisk::subgroup::{partition, PartitionMode};

fn main() -> fairrisk::Result<()> {
    let data = generate_synth(&SynthSpec {
        m: 1000,
        seed: 3,
        ..SynthSpec::default()
    })?;
    let parts = split(&data, 0.7, 3)?;
    let (train_set, test_set, _) = standardize(&parts.train, &parts.test)?;
    let test_groups = partition(&test_set, PartitionMode::Categorical)?;

    println!(
        "{:<14} {:>8} {:>8} {:>8} {:>8}",
        "aggregator", "0-1", "gap", "dp", "auc-err"
    );
    for aggregator in [
        AggregatorSpec::Expectation,
        AggregatorSpec::Cvar { alpha: 0.3 },
        AggregatorSpec::Cvar { alpha: 0.6 },
        AggregatorSpec::SdPenalty { lambda: 1.0 },
        AggregatorSpec::Max,
    ] {
        let config = TrainConfig {
            aggregator,
            ..TrainConfig::default()
        };
        let report = train(&config, &train_set)?;
        let eval = evaluate(&report.model, &test_set, &test_groups, config.loss)?;
        println!(
            "{:<14} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            config.aggregator.name(),
            eval.zero_one_risk,
            eval.subgroup_loss_gap,
            eval.dp_violation,
            eval.pairwise_disagreement.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
