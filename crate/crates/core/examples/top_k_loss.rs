//! Per-instance training: averaging the k largest losses is CVaR at level
//! 1 - k/m with one group per example, and both runs trace the same path.
//! For small k the zero model can be optimal: it caps every loss at one.

use fairrisk::data::{generate_synth, SynthSpec};
use fairrisk::optim::{top_k_alpha, train, TrainConfig};
use fairrisk::riskvar::AggregatorSpec;
use fairrisk::subgroup::PartitionMode;

fn main() -> fairrisk::Result<()> {
    let data = generate_synth(&SynthSpec {
        m: 200,
        noise_rates: [0.0, 0.0],
        class_means: [[[-2.0, 0.0], [2.0, 0.0]], [[0.0, -2.0], [0.0, 2.0]]],
        seed: 4,
        ..SynthSpec::default()
    })?;
    let m = data.n_rows();
    for k in [10, 40, 70, 100, m] {
        let base = TrainConfig {
            epochs: 100,
            ..TrainConfig::default()
        };
        let top = train(
            &TrainConfig {
                aggregator: AggregatorSpec::TopK { k },
                ..base.clone()
            },
            &data,
        )?;
        let line = if k < m {
            let tail = train(
                &TrainConfig {
                    aggregator: AggregatorSpec::Cvar {
                        alpha: top_k_alpha(k, m),
                    },
                    partition_mode: PartitionMode::PerInstance,
                    ..base
                },
                &data,
            )?;
            format!(
                "same trace as cvar: {}",
                tail.objective_trace == top.objective_trace
            )
        } else {
            "k = m is the average loss".to_string()
        };
        println!(
            "k = {k:<4} objective {:.4}  0-1 risk {:.4}  {line}",
            top.best_objective, top.metrics["zero_one_risk"]
        );
    }
    Ok(())
}
