//! Load a CSV with a categorical sensitive column, train a CVaR model and
//! print the learned weights next to their feature names.

use std::io::Write;

use fairrisk::data::{load_csv, split, standardize, CsvSchema};
use fairrisk::metrics::evaluate;
use fairrisk::optim::{train, TrainConfig};
use fairrisk::riskvar::AggregatorSpec;
use fairrisk::subgroup::{partition, LossSpec, PartitionMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::temp_dir().join("fairrisk-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("loans.csv");
    let mut file = std::fs::File::create(&path)?;
    writeln!(file, "income,debt,region,approved")?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..400 {
        let region = ["north", "south"][rng.random_range(0..2)];
        let income: f64 = rng.random_range(10.0..100.0);
        let debt: f64 = rng.random_range(0.0..50.0);
        let noise = if region == "south" { 25.0 } else { 5.0 };
        let approved = income - debt + rng.random_range(-noise..noise) > 30.0;
        writeln!(
            file,
            "{income:.2},{debt:.2},{region},{}",
            if approved { "yes" } else { "no" }
        )?;
    }
    drop(file);

    let schema = CsvSchema {
        positive_label_token: "yes".into(),
        ..CsvSchema::new("approved", "region")
    };
    let data = load_csv(&path, &schema)?;
    let parts = split(&data, 0.75, 9)?;
    let (train_set, test_set, _) = standardize(&parts.train, &parts.test)?;

    let config = TrainConfig {
        aggregator: AggregatorSpec::Cvar { alpha: 0.5 },
        loss: LossSpec::Logistic,
        ..TrainConfig::default()
    };
    let report = train(&config, &train_set)?;
    for (name, w) in train_set.feature_names().iter().zip(&report.model.weights) {
        println!("{name:<14} {w:+.4}");
    }
    println!("{:<14} {:+.4}", "intercept", report.model.intercept);

    let groups = partition(&test_set, PartitionMode::Categorical)?;
    let eval = evaluate(&report.model, &test_set, &groups, config.loss)?;
    println!(
        "test 0-1 risk {:.4}, per group {:?}",
        eval.zero_one_risk, eval.subgroup_zero_one
    );
    Ok(())
}
