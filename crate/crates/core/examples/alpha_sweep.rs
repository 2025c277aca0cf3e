//! Sweep the CVaR level on the synthetic benchmark and print how the
//! subgroup risk gap and the overall risk move, averaged over several seeds.

use fairrisk::data::{generate_synth, SynthSpec};
use fairrisk::optim::{alpha_sweep, TrainConfig};
use fairrisk::riskvar::{expectation, AggregatorSpec};

fn main() -> fairrisk::Result<()> {
    let alphas = [0.1, 0.3, 0.5, 0.7, 0.9];
    let seeds = 10;
    let mut gap = vec![0.0; alphas.len()];
    let mut risk = vec![0.0; alphas.len()];
    for seed in 0..seeds {
        let data = generate_synth(&SynthSpec {
            seed,
            ..SynthSpec::default()
        })?;
        let template = TrainConfig {
            aggregator: AggregatorSpec::Cvar { alpha: 0.5 },
            seed,
            ..TrainConfig::default()
        };
        for (i, report) in alpha_sweep(&template, &data, &alphas)?.iter().enumerate() {
            let r = &report.final_subgroup_risks;
            gap[i] += (r.max() - r.min()) / seeds as f64;
            risk[i] += expectation(r) / seeds as f64;
        }
    }
    println!("{:>6} {:>10} {:>10}", "alpha", "gap", "risk");
    for (i, a) in alphas.iter().enumerate() {
        println!("{a:>6.1} {:>10.4} {:>10.4}", gap[i], risk[i]);
    }
    Ok(())
}
