// The gradient attack on UE 1 when the adversary sees noisy gains or
// cannot apply its perturbation exactly.
//
// `cargo run --release --example uncertainty_table`

use advpower::attacks::AttackTarget;
use advpower::dataset::{generate_dataset, GainDistribution};
use advpower::harness::{uncertainty_sweep, Pipeline};
use advpower::model::SystemConfig;
use advpower::neural::{train, LossKind, NetworkSpec, TrainConfig};
use advpower::solver::SolverConfig;

pub fn run_example() -> advpower::Result<()> {
    let config = SystemConfig::new(4, 3, 10.0)?;
    let data = generate_dataset(
        &config,
        400,
        GainDistribution::Uniform,
        14,
        &SolverConfig::default(),
    )?;
    let (train_set, held_out) = data.split(0.75);
    let spec = NetworkSpec::new(&config, vec![32, 32]);
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let (bs, _) = train(
        spec.clone(),
        &cfg,
        LossKind::Custom,
        &config,
        train_set,
        &[],
    )?;
    let (surrogate, _) = train(
        spec,
        &TrainConfig { rng_seed: 1, ..cfg },
        LossKind::Custom,
        &config,
        train_set,
        &[],
    )?;
    let pipeline = Pipeline::new(&config, &bs, &surrogate)?;

    let errors = [0.05, 0.1, 0.15, 0.2];
    let table = uncertainty_sweep(
        &pipeline,
        held_out,
        AttackTarget::SingleUe(0),
        0.1,
        &errors,
        5,
        3,
    )?;
    println!("exact: {:.2}%", 100.0 * table.exact);
    println!(
        "{:<22}{}",
        "error ratio",
        errors.map(|e| format!("{:>9.0}%", 100.0 * e)).concat()
    );
    println!(
        "{:<22}{}",
        "error on channel gain",
        table
            .observation
            .iter()
            .map(|v| format!("{:>9.2}%", 100.0 * v))
            .collect::<String>()
    );
    println!(
        "{:<22}{}",
        "error on change",
        table
            .execution
            .iter()
            .map(|v| format!("{:>9.2}%", 100.0 * v))
            .collect::<String>()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
