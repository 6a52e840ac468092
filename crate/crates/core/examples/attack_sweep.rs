// Every attack and target over a grid of budget ratios, aggregated into a
// results table and rendered as text.
//
// `cargo run --release --example attack_sweep`

use advpower::attacks::AttackTarget;
use advpower::dataset::{generate_dataset, GainDistribution};
use advpower::harness::{render_report, run_sweep, ExperimentPlan, Pipeline};
use advpower::model::SystemConfig;
use advpower::neural::{train, LossKind, NetworkSpec, TrainConfig};
use advpower::solver::SolverConfig;

pub fn run_example() -> advpower::Result<()> {
    let config = SystemConfig::new(4, 3, 10.0)?;
    let data = generate_dataset(
        &config,
        400,
        GainDistribution::Uniform,
        13,
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
    let plan = ExperimentPlan {
        targets: vec![
            AttackTarget::SingleUe(0),
            AttackTarget::BestUe,
            AttackTarget::AllUes,
        ],
        ratios: vec![0.0, 0.02, 0.05, 0.1],
        ..ExperimentPlan::default()
    };
    let out = run_sweep(&pipeline, &plan, held_out)?;
    print!("{}", render_report(&out.rows));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
