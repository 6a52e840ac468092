// Trains the power-allocation network with each of the four losses on the
// same data and seed, and scores them on held-out instances.
//
// `cargo run --release --example train_network`

use advpower::dataset::{generate_dataset, GainDistribution};
use advpower::model::SystemConfig;
use advpower::neural::{load_model, save_model, train, LossKind, NetworkSpec, TrainConfig};
use advpower::solver::SolverConfig;

pub fn run_example() -> advpower::Result<()> {
    let config = SystemConfig::new(2, 2, 10.0)?;
    let data = generate_dataset(
        &config,
        600,
        GainDistribution::Uniform,
        1,
        &SolverConfig::default(),
    )?;
    let (train_set, held_out) = data.split(0.5);
    let spec = NetworkSpec::new(&config, vec![32, 32]);
    let cfg = TrainConfig {
        epochs: 20,
        batch_size: 32,
        ..TrainConfig::default()
    };
    for kind in LossKind::all() {
        let (net, log) = train(
            spec.clone(),
            &cfg,
            kind,
            &config,
            train_set,
            &held_out[..50],
        )?;
        let score = net
            .mean_normalized_min_rate(&config, held_out)?
            .unwrap_or(f64::NAN);
        println!(
            "{kind:>6}: loss {:.4} -> {:.4}, held-out normalized min rate {:.2}%",
            log[0].loss,
            log.last().unwrap().loss,
            100.0 * score
        );
        if kind == LossKind::Custom {
            let path =
                std::env::temp_dir().join(format!("advpower-net-{}.bin", std::process::id()));
            save_model(&path, &net)?;
            assert_eq!(load_model(&path)?.params, net.params);
            let _ = std::fs::remove_file(&path);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
