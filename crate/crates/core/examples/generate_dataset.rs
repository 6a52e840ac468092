// Labeled dataset generation, CSV round trip and train/held-out split.
//
// `cargo run --release --example generate_dataset`

use advpower::dataset::{generate_dataset, read_dataset, write_dataset, GainDistribution};
use advpower::model::SystemConfig;
use advpower::solver::SolverConfig;

pub fn run_example() -> advpower::Result<()> {
    let config = SystemConfig::new(4, 3, 10.0)?;
    let data = generate_dataset(
        &config,
        64,
        GainDistribution::Uniform,
        7,
        &SolverConfig::default(),
    )?;
    let mean = data
        .instances
        .iter()
        .map(|i| i.oracle_min_rate)
        .sum::<f64>()
        / 64.0;
    println!(
        "64 instances, mean optimal min rate {mean:.3} bits, {} resampled",
        data.meta.resampled
    );

    let path = std::env::temp_dir().join(format!("advpower-example-{}.csv", std::process::id()));
    write_dataset(&path, &data)?;
    let back = read_dataset(&path)?;
    assert_eq!(back.instances, data.instances);
    let (train, held_out) = back.split(0.5);
    println!(
        "read back {}: {} train / {} held out",
        path.display(),
        train.len(),
        held_out.len()
    );
    let _ = std::fs::remove_file(advpower::dataset::sidecar_path(&path));
    let _ = std::fs::remove_file(&path);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
