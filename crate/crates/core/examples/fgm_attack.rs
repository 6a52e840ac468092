// Fast-gradient attack through a surrogate network: the perturbation
// follows the sign-shifted input gradient of the surrogate's loss.
//
// `cargo run --release --example fgm_attack`

use advpower::attacks::{fgm_attack, AttackBudget, FgmSign, Scope};
use advpower::dataset::{generate_dataset, GainDistribution};
use advpower::model::{achieved_rates, normalized_min_rate, GainMatrix, SystemConfig};
use advpower::neural::{train, LossKind, NetworkSpec, TrainConfig};
use advpower::solver::SolverConfig;

pub fn run_example() -> advpower::Result<()> {
    let config = SystemConfig::new(4, 3, 10.0)?;
    let data = generate_dataset(
        &config,
        400,
        GainDistribution::Uniform,
        12,
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
    // Black box: the surrogate is trained separately with another seed.
    let sur_cfg = TrainConfig { rng_seed: 1, ..cfg };
    let (surrogate, _) = train(spec, &sur_cfg, LossKind::Custom, &config, train_set, &[])?;

    for inst in &held_out[..3] {
        let gains = &inst.gains;
        for (name, scope) in [("UE 1", Scope::Ue(0)), ("all", Scope::All)] {
            let budget = AttackBudget::new(0.05)?.absolute(gains, scope);
            for sign in [FgmSign::Ascend, FgmSign::Descend] {
                let out = fgm_attack(
                    &surrogate,
                    &config,
                    gains,
                    scope,
                    budget,
                    inst.oracle_min_rate,
                    sign,
                )?;
                let reported = GainMatrix::clamped(gains.as_array() + out.perturbation.as_array())?;
                let alloc = bs.forward(&config, &reported)?;
                let r = achieved_rates(&config, gains, &reported, &alloc)?;
                println!(
                    "{name:>4} {sign:?}: normalized {:.4}, outages {:?}",
                    normalized_min_rate(r.min_achieved(), inst.oracle_min_rate).unwrap_or(f64::NAN),
                    r.outages()
                );
            }
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
