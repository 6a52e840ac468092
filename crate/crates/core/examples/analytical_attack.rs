// Gradient-guided gain reduction against one UE and against all UEs,
// compared with plain scaling of the same budget.
//
// `cargo run --release --example analytical_attack`

use advpower::attacks::{
    analytical_attack_all, analytical_attack_single, scaling_attack, AttackBudget, Scope,
    DEFAULT_EPSILON,
};
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
        11,
        &SolverConfig::default(),
    )?;
    let (train_set, held_out) = data.split(0.75);
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 32,
        ..TrainConfig::default()
    };
    let spec = NetworkSpec::new(&config, vec![32, 32]);
    let (bs, _) = train(spec, &cfg, LossKind::Custom, &config, train_set, &[])?;

    let inst = &held_out[0];
    let gains = &inst.gains;
    // White box: the adversary reads the BS model's allocation.
    let powers = bs.forward(&config, gains)?;
    let score = |reported: &GainMatrix| -> advpower::Result<f64> {
        let alloc = bs.forward(&config, reported)?;
        let r = achieved_rates(&config, gains, reported, &alloc)?;
        Ok(normalized_min_rate(r.min_achieved(), inst.oracle_min_rate).unwrap_or(f64::NAN))
    };
    let apply = |delta: &advpower::model::Perturbation| {
        GainMatrix::clamped(gains.as_array() + delta.as_array())
    };

    println!("no attack: {:.4}", score(gains)?);
    for ratio in [0.05, 0.1, 0.2] {
        let ue1 = AttackBudget::new(ratio)?.absolute(gains, Scope::Ue(0));
        let all = AttackBudget::new(ratio)?.absolute(gains, Scope::All);
        let single = analytical_attack_single(&config, gains, &powers, 0, ue1, DEFAULT_EPSILON)?;
        let every = analytical_attack_all(&config, gains, &powers, all, DEFAULT_EPSILON)?;
        let scaled = scaling_attack(gains, Scope::All, ratio)?;
        println!(
            "rho {ratio:.2}: analytical UE 1 {:.4}  analytical all {:.4}  scaling all {:.4}  (|delta| {:.3})",
            score(&apply(&single)?)?,
            score(&apply(&every)?)?,
            score(&apply(&scaled)?)?,
            every.l1_norm()
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
