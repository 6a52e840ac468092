// Max-min power allocation by multi-start projected gradient ascent,
// checked against the exhaustive grid oracle on small systems.
//
// `cargo run --release --example solve_maxmin`

use advpower::dataset::{instance_rng, GainDistribution};
use advpower::model::{GainMatrix, SystemConfig};
use advpower::solver::{brute_force_oracle, solve_maxmin, SolverConfig};
use ndarray::Array2;

pub fn run_example() -> advpower::Result<()> {
    let config = SystemConfig::new(2, 2, 10.0)?;
    let solver = SolverConfig::default();
    let mut worst_gap = f64::NEG_INFINITY;
    for index in 0..10 {
        let mut rng = instance_rng(42, index);
        let gains = GainMatrix::new(Array2::from_shape_simple_fn((2, 2), || {
            GainDistribution::Uniform.sample(&mut rng)
        }))?;
        let (powers, solved) = solve_maxmin(&config, &gains, &solver)?;
        let (_, grid) = brute_force_oracle(&config, &gains, 21)?;
        worst_gap = worst_gap.max(grid - solved);
        println!(
            "instance {index}: solver {solved:.4}  grid {grid:.4}  total power {:.3}",
            powers.total()
        );
    }
    println!("largest shortfall against the grid: {worst_gap:.4} bits");
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
