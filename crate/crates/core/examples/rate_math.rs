// Rates, gradients and outage on a hand-sized system.
//
// `cargo run --example rate_math`

use advpower::model::{
    achieved_rates, min_rate, rate_gain_gradient, rate_per_ue, rate_power_gradient, GainMatrix,
    PowerAllocation, SystemConfig,
};
use ndarray::array;

pub fn run_example() -> advpower::Result<()> {
    let config = SystemConfig::new(2, 2, 10.0)?;
    let gains = GainMatrix::new(array![[0.9, 0.2], [0.3, 0.8]])?;
    let powers = PowerAllocation::new(array![[4.0, 1.0], [1.0, 4.0]])?;

    let rates = rate_per_ue(&config, &gains, &powers)?;
    let (worst, ue) = min_rate(&rates)?;
    println!(
        "rates {:?}, min {worst:.4} at UE {}",
        rates.as_slice(),
        ue + 1
    );

    for j in 0..config.num_ues() {
        let eta = rate_gain_gradient(&config, &gains, &powers, j)?;
        println!("d r_{} / d g = {eta:.4?}", j + 1);
    }
    println!(
        "d r_1 / d p =\n{:.4}",
        rate_power_gradient(&config, &gains, &powers, 0)?
    );

    // Report a weaker channel than the real one: the BS transmits below
    // capacity and nothing is lost.
    let weaker = GainMatrix::new(array![[0.6, 0.2], [0.3, 0.8]])?;
    let r = achieved_rates(&config, &gains, &weaker, &powers)?;
    println!("understated gains: outages {:?}", r.outages());

    // Overstate it and UE 1 transmits faster than its link can carry.
    let stronger = GainMatrix::new(array![[1.0, 0.2], [0.6, 0.8]])?;
    let r = achieved_rates(&config, &gains, &stronger, &powers)?;
    println!(
        "overstated gains: outages {:?}, achieved {:?}",
        r.outages(),
        r.achieved.as_slice()
    );
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
