// The command pipeline driven from a run configuration: generate data,
// train, attack one instance, sweep and report, all in a scratch directory.
// The `advpower` binary does the same from the command line.
//
// `cargo run --release --example run_config`

use advpower::cli::{cmd_attack, cmd_gen_data, cmd_report, cmd_sweep, cmd_train, RunConfig};

const CONFIG: &str = r#"
[system]
num_subcarriers = 3
num_ues = 2
total_power = 10.0

[dataset]
count = 200
seed = 5
path = "data.csv"

[model]
path = "model.bin"
hidden_sizes = [16, 16]

[model.train]
epochs = 10
batch_size = 32

[attack]
kind = "analytical"
target = "all"
ratio = 0.1

[harness]
results = "results.csv"

[harness.plan]
attacks = ["scaling", "analytical"]
targets = ["single:1", "all"]
ratios = [0.0, 0.1]
"#;

pub fn run_example() -> advpower::Result<()> {
    let dir = std::env::temp_dir().join(format!("advpower-run-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| advpower::Error::Config(e.to_string()))?;
    let path = dir.join("run.toml");
    std::fs::write(&path, CONFIG).map_err(|e| advpower::Error::Config(e.to_string()))?;
    let cfg = RunConfig::load(&path)?;

    let mut out = std::io::stdout();
    cmd_gen_data(&cfg, &mut out)?;
    cmd_train(&cfg, &mut out)?;
    cmd_attack(&cfg, 0, None, &mut out)?;
    cmd_sweep(&cfg, None, &mut out)?;
    cmd_report(&cfg, &mut out)?;
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}

#[allow(dead_code)]
fn main() {
    run_example().unwrap();
}
