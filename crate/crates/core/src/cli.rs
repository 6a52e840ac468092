//! Command-line front end: one TOML run configuration per invocation, bound
//! to data generation, training, single-instance attacks, sweeps and reports.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::attacks::{AttackKind, AttackTarget, UncertaintyModel, DEFAULT_EPSILON};
use crate::dataset::{
    generate_dataset, read_dataset, sidecar_path, write_dataset, write_json, Dataset,
    GainDistribution, LabeledInstance,
};
use crate::error::{Error, Result};
use crate::harness::{
    read_results, render_report, run_sweep, write_results, AttackSpec, ExperimentPlan, FgmOptions,
    Pipeline, ResultsMeta, RESULTS_FORMAT_VERSION,
};
use crate::model::SystemConfig;
use crate::neural::{
    format_training_log, load_model_for, save_model, train, LossKind, Network, NetworkSpec,
    TrainConfig, DESK_HIDDEN,
};
use crate::solver::SolverConfig;

#[derive(Debug, Parser)]
#[command(
    name = "advpower",
    version,
    about = "Learned max-min power allocation under adversarial attack"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw channel instances and label them with the max-min solver.
    GenData(CommonArgs),
    /// Train the BS network (and the adversary's surrogate).
    Train {
        #[command(flatten)]
        common: CommonArgs,
        /// Overrides `model.loss`.
        #[arg(long)]
        loss: Option<LossKind>,
    },
    /// Attack one held-out instance and print what happened.
    Attack {
        #[command(flatten)]
        common: CommonArgs,
        /// Index into the held-out instances.
        #[arg(long, default_value_t = 0)]
        instance: usize,
        /// single:J (1-based), best or all; overrides `attack.target`.
        #[arg(long)]
        target: Option<AttackTarget>,
    },
    /// Run the attack grid over the held-out instances.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Replaces `harness.plan.targets` with a single target.
        #[arg(long)]
        target: Option<AttackTarget>,
    },
    /// Render a results file as text tables.
    Report(CommonArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the seed that drives the command.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Caps worker threads.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Single-threaded execution.
    #[arg(long)]
    pub deterministic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    pub num_subcarriers: usize,
    pub num_ues: usize,
    pub total_power: f64,
    /// Per-subcarrier noise power; `1/N` on every subcarrier when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<Vec<f64>>,
}

impl SystemSection {
    pub fn build(&self) -> Result<SystemConfig> {
        let c = match &self.noise {
            None => SystemConfig::new(self.num_subcarriers, self.num_ues, self.total_power),
            Some(noise) => SystemConfig::with_noise(
                self.num_subcarriers,
                self.num_ues,
                self.total_power,
                noise.clone(),
            ),
        };
        c.map_err(|e| Error::Config(format!("[system]: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub count: usize,
    #[serde(default)]
    pub distribution: GainDistribution,
    #[serde(default)]
    pub seed: u64,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateMode {
    /// Trained separately from the BS model, with the next seed.
    #[default]
    Independent,
    /// The adversary holds the BS model itself.
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    #[serde(default = "default_hidden")]
    pub hidden_sizes: Vec<usize>,
    #[serde(default)]
    pub loss: LossKind,
    pub path: PathBuf,
    #[serde(default)]
    pub surrogate: SurrogateMode,
    /// Defaults to `<path>.surrogate`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub surrogate_path: Option<PathBuf>,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_hidden() -> Vec<usize> {
    DESK_HIDDEN.to_vec()
}

impl ModelSection {
    pub fn surrogate_file(&self) -> Option<PathBuf> {
        match self.surrogate {
            SurrogateMode::Shared => None,
            SurrogateMode::Independent => Some(self.surrogate_path.clone().unwrap_or_else(|| {
                let mut s = self.path.as_os_str().to_owned();
                s.push(".surrogate");
                PathBuf::from(s)
            })),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackSection {
    pub kind: AttackKind,
    pub target: AttackTarget,
    pub ratio: f64,
    pub epsilon: f64,
    pub uncertainty: UncertaintyModel,
    pub fgm: FgmOptions,
}

impl Default for AttackSection {
    fn default() -> Self {
        Self {
            kind: AttackKind::Analytical,
            target: AttackTarget::SingleUe(0),
            ratio: 0.1,
            epsilon: DEFAULT_EPSILON,
            uncertainty: UncertaintyModel::none(),
            fgm: FgmOptions::default(),
        }
    }
}

impl AttackSection {
    pub fn spec(&self) -> AttackSpec {
        AttackSpec {
            kind: self.kind,
            target: self.target,
            ratio: self.ratio,
            epsilon: self.epsilon,
            uncertainty: self.uncertainty,
            fgm: self.fgm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessSection {
    pub results: PathBuf,
    #[serde(default)]
    pub plan: ExperimentPlan,
}

/// The whole run configuration document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemSection,
    pub dataset: DatasetSection,
    #[serde(default)]
    pub solver: SolverConfig,
    pub model: ModelSection,
    #[serde(default)]
    pub attack: AttackSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub harness: Option<HarnessSection>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingArtifact(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::parse(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset.path);
        fix(&mut self.model.path);
        if let Some(p) = self.model.surrogate_path.as_mut() {
            fix(p);
        }
        if let Some(h) = self.harness.as_mut() {
            fix(&mut h.results);
        }
    }

    pub fn system(&self) -> Result<SystemConfig> {
        self.system.build()
    }

    pub fn network_spec(&self, config: &SystemConfig) -> NetworkSpec {
        NetworkSpec::new(config, self.model.hidden_sizes.clone())
    }

    /// Checks every section that does not depend on artifacts on disk.
    pub fn validate(&self) -> Result<()> {
        let config = self.system()?;
        if self.dataset.count == 0 {
            return Err(Error::Config("[dataset] count must be >= 1".into()));
        }
        self.dataset.distribution.validate()?;
        self.solver.validate()?;
        self.network_spec(&config)
            .validate()
            .map_err(|e| Error::Config(format!("[model]: {e}")))?;
        self.model.loss.validate()?;
        self.model.train.validate()?;
        let a = &self.attack;
        a.target
            .check(config.num_ues())
            .map_err(|e| Error::Config(format!("[attack] target: {e}")))?;
        if !(0.0..=1.0).contains(&a.ratio) {
            return Err(Error::Config(format!(
                "[attack] ratio {} outside [0, 1]",
                a.ratio
            )));
        }
        if !(a.epsilon > 0.0) {
            return Err(Error::Config("[attack] epsilon must be positive".into()));
        }
        a.uncertainty.validate()?;
        if let Some(h) = &self.harness {
            h.plan.validate(&config)?;
        }
        Ok(())
    }

    fn echo(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}

fn require_writable(path: &Path) -> Result<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => return Ok(()),
    };
    if parent.is_dir() {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "output directory {} does not exist",
            parent.display()
        )))
    }
}

fn require_exists(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact(path.to_path_buf()))
    }
}

fn out_err(e: std::io::Error) -> Error {
    Error::io("<stdout>", e)
}

/// Sidecar written next to a saved model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelMeta {
    pub loss: LossKind,
    pub train: TrainConfig,
    pub held_out_normalized: Option<f64>,
    pub run_config: serde_json::Value,
}

fn load_checked_dataset(cfg: &RunConfig, config: &SystemConfig) -> Result<Dataset> {
    let d = read_dataset(&cfg.dataset.path)?;
    let sys = d.meta.system()?;
    if sys != *config {
        return Err(Error::Config(format!(
            "dataset {} was generated for a different [system]",
            cfg.dataset.path.display()
        )));
    }
    Ok(d)
}

pub fn cmd_gen_data(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    cfg.validate()?;
    require_writable(&cfg.dataset.path)?;
    let config = cfg.system()?;
    let mut d = generate_dataset(
        &config,
        cfg.dataset.count,
        cfg.dataset.distribution,
        cfg.dataset.seed,
        &cfg.solver,
    )?;
    d.meta.run_config = Some(cfg.echo());
    write_dataset(&cfg.dataset.path, &d)?;
    let mean =
        d.instances.iter().map(|i| i.oracle_min_rate).sum::<f64>() / d.instances.len() as f64;
    writeln!(
        out,
        "wrote {} instances to {} (mean oracle min rate {mean:.4} bits, {} resampled)",
        d.instances.len(),
        cfg.dataset.path.display(),
        d.meta.resampled
    )
    .map_err(out_err)
}

fn train_one(
    cfg: &RunConfig,
    config: &SystemConfig,
    train_cfg: &TrainConfig,
    train_set: &[LabeledInstance],
    held_out: &[LabeledInstance],
    path: &Path,
) -> Result<Option<f64>> {
    let spec = cfg.network_spec(config);
    let validation = &held_out[..held_out.len().min(train_cfg.validation_size)];
    let (net, log) = train(
        spec,
        train_cfg,
        cfg.model.loss,
        config,
        train_set,
        validation,
    )?;
    let held = net.mean_normalized_min_rate(config, held_out)?;
    save_model(path, &net)?;
    let mut log_path = path.as_os_str().to_owned();
    log_path.push(".log");
    let log_path = PathBuf::from(log_path);
    std::fs::write(&log_path, format_training_log(&log)).map_err(|e| Error::io(&log_path, e))?;
    let meta = ModelMeta {
        loss: cfg.model.loss,
        train: train_cfg.clone(),
        held_out_normalized: held,
        run_config: cfg.echo(),
    };
    write_json(&sidecar_path(path), &meta)?;
    Ok(held)
}

pub fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    cfg.validate()?;
    require_exists(&cfg.dataset.path)?;
    require_writable(&cfg.model.path)?;
    let surrogate = cfg.model.surrogate_file();
    if let Some(p) = &surrogate {
        require_writable(p)?;
    }
    let config = cfg.system()?;
    let d = load_checked_dataset(cfg, &config)?;
    let (train_set, held_out) = d.split(cfg.model.train.train_fraction);
    if train_set.is_empty() {
        return Err(Error::Config(
            "train_fraction leaves no training instances".into(),
        ));
    }
    let held = train_one(
        cfg,
        &config,
        &cfg.model.train,
        train_set,
        held_out,
        &cfg.model.path,
    )?;
    let shown = held.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
    writeln!(
        out,
        "{} model saved to {}; held-out normalized min rate {shown} over {} instances",
        cfg.model.loss,
        cfg.model.path.display(),
        held_out.len()
    )
    .map_err(out_err)?;
    if let Some(p) = surrogate {
        let sur_cfg = TrainConfig {
            rng_seed: cfg.model.train.rng_seed.wrapping_add(1),
            ..cfg.model.train.clone()
        };
        let held = train_one(cfg, &config, &sur_cfg, train_set, held_out, &p)?;
        let shown = held.map_or_else(|| "n/a".to_string(), |v| format!("{:.2}%", 100.0 * v));
        writeln!(out, "surrogate saved to {}; held-out {shown}", p.display()).map_err(out_err)?;
    }
    Ok(())
}

struct Loaded {
    config: SystemConfig,
    dataset: Dataset,
    bs: Network,
    surrogate: Option<Network>,
}

fn load_artifacts(cfg: &RunConfig) -> Result<Loaded> {
    cfg.validate()?;
    require_exists(&cfg.dataset.path)?;
    require_exists(&cfg.model.path)?;
    let sur_path = cfg.model.surrogate_file();
    if let Some(p) = &sur_path {
        require_exists(p)?;
    }
    let config = cfg.system()?;
    let dataset = load_checked_dataset(cfg, &config)?;
    let bs = load_model_for(&cfg.model.path, &config)?;
    let surrogate = sur_path.map(|p| load_model_for(&p, &config)).transpose()?;
    Ok(Loaded {
        config,
        dataset,
        bs,
        surrogate,
    })
}

fn fmt_row(v: &[f64]) -> String {
    v.iter()
        .map(|x| format!("{x:>10.5}"))
        .collect::<Vec<_>>()
        .join(" ")
}

fn print_matrix(out: &mut dyn Write, title: &str, flat: &[f64], k: usize) -> std::io::Result<()> {
    writeln!(out, "{title}:")?;
    for row in flat.chunks(k) {
        writeln!(out, "  {}", fmt_row(row))?;
    }
    Ok(())
}

pub fn cmd_attack(
    cfg: &RunConfig,
    instance: usize,
    target: Option<AttackTarget>,
    out: &mut dyn Write,
) -> Result<()> {
    let mut cfg = cfg.clone();
    if let Some(t) = target {
        cfg.attack.target = t;
    }
    let l = load_artifacts(&cfg)?;
    let (_, held_out) = l.dataset.split(cfg.model.train.train_fraction);
    let inst = held_out.get(instance).ok_or(Error::IndexOutOfRange {
        index: instance,
        size: held_out.len(),
    })?;
    let surrogate = l.surrogate.as_ref().unwrap_or(&l.bs);
    let pipeline = Pipeline {
        solver: cfg.solver.clone(),
        ..Pipeline::new(&l.config, &l.bs, surrogate)?
    };
    let spec = cfg.attack.spec();
    let before = pipeline.no_attack(inst)?;
    let mut rng = crate::dataset::instance_rng(spec.uncertainty.rng_seed, instance as u64);
    let after = pipeline.evaluate_instance(inst, Some(&spec), &mut rng)?;

    let k = l.config.num_ues();
    let io = (|| -> std::io::Result<()> {
        writeln!(
            out,
            "instance {instance}: {} attack, target {}, rho {}",
            spec.kind, spec.target, spec.ratio
        )?;
        if let Some(j) = after.attacked_ue {
            writeln!(out, "attacked UE {}", j + 1)?;
        }
        if after.zero_gradient {
            writeln!(
                out,
                "warning: zero surrogate gradient, no perturbation applied"
            )?;
        }
        print_matrix(out, "true gains", &inst.gains.to_flat(), k)?;
        print_matrix(out, "perturbation", &after.perturbation.to_flat(), k)?;
        print_matrix(out, "reported gains", &after.reported.to_flat(), k)?;
        print_matrix(out, "allocation (before)", &before.allocation.to_flat(), k)?;
        print_matrix(out, "allocation (after)", &after.allocation.to_flat(), k)?;
        writeln!(out, "per-UE rates (bits):")?;
        writeln!(
            out,
            "  {:>4} {:>10} {:>10} {:>10} {:>10}",
            "ue", "before", "sent", "link", "achieved"
        )?;
        for j in 0..k {
            writeln!(
                out,
                "  {:>4} {:>10.5} {:>10.5} {:>10.5} {:>10.5}{}",
                j + 1,
                before.rates.achieved.0[j],
                after.rates.transmitted.0[j],
                after.rates.link.0[j],
                after.rates.achieved.0[j],
                if after.rates.outages()[j] {
                    "  outage"
                } else {
                    ""
                }
            )?;
        }
        let show = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{:.4}", v));
        writeln!(out, "oracle min rate {:.5}", inst.oracle_min_rate)?;
        writeln!(
            out,
            "normalized min rate: before {} after {}",
            show(before.normalized),
            show(after.normalized)
        )
    })();
    io.map_err(out_err)
}

pub fn cmd_sweep(cfg: &RunConfig, target: Option<AttackTarget>, out: &mut dyn Write) -> Result<()> {
    let mut cfg = cfg.clone();
    let harness = cfg
        .harness
        .as_mut()
        .ok_or_else(|| Error::Config("sweep needs a [harness] section".into()))?;
    if let Some(t) = target {
        harness.plan.targets = vec![t];
    }
    require_writable(&harness.results)?;
    let l = load_artifacts(&cfg)?;
    let harness = cfg.harness.as_ref().expect("checked above");
    let (_, held_out) = l.dataset.split(cfg.model.train.train_fraction);
    let surrogate = l.surrogate.as_ref().unwrap_or(&l.bs);
    let pipeline = Pipeline {
        solver: cfg.solver.clone(),
        ..Pipeline::new(&l.config, &l.bs, surrogate)?
    };
    let result = run_sweep(&pipeline, &harness.plan, held_out)?;
    let meta = ResultsMeta {
        format_version: RESULTS_FORMAT_VERSION,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        plan: harness.plan.clone(),
        skipped_instances: result.skipped,
        test_instances: held_out.len().min(harness.plan.test_size),
        run_config: Some(cfg.echo()),
    };
    write_results(&harness.results, &result.rows, &meta)?;
    writeln!(
        out,
        "wrote {} rows to {} ({} degenerate instances skipped)\n",
        result.rows.len(),
        harness.results.display(),
        result.skipped
    )
    .and_then(|_| write!(out, "{}", render_report(&result.rows)))
    .map_err(out_err)
}

pub fn cmd_report(cfg: &RunConfig, out: &mut dyn Write) -> Result<()> {
    let harness = cfg
        .harness
        .as_ref()
        .ok_or_else(|| Error::Config("report needs a [harness] section".into()))?;
    let rows = read_results(&harness.results)?;
    write!(out, "{}", render_report(&rows)).map_err(out_err)
}

fn apply_overrides(cfg: &mut RunConfig, command: &Command) {
    let seed = match command {
        Command::GenData(c) | Command::Report(c) => c.seed,
        Command::Train { common, .. }
        | Command::Attack { common, .. }
        | Command::Sweep { common, .. } => common.seed,
    };
    let Some(seed) = seed else { return };
    match command {
        Command::GenData(_) => cfg.dataset.seed = seed,
        Command::Train { .. } => cfg.model.train.rng_seed = seed,
        Command::Attack { .. } => cfg.attack.uncertainty.rng_seed = seed,
        Command::Sweep { .. } => {
            if let Some(h) = cfg.harness.as_mut() {
                h.plan.master_seed = seed;
            }
        }
        Command::Report(_) => {}
    }
}

fn common(command: &Command) -> &CommonArgs {
    match command {
        Command::GenData(c) | Command::Report(c) => c,
        Command::Train { common, .. }
        | Command::Attack { common, .. }
        | Command::Sweep { common, .. } => common,
    }
}

fn run_command(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    let args = common(&cli.command);
    let mut cfg = RunConfig::load(&args.config)?;
    apply_overrides(&mut cfg, &cli.command);
    match &cli.command {
        Command::GenData(_) => cmd_gen_data(&cfg, out),
        Command::Train { loss, .. } => {
            if let Some(l) = loss {
                cfg.model.loss = *l;
            }
            cmd_train(&cfg, out)
        }
        Command::Attack {
            instance, target, ..
        } => cmd_attack(&cfg, *instance, *target, out),
        Command::Sweep { target, .. } => cmd_sweep(&cfg, *target, out),
        Command::Report(_) => cmd_report(&cfg, out),
    }
}

/// Runs a parsed command on a pool sized by `--threads` / `--deterministic`.
pub fn run(cli: &Cli, out: &mut (dyn Write + Send)) -> Result<()> {
    let args = common(&cli.command);
    let threads = if args.deterministic {
        Some(1)
    } else {
        args.threads
    };
    match threads {
        None => run_command(cli, out),
        Some(0) => Err(Error::Config("--threads must be >= 1".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| run_command(cli, out)),
    }
}
