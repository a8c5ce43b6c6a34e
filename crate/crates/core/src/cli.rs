//! The `prospero` command line.
//!
//! Exit codes: 0 success, 2 configuration error (nothing written), 3 runtime
//! error.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::campaign::{
    metrics_report, run_campaign, write_json, write_outputs, Ablation, CampaignConfig, CampaignResult,
    SurrogateNoise, Variant,
};
use crate::dataset::{Dataset, Record};
use crate::landscapes::{random_sequence, seed_dataset, FitnessOracle, Landscape, LandscapeSpec};
use crate::masking::MaskingConfig;
use crate::prior::{fit_profile_prior, ExternalPrior, SequencePrior, UniformPrior};
use crate::rng::stream;
use crate::seq::{parse_sequence, MaskedSequence, Sequence};
use crate::smc::SmcConfig;
use crate::surrogate::TrainingConfig;

pub const CONFIG_VERSION: u32 = 1;
pub const PRIOR_CMD_ENV: &str = "PROSPERO_PRIOR_CMD";

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Runtime(m) => write!(f, "error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn config_err(e: impl fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum, Default)]
#[serde(rename_all = "lowercase")]
pub enum PriorKind {
    #[default]
    Uniform,
    /// Per-position residue frequencies of the initial dataset.
    Profile,
    /// A child process speaking the line-delimited JSON protocol.
    External,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub kind: PriorKind,
    pub pseudocount: f64,
    pub command: Option<String>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            kind: PriorKind::Uniform,
            pseudocount: 1.0,
            command: None,
        }
    }
}

/// Where the initial labelled data comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    /// `sequence,fitness[,round]` CSV. When absent, mutants of `wild_type`
    /// are generated and labelled by the landscape.
    pub path: Option<PathBuf>,
    /// Random when absent.
    pub wild_type: Option<String>,
    pub size: usize,
    pub max_mutations: usize,
    pub seed: u64,
}

impl Default for InitialConfig {
    fn default() -> Self {
        InitialConfig {
            path: None,
            wild_type: None,
            size: 500,
            max_mutations: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub snr: Vec<f64>,
    pub seeds: Vec<u64>,
    pub members: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            snr: vec![-20.0, -10.0, 0.0, 10.0, 20.0, 60.0],
            seeds: vec![0, 1, 2, 3, 4],
            members: 3,
        }
    }
}

/// The whole configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub version: u32,
    pub landscape: LandscapeSpec,
    #[serde(default)]
    pub initial: InitialConfig,
    #[serde(default)]
    pub prior: PriorConfig,
    #[serde(default = "default_rounds")]
    pub rounds_n: usize,
    #[serde(default = "default_budget")]
    pub oracle_budget_k: usize,
    #[serde(default)]
    pub masking: MaskingConfig,
    #[serde(default)]
    pub smc: SmcConfig,
    #[serde(default)]
    pub surrogate: TrainingConfig,
    #[serde(default)]
    pub surrogate_noise: Option<SurrogateNoise>,
    #[serde(default)]
    pub ablation: Ablation,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_rounds() -> usize {
    CampaignConfig::default().rounds_n
}

fn default_budget() -> usize {
    CampaignConfig::default().oracle_budget_k
}

impl RunConfig {
    pub fn campaign(&self) -> CampaignConfig {
        CampaignConfig {
            rounds_n: self.rounds_n,
            oracle_budget_k: self.oracle_budget_k,
            masking: self.masking.clone(),
            smc: self.smc.clone(),
            surrogate: self.surrogate.clone(),
            surrogate_noise: self.surrogate_noise.clone(),
            ablation: self.ablation,
            seed: self.seed,
        }
    }

    /// Copies coupled and length-dependent campaign settings back so the
    /// echo shows what actually ran.
    fn resolve(&mut self, len: usize) {
        let c = self.campaign().resolved(len);
        self.masking = c.masking;
        self.smc = c.smc;
    }
}

fn lowercase_keys(v: toml::Value) -> toml::Value {
    match v {
        toml::Value::Table(t) => {
            toml::Value::Table(t.into_iter().map(|(k, v)| (k.to_lowercase(), lowercase_keys(v))).collect())
        }
        toml::Value::Array(a) => toml::Value::Array(a.into_iter().map(lowercase_keys).collect()),
        other => other,
    }
}

/// Applies `a.b.c=value`. The value is read as TOML, falling back to a
/// bare string.
pub fn apply_override(root: &mut toml::Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_err(format!("override `{assignment}` is not key=value")))?;
    let path: Vec<String> = key.trim().split('.').map(|s| s.trim().to_lowercase()).collect();
    if path.iter().any(|s| s.is_empty()) {
        return Err(config_err(format!("bad override key `{key}`")));
    }
    let raw = raw.trim();
    let value = match toml::from_str::<toml::Table>(&format!("v = {raw}")) {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let (last, parents) = path.split_last().expect("non-empty");
    let mut table = root;
    for p in parents {
        let entry = table
            .entry(p.clone())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| config_err(format!("override `{key}`: `{p}` is not a table")))?;
    }
    table.insert(last.clone(), value);
    Ok(())
}

/// Reads the config, applies overrides and checks the schema.
pub fn load_config(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let value: toml::Table = toml::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let mut table = match lowercase_keys(toml::Value::Table(value)) {
        toml::Value::Table(t) => t,
        _ => unreachable!(),
    };
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    match table.get("version").and_then(|v| v.as_integer()) {
        Some(v) if v == CONFIG_VERSION as i64 => {}
        Some(v) => return Err(config_err(format!("unsupported config version {v}, expected {CONFIG_VERSION}"))),
        None => return Err(config_err("config must set `version = 1`")),
    }
    let mut cfg: RunConfig = table
        .try_into()
        .map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    // relative data paths are taken from the config's directory
    let base = path.parent().unwrap_or(Path::new("."));
    if let LandscapeSpec::Table { path: p } = &mut cfg.landscape {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    if let Some(p) = &mut cfg.initial.path {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    }
    Ok(cfg)
}

/// Everything needed to run campaigns, built before any output is written.
pub struct Setup {
    pub config: RunConfig,
    pub landscape: Arc<dyn Landscape>,
    pub initial: Dataset,
    pub prior: Box<dyn SequencePrior>,
}

pub fn build_initial(cfg: &RunConfig, landscape: &dyn Landscape) -> Result<Dataset, CliError> {
    let init = &cfg.initial;
    if let Some(path) = &init.path {
        let file = fs::File::open(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let d = Dataset::read_csv(file).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        // everything supplied up front counts as initial data
        let records = d
            .records()
            .iter()
            .map(|r| Record { round: 0, ..r.clone() })
            .collect();
        return Dataset::from_records(records).map_err(config_err);
    }
    let len = landscape.sequence_len();
    let wild_type = match &init.wild_type {
        Some(text) => parse_sequence(text).map_err(|e| config_err(format!("initial.wild_type: {e}")))?,
        None => random_sequence(len, &mut stream(init.seed, &[0x77])).map_err(config_err)?,
    };
    if wild_type.len() != len {
        return Err(config_err(format!(
            "initial.wild_type has length {}, landscape has {len}",
            wild_type.len()
        )));
    }
    seed_dataset(landscape, &wild_type, init.size, init.max_mutations, &mut stream(init.seed, &[0x64])).map_err(config_err)
}

pub fn build_prior(cfg: &PriorConfig, initial: &Dataset, cmd_flag: Option<&str>) -> Result<Box<dyn SequencePrior>, CliError> {
    Ok(match cfg.kind {
        PriorKind::Uniform => Box::new(UniformPrior),
        PriorKind::Profile => {
            let corpus: Vec<Sequence> = initial.sequences().cloned().collect();
            Box::new(fit_profile_prior(&corpus, cfg.pseudocount).map_err(config_err)?)
        }
        PriorKind::External => {
            let env = std::env::var(PRIOR_CMD_ENV).ok();
            let cmd = cmd_flag
                .map(str::to_string)
                .or(env)
                .or_else(|| cfg.command.clone())
                .ok_or_else(|| config_err(format!("external prior needs --prior-cmd, {PRIOR_CMD_ENV} or prior.command")))?;
            Box::new(ExternalPrior::spawn(&cmd).map_err(runtime_err)?)
        }
    })
}

#[derive(Debug, Parser)]
#[command(name = "prospero", version, about = "Surrogate-guided sequence design with constrained SMC")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one campaign.
    Run(CommonArgs),
    /// One campaign per SNR and seed with a noisy-oracle surrogate.
    NoiseSweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Comma-separated SNR values in dB; defaults to `sweep.snr`.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr: Option<Vec<f64>>,
        /// Parallel campaigns.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// The full method and four ablated variants over `sweep.seeds`.
    Ablate {
        #[command(flatten)]
        common: CommonArgs,
        /// Use a noisy-oracle surrogate at this SNR instead of training.
        #[arg(long, allow_hyphen_values = true)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Recompute `report.json` from a finished run's `dataset.csv`.
    Report {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Serve a built-in prior over stdin/stdout using the external-prior
    /// protocol. Useful as a mock backend.
    ServePrior {
        #[arg(long, value_enum, default_value_t = PriorKind::Uniform)]
        kind: PriorKind,
        /// `sequence,fitness` CSV the profile prior is fitted to.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        pseudocount: f64,
    },
    /// Handshake with an external prior and fuzz it with random queries.
    ProtocolCheck {
        #[arg(long)]
        prior_cmd: Option<String>,
        #[arg(long, default_value_t = 30)]
        length: usize,
        #[arg(long, default_value_t = 1000)]
        queries: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Campaign seed (overrides `seed`).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// `key=value` override; dotted keys reach into tables. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[arg(long, value_enum)]
    pub prior: Option<PriorKind>,
    /// External prior command line (overrides the environment).
    #[arg(long)]
    pub prior_cmd: Option<String>,
}

fn prepare(args: &CommonArgs) -> Result<Setup, CliError> {
    let mut config = load_config(&args.config, &args.overrides)?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(kind) = args.prior {
        config.prior.kind = kind;
    }
    let landscape = config.landscape.build().map_err(config_err)?;
    let initial = build_initial(&config, landscape.as_ref())?;
    let len = initial.sequence_len().ok_or_else(|| config_err("initial dataset is empty"))?;
    if len != landscape.sequence_len() {
        return Err(config_err(format!(
            "initial data has length {len}, landscape has {}",
            landscape.sequence_len()
        )));
    }
    config.campaign().validate(len).map_err(config_err)?;
    config.resolve(len);
    let prior = build_prior(&config.prior, &initial, args.prior_cmd.as_deref())?;
    Ok(Setup {
        config,
        landscape,
        initial,
        prior,
    })
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| runtime_err(format!("cannot create {}: {e}", dir.display())))
}

fn campaign_once(setup: &Setup, cfg: &CampaignConfig) -> Result<CampaignResult, CliError> {
    let oracle = FitnessOracle::new(setup.landscape.clone());
    run_campaign(cfg, &oracle, setup.prior.as_ref(), setup.initial.clone()).map_err(runtime_err)
}

/// Runs `jobs` at a time on scoped threads, keeping input order.
fn run_parallel<T: Sync, R: Send>(
    items: &[T],
    jobs: usize,
    f: impl Fn(&T) -> Result<R, CliError> + Sync,
) -> Result<Vec<R>, CliError> {
    let jobs = jobs.max(1);
    let mut out = Vec::with_capacity(items.len());
    for chunk in items.chunks(jobs) {
        let results: Vec<Result<R, CliError>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk.iter().map(|it| s.spawn(|| f(it))).collect();
            handles
                .into_iter()
                .map(|h| h.join().unwrap_or_else(|_| Err(runtime_err("worker panicked"))))
                .collect()
        });
        for r in results {
            out.push(r?);
        }
    }
    Ok(out)
}

pub fn cmd_run(args: &CommonArgs) -> Result<(), CliError> {
    let setup = prepare(args)?;
    create_out(&args.out)?;
    write_json(&args.out.join("config.echo.json"), &setup.config).map_err(runtime_err)?;
    let result = campaign_once(&setup, &setup.config.campaign())?;
    write_outputs(&args.out, &result).map_err(runtime_err)?;
    eprintln!(
        "best fitness {:.6} (start {:.6}), {} oracle queries",
        result.report.max_fitness, result.initial_best, result.oracle_queries
    );
    Ok(())
}

pub fn cmd_noise_sweep(args: &CommonArgs, snr: Option<&[f64]>, jobs: usize) -> Result<(), CliError> {
    let mut setup = prepare(args)?;
    if let Some(snr) = snr {
        setup.config.sweep.snr = snr.to_vec();
    }
    let sweep = setup.config.sweep.clone();
    if sweep.snr.is_empty() || sweep.seeds.is_empty() {
        return Err(config_err("noise sweep needs at least one SNR value and one seed"));
    }
    if sweep.snr.iter().any(|s| !s.is_finite()) {
        return Err(config_err("SNR values must be finite"));
    }
    let seeds = match args.seed {
        Some(s) => vec![s],
        None => sweep.seeds.clone(),
    };
    create_out(&args.out)?;
    write_json(&args.out.join("config.echo.json"), &setup.config).map_err(runtime_err)?;

    let grid: Vec<(f64, u64)> = sweep.snr.iter().flat_map(|&s| seeds.iter().map(move |&z| (s, z))).collect();
    let rows = run_parallel(&grid, jobs, |&(snr, seed)| {
        let mut c = setup.config.campaign();
        c.seed = seed;
        c.surrogate_noise = Some(SurrogateNoise {
            snr_db: snr,
            members: sweep.members,
        });
        Ok((snr, seed, campaign_once(&setup, &c)?))
    })?;
    let path = args.out.join("noise_sweep.csv");
    let mut w = csv::Writer::from_path(&path).map_err(runtime_err)?;
    w.write_record(["snr", "seed", "max_fitness", "initial_best", "oracle_queries"])
        .map_err(runtime_err)?;
    for (snr, seed, r) in &rows {
        w.write_record([
            snr.to_string(),
            seed.to_string(),
            r.report.max_fitness.to_string(),
            r.initial_best.to_string(),
            r.oracle_queries.to_string(),
        ])
        .map_err(runtime_err)?;
    }
    w.flush().map_err(runtime_err)?;
    Ok(())
}

pub fn cmd_ablate(args: &CommonArgs, snr: Option<f64>, jobs: usize) -> Result<(), CliError> {
    let setup = prepare(args)?;
    let seeds = match args.seed {
        Some(s) => vec![s],
        None => setup.config.sweep.seeds.clone(),
    };
    if seeds.is_empty() {
        return Err(config_err("ablation needs at least one seed"));
    }
    create_out(&args.out)?;
    write_json(&args.out.join("config.echo.json"), &setup.config).map_err(runtime_err)?;

    let grid: Vec<(Variant, u64)> = Variant::ALL.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    let rows = run_parallel(&grid, jobs, |&(variant, seed)| {
        let mut c = setup.config.campaign();
        c.seed = seed;
        c.ablation = variant.ablation();
        if let Some(snr) = snr {
            c.surrogate_noise = Some(SurrogateNoise {
                snr_db: snr,
                members: setup.config.sweep.members,
            });
        }
        Ok((variant, seed, campaign_once(&setup, &c)?))
    })?;
    let path = args.out.join("ablation.csv");
    let mut w = csv::Writer::from_path(&path).map_err(runtime_err)?;
    w.write_record([
        "variant",
        "seed",
        "use_smc_resampling",
        "use_targeted_masking",
        "use_raa_constraint",
        "max_fitness",
        "initial_best",
    ])
    .map_err(runtime_err)?;
    for (v, seed, r) in &rows {
        let a = v.ablation();
        w.write_record([
            v.label().to_string(),
            seed.to_string(),
            a.use_smc_resampling.to_string(),
            a.use_targeted_masking.to_string(),
            a.use_raa_constraint.to_string(),
            r.report.max_fitness.to_string(),
            r.initial_best.to_string(),
        ])
        .map_err(runtime_err)?;
    }
    w.flush().map_err(runtime_err)?;
    Ok(())
}

pub fn cmd_report(out: &Path) -> Result<(), CliError> {
    let path = out.join("dataset.csv");
    let file = fs::File::open(&path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
    let data = Dataset::read_csv(file).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
    let initial: Vec<&Record> = data.records().iter().filter(|r| r.round == 0).collect();
    let start = initial
        .iter()
        .fold(None::<&Record>, |b, r| match b {
            Some(b) if b.fitness >= r.fitness => Some(b),
            _ => Some(r),
        })
        .ok_or_else(|| config_err("dataset has no round-0 records"))?;
    let reference: Vec<Sequence> = initial.iter().map(|r| r.sequence.clone()).collect();
    let generated = data.since_round(1);
    let pool = if generated.is_empty() { initial.clone() } else { generated };
    let report = metrics_report(&pool, &start.sequence, Some(&reference)).map_err(runtime_err)?;
    write_json(&out.join("report.json"), &report).map_err(runtime_err)
}

pub fn cmd_protocol_check(cmd: Option<&str>, length: usize, queries: usize, seed: u64) -> Result<(), CliError> {
    use rand::Rng;
    let cmd = cmd
        .map(str::to_string)
        .or_else(|| std::env::var(PRIOR_CMD_ENV).ok())
        .ok_or_else(|| config_err(format!("need --prior-cmd or {PRIOR_CMD_ENV}")))?;
    if length == 0 {
        return Err(config_err("length must be positive"));
    }
    let prior = ExternalPrior::spawn(&cmd).map_err(runtime_err)?;
    let mut rng = stream(seed, &[]);
    let mut failures = 0;
    for _ in 0..queries {
        let x = random_sequence(length, &mut rng).map_err(runtime_err)?;
        let n = rng.random_range(1..=length);
        let positions: Vec<usize> = rand::seq::index::sample(&mut rng, length, n).into_vec();
        let masked = MaskedSequence::mask(&x, &positions).map_err(runtime_err)?;
        if let Err(e) = crate::prior::conditional_logprobs(&prior, &masked, positions[0]) {
            failures += 1;
            log::warn!("query failed: {e}");
        }
    }
    println!(
        "model {}: {} queries, {} rejected, {} failed",
        prior.model(),
        prior.query_count(),
        prior.rejected_count(),
        failures
    );
    if failures > 0 {
        return Err(runtime_err(format!("{failures} of {queries} queries failed validation")));
    }
    Ok(())
}

pub fn cmd_serve_prior(kind: PriorKind, dataset: Option<&Path>, pseudocount: f64) -> Result<(), CliError> {
    let prior: Box<dyn SequencePrior> = match (kind, dataset) {
        (PriorKind::Uniform, _) => Box::new(UniformPrior),
        (PriorKind::Profile, Some(path)) => {
            let file = fs::File::open(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
            let data = Dataset::read_csv(file).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            let corpus: Vec<Sequence> = data.sequences().cloned().collect();
            Box::new(fit_profile_prior(&corpus, pseudocount).map_err(config_err)?)
        }
        (PriorKind::Profile, None) => return Err(config_err("profile prior needs --dataset")),
        (PriorKind::External, _) => return Err(config_err("cannot serve an external prior")),
    };
    let stdin = std::io::stdin();
    crate::prior::external::serve(prior.as_ref(), stdin.lock(), std::io::stdout().lock()).map_err(runtime_err)
}

pub fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::NoiseSweep { common, snr, jobs } => cmd_noise_sweep(&common, snr.as_deref(), jobs),
        Command::Ablate { common, snr, jobs } => cmd_ablate(&common, snr, jobs),
        Command::Report { out } => cmd_report(&out),
        Command::ServePrior {
            kind,
            dataset,
            pseudocount,
        } => cmd_serve_prior(kind, dataset.as_deref(), pseudocount),
        Command::ProtocolCheck {
            prior_cmd,
            length,
            queries,
            seed,
        } => cmd_protocol_check(prior_cmd.as_deref(), length, queries, seed),
    }
}

/// Entry point; returns the process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
