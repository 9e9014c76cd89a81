//! Command-line interface.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand};

use crate::collector::{collect, verify_equivalence, CollectorConfig, TinyProblem, TruthOracle};
use crate::model::{load_model, save_model, train_new, BeliefModel, ImplicationModel, ObservationDataset, TrainingConfig};
use crate::network::{generate_topology, TreeTopology, DEFAULT_P_FAIL};
use crate::rng::{self, DEFAULT_SEED};
use crate::runner::{
    default_grid, dependency_report, max_budget, needs_model, prepare_model, run_experiment, training_dataset,
    write_curve_csv, write_dependency_csv, write_trials_csv, DataConfig, DependencyConfig, DeliveryMode, Domain,
    ExperimentConfig, Resources, Strategy, DEFAULT_TRIALS,
};

const STREAM_COLLECT: u64 = 0x636f_6c6c;
const STREAM_VERIFY: u64 = 0x7665_7269;

/// Active diagnosis with a learned implication model.
///
/// A `--config FILE` holds `key = value` lines whose keys are long flag
/// names of the chosen command (e.g. `trials = 500`). Blank lines and lines
/// starting with `#` are ignored. Flags given on the command line win.
#[derive(Debug, Parser)]
#[command(name = "actdiag", version, args_override_self = true)]
pub struct Cli {
    #[command(flatten)]
    pub shared: Shared,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Shared {
    /// Base seed for every random choice
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Output file (CSV, dataset, topology or model); stdout when omitted for CSV
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Worker threads for trial-parallel commands
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// Flat key = value file with default flag values
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a training dataset (one 0/1 observation row per line)
    GenData(GenData),
    /// Write a random tree topology with measurement pairs
    GenTopology,
    /// Train an implication model on a dataset
    Train(Train),
    /// Run one observation collection and write its per-step trace
    Collect(Collect),
    /// Evaluate a strategy over many trials and write the metric curve
    Eval(Eval),
    /// Bin per-link diagnosis accuracy by dependency coefficient
    DepReport(DepReport),
    /// Check entropy/information-gain argmax agreement on tiny problems
    VerifyTheorem(VerifyTheorem),
}

#[derive(Debug, Args)]
pub struct GenData {
    #[arg(long)]
    pub domain: Domain,
    #[arg(long, default_value_t = 20_000)]
    pub count: usize,
    /// Uniform permutations added per preference ranking
    #[arg(long, default_value_t = 1.0)]
    pub augment_ratio: f64,
    #[arg(long, default_value_t = DEFAULT_P_FAIL)]
    pub p_fail: f64,
    /// Topology file (network); generated from --seed when omitted
    #[arg(long)]
    pub topology: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
pub struct TrainingArgs {
    #[arg(long, default_value_t = 5)]
    pub epochs: usize,
    #[arg(long, default_value_t = 0.05)]
    pub learning_rate: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 200)]
    pub hidden: usize,
}

impl TrainingArgs {
    fn config(&self, seed: u64) -> TrainingConfig {
        TrainingConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            hidden_units: self.hidden,
            rng_seed: seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct Train {
    /// Dataset CSV written by gen-data
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct Collect {
    #[arg(long)]
    pub domain: Domain,
    /// Model file; not used by the tiny domain
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub topology: Option<PathBuf>,
    #[arg(long)]
    pub budget: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = DEFAULT_P_FAIL)]
    pub p_fail: f64,
    /// Which seeded hypothesis to diagnose
    #[arg(long, default_value_t = 0)]
    pub trial: u64,
}

#[derive(Debug, Args)]
pub struct Eval {
    #[arg(long)]
    pub domain: Domain,
    #[arg(long)]
    pub strategy: Strategy,
    #[arg(long, default_value_t = DeliveryMode::Ml)]
    pub delivery: DeliveryMode,
    /// Comma-separated budgets; every 5 up to the maximum when omitted
    #[arg(long, value_delimiter = ',')]
    pub budget_grid: Option<Vec<usize>>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
    #[arg(long, default_value_t = DEFAULT_P_FAIL)]
    pub p_fail: f64,
    #[arg(long, default_value_t = crate::delivery::DEFAULT_NODE_LIMIT)]
    pub node_limit: u64,
    /// Model file; trained from generated data when omitted
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub topology: Option<PathBuf>,
    /// Per-trial CSV (trial,budget,metric)
    #[arg(long)]
    pub trials_out: Option<PathBuf>,
    /// Training rows generated when no model is given
    #[arg(long, default_value_t = 20_000)]
    pub train_count: usize,
    #[arg(long, default_value_t = 1.0)]
    pub augment_ratio: f64,
    #[command(flatten)]
    pub training: TrainingArgs,
}

#[derive(Debug, Args)]
pub struct DepReport {
    /// Model file; without one the report uses rand_link
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub topology: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_TRIALS)]
    pub trials: usize,
    #[arg(long, default_value_t = 40)]
    pub budget: usize,
    #[arg(long, default_value_t = DEFAULT_P_FAIL)]
    pub p_fail: f64,
    #[arg(long, default_value_t = 0.0)]
    pub noise: f64,
}

#[derive(Debug, Args)]
pub struct VerifyTheorem {
    #[arg(long, default_value_t = 8)]
    pub problems: usize,
    #[arg(long, default_value_t = 6)]
    pub n_obs: usize,
    #[arg(long, default_value_t = 12)]
    pub hypotheses: usize,
}

const SUBCOMMANDS: [&str; 7] = [
    "gen-data",
    "gen-topology",
    "train",
    "collect",
    "eval",
    "dep-report",
    "verify-theorem",
];

fn config_path(args: &[OsString]) -> Option<PathBuf> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}

/// `key = value` lines as `--key value` pairs.
pub fn parse_config(text: &str) -> Result<Vec<OsString>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            bail!("config line {}: expected key = value, found {line:?}", n + 1);
        };
        let key = key.trim();
        if key.is_empty() || key.starts_with('-') || key.contains(char::is_whitespace) {
            bail!("config line {}: invalid key {key:?}", n + 1);
        }
        if key == "config" {
            bail!("config line {}: nested config files are not supported", n + 1);
        }
        out.push(format!("--{key}").into());
        out.push(value.trim().into());
    }
    Ok(out)
}

/// Inserts config-file flags right after the subcommand so later command
/// line flags override them.
fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>> {
    let Some(path) = config_path(&args) else {
        return Ok(args);
    };
    let text = fs::read_to_string(&path).with_context(|| format!("--config: cannot read {}", path.display()))?;
    let extra = parse_config(&text).with_context(|| format!("--config {}", path.display()))?;
    let pos = args
        .iter()
        .position(|a| SUBCOMMANDS.contains(&a.to_string_lossy().as_ref()))
        .map_or(args.len(), |p| p + 1);
    let mut out = args[..pos].to_vec();
    out.extend(extra);
    out.extend_from_slice(&args[pos..]);
    Ok(out)
}

fn ensure_distinct(out: Option<&Path>, inputs: &[(&str, Option<&Path>)]) -> Result<()> {
    let Some(out) = out else { return Ok(()) };
    for (flag, input) in inputs {
        if let Some(input) = input {
            let same = match (fs::canonicalize(out), fs::canonicalize(input)) {
                (Ok(a), Ok(b)) => a == b,
                _ => out == *input,
            };
            if same {
                bail!("--out must differ from {flag} ({})", input.display());
            }
        }
    }
    Ok(())
}

fn write_output(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Result<()> {
    match out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("--out: cannot create {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write(&mut w).with_context(|| format!("--out: writing {}", path.display()))?;
            w.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)?;
        }
    }
    Ok(())
}

/// Human-readable lines go to stdout when CSV goes to a file, else stderr.
fn summary(out: Option<&Path>, line: &str) {
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn require_out<'a>(out: Option<&'a Path>, what: &str) -> Result<&'a Path> {
    out.with_context(|| format!("--out is required: where to write the {what}"))
}

fn load_topology(flag_value: Option<&Path>, seed: u64) -> Result<TreeTopology> {
    match flag_value {
        Some(p) => TreeTopology::load(p).with_context(|| format!("--topology {}", p.display())),
        None => Ok(generate_topology(&mut rng::seeded(seed))),
    }
}

fn load_model_flag(path: &Path) -> Result<ImplicationModel> {
    load_model(path).with_context(|| format!("--model {}", path.display()))
}

fn cmd_gen_data(shared: &Shared, a: &GenData) -> Result<()> {
    let out = require_out(shared.out.as_deref(), "dataset")?;
    ensure_distinct(Some(out), &[("--topology", a.topology.as_deref())])?;
    let topology = match a.domain {
        Domain::Network => Some(load_topology(a.topology.as_deref(), shared.seed)?),
        _ => None,
    };
    let data = DataConfig {
        count: a.count,
        seed: shared.seed,
        augment_ratio: a.augment_ratio,
        p_fail: a.p_fail,
    };
    let ds = training_dataset(a.domain, &data, topology.as_ref()).context("--domain")?;
    ds.save_csv(out)?;
    summary(Some(out), &format!("wrote {} rows of width {} to {}", ds.len(), ds.n_obs(), out.display()));
    Ok(())
}

fn cmd_gen_topology(shared: &Shared) -> Result<()> {
    let out = require_out(shared.out.as_deref(), "topology")?;
    let topo = generate_topology(&mut rng::seeded(shared.seed));
    topo.save(out)?;
    summary(
        Some(out),
        &format!(
            "wrote {} nodes, {} edges, {} pairs to {}",
            topo.nodes(),
            topo.n_edges(),
            topo.extra_pairs().len(),
            out.display()
        ),
    );
    Ok(())
}

fn cmd_train(shared: &Shared, a: &Train) -> Result<()> {
    let out = require_out(shared.out.as_deref(), "model")?;
    ensure_distinct(Some(out), &[("--data", Some(&a.data))])?;
    let data = ObservationDataset::load_csv(&a.data).with_context(|| format!("--data {}", a.data.display()))?;
    let model = train_new(&data, &a.training.config(shared.seed))?;
    save_model(&model, out)?;
    summary(
        Some(out),
        &format!(
            "trained {}x{} model on {} rows; wrote {}",
            model.n_obs(),
            model.n_hidden(),
            data.len(),
            out.display()
        ),
    );
    Ok(())
}

fn cmd_collect(shared: &Shared, a: &Collect) -> Result<()> {
    let out = shared.out.as_deref();
    ensure_distinct(out, &[("--model", a.model.as_deref()), ("--topology", a.topology.as_deref())])?;
    let mut rng = rng::derived(shared.seed, STREAM_COLLECT, a.trial);
    let cfg = CollectorConfig {
        budget: a.budget,
        noise_rate: a.noise,
        rng_seed: rng::derive_seed(shared.seed, STREAM_COLLECT, a.trial + 1),
    };
    let (model, truth): (Box<dyn BeliefModel>, _) = match a.domain {
        Domain::Tiny => {
            let tiny = crate::runner::default_tiny_problem(shared.seed);
            let truth = tiny.hypotheses()[tiny.sample(&mut rng)].1.clone();
            (Box::new(tiny), truth)
        }
        domain => {
            let path = a.model.as_deref().context("--model is required for this domain")?;
            let model = load_model_flag(path)?;
            let truth = match domain {
                Domain::Battleship => {
                    crate::battleship::board_observations(&crate::battleship::generate_board(&mut rng))
                }
                Domain::Preference => crate::preference::ranking_observations(&crate::preference::sample_ranking(
                    &crate::preference::RankingDistribution::default_mixture(),
                    &mut rng,
                )),
                Domain::Network => {
                    let topo = load_topology(a.topology.as_deref(), shared.seed)?;
                    let fault = crate::network::sample_fault(&topo, a.p_fail, &mut rng)?;
                    crate::network::fault_observations(&topo, &fault)?
                }
                Domain::Tiny => unreachable!(),
            };
            if model.n_obs() != truth.len() {
                bail!("--model has {} inputs but the {domain} domain has {}", model.n_obs(), truth.len());
            }
            (Box::new(model), truth)
        }
    };
    let collection = collect(model.as_ref(), TruthOracle::new(truth)?, &cfg).context("--budget")?;
    write_output(out, |w| collection.write_trace_csv(w))?;
    summary(out, &format!("collected {} observations", collection.log.len()));
    Ok(())
}

fn cmd_eval(shared: &Shared, a: &Eval) -> Result<()> {
    let out = shared.out.as_deref();
    ensure_distinct(out, &[("--model", a.model.as_deref()), ("--topology", a.topology.as_deref())])?;
    let topology = match a.domain {
        Domain::Network => Some(load_topology(a.topology.as_deref(), shared.seed)?),
        _ => None,
    };
    let base = ExperimentConfig::new(a.domain, a.strategy);
    base.validate()?;
    let resources_probe = Resources {
        topology: topology.clone(),
        ..Resources::default()
    };
    let budgets = match &a.budget_grid {
        Some(g) => g.clone(),
        None => default_grid(max_budget(a.domain, a.strategy, Some(&resources_probe))),
    };
    let cfg = ExperimentConfig {
        delivery: a.delivery,
        budgets,
        trials: a.trials,
        noise_rate: a.noise,
        seed: shared.seed,
        p_fail: a.p_fail,
        node_limit: a.node_limit,
        workers: shared.workers,
        ..base
    };
    cfg.validate()?;
    let model = if needs_model(a.domain, a.strategy) {
        Some(match &a.model {
            Some(p) => load_model_flag(p)?,
            None => {
                let data = DataConfig {
                    count: a.train_count,
                    seed: rng::derive_seed(shared.seed, 0x6461_7461, 0),
                    augment_ratio: a.augment_ratio,
                    p_fail: a.p_fail,
                };
                summary(out, &format!("no --model given; training on {} generated rows", a.train_count));
                prepare_model(a.domain, &data, &a.training.config(shared.seed), topology.as_ref())?
            }
        })
    } else {
        None
    };
    let resources = Resources {
        model,
        topology,
        ..Resources::default()
    };
    let result = run_experiment(&cfg, &resources)?;
    write_output(out, |w| write_curve_csv(&result.points, w))?;
    if let Some(path) = &a.trials_out {
        write_output(Some(path), |w| write_trials_csv(&cfg.budgets, &result.per_trial, w))
            .with_context(|| format!("--trials-out {}", path.display()))?;
    }
    for p in &result.points {
        summary(
            out,
            &format!(
                "{} {} budget {:>3}: {:.4} +/- {:.4} ({} trials)",
                cfg.domain, cfg.strategy, p.budget, p.mean, p.stderr, p.trials
            ),
        );
    }
    if cfg.delivery == DeliveryMode::Solver {
        summary(out, &format!("unsolved (UNSAT or TIMEOUT): {}", result.unsolved));
    }
    Ok(())
}

fn cmd_dep_report(shared: &Shared, a: &DepReport) -> Result<()> {
    let out = shared.out.as_deref();
    ensure_distinct(out, &[("--model", a.model.as_deref()), ("--topology", a.topology.as_deref())])?;
    let topo = load_topology(a.topology.as_deref(), shared.seed)?;
    let model = a.model.as_deref().map(load_model_flag).transpose()?;
    let cfg = DependencyConfig {
        trials: a.trials,
        budget: a.budget,
        p_fail: a.p_fail,
        noise_rate: a.noise,
        seed: shared.seed,
        workers: shared.workers,
    };
    let report = dependency_report(model.as_ref(), &topo, &cfg)?;
    write_output(out, |w| write_dependency_csv(&report, w))?;
    summary(out, &format!("spearman(coefficient, accuracy) = {:.4}", report.spearman));
    Ok(())
}

fn cmd_verify(shared: &Shared, a: &VerifyTheorem) -> Result<bool> {
    let mut rows = Vec::new();
    let mut all_passed = true;
    for p in 0..a.problems {
        let mut rng = rng::derived(shared.seed, STREAM_VERIFY, p as u64);
        let tiny = TinyProblem::random(a.n_obs, a.hypotheses, p % 2 == 1, &mut rng)
            .context("--n-obs/--hypotheses")?;
        let report = verify_equivalence(&tiny)?;
        let status = if report.passed() { "PASS" } else { "FAIL" };
        all_passed &= report.passed();
        println!(
            "{status} problem {p}: {} states, {} mismatches",
            report.states_checked,
            report.mismatches.len()
        );
        rows.push((p, report.states_checked, report.mismatches.len(), status));
    }
    if let Some(out) = shared.out.as_deref() {
        write_output(Some(out), |w| {
            writeln!(w, "problem,states,mismatches,status")?;
            for (p, s, m, st) in &rows {
                writeln!(w, "{p},{s},{m},{st}")?;
            }
            Ok(())
        })?;
    }
    Ok(all_passed)
}

/// Parses and runs; `Ok(false)` means a check failed without an error.
pub fn run<I, T>(argv: I) -> Result<bool>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = expand_config(argv.into_iter().map(Into::into).collect())?;
    let cli = Cli::try_parse_from(args)?;
    let shared = &cli.shared;
    if shared.workers == Some(0) {
        bail!("--workers must be at least 1");
    }
    match &cli.command {
        Command::GenData(a) => cmd_gen_data(shared, a)?,
        Command::GenTopology => cmd_gen_topology(shared)?,
        Command::Train(a) => cmd_train(shared, a)?,
        Command::Collect(a) => cmd_collect(shared, a)?,
        Command::Eval(a) => cmd_eval(shared, a)?,
        Command::DepReport(a) => cmd_dep_report(shared, a)?,
        Command::VerifyTheorem(a) => return cmd_verify(shared, a),
    }
    Ok(true)
}

/// Exit code: 0 success, 1 failed check or runtime error, 2 usage error.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    match run(argv) {
        Ok(true) => 0,
        Ok(false) => 1,
        Err(e) => match e.downcast_ref::<clap::Error>() {
            Some(ce) => {
                let _ = ce.print();
                if ce.use_stderr() {
                    2
                } else {
                    0
                }
            }
            None => {
                eprintln!("error: {e:#}");
                1
            }
        },
    }
}
