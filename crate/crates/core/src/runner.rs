//! Experiment orchestration: seeded trials, metric curves over query budgets,
//! dependency-coefficient binning and CSV output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::battleship::{self, board_observations, generate_board, N_CELLS};
use crate::collector::{collect_over, CollectorConfig, NoisyOracle, QueryOracle, TinyProblem, TruthOracle};
use crate::delivery::{
    battleship_solve, coordinate_accuracy, link_correctness, ml_guess, network_diagnosis, ranking_from_beliefs,
    ships_correct, DeliveredBelief, SolveOutcome, DEFAULT_NODE_LIMIT,
};
use crate::error::{Error, Result};
use crate::model::{train_new, BeliefModel, ImplicationModel, ObservationDataset, TrainingConfig};
use crate::network::{
    dependency_coefficient, fault_dataset, fault_observations, rand_link_baseline, sample_fault, TreeTopology,
    DEFAULT_P_FAIL,
};
use crate::preference::{
    augmented_dataset, initial_kendall, ranking_observations, sample_ranking, sort_baseline_trace, trace_value_at,
    RankingDistribution, SortAlgorithm,
};
use crate::rng::{self, derive_seed};
use crate::types::{kendall_correlation, mean_stderr, spearman, ObservationLog, ObservationVector};

const STREAM_HYPOTHESIS: u64 = 0x6879_706f;
const STREAM_STRATEGY: u64 = 0x7374_7261;
const STREAM_NOISE: u64 = 0x6e6f_6973;
const STREAM_TINY: u64 = 0x7469_6e79;

pub const DEFAULT_TRIALS: usize = 200;
pub const DEFAULT_GRID_STEP: usize = 5;
pub const DEFAULT_TINY_OBS: usize = 6;
pub const DEFAULT_TINY_HYPOTHESES: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    Battleship,
    Preference,
    Network,
    Tiny,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    Oc,
    Rand,
    Sink,
    RandLink,
    Bsort,
    Qsort,
    Msort,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum DeliveryMode {
    /// Per-coordinate maximum-likelihood guess (or the domain's analogue).
    #[default]
    Ml,
    /// Battleship only: constraint-solver board, scored in ships correct.
    Solver,
}

macro_rules! string_enum {
    ($ty:ty, $what:literal, { $($variant:path => $name:literal),* $(,)? }) => {
        impl $ty {
            pub fn name(self) -> &'static str {
                match self { $($variant => $name),* }
            }
        }

        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($name => Ok($variant),)*
                    other => Err(Error::Config(format!(
                        concat!("unknown ", $what, " {:?}; expected one of: {}"),
                        other,
                        [$($name),*].join(", ")
                    ))),
                }
            }
        }
    };
}

string_enum!(Domain, "domain", {
    Domain::Battleship => "battleship",
    Domain::Preference => "preference",
    Domain::Network => "network",
    Domain::Tiny => "tiny",
});

string_enum!(Strategy, "strategy", {
    Strategy::Oc => "oc",
    Strategy::Rand => "rand",
    Strategy::Sink => "sink",
    Strategy::RandLink => "rand_link",
    Strategy::Bsort => "bsort",
    Strategy::Qsort => "qsort",
    Strategy::Msort => "msort",
});

string_enum!(DeliveryMode, "delivery", {
    DeliveryMode::Ml => "ml",
    DeliveryMode::Solver => "solver",
});

impl Domain {
    pub fn allows(self, strategy: Strategy) -> bool {
        use Strategy::*;
        match self {
            Domain::Battleship => matches!(strategy, Oc | Rand | Sink),
            Domain::Preference => matches!(strategy, Oc | Rand | Bsort | Qsort | Msort),
            Domain::Network => matches!(strategy, Oc | RandLink),
            Domain::Tiny => matches!(strategy, Oc | Rand),
        }
    }
}

impl Strategy {
    fn sort_algorithm(self) -> Option<SortAlgorithm> {
        match self {
            Strategy::Bsort => Some(SortAlgorithm::Bubble),
            Strategy::Qsort => Some(SortAlgorithm::Quick),
            Strategy::Msort => Some(SortAlgorithm::Merge),
            _ => None,
        }
    }
}

/// Whether running `strategy` on `domain` needs a trained implication model.
pub fn needs_model(domain: Domain, strategy: Strategy) -> bool {
    match domain {
        Domain::Tiny => false,
        Domain::Preference => matches!(strategy, Strategy::Oc | Strategy::Rand),
        _ => strategy == Strategy::Oc,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub domain: Domain,
    pub strategy: Strategy,
    pub delivery: DeliveryMode,
    pub budgets: Vec<usize>,
    pub trials: usize,
    pub noise_rate: f64,
    /// Seed for hypotheses, strategy randomness and noise.
    pub seed: u64,
    pub p_fail: f64,
    pub node_limit: u64,
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(domain: Domain, strategy: Strategy) -> Self {
        Self {
            domain,
            strategy,
            delivery: DeliveryMode::Ml,
            budgets: default_grid(max_budget(domain, strategy, None)),
            trials: DEFAULT_TRIALS,
            noise_rate: 0.0,
            seed: rng::DEFAULT_SEED,
            p_fail: DEFAULT_P_FAIL,
            node_limit: DEFAULT_NODE_LIMIT,
            workers: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.domain.allows(self.strategy) {
            return Err(Error::Config(format!(
                "strategy {} is not available for the {} domain",
                self.strategy, self.domain
            )));
        }
        if self.delivery == DeliveryMode::Solver && self.domain != Domain::Battleship {
            return Err(Error::Config("solver delivery is only defined for battleship".into()));
        }
        if self.trials == 0 {
            return Err(Error::Config("trials must be at least 1".into()));
        }
        if self.budgets.is_empty() {
            return Err(Error::Config("budget grid is empty".into()));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::Config(format!("noise rate {} outside [0, 1]", self.noise_rate)));
        }
        if !(0.0..=1.0).contains(&self.p_fail) {
            return Err(Error::Config(format!("failure probability {} outside [0, 1]", self.p_fail)));
        }
        if self.workers == Some(0) {
            return Err(Error::Config("workers must be at least 1".into()));
        }
        Ok(())
    }
}

/// `0, step, 2 step, ...` up to and including `max`.
pub fn default_grid(max: usize) -> Vec<usize> {
    let mut grid: Vec<usize> = (0..=max).step_by(DEFAULT_GRID_STEP).collect();
    if grid.last() != Some(&max) {
        grid.push(max);
    }
    grid
}

/// Largest budget a strategy can spend in a domain.
pub fn max_budget(domain: Domain, strategy: Strategy, resources: Option<&Resources>) -> usize {
    match domain {
        Domain::Battleship => N_CELLS,
        Domain::Preference => crate::preference::N_PAIR_OBS,
        Domain::Network => {
            let topo = resources.and_then(|r| r.topology.as_ref());
            match strategy {
                Strategy::RandLink => topo.map_or(crate::network::N_NODES - 1, |t| t.n_edges()),
                _ => topo.map_or(crate::network::N_NODES - 1 + crate::network::N_EXTRA_PAIRS, |t| t.n_obs()),
            }
        }
        Domain::Tiny => resources
            .and_then(|r| r.tiny.as_ref())
            .map_or(DEFAULT_TINY_OBS, |t| t.n_obs()),
    }
}

/// Shared inputs a run may need.
#[derive(Debug, Clone, Default)]
pub struct Resources {
    pub model: Option<ImplicationModel>,
    pub topology: Option<TreeTopology>,
    pub tiny: Option<TinyProblem>,
    /// Preference hypotheses; the default mixture when unset.
    pub distribution: Option<RankingDistribution>,
}

/// Seeded tiny problem used when none is supplied.
pub fn default_tiny_problem(seed: u64) -> TinyProblem {
    TinyProblem::random(
        DEFAULT_TINY_OBS,
        DEFAULT_TINY_HYPOTHESES,
        true,
        &mut rng::derived(seed, STREAM_TINY, 0),
    )
    .expect("default tiny dimensions are within limits")
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub budget: usize,
    pub mean: f64,
    pub stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub points: Vec<CurvePoint>,
    /// `per_trial[t][k]` is trial `t`'s metric at `budgets[k]`.
    pub per_trial: Vec<Vec<f64>>,
    /// Solver runs that ended UNSAT or TIMEOUT (scored as 0 ships).
    pub unsolved: usize,
}

pub fn write_curve_csv<W: Write>(points: &[CurvePoint], mut out: W) -> std::io::Result<()> {
    writeln!(out, "budget,mean,stderr,trials")?;
    for p in points {
        writeln!(out, "{},{:.12},{:.12},{}", p.budget, p.mean, p.stderr, p.trials)?;
    }
    Ok(())
}

pub fn write_trials_csv<W: Write>(budgets: &[usize], per_trial: &[Vec<f64>], mut out: W) -> std::io::Result<()> {
    writeln!(out, "trial,budget,metric")?;
    for (t, row) in per_trial.iter().enumerate() {
        for (b, m) in budgets.iter().zip(row) {
            writeln!(out, "{t},{b},{m:.12}")?;
        }
    }
    Ok(())
}

struct TrialOutcome {
    metrics: Vec<f64>,
    unsolved: usize,
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    model: Option<&'a ImplicationModel>,
    topology: Option<&'a TreeTopology>,
    tiny: Option<&'a TinyProblem>,
    distribution: &'a RankingDistribution,
    max_budget: usize,
}

fn noisy<O: QueryOracle>(oracle: O, rate: f64, seed: u64, trial: u64) -> Result<NoisyOracle<O>> {
    NoisyOracle::new(oracle, rate, rng::derived(seed, STREAM_NOISE, trial))
}

impl Context<'_> {
    fn model(&self) -> Result<&ImplicationModel> {
        self.model.ok_or_else(|| {
            Error::Config(format!(
                "strategy {} on {} needs a trained model",
                self.cfg.strategy, self.cfg.domain
            ))
        })
    }

    /// Queries made by the configured strategy up to the largest budget.
    fn run_queries<M: BeliefModel + ?Sized>(
        &self,
        model: Option<&M>,
        truth: &ObservationVector,
        candidates: &[usize],
        trial: u64,
    ) -> Result<ObservationLog> {
        let cfg = self.cfg;
        let oracle = TruthOracle::new(truth.clone())?;
        let mut rng = rng::derived(cfg.seed, STREAM_STRATEGY, trial);
        match cfg.strategy {
            Strategy::Oc => {
                let model = model.expect("oc always has a belief model");
                let ccfg = CollectorConfig {
                    budget: self.max_budget,
                    noise_rate: cfg.noise_rate,
                    rng_seed: derive_seed(cfg.seed, STREAM_NOISE, trial),
                };
                Ok(collect_over(model, oracle, &ccfg, candidates)?.log)
            }
            Strategy::Rand => {
                let oracle = noisy(oracle, cfg.noise_rate, cfg.seed, trial)?;
                battleship::random_baseline(oracle, candidates, self.max_budget, &mut rng)
            }
            Strategy::Sink => {
                let oracle = noisy(oracle, cfg.noise_rate, cfg.seed, trial)?;
                battleship::sink_baseline(oracle, self.max_budget, &mut rng)
            }
            Strategy::RandLink => {
                let oracle = noisy(oracle, cfg.noise_rate, cfg.seed, trial)?;
                let topo = self.topology.expect("network runs carry a topology");
                rand_link_baseline(oracle, topo, self.max_budget, &mut rng)
            }
            Strategy::Bsort | Strategy::Qsort | Strategy::Msort => unreachable!("sorts do not query an oracle"),
        }
    }

    fn trial(&self, t: usize) -> Result<TrialOutcome> {
        let cfg = self.cfg;
        let trial = t as u64;
        let mut hyp_rng = rng::derived(cfg.seed, STREAM_HYPOTHESIS, trial);
        let mut unsolved = 0;
        let metrics = match cfg.domain {
            Domain::Battleship => {
                let board = generate_board(&mut hyp_rng);
                let truth = board_observations(&board);
                let model = match cfg.strategy {
                    Strategy::Oc => Some(self.model()?),
                    _ => None,
                };
                let all: Vec<usize> = (0..N_CELLS).collect();
                let log = self.run_queries(model, &truth, &all, trial)?;
                cfg.budgets
                    .iter()
                    .map(|&b| {
                        let prefix = log.prefix(b);
                        match cfg.delivery {
                            DeliveryMode::Ml => {
                                let belief = match model {
                                    Some(m) => DeliveredBelief::new(&m.beliefs(&observed(N_CELLS, &prefix))?, &prefix)?,
                                    None => DeliveredBelief::from_prior(N_CELLS, 0.0, &prefix)?,
                                };
                                coordinate_accuracy(&ml_guess(&belief), &truth)
                            }
                            DeliveryMode::Solver => match battleship_solve(&prefix, cfg.node_limit)? {
                                SolveOutcome::Solved(pred) => {
                                    if !pred.is_valid_fleet() {
                                        return Err(Error::Inconsistent);
                                    }
                                    Ok(ships_correct(&pred, &board) as f64)
                                }
                                SolveOutcome::Unsat | SolveOutcome::Timeout => {
                                    unsolved += 1;
                                    Ok(0.0)
                                }
                            },
                        }
                    })
                    .collect::<Result<Vec<f64>>>()?
            }
            Domain::Preference => {
                let hidden = sample_ranking(self.distribution, &mut hyp_rng);
                if let Some(alg) = cfg.strategy.sort_algorithm() {
                    let mut rng = rng::derived(cfg.seed, STREAM_STRATEGY, trial);
                    let trace = sort_baseline_trace(alg, &hidden, cfg.noise_rate, &mut rng)?;
                    let initial = initial_kendall(&hidden);
                    cfg.budgets.iter().map(|&b| trace_value_at(initial, &trace, b)).collect()
                } else {
                    let model = self.model()?;
                    let truth = ranking_observations(&hidden);
                    let all: Vec<usize> = (0..truth.len()).collect();
                    let log = self.run_queries(Some(model), &truth, &all, trial)?;
                    cfg.budgets
                        .iter()
                        .map(|&b| {
                            let prefix = log.prefix(b);
                            let beliefs = model.beliefs(&observed(truth.len(), &prefix))?;
                            let ranking = ranking_from_beliefs(&DeliveredBelief::new(&beliefs, &prefix)?, hidden.len())?;
                            kendall_correlation(&ranking, &hidden)
                        })
                        .collect::<Result<Vec<f64>>>()?
                }
            }
            Domain::Network => {
                let topo = self.topology.expect("network runs carry a topology");
                let fault = sample_fault(topo, cfg.p_fail, &mut hyp_rng)?;
                let truth = fault_observations(topo, &fault)?;
                let model = match cfg.strategy {
                    Strategy::Oc => Some(self.model()?),
                    _ => None,
                };
                let all: Vec<usize> = (0..topo.n_obs()).collect();
                let log = self.run_queries(model, &truth, &all, trial)?;
                cfg.budgets
                    .iter()
                    .map(|&b| {
                        let prefix = log.prefix(b);
                        let belief = delivered_network_belief(model, topo, &prefix)?;
                        let correct = link_correctness(&network_diagnosis(&belief, topo)?, &fault)?;
                        Ok(correct.iter().filter(|&&c| c).count() as f64 / correct.len() as f64)
                    })
                    .collect::<Result<Vec<f64>>>()?
            }
            Domain::Tiny => {
                let tiny = self.tiny.expect("tiny runs carry a problem");
                let truth = tiny.hypotheses()[tiny.sample(&mut hyp_rng)].1.clone();
                let all: Vec<usize> = (0..tiny.n_obs()).collect();
                let log = self.run_queries(Some(tiny), &truth, &all, trial)?;
                cfg.budgets
                    .iter()
                    .map(|&b| {
                        let prefix = log.prefix(b);
                        let beliefs = tiny.beliefs(&observed(tiny.n_obs(), &prefix))?;
                        coordinate_accuracy(&ml_guess(&DeliveredBelief::new(&beliefs, &prefix)?), &truth)
                    })
                    .collect::<Result<Vec<f64>>>()?
            }
        };
        Ok(TrialOutcome { metrics, unsolved })
    }
}

fn observed(n: usize, log: &ObservationLog) -> ObservationVector {
    ObservationVector::from_log(n, log)
}

/// Model beliefs when a model is given, otherwise the all-functional prior.
fn delivered_network_belief(
    model: Option<&ImplicationModel>,
    topo: &TreeTopology,
    log: &ObservationLog,
) -> Result<DeliveredBelief> {
    match model {
        Some(m) => DeliveredBelief::new(&m.beliefs(&observed(topo.n_obs(), log))?, log),
        None => DeliveredBelief::from_prior(topo.n_obs(), 1.0, log),
    }
}

fn with_workers<T: Send>(workers: Option<usize>, job: impl FnOnce() -> T + Send) -> Result<T> {
    match workers {
        None => Ok(job()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Config(format!("cannot start {n} workers: {e}")))?;
            Ok(pool.install(job))
        }
    }
}

fn check_model(model: &ImplicationModel, n_obs: usize) -> Result<()> {
    if model.n_obs() != n_obs {
        return Err(Error::Config(format!(
            "model expects {} observations but the domain has {n_obs}",
            model.n_obs()
        )));
    }
    Ok(())
}

/// Runs every trial and aggregates the metric at each grid budget.
///
/// Trials are independent and seeded by index, so results do not depend on
/// the worker count.
pub fn run_experiment(cfg: &ExperimentConfig, resources: &Resources) -> Result<ExperimentResult> {
    cfg.validate()?;
    let default_distribution = RankingDistribution::default_mixture();
    let generated_tiny;
    let tiny = match (cfg.domain, &resources.tiny) {
        (Domain::Tiny, None) => {
            generated_tiny = default_tiny_problem(cfg.seed);
            Some(&generated_tiny)
        }
        (_, t) => t.as_ref(),
    };
    let generated_topology;
    let topology = match (cfg.domain, &resources.topology) {
        (Domain::Network, None) => {
            generated_topology = crate::network::generate_topology(&mut rng::seeded(cfg.seed));
            Some(&generated_topology)
        }
        (_, t) => t.as_ref(),
    };
    let distribution = resources.distribution.as_ref().unwrap_or(&default_distribution);
    distribution.validate()?;
    let resolved = Resources {
        model: None,
        topology: topology.cloned(),
        tiny: tiny.cloned(),
        distribution: None,
    };
    let limit = max_budget(cfg.domain, cfg.strategy, Some(&resolved));
    let max = *cfg.budgets.iter().max().expect("validated non-empty");
    if max > limit {
        return Err(Error::Config(format!(
            "budget {max} exceeds the {limit} observations available to {} on {}",
            cfg.strategy, cfg.domain
        )));
    }
    let model = if needs_model(cfg.domain, cfg.strategy) {
        let m = resources.model.as_ref().ok_or_else(|| {
            Error::Config(format!("strategy {} on {} needs a trained model", cfg.strategy, cfg.domain))
        })?;
        let n = match cfg.domain {
            Domain::Battleship => N_CELLS,
            Domain::Preference => crate::types::n_pairs(distribution.items()),
            Domain::Network => topology.expect("network has a topology").n_obs(),
            Domain::Tiny => unreachable!("tiny uses exact beliefs"),
        };
        check_model(m, n)?;
        Some(m)
    } else {
        None
    };
    let ctx = Context {
        cfg,
        model,
        topology,
        tiny,
        distribution,
        max_budget: max,
    };
    let outcomes = with_workers(cfg.workers, || {
        (0..cfg.trials).into_par_iter().map(|t| ctx.trial(t)).collect::<Result<Vec<_>>>()
    })??;
    let unsolved = outcomes.iter().map(|o| o.unsolved).sum();
    let per_trial: Vec<Vec<f64>> = outcomes.into_iter().map(|o| o.metrics).collect();
    let points = cfg
        .budgets
        .iter()
        .enumerate()
        .map(|(k, &budget)| {
            let column: Vec<f64> = per_trial.iter().map(|row| row[k]).collect();
            let (mean, stderr) = mean_stderr(&column);
            CurvePoint {
                budget,
                mean,
                stderr,
                trials: column.len(),
            }
        })
        .collect();
    Ok(ExperimentResult {
        points,
        per_trial,
        unsolved,
    })
}

/// Training rows for a model-backed domain.
#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub count: usize,
    pub seed: u64,
    /// Uniform permutations added per preference ranking.
    pub augment_ratio: f64,
    pub p_fail: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            count: 20_000,
            seed: rng::DEFAULT_SEED,
            augment_ratio: 1.0,
            p_fail: DEFAULT_P_FAIL,
        }
    }
}

pub fn training_dataset(domain: Domain, data: &DataConfig, topology: Option<&TreeTopology>) -> Result<ObservationDataset> {
    if data.count == 0 {
        return Err(Error::EmptyDataset);
    }
    match domain {
        Domain::Battleship => Ok(battleship::board_dataset(data.count, data.seed)),
        Domain::Preference => {
            let dist = RankingDistribution::default_mixture();
            let mut rng = rng::seeded(data.seed);
            let rankings: Vec<_> = (0..data.count).map(|_| sample_ranking(&dist, &mut rng)).collect();
            augmented_dataset(&rankings, data.augment_ratio, derive_seed(data.seed, STREAM_HYPOTHESIS, 1))
        }
        Domain::Network => {
            let topo = topology.ok_or_else(|| Error::Config("network data needs a topology".into()))?;
            fault_dataset(topo, data.count, data.p_fail, data.seed)
        }
        Domain::Tiny => Err(Error::Config("the tiny domain uses exact beliefs and needs no data".into())),
    }
}

/// Generates training rows and fits a fresh model.
pub fn prepare_model(
    domain: Domain,
    data: &DataConfig,
    training: &TrainingConfig,
    topology: Option<&TreeTopology>,
) -> Result<ImplicationModel> {
    train_new(&training_dataset(domain, data, topology)?, training)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DependencyBin {
    pub lo: f64,
    pub hi: f64,
    pub center: f64,
    pub links: usize,
    /// Mean over the bin's links of per-link diagnosis accuracy.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DependencyReport {
    pub bins: Vec<DependencyBin>,
    /// Per-link `(coefficient, accuracy)`, by edge index.
    pub links: Vec<(f64, f64)>,
    /// Spearman correlation of bin center against bin accuracy.
    pub spearman: f64,
}

pub const DEPENDENCY_BINS: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct DependencyConfig {
    pub trials: usize,
    pub budget: usize,
    pub p_fail: f64,
    pub noise_rate: f64,
    pub seed: u64,
    pub workers: Option<usize>,
}

/// Per-link accuracy at a fixed budget, binned by dependency coefficient.
///
/// With a model the queries come from observation collection; without one,
/// from `rand_link` with the all-functional default.
pub fn dependency_report(
    model: Option<&ImplicationModel>,
    topo: &TreeTopology,
    cfg: &DependencyConfig,
) -> Result<DependencyReport> {
    let strategy = if model.is_some() { Strategy::Oc } else { Strategy::RandLink };
    let exp = ExperimentConfig {
        budgets: vec![cfg.budget],
        trials: cfg.trials,
        noise_rate: cfg.noise_rate,
        seed: cfg.seed,
        p_fail: cfg.p_fail,
        workers: cfg.workers,
        ..ExperimentConfig::new(Domain::Network, strategy)
    };
    exp.validate()?;
    if let Some(m) = model {
        check_model(m, topo.n_obs())?;
    }
    let limit = max_budget(Domain::Network, strategy, Some(&Resources {
        topology: Some(topo.clone()),
        ..Resources::default()
    }));
    if cfg.budget > limit {
        return Err(Error::Config(format!("budget {} exceeds the {limit} available observations", cfg.budget)));
    }
    let ctx = Context {
        cfg: &exp,
        model,
        topology: Some(topo),
        tiny: None,
        distribution: &RankingDistribution::Uniform { items: 2 },
        max_budget: cfg.budget,
    };
    let per_trial = with_workers(cfg.workers, || {
        (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let trial = t as u64;
                let mut hyp_rng = rng::derived(cfg.seed, STREAM_HYPOTHESIS, trial);
                let fault = sample_fault(topo, cfg.p_fail, &mut hyp_rng)?;
                let truth = fault_observations(topo, &fault)?;
                let all: Vec<usize> = (0..topo.n_obs()).collect();
                let log = ctx.run_queries(model, &truth, &all, trial)?;
                let belief = delivered_network_belief(model, topo, &log)?;
                link_correctness(&network_diagnosis(&belief, topo)?, &fault)
            })
            .collect::<Result<Vec<Vec<bool>>>>()
    })??;

    let links: Vec<(f64, f64)> = (0..topo.n_edges())
        .map(|e| {
            let hits = per_trial.iter().filter(|row| row[e]).count();
            Ok((dependency_coefficient(topo, e)?, hits as f64 / cfg.trials as f64))
        })
        .collect::<Result<_>>()?;
    let bins = bin_by_coefficient(&links, DEPENDENCY_BINS);
    let centers: Vec<f64> = bins.iter().map(|b| b.center).collect();
    let accs: Vec<f64> = bins.iter().map(|b| b.accuracy).collect();
    Ok(DependencyReport {
        spearman: spearman(&centers, &accs)?,
        bins,
        links,
    })
}

/// Equal-width bins over the observed coefficient range; empty bins dropped.
pub fn bin_by_coefficient(links: &[(f64, f64)], n_bins: usize) -> Vec<DependencyBin> {
    if links.is_empty() || n_bins == 0 {
        return Vec::new();
    }
    let lo = links.iter().map(|l| l.0).fold(f64::INFINITY, f64::min);
    let hi = links.iter().map(|l| l.0).fold(f64::NEG_INFINITY, f64::max);
    let width = (hi - lo) / n_bins as f64;
    let mut sums = vec![(0usize, 0.0f64); n_bins];
    for &(c, a) in links {
        let k = if width > 0.0 {
            (((c - lo) / width) as usize).min(n_bins - 1)
        } else {
            0
        };
        sums[k].0 += 1;
        sums[k].1 += a;
    }
    sums.iter()
        .enumerate()
        .filter(|(_, s)| s.0 > 0)
        .map(|(k, &(n, total))| {
            let b_lo = lo + width * k as f64;
            let b_hi = if k + 1 == n_bins { hi } else { lo + width * (k + 1) as f64 };
            DependencyBin {
                lo: b_lo,
                hi: b_hi,
                center: (b_lo + b_hi) / 2.0,
                links: n,
                accuracy: total / n as f64,
            }
        })
        .collect()
}

pub fn write_dependency_csv<W: Write>(report: &DependencyReport, mut out: W) -> std::io::Result<()> {
    writeln!(out, "bin_lo,bin_hi,center,links,accuracy")?;
    for b in &report.bins {
        writeln!(out, "{:.12},{:.12},{:.12},{},{:.12}", b.lo, b.hi, b.center, b.links, b.accuracy)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::generate_topology;

    fn cfg(domain: Domain, strategy: Strategy, budgets: Vec<usize>, trials: usize) -> ExperimentConfig {
        ExperimentConfig {
            budgets,
            trials,
            ..ExperimentConfig::new(domain, strategy)
        }
    }

    fn small_model(domain: Domain, topology: Option<&TreeTopology>) -> ImplicationModel {
        let data = DataConfig {
            count: 500,
            ..DataConfig::default()
        };
        let training = TrainingConfig {
            epochs: 1,
            hidden_units: 16,
            ..TrainingConfig::default()
        };
        prepare_model(domain, &data, &training, topology).unwrap()
    }

    #[test]
    fn names_roundtrip() {
        for d in [Domain::Battleship, Domain::Preference, Domain::Network, Domain::Tiny] {
            assert_eq!(d.name().parse::<Domain>().unwrap(), d);
        }
        for s in [
            Strategy::Oc,
            Strategy::Rand,
            Strategy::Sink,
            Strategy::RandLink,
            Strategy::Bsort,
            Strategy::Qsort,
            Strategy::Msort,
        ] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
        assert!("chess".parse::<Domain>().is_err());
        assert_eq!("solver".parse::<DeliveryMode>().unwrap(), DeliveryMode::Solver);
    }

    #[test]
    fn invalid_pairings_fail_before_work() {
        let r = Resources::default();
        for (d, s) in [
            (Domain::Preference, Strategy::Sink),
            (Domain::Battleship, Strategy::Qsort),
            (Domain::Battleship, Strategy::RandLink),
            (Domain::Network, Strategy::Rand),
        ] {
            let err = run_experiment(&cfg(d, s, vec![0], 1), &r).unwrap_err();
            assert!(err.to_string().contains("not available"), "{err}");
        }
        let mut c = cfg(Domain::Preference, Strategy::Qsort, vec![0], 1);
        c.delivery = DeliveryMode::Solver;
        assert!(run_experiment(&c, &r).is_err());
        assert!(run_experiment(&cfg(Domain::Battleship, Strategy::Rand, vec![101], 1), &r).is_err());
        assert!(run_experiment(&cfg(Domain::Battleship, Strategy::Rand, vec![], 1), &r).is_err());
        assert!(run_experiment(&cfg(Domain::Battleship, Strategy::Rand, vec![0], 0), &r).is_err());
        let err = run_experiment(&cfg(Domain::Battleship, Strategy::Oc, vec![0], 1), &r).unwrap_err();
        assert!(err.to_string().contains("trained model"));
    }

    #[test]
    fn default_grid_ends_at_max() {
        assert_eq!(default_grid(12), vec![0, 5, 10, 12]);
        assert_eq!(default_grid(10), vec![0, 5, 10]);
        assert_eq!(ExperimentConfig::new(Domain::Preference, Strategy::Oc).budgets.last(), Some(&45));
    }

    #[test]
    fn battleship_rand_at_zero_is_default_miss() {
        let r = run_experiment(&cfg(Domain::Battleship, Strategy::Rand, vec![0], 1), &Resources::default()).unwrap();
        assert_eq!(r.points.len(), 1);
        assert!((r.points[0].mean - 0.78).abs() < 1e-12);
        assert_eq!(r.points[0].stderr, 0.0);
    }

    #[test]
    fn baseline_curves_are_monotone_per_trial() {
        for s in [Strategy::Rand, Strategy::Sink] {
            let c = cfg(Domain::Battleship, s, default_grid(100), 30);
            let r = run_experiment(&c, &Resources::default()).unwrap();
            for row in &r.per_trial {
                assert!(row.windows(2).all(|w| w[0] <= w[1]), "{s}: {row:?}");
                assert_eq!(*row.last().unwrap(), 1.0);
            }
        }
    }

    #[test]
    fn full_budget_is_perfect_everywhere() {
        let topo = generate_topology(&mut rng::seeded(3));
        let pref_model = small_model(Domain::Preference, None);
        let net_model = small_model(Domain::Network, Some(&topo));
        let bs_model = small_model(Domain::Battleship, None);
        let runs = [
            (Domain::Preference, Strategy::Oc, 45, Some(pref_model.clone())),
            (Domain::Preference, Strategy::Rand, 45, Some(pref_model)),
            (Domain::Preference, Strategy::Bsort, 45, None),
            (Domain::Preference, Strategy::Qsort, 45, None),
            (Domain::Preference, Strategy::Msort, 45, None),
            (Domain::Network, Strategy::RandLink, 99, None),
            (Domain::Network, Strategy::Oc, 399, Some(net_model)),
            (Domain::Battleship, Strategy::Oc, 100, Some(bs_model)),
            (Domain::Tiny, Strategy::Oc, 6, None),
            (Domain::Tiny, Strategy::Rand, 6, None),
        ];
        for (d, s, b, model) in runs {
            let resources = Resources {
                model,
                topology: Some(topo.clone()),
                ..Resources::default()
            };
            let r = run_experiment(&cfg(d, s, vec![b], 20), &resources).unwrap();
            assert_eq!(r.points[0].mean, 1.0, "{d} {s}");
        }
    }

    #[test]
    fn solver_delivery_full_information() {
        let mut c = cfg(Domain::Battleship, Strategy::Rand, vec![0, 100], 10);
        c.delivery = DeliveryMode::Solver;
        let r = run_experiment(&c, &Resources::default()).unwrap();
        assert_eq!(r.unsolved, 0);
        // every cell known: ship identity can still be ambiguous, occupancy cannot
        assert!(r.points[1].mean >= 3.0, "{:?}", r.points);
    }

    #[test]
    fn results_do_not_depend_on_workers() {
        let mut c = cfg(Domain::Battleship, Strategy::Sink, vec![0, 10, 30], 40);
        c.noise_rate = 0.1;
        c.workers = Some(1);
        let a = run_experiment(&c, &Resources::default()).unwrap();
        c.workers = Some(4);
        let b = run_experiment(&c, &Resources::default()).unwrap();
        assert_eq!(a, b);
        let mut bytes_a = Vec::new();
        let mut bytes_b = Vec::new();
        write_curve_csv(&a.points, &mut bytes_a).unwrap();
        write_curve_csv(&b.points, &mut bytes_b).unwrap();
        assert_eq!(bytes_a, bytes_b);
        assert!(String::from_utf8(bytes_a).unwrap().starts_with("budget,mean,stderr,trials\n0,"));
    }

    #[test]
    fn noise_changes_outcomes_but_stays_in_range() {
        let mut c = cfg(Domain::Preference, Strategy::Qsort, vec![0, 20, 45], 50);
        c.noise_rate = 0.1;
        let r = run_experiment(&c, &Resources::default()).unwrap();
        for row in &r.per_trial {
            assert!(row.iter().all(|k| (-1.0..=1.0).contains(k)));
        }
        assert!(r.points[2].mean < 1.0);
    }

    #[test]
    fn model_shape_is_checked() {
        let resources = Resources {
            model: Some(ImplicationModel::zeros(10, 4)),
            ..Resources::default()
        };
        let err = run_experiment(&cfg(Domain::Battleship, Strategy::Oc, vec![0], 1), &resources).unwrap_err();
        assert!(err.to_string().contains("expects 10"));
    }

    #[test]
    fn binning_cases() {
        let links = [(0.0, 1.0), (0.05, 0.5), (0.1, 0.0), (0.1, 1.0)];
        let bins = bin_by_coefficient(&links, 2);
        assert_eq!(bins.len(), 2);
        assert_eq!(bins[0].links, 1);
        assert_eq!(bins[1].links, 3);
        assert!((bins[1].accuracy - 0.5).abs() < 1e-12);
        let bins = bin_by_coefficient(&[(0.01, 1.0), (0.01, 0.0)], 10);
        assert_eq!(bins.len(), 1);
        assert!(bin_by_coefficient(&[], 10).is_empty());
    }

    #[test]
    fn dependency_report_trivial_cases() {
        let topo = generate_topology(&mut rng::seeded(9));
        let base = DependencyConfig {
            trials: 30,
            budget: 40,
            p_fail: 0.0,
            noise_rate: 0.0,
            seed: 1,
            workers: None,
        };
        let r = dependency_report(None, &topo, &base).unwrap();
        assert!(r.bins.iter().all(|b| b.accuracy == 1.0));
        assert_eq!(r.bins.iter().map(|b| b.links).sum::<usize>(), 99);
        let full = DependencyConfig {
            budget: 99,
            p_fail: 0.1,
            ..base.clone()
        };
        let r = dependency_report(None, &topo, &full).unwrap();
        assert!(r.bins.iter().all(|b| b.accuracy == 1.0));
        assert!(dependency_report(None, &topo, &DependencyConfig { budget: 100, ..base }).is_err());
    }
}
