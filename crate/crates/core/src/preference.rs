//! Preference elicitation over 10 items: ranking distributions, the 45
//! pairwise-comparison observations, and instrumented sorting baselines.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::model::ObservationDataset;
use crate::rng::{self, Rng};
use crate::types::{kendall_correlation, n_pairs, pair_index, ObservationVector, Ranking};

pub const N_ITEMS: usize = 10;
pub const N_PAIR_OBS: usize = 45;

/// Center of the default Mallows component. It has 22 inversions relative to
/// `0..9`, so the untouched starting array of the sort baselines carries no
/// information about it.
pub const DEFAULT_CENTER: [usize; N_ITEMS] = [2, 0, 6, 8, 7, 9, 4, 3, 1, 5];
pub const DEFAULT_THETA: f64 = 0.7;
pub const DEFAULT_MALLOWS_WEIGHT: f64 = 0.8;

#[derive(Debug, Clone, PartialEq)]
pub enum RankingDistribution {
    Uniform { items: usize },
    Mallows { center: Ranking, theta: f64 },
    Mixture(Vec<(f64, RankingDistribution)>),
}

impl RankingDistribution {
    /// `0.8 * Mallows(DEFAULT_CENTER, 0.7) + 0.2 * Uniform`.
    pub fn default_mixture() -> Self {
        RankingDistribution::Mixture(vec![
            (
                DEFAULT_MALLOWS_WEIGHT,
                RankingDistribution::Mallows {
                    center: Ranking::new(DEFAULT_CENTER.to_vec()).expect("valid permutation"),
                    theta: DEFAULT_THETA,
                },
            ),
            (
                1.0 - DEFAULT_MALLOWS_WEIGHT,
                RankingDistribution::Uniform { items: N_ITEMS },
            ),
        ])
    }

    pub fn items(&self) -> usize {
        match self {
            RankingDistribution::Uniform { items } => *items,
            RankingDistribution::Mallows { center, .. } => center.len(),
            RankingDistribution::Mixture(parts) => parts.first().map(|(_, d)| d.items()).unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RankingDistribution::Uniform { items } if *items == 0 => {
                Err(Error::Config("uniform distribution over zero items".into()))
            }
            RankingDistribution::Uniform { .. } => Ok(()),
            RankingDistribution::Mallows { theta, .. } if !(*theta > 0.0 && theta.is_finite()) => {
                Err(Error::Config(format!("Mallows theta must be positive, got {theta}")))
            }
            RankingDistribution::Mallows { .. } => Ok(()),
            RankingDistribution::Mixture(parts) => {
                if parts.is_empty() {
                    return Err(Error::Config("empty mixture".into()));
                }
                let total: f64 = parts.iter().map(|(w, _)| w).sum();
                if (total - 1.0).abs() > 1e-9 || parts.iter().any(|(w, _)| *w < 0.0) {
                    return Err(Error::Config(format!("mixture weights sum to {total}, expected 1")));
                }
                let items = self.items();
                for (_, d) in parts {
                    d.validate()?;
                    if d.items() != items {
                        return Err(Error::Config("mixture components disagree on item count".into()));
                    }
                }
                Ok(())
            }
        }
    }
}

/// Repeated insertion: the k-th item of `center` goes to slot `j <= k` with
/// probability proportional to `exp(-theta * (k - j))`.
fn sample_mallows(center: &Ranking, theta: f64, rng: &mut Rng) -> Ranking {
    let phi = (-theta).exp();
    let mut order: Vec<usize> = Vec::with_capacity(center.len());
    for (k, &item) in center.order().iter().enumerate() {
        // weights for slots 0..=k; slot k adds no inversion
        let weights: Vec<f64> = (0..=k).map(|j| phi.powi((k - j) as i32)).collect();
        let total: f64 = weights.iter().sum();
        let mut u = rng.gen::<f64>() * total;
        let mut slot = k;
        for (j, w) in weights.iter().enumerate() {
            if u < *w {
                slot = j;
                break;
            }
            u -= w;
        }
        order.insert(slot, item);
    }
    Ranking::new(order).expect("insertion preserves the permutation")
}

pub fn sample_ranking(dist: &RankingDistribution, rng: &mut Rng) -> Ranking {
    match dist {
        RankingDistribution::Uniform { items } => {
            let mut order: Vec<usize> = (0..*items).collect();
            order.shuffle(rng);
            Ranking::new(order).expect("shuffle preserves the permutation")
        }
        RankingDistribution::Mallows { center, theta } => sample_mallows(center, *theta, rng),
        RankingDistribution::Mixture(parts) => {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            for (w, d) in parts {
                acc += w;
                if u < acc {
                    return sample_ranking(d, rng);
                }
            }
            sample_ranking(&parts[parts.len() - 1].1, rng)
        }
    }
}

/// Entry `pair_index(i, j)` is One iff item `i` is ranked above item `j`.
pub fn ranking_observations(r: &Ranking) -> ObservationVector {
    let items = r.len();
    let pos = r.positions();
    let mut bits = vec![false; n_pairs(items)];
    for i in 0..items {
        for j in (i + 1)..items {
            bits[pair_index(i, j, items).expect("i < j < items")] = pos[i] < pos[j];
        }
    }
    ObservationVector::from_bits(&bits)
}

pub fn rankings_dataset(rankings: &[Ranking]) -> Result<ObservationDataset> {
    let items = rankings.first().map(|r| r.len()).unwrap_or(N_ITEMS);
    ObservationDataset::new(n_pairs(items), rankings.iter().map(ranking_observations).collect())
}

/// Training rows: every ranking plus `round(ratio * len)` uniform permutations.
pub fn augmented_dataset(rankings: &[Ranking], uniform_ratio: f64, seed: u64) -> Result<ObservationDataset> {
    if !(uniform_ratio >= 0.0 && uniform_ratio.is_finite()) {
        return Err(Error::Config(format!("augmentation ratio must be >= 0, got {uniform_ratio}")));
    }
    let items = rankings.first().map(|r| r.len()).unwrap_or(N_ITEMS);
    let extra = (uniform_ratio * rankings.len() as f64).round() as usize;
    let mut rng = rng::seeded(seed);
    let uniform = RankingDistribution::Uniform { items };
    let mut all = rankings.to_vec();
    all.extend((0..extra).map(|_| sample_ranking(&uniform, &mut rng)));
    rankings_dataset(&all)
}

/// One user per line, item ids in rank order (best first).
pub fn write_rankings_csv<W: Write>(rankings: &[Ranking], mut out: W) -> std::io::Result<()> {
    for r in rankings {
        let line: Vec<String> = r.order().iter().map(|i| i.to_string()).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn save_rankings_csv(rankings: &[Ranking], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_rankings_csv(rankings, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_rankings_csv<R: BufRead>(input: R) -> Result<Vec<Ranking>> {
    let mut out = Vec::new();
    let mut width = None;
    for (lineno, line) in input.lines().enumerate() {
        let parse_err = |msg: String| Error::Parse {
            what: "ranking dataset",
            line: lineno + 1,
            msg,
        };
        let line = line.map_err(|e| parse_err(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let order = line
            .split(',')
            .map(|f| f.trim().parse::<usize>().map_err(|e| parse_err(format!("{f:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let w = *width.get_or_insert(order.len());
        if order.len() != w {
            return Err(parse_err(format!("expected {w} items, found {}", order.len())));
        }
        out.push(Ranking::new(order).map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(out)
}

pub fn load_rankings_csv(path: &Path) -> Result<Vec<Ranking>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_rankings_csv(BufReader::new(file))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SortAlgorithm {
    Bubble,
    Quick,
    Merge,
}

/// Kendall correlation of the working array after a given number of comparisons.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SortSnapshot {
    pub comparisons: usize,
    pub kendall: f64,
}

/// In-place sort whose comparisons are answered by a hidden ranking.
struct Sorter<'a> {
    arr: Vec<usize>,
    hidden_pos: Vec<usize>,
    hidden: &'a Ranking,
    noise_rate: f64,
    rng: &'a mut Rng,
    comparisons: usize,
    trace: Vec<SortSnapshot>,
}

impl Sorter<'_> {
    fn kendall(&self) -> f64 {
        let current = Ranking::new(self.arr.clone()).expect("sorting permutes the array");
        kendall_correlation(&current, self.hidden).expect("same item count")
    }

    /// Records the state produced by the previous comparison, then asks
    /// whether `a` should precede `b`.
    fn before(&mut self, a: usize, b: usize) -> bool {
        self.flush();
        self.comparisons += 1;
        let truth = self.hidden_pos[a] < self.hidden_pos[b];
        let flip = self.rng.gen::<f64>() < self.noise_rate;
        truth != flip
    }

    fn flush(&mut self) {
        if self.comparisons > self.trace.len() {
            let kendall = self.kendall();
            self.trace.push(SortSnapshot {
                comparisons: self.comparisons,
                kendall,
            });
        }
    }

    /// Bubble sort with a shrinking bound and early exit.
    fn bubble(&mut self) {
        let mut end = self.arr.len();
        while end > 1 {
            let mut swapped = false;
            for j in 0..end - 1 {
                if !self.before(self.arr[j], self.arr[j + 1]) {
                    self.arr.swap(j, j + 1);
                    swapped = true;
                }
            }
            if !swapped {
                break;
            }
            end -= 1;
        }
    }

    /// Lomuto partition around the last element.
    fn quick(&mut self, lo: usize, hi: usize) {
        if lo >= hi {
            return;
        }
        let pivot = self.arr[hi];
        let mut store = lo;
        for j in lo..hi {
            if self.before(self.arr[j], pivot) {
                self.arr.swap(store, j);
                store += 1;
            }
        }
        self.arr.swap(store, hi);
        if store > lo {
            self.quick(lo, store - 1);
        }
        self.quick(store + 1, hi);
    }

    /// Top-down merge sort over `[lo, hi)`. The array always reads as
    /// merged-prefix, rest of left run, rest of right run.
    fn merge(&mut self, lo: usize, hi: usize) {
        if hi - lo < 2 {
            return;
        }
        let mid = lo + (hi - lo) / 2;
        self.merge(lo, mid);
        self.merge(mid, hi);
        let (mut k, mut r) = (lo, mid);
        while k < r && r < hi {
            if self.before(self.arr[k], self.arr[r]) {
                k += 1;
            } else {
                self.arr[k..=r].rotate_right(1);
                k += 1;
                r += 1;
            }
        }
    }
}

/// Runs `algorithm` on `0..L`, recording Kendall correlation to `hidden`
/// after every comparison.
pub fn sort_baseline_trace(
    algorithm: SortAlgorithm,
    hidden: &Ranking,
    noise_rate: f64,
    rng: &mut Rng,
) -> Result<Vec<SortSnapshot>> {
    if !(0.0..=1.0).contains(&noise_rate) {
        return Err(Error::Config(format!("noise rate {noise_rate} outside [0, 1]")));
    }
    let n = hidden.len();
    let mut s = Sorter {
        arr: (0..n).collect(),
        hidden_pos: hidden.positions(),
        hidden,
        noise_rate,
        rng,
        comparisons: 0,
        trace: Vec::new(),
    };
    match algorithm {
        SortAlgorithm::Bubble => s.bubble(),
        SortAlgorithm::Quick => {
            if n > 0 {
                s.quick(0, n - 1)
            }
        }
        SortAlgorithm::Merge => s.merge(0, n),
    }
    s.flush();
    Ok(s.trace)
}

/// Kendall correlation of the unsorted starting array `0..L`.
pub fn initial_kendall(hidden: &Ranking) -> f64 {
    kendall_correlation(&Ranking::identity(hidden.len()), hidden).expect("same item count")
}

/// Metric after `budget` comparisons; a finished sort keeps its final value.
pub fn trace_value_at(initial: f64, trace: &[SortSnapshot], budget: usize) -> f64 {
    if budget == 0 || trace.is_empty() {
        return initial;
    }
    trace[budget.min(trace.len()) - 1].kendall
}
