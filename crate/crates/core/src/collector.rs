//! Greedy observation collection: repeatedly query the unobserved dimension
//! whose predicted outcome has maximum entropy.
//!
//! Also hosts the enumeration oracle over small explicit hypothesis sets,
//! used to check that the entropy argmax coincides with the information-gain
//! argmax when observations are deterministic.

use std::io::Write;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::model::BeliefModel;
use crate::rng::{self, Rng};
use crate::types::{BeliefVector, ObservationLog, ObservationValue, ObservationVector};

/// `query_s(O)` against a fixed hidden hypothesis.
pub trait QueryOracle {
    fn n_obs(&self) -> usize;
    fn query(&mut self, index: usize) -> Result<ObservationValue>;
}

/// Answers from a full observation vector.
#[derive(Debug, Clone)]
pub struct TruthOracle {
    truth: ObservationVector,
}

impl TruthOracle {
    pub fn new(truth: ObservationVector) -> Result<Self> {
        truth.require_full()?;
        Ok(Self { truth })
    }

    pub fn truth(&self) -> &ObservationVector {
        &self.truth
    }
}

impl QueryOracle for TruthOracle {
    fn n_obs(&self) -> usize {
        self.truth.len()
    }

    fn query(&mut self, index: usize) -> Result<ObservationValue> {
        if index >= self.truth.len() {
            return Err(Error::IndexOutOfRange {
                index,
                len: self.truth.len(),
            });
        }
        Ok(self.truth.get(index))
    }
}

/// Flips every answer of the inner oracle independently with probability `rate`.
#[derive(Debug)]
pub struct NoisyOracle<O> {
    inner: O,
    rate: f64,
    rng: Rng,
}

impl<O: QueryOracle> NoisyOracle<O> {
    pub fn new(inner: O, rate: f64, rng: Rng) -> Result<Self> {
        if !(0.0..=1.0).contains(&rate) {
            return Err(Error::Config(format!("noise rate {rate} outside [0, 1]")));
        }
        Ok(Self { inner, rate, rng })
    }
}

impl<O: QueryOracle> QueryOracle for NoisyOracle<O> {
    fn n_obs(&self) -> usize {
        self.inner.n_obs()
    }

    fn query(&mut self, index: usize) -> Result<ObservationValue> {
        let v = self.inner.query(index)?;
        // always draw so the noise stream does not depend on the rate
        let flip = self.rng.gen::<f64>() < self.rate;
        Ok(if flip { v.flipped() } else { v })
    }
}

impl<O: QueryOracle + ?Sized> QueryOracle for &mut O {
    fn n_obs(&self) -> usize {
        (**self).n_obs()
    }

    fn query(&mut self, index: usize) -> Result<ObservationValue> {
        (**self).query(index)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollectorConfig {
    pub budget: usize,
    pub noise_rate: f64,
    pub rng_seed: u64,
}

impl CollectorConfig {
    pub fn noiseless(budget: usize) -> Self {
        Self {
            budget,
            noise_rate: 0.0,
            rng_seed: rng::DEFAULT_SEED,
        }
    }
}

/// One selection made during collection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub index: usize,
    pub value: ObservationValue,
    /// Entropy (bits) of the chosen dimension when it was selected.
    pub entropy: f64,
    /// Model probability of One when it was selected.
    pub prob: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collection {
    pub log: ObservationLog,
    pub observed: ObservationVector,
    pub steps: Vec<TraceStep>,
}

impl Collection {
    /// `step,index,value,entropy,prob` with one row per query.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "step,index,value,entropy,prob")?;
        for s in &self.steps {
            writeln!(
                out,
                "{},{},{},{:.12},{:.12}",
                s.step, s.index, s.value, s.entropy, s.prob
            )?;
        }
        Ok(())
    }
}

/// Max-entropy candidate; ties go to the lowest index.
pub fn select_from_beliefs(beliefs: &BeliefVector, candidates: &[usize]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for &j in candidates {
        if j >= beliefs.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: beliefs.len(),
            });
        }
        let h = beliefs.entropy(j);
        best = match best {
            Some((bj, bh)) if bh > h || (bh == h && bj < j) => Some((bj, bh)),
            _ => Some((j, h)),
        };
    }
    best.ok_or(Error::NoCandidates)
}

/// Index among `candidates` whose predicted outcome has maximum entropy.
pub fn select_next<M: BeliefModel + ?Sized>(
    model: &M,
    observed: &ObservationVector,
    candidates: &[usize],
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::NoCandidates);
    }
    if let Some(&j) = candidates
        .iter()
        .find(|&&j| j < observed.len() && observed.get(j).is_known())
    {
        return Err(Error::Config(format!("candidate {j} is already observed")));
    }
    let beliefs = model.beliefs(observed)?;
    select_from_beliefs(&beliefs, candidates).map(|(j, _)| j)
}

/// Runs collection over every dimension.
pub fn collect<M, O>(model: &M, oracle: O, cfg: &CollectorConfig) -> Result<Collection>
where
    M: BeliefModel + ?Sized,
    O: QueryOracle,
{
    let all: Vec<usize> = (0..model.n_obs()).collect();
    collect_over(model, oracle, cfg, &all)
}

/// Runs collection restricted to `candidates`.
///
/// The oracle's answer is flipped with probability `cfg.noise_rate`; the
/// possibly corrupted value is both logged and fed back as evidence.
pub fn collect_over<M, O>(
    model: &M,
    oracle: O,
    cfg: &CollectorConfig,
    candidates: &[usize],
) -> Result<Collection>
where
    M: BeliefModel + ?Sized,
    O: QueryOracle,
{
    let n = model.n_obs();
    if oracle.n_obs() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            got: oracle.n_obs(),
        });
    }
    let mut open: Vec<usize> = candidates.to_vec();
    open.sort_unstable();
    open.dedup();
    if let Some(&bad) = open.iter().find(|&&j| j >= n) {
        return Err(Error::IndexOutOfRange { index: bad, len: n });
    }
    if cfg.budget > open.len() {
        return Err(Error::Config(format!(
            "budget {} exceeds the {} available observations",
            cfg.budget,
            open.len()
        )));
    }
    let mut oracle = NoisyOracle::new(oracle, cfg.noise_rate, rng::derived(cfg.rng_seed, 0x006e_6f69_7365, 0))?;

    let mut observed = ObservationVector::unknown(n);
    let mut log = ObservationLog::new();
    let mut steps = Vec::with_capacity(cfg.budget);
    for step in 0..cfg.budget {
        let beliefs = model.beliefs(&observed)?;
        let (index, entropy) = select_from_beliefs(&beliefs, &open)?;
        let value = oracle.query(index)?;
        observed.set(index, value);
        log.push(index, value);
        open.retain(|&j| j != index);
        steps.push(TraceStep {
            step,
            index,
            value,
            entropy,
            prob: beliefs.get(index),
        });
    }
    Ok(Collection {
        log,
        observed,
        steps,
    })
}

/// An explicit, small hypothesis space with deterministic observations.
#[derive(Debug, Clone, PartialEq)]
pub struct TinyProblem {
    n_obs: usize,
    hypotheses: Vec<(f64, ObservationVector)>,
}

pub const TINY_MAX_OBS: usize = 16;
pub const TINY_MAX_HYPOTHESES: usize = 64;

impl TinyProblem {
    pub fn new(hypotheses: Vec<(f64, ObservationVector)>) -> Result<Self> {
        let n_obs = hypotheses.first().map(|(_, o)| o.len()).unwrap_or(0);
        if hypotheses.is_empty() || hypotheses.len() > TINY_MAX_HYPOTHESES {
            return Err(Error::Config(format!(
                "tiny problems need 1..={TINY_MAX_HYPOTHESES} hypotheses, got {}",
                hypotheses.len()
            )));
        }
        if n_obs == 0 || n_obs > TINY_MAX_OBS {
            return Err(Error::Config(format!(
                "tiny problems need 1..={TINY_MAX_OBS} observations, got {n_obs}"
            )));
        }
        let mut total = 0.0;
        for (p, obs) in &hypotheses {
            if obs.len() != n_obs {
                return Err(Error::LengthMismatch {
                    expected: n_obs,
                    got: obs.len(),
                });
            }
            obs.require_full()?;
            if !(*p >= 0.0 && p.is_finite()) {
                return Err(Error::Config(format!("invalid prior {p}")));
            }
            total += p;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("priors sum to {total}, expected 1")));
        }
        Ok(Self { n_obs, hypotheses })
    }

    /// Equiprobable hypotheses.
    pub fn uniform(rows: Vec<ObservationVector>) -> Result<Self> {
        let p = 1.0 / rows.len().max(1) as f64;
        Self::new(rows.into_iter().map(|r| (p, r)).collect())
    }

    /// Random distinct hypotheses; priors uniform or drawn from U(0.1, 1) and normalized.
    pub fn random(n_obs: usize, n_hypotheses: usize, weighted: bool, rng: &mut Rng) -> Result<Self> {
        if n_obs == 0 || n_obs > TINY_MAX_OBS {
            return Err(Error::Config(format!("tiny problems need 1..={TINY_MAX_OBS} observations")));
        }
        let space = 1usize << n_obs;
        if n_hypotheses == 0 || n_hypotheses > space.min(TINY_MAX_HYPOTHESES) {
            return Err(Error::Config(format!(
                "cannot draw {n_hypotheses} distinct hypotheses over {n_obs} observations"
            )));
        }
        let mut codes: Vec<usize> = Vec::with_capacity(n_hypotheses);
        while codes.len() < n_hypotheses {
            let c = rng.gen_range(0..space);
            if !codes.contains(&c) {
                codes.push(c);
            }
        }
        let weights: Vec<f64> = (0..n_hypotheses)
            .map(|_| if weighted { rng.gen_range(0.1..1.0) } else { 1.0 })
            .collect();
        let total: f64 = weights.iter().sum();
        let hypotheses = codes
            .into_iter()
            .zip(weights)
            .map(|(c, w)| {
                let bits: Vec<bool> = (0..n_obs).map(|i| (c >> i) & 1 == 1).collect();
                (w / total, ObservationVector::from_bits(&bits))
            })
            .collect();
        Self::new(hypotheses)
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn hypotheses(&self) -> &[(f64, ObservationVector)] {
        &self.hypotheses
    }

    /// Draws one hypothesis index by prior weight.
    pub fn sample(&self, rng: &mut Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (k, (p, _)) in self.hypotheses.iter().enumerate() {
            acc += p;
            if u < acc {
                return k;
            }
        }
        self.hypotheses.len() - 1
    }

    /// Unnormalized posterior weights over hypotheses consistent with `observed`.
    fn consistent_weights(&self, observed: &ObservationVector) -> Result<Vec<f64>> {
        if observed.len() != self.n_obs {
            return Err(Error::LengthMismatch {
                expected: self.n_obs,
                got: observed.len(),
            });
        }
        Ok(self
            .hypotheses
            .iter()
            .map(|(p, h)| if observed.consistent_with(h) { *p } else { 0.0 })
            .collect())
    }
}

impl BeliefModel for TinyProblem {
    fn n_obs(&self) -> usize {
        self.n_obs
    }

    /// Exact conditional, or uniform beliefs when no hypothesis is consistent
    /// (which only happens under observation noise).
    fn beliefs(&self, observed: &ObservationVector) -> Result<BeliefVector> {
        match exact_conditional(self, observed) {
            Err(Error::Inconsistent) => Ok(BeliefVector::uniform(self.n_obs)),
            other => other,
        }
    }
}

/// `P(O_j = 1 | observed)` by summing over consistent hypotheses.
pub fn exact_conditional(tiny: &TinyProblem, observed: &ObservationVector) -> Result<BeliefVector> {
    let w = tiny.consistent_weights(observed)?;
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::Inconsistent);
    }
    let probs = (0..tiny.n_obs)
        .map(|j| {
            let ones: f64 = tiny
                .hypotheses
                .iter()
                .zip(&w)
                .filter(|((_, h), _)| h.get(j) == ObservationValue::One)
                .map(|(_, wk)| wk)
                .sum();
            (ones / total).clamp(0.0, 1.0)
        })
        .collect();
    Ok(BeliefVector::new(probs))
}

/// Shannon entropy in bits of a nonnegative weight vector after normalizing.
fn weights_entropy(w: &[f64]) -> f64 {
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    w.iter()
        .filter(|&&x| x > 0.0)
        .map(|&x| {
            let p = x / total;
            -p * p.log2()
        })
        .sum()
}

/// `H(S | observed) - H(S | O_j, observed)` in bits, by full enumeration.
pub fn exact_information_gain(tiny: &TinyProblem, observed: &ObservationVector, j: usize) -> Result<f64> {
    if j >= tiny.n_obs {
        return Err(Error::IndexOutOfRange { index: j, len: tiny.n_obs });
    }
    if observed.len() == tiny.n_obs && observed.get(j).is_known() {
        return Err(Error::Config(format!("dimension {j} is already observed")));
    }
    let w = tiny.consistent_weights(observed)?;
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(Error::Inconsistent);
    }
    let prior_entropy = weights_entropy(&w);
    let mut conditional = 0.0;
    for outcome in [ObservationValue::Zero, ObservationValue::One] {
        let branch: Vec<f64> = tiny
            .hypotheses
            .iter()
            .zip(&w)
            .map(|((_, h), &wk)| if h.get(j) == outcome { wk } else { 0.0 })
            .collect();
        let mass: f64 = branch.iter().sum();
        if mass > 0.0 {
            conditional += (mass / total) * weights_entropy(&branch);
        }
    }
    Ok(prior_entropy - conditional)
}

/// Indices whose value is within `tol` of the maximum.
fn argmax_set(values: &[(usize, f64)], tol: f64) -> Vec<usize> {
    let max = values.iter().map(|&(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .filter(|&&(_, v)| max - v <= tol)
        .map(|&(j, _)| j)
        .collect()
}

/// One observed state where the two argmax sets disagreed.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgmaxMismatch {
    pub observed: ObservationVector,
    pub by_entropy: Vec<usize>,
    pub by_gain: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EquivalenceReport {
    pub states_checked: usize,
    pub mismatches: Vec<ArgmaxMismatch>,
}

impl EquivalenceReport {
    pub fn passed(&self) -> bool {
        self.mismatches.is_empty()
    }
}

pub const ARGMAX_TOLERANCE: f64 = 1e-9;

/// Checks, for every consistent partial observation with at least one open
/// dimension, that max-entropy and max-information-gain pick the same set.
pub fn verify_equivalence(tiny: &TinyProblem) -> Result<EquivalenceReport> {
    let n = tiny.n_obs;
    let mut report = EquivalenceReport::default();
    let states = 3usize.pow(n as u32);
    for code in 0..states {
        let mut c = code;
        let mut observed = ObservationVector::unknown(n);
        for i in 0..n {
            observed.set(
                i,
                [ObservationValue::Unknown, ObservationValue::Zero, ObservationValue::One][c % 3],
            );
            c /= 3;
        }
        let open = observed.unobserved();
        if open.is_empty() {
            continue;
        }
        let conditional = match exact_conditional(tiny, &observed) {
            Ok(b) => b,
            Err(Error::Inconsistent) => continue,
            Err(e) => return Err(e),
        };
        let entropies: Vec<(usize, f64)> = open.iter().map(|&j| (j, conditional.entropy(j))).collect();
        let gains = open
            .iter()
            .map(|&j| exact_information_gain(tiny, &observed, j).map(|g| (j, g)))
            .collect::<Result<Vec<_>>>()?;
        let by_entropy = argmax_set(&entropies, ARGMAX_TOLERANCE);
        let by_gain = argmax_set(&gains, ARGMAX_TOLERANCE);
        report.states_checked += 1;
        if by_entropy != by_gain {
            report.mismatches.push(ArgmaxMismatch {
                observed,
                by_entropy,
                by_gain,
            });
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ObservationValue::{One, Unknown, Zero};
    use crate::types::binary_entropy;

    /// Beliefs fixed regardless of input.
    struct Fixed(Vec<f64>);

    impl BeliefModel for Fixed {
        fn n_obs(&self) -> usize {
            self.0.len()
        }
        fn beliefs(&self, _: &ObservationVector) -> Result<BeliefVector> {
            Ok(BeliefVector::new(self.0.clone()))
        }
    }

    #[test]
    fn selects_max_entropy() {
        let m = Fixed(vec![0.9, 0.5, 0.1]);
        let obs = ObservationVector::unknown(3);
        assert_eq!(select_next(&m, &obs, &[0, 1, 2]).unwrap(), 1);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let m = Fixed(vec![0.5, 0.5, 0.2]);
        let obs = ObservationVector::unknown(3);
        assert_eq!(select_next(&m, &obs, &[0, 1, 2]).unwrap(), 0);
        assert_eq!(select_next(&m, &obs, &[2, 1, 0]).unwrap(), 0);
    }

    #[test]
    fn observed_dims_are_excluded() {
        let m = Fixed(vec![0.5, 0.5]);
        let obs = ObservationVector::new(vec![One, Unknown]);
        assert_eq!(select_next(&m, &obs, &[1]).unwrap(), 1);
        assert!(select_next(&m, &obs, &[0, 1]).is_err());
        assert!(matches!(select_next(&m, &obs, &[]), Err(Error::NoCandidates)));
    }

    #[test]
    fn zero_budget_collects_nothing() {
        let m = Fixed(vec![0.5; 4]);
        let oracle = TruthOracle::new(ObservationVector::from_bits(&[true; 4])).unwrap();
        let c = collect(&m, oracle, &CollectorConfig::noiseless(0)).unwrap();
        assert!(c.log.is_empty());
        assert_eq!(c.observed, ObservationVector::unknown(4));
    }

    #[test]
    fn full_budget_covers_every_index_once() {
        let m = Fixed(vec![0.3, 0.5, 0.9, 0.6, 0.5]);
        let truth = ObservationVector::from_bits(&[true, false, true, true, false]);
        let c = collect(&m, TruthOracle::new(truth.clone()).unwrap(), &CollectorConfig::noiseless(5)).unwrap();
        let mut idx: Vec<usize> = c.log.iter().map(|&(i, _)| i).collect();
        assert_eq!(idx[..3], [1, 4, 3]);
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3, 4]);
        assert_eq!(c.observed, truth);
    }

    #[test]
    fn budget_over_candidates_is_rejected() {
        let m = Fixed(vec![0.5; 3]);
        let oracle = TruthOracle::new(ObservationVector::from_bits(&[true; 3])).unwrap();
        assert!(collect_over(&m, oracle, &CollectorConfig::noiseless(3), &[0, 1]).is_err());
    }

    #[test]
    fn noise_rate_matches_disagreement_fraction() {
        let n = 50;
        let m = Fixed(vec![0.5; n]);
        let truth = ObservationVector::from_bits(&(0..n).map(|i| i % 3 == 0).collect::<Vec<_>>());
        let mut wrong = 0usize;
        let runs = 400;
        for seed in 0..runs {
            let cfg = CollectorConfig { budget: n, noise_rate: 0.2, rng_seed: seed };
            let c = collect(&m, TruthOracle::new(truth.clone()).unwrap(), &cfg).unwrap();
            wrong += c.log.iter().filter(|&&(i, v)| v != truth.get(i)).count();
        }
        let frac = wrong as f64 / (runs as usize * n) as f64;
        assert!((frac - 0.2).abs() < 0.02, "{frac}");
    }

    #[test]
    fn trace_csv_has_header_and_rows() {
        let m = Fixed(vec![0.25, 0.5]);
        let oracle = TruthOracle::new(ObservationVector::from_bits(&[true, false])).unwrap();
        let c = collect(&m, oracle, &CollectorConfig::noiseless(2)).unwrap();
        let mut buf = Vec::new();
        c.write_trace_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "step,index,value,entropy,prob");
        assert_eq!(lines[1], "0,1,0,1.000000000000,0.500000000000");
        assert!(lines[2].starts_with("1,0,1,0.811278124459,0.25"));
    }

    fn two_point() -> TinyProblem {
        TinyProblem::uniform(vec![
            ObservationVector::from_bits(&[true, false]),
            ObservationVector::from_bits(&[false, true]),
        ])
        .unwrap()
    }

    #[test]
    fn conditional_two_point() {
        let t = two_point();
        assert_eq!(exact_conditional(&t, &ObservationVector::unknown(2)).unwrap().probs(), &[0.5, 0.5]);
        let obs = ObservationVector::new(vec![One, Unknown]);
        assert_eq!(exact_conditional(&t, &obs).unwrap().probs(), &[1.0, 0.0]);
        let bad = ObservationVector::new(vec![One, One]);
        assert!(matches!(exact_conditional(&t, &bad), Err(Error::Inconsistent)));
    }

    fn four_over_three() -> TinyProblem {
        // h0=110 h1=101 h2=011 h3=000
        TinyProblem::uniform(vec![
            ObservationVector::from_bits(&[true, true, false]),
            ObservationVector::from_bits(&[true, false, true]),
            ObservationVector::from_bits(&[false, true, true]),
            ObservationVector::from_bits(&[false, false, false]),
        ])
        .unwrap()
    }

    #[test]
    fn conditional_matches_hand_enumeration() {
        let t = four_over_three();
        let none = exact_conditional(&t, &ObservationVector::unknown(3)).unwrap();
        assert_eq!(none.probs(), &[0.5, 0.5, 0.5]);
        // O_0 = 1 leaves h0, h1
        let obs = ObservationVector::new(vec![One, Unknown, Unknown]);
        assert_eq!(exact_conditional(&t, &obs).unwrap().probs(), &[1.0, 0.5, 0.5]);
        // O_2 = 0 leaves h0, h3
        let obs = ObservationVector::new(vec![Unknown, Unknown, Zero]);
        assert_eq!(exact_conditional(&t, &obs).unwrap().probs(), &[0.5, 0.5, 0.0]);
    }

    #[test]
    fn information_gain_cases() {
        let t = four_over_three();
        // each dimension splits four hypotheses 2/2: H(S)=2, H(S|O)=1
        let none = ObservationVector::unknown(3);
        for j in 0..3 {
            assert!((exact_information_gain(&t, &none, j).unwrap() - 1.0).abs() < 1e-12);
        }
        // after O_0 = 1 (h0, h1 left), O_1 and O_2 each bisect: 1 bit
        let obs = ObservationVector::new(vec![One, Unknown, Unknown]);
        assert!((exact_information_gain(&t, &obs, 1).unwrap() - 1.0).abs() < 1e-12);
        // after O_0 = 1, O_1 = 1 only h0 remains: nothing to learn
        let obs = ObservationVector::new(vec![One, One, Unknown]);
        assert!(exact_information_gain(&t, &obs, 2).unwrap().abs() < 1e-12);
    }

    #[test]
    fn weighted_information_gain_by_hand() {
        // priors 1/2, 1/4, 1/4 over 00, 01, 11 (bit 0 first)
        let t = TinyProblem::new(vec![
            (0.5, ObservationVector::from_bits(&[false, false])),
            (0.25, ObservationVector::from_bits(&[true, false])),
            (0.25, ObservationVector::from_bits(&[true, true])),
        ])
        .unwrap();
        let none = ObservationVector::unknown(2);
        // H(S)=1.5; O_0 splits {1/2} vs {1/4,1/4}: H(S|O_0) = 0.5*0 + 0.5*1 = 0.5
        assert!((exact_information_gain(&t, &none, 0).unwrap() - 1.0).abs() < 1e-12);
        // O_1 splits {1/2,1/4} vs {1/4}: H(S|O_1) = 0.75*H(2/3,1/3)
        let h23 = -(2.0f64 / 3.0) * (2.0f64 / 3.0).log2() - (1.0f64 / 3.0) * (1.0f64 / 3.0).log2();
        let want = 1.5 - 0.75 * h23;
        assert!((exact_information_gain(&t, &none, 1).unwrap() - want).abs() < 1e-12);
        // deterministic observations: gain equals conditional observation entropy
        let b = exact_conditional(&t, &none).unwrap();
        assert!((binary_entropy(b.get(1)) - want).abs() < 1e-12);
    }

    #[test]
    fn tiny_problem_validation() {
        assert!(TinyProblem::new(vec![(0.7, ObservationVector::from_bits(&[true]))]).is_err());
        assert!(TinyProblem::uniform(vec![ObservationVector::from_bits(&[true; 17])]).is_err());
        assert!(TinyProblem::uniform(vec![ObservationVector::new(vec![Unknown])]).is_err());
    }

    #[test]
    fn equivalence_on_hand_built_problems() {
        for t in [two_point(), four_over_three()] {
            let r = verify_equivalence(&t).unwrap();
            assert!(r.passed(), "{:?}", r.mismatches);
            assert!(r.states_checked > 0);
        }
    }

    #[test]
    fn equivalence_on_random_problems() {
        let mut rng = rng::seeded(2024);
        for k in 0..8 {
            let t = TinyProblem::random(5, 12, k % 2 == 0, &mut rng).unwrap();
            let r = verify_equivalence(&t).unwrap();
            assert!(r.passed(), "problem {k}: {:?}", r.mismatches.first());
        }
    }

    #[test]
    fn collect_with_exact_beliefs_recovers_hypothesis() {
        let mut rng = rng::seeded(5);
        let t = TinyProblem::random(6, 16, true, &mut rng).unwrap();
        for k in 0..t.hypotheses().len() {
            let truth = t.hypotheses()[k].1.clone();
            let c = collect(&t, TruthOracle::new(truth.clone()).unwrap(), &CollectorConfig::noiseless(6)).unwrap();
            for &(i, v) in c.log.iter() {
                assert_eq!(v, truth.get(i));
            }
        }
    }
}
