//! Shared value types and the scalar metrics every domain builds on.
//!
//! Observation value `One` always means "hit", "connected" or "i preferred
//! over j" depending on the domain; `Zero` is the complement.

use std::fmt;

use crate::error::{Error, Result};

/// Probabilities are clamped into `[PROB_EPS, 1 - PROB_EPS]` before logs.
pub const PROB_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ObservationValue {
    Zero,
    One,
    #[default]
    Unknown,
}

impl ObservationValue {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            ObservationValue::One
        } else {
            ObservationValue::Zero
        }
    }

    /// `Some(true)` for One, `Some(false)` for Zero, `None` for Unknown.
    pub fn bit(self) -> Option<bool> {
        match self {
            ObservationValue::One => Some(true),
            ObservationValue::Zero => Some(false),
            ObservationValue::Unknown => None,
        }
    }

    pub fn is_known(self) -> bool {
        self != ObservationValue::Unknown
    }

    pub fn flipped(self) -> Self {
        match self {
            ObservationValue::One => ObservationValue::Zero,
            ObservationValue::Zero => ObservationValue::One,
            ObservationValue::Unknown => ObservationValue::Unknown,
        }
    }
}

impl fmt::Display for ObservationValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObservationValue::Zero => "0",
            ObservationValue::One => "1",
            ObservationValue::Unknown => "?",
        })
    }
}

/// Fixed-length vector of observation values. A "full" vector has no Unknown.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ObservationVector {
    values: Vec<ObservationValue>,
}

impl ObservationVector {
    pub fn unknown(len: usize) -> Self {
        Self {
            values: vec![ObservationValue::Unknown; len],
        }
    }

    pub fn new(values: Vec<ObservationValue>) -> Self {
        Self { values }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        Self {
            values: bits.iter().map(|&b| ObservationValue::from_bit(b)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, index: usize) -> ObservationValue {
        self.values[index]
    }

    pub fn set(&mut self, index: usize, value: ObservationValue) {
        self.values[index] = value;
    }

    pub fn values(&self) -> &[ObservationValue] {
        &self.values
    }

    pub fn is_full(&self) -> bool {
        self.values.iter().all(|v| v.is_known())
    }

    /// Errors with the first Unknown position if the vector is not full.
    pub fn require_full(&self) -> Result<()> {
        match self.values.iter().position(|v| !v.is_known()) {
            Some(i) => Err(Error::UnknownInFullVector(i)),
            None => Ok(()),
        }
    }

    pub fn known_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_known()).count()
    }

    pub fn unobserved(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.values[i].is_known()).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.values
            .iter()
            .filter(|&&v| v == ObservationValue::One)
            .count()
    }

    /// Writes every log entry into a copy of `Unknown(len)`.
    pub fn from_log(len: usize, log: &ObservationLog) -> Self {
        let mut out = Self::unknown(len);
        for &(i, v) in log.entries() {
            out.values[i] = v;
        }
        out
    }

    /// True when every known entry of `self` agrees with `full`.
    pub fn consistent_with(&self, full: &ObservationVector) -> bool {
        self.values
            .iter()
            .zip(&full.values)
            .all(|(a, b)| !a.is_known() || a == b)
    }
}

/// Per-dimension `P(O_i = 1 | observed)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefVector {
    probs: Vec<f64>,
}

impl BeliefVector {
    /// Panics if any entry is outside `[0, 1]` or NaN.
    pub fn new(probs: Vec<f64>) -> Self {
        assert!(
            probs.iter().all(|p| (0.0..=1.0).contains(p)),
            "belief entries must lie in [0, 1]"
        );
        Self { probs }
    }

    pub fn uniform(len: usize) -> Self {
        Self {
            probs: vec![0.5; len],
        }
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, index: usize) -> f64 {
        self.probs[index]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn entropy(&self, index: usize) -> f64 {
        binary_entropy(self.probs[index])
    }
}

/// The ordered list of (index, value) pairs actually queried.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ObservationLog {
    entries: Vec<(usize, ObservationValue)>,
}

impl ObservationLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Panics if `value` is Unknown or `index` was already logged.
    pub fn push(&mut self, index: usize, value: ObservationValue) {
        assert!(value.is_known(), "cannot log an Unknown value");
        assert!(!self.contains(index), "index {index} logged twice");
        self.entries.push((index, value));
    }

    pub fn entries(&self) -> &[(usize, ObservationValue)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.entries.iter().any(|&(i, _)| i == index)
    }

    /// The first `len` entries.
    pub fn prefix(&self, len: usize) -> ObservationLog {
        ObservationLog {
            entries: self.entries[..len.min(self.entries.len())].to_vec(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &(usize, ObservationValue)> {
        self.entries.iter()
    }
}

/// A permutation: `order[p]` is the item ranked `p`-th (best first).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ranking {
    order: Vec<usize>,
}

impl Ranking {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &item in &order {
            if item >= order.len() || seen[item] {
                return Err(Error::InvalidRanking(format!(
                    "{order:?} is not a permutation of 0..{}",
                    order.len()
                )));
            }
            seen[item] = true;
        }
        Ok(Self { order })
    }

    pub fn identity(len: usize) -> Self {
        Self {
            order: (0..len).collect(),
        }
    }

    pub fn reversed(&self) -> Self {
        Self {
            order: self.order.iter().rev().copied().collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// `positions()[item]` is the rank of `item`.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &item) in self.order.iter().enumerate() {
            pos[item] = p;
        }
        pos
    }
}

pub fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

/// Entropy in bits of a Bernoulli(p) variable.
pub fn binary_entropy(p: f64) -> f64 {
    debug_assert!((0.0..=1.0).contains(&p), "probability out of range: {p}");
    let p = clamp_prob(p);
    let q = 1.0 - p;
    -(p * p.log2() + q * q.log2())
}

/// Kendall's tau (no ties) between two rankings of the same items.
pub fn kendall_correlation(a: &Ranking, b: &Ranking) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::InvalidRanking(
            "Kendall correlation needs at least two items".into(),
        ));
    }
    let pa = a.positions();
    let pb = b.positions();
    let mut score: i64 = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let sa = pa[i] < pa[j];
            let sb = pb[i] < pb[j];
            score += if sa == sb { 1 } else { -1 };
        }
    }
    Ok(score as f64 / n_pairs(n) as f64)
}

/// Number of unordered pairs among `items` items.
pub fn n_pairs(items: usize) -> usize {
    items * items.saturating_sub(1) / 2
}

/// Lexicographic flattening of the pairs `i < j < items`.
pub fn pair_index(i: usize, j: usize, items: usize) -> Result<usize> {
    if i >= j || j >= items {
        return Err(Error::InvalidPair { i, j, items });
    }
    // pairs starting before i: sum_{k<i} (items - 1 - k)
    Ok(i * (2 * items - i - 1) / 2 + (j - i - 1))
}

/// Inverse of [`pair_index`].
pub fn pair_from_index(index: usize, items: usize) -> Result<(usize, usize)> {
    let mut base = 0;
    for i in 0..items.saturating_sub(1) {
        let row = items - 1 - i;
        if index < base + row {
            return Ok((i, i + 1 + index - base));
        }
        base += row;
    }
    Err(Error::IndexOutOfRange {
        index,
        len: n_pairs(items),
    })
}

/// Fractional ranks (1-based) with ties averaged.
fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && xs[idx[end]] == xs[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &k in &idx[start..end] {
            ranks[k] = r;
        }
        start = end;
    }
    ranks
}

fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return 0.0;
    }
    sxy / (sxx * syy).sqrt()
}

/// Spearman rank correlation; 0 when either side is constant.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::LengthMismatch {
            expected: xs.len(),
            got: ys.len(),
        });
    }
    if xs.len() < 2 {
        return Ok(0.0);
    }
    Ok(pearson(&average_ranks(xs), &average_ranks(ys)))
}

/// Sample mean and standard error of the mean (0 for a single sample).
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}
