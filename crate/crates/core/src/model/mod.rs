//! The implication model: a single-hidden-layer ReLU network mapping a
//! partially observed vector to `P(O_i = 1 | observed)` for every `i` at once.
//!
//! Input layout is `(x1_0, x0_0, x1_1, x0_1, ...)` and the output logits use
//! the same pairing `(y1_i, y0_i)` at positions `2i, 2i + 1`. Weight matrices
//! are stored row-major: `w1` is `2N x M`, `w2` is `M x 2N`.

mod dataset;
mod format;

use rand::seq::SliceRandom;
use rand::Rng as _;

pub use dataset::ObservationDataset;
pub use format::{load_model, read_model, save_model, write_model, MODEL_MAGIC, MODEL_VERSION};

use crate::error::{Error, Result};
use crate::rng::{self, Rng};
use crate::types::{clamp_prob, BeliefVector, ObservationValue, ObservationVector};

/// Anything that can produce per-dimension beliefs for a partial observation.
pub trait BeliefModel {
    fn n_obs(&self) -> usize;
    fn beliefs(&self, observed: &ObservationVector) -> Result<BeliefVector>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImplicationModel {
    n_obs: usize,
    n_hidden: usize,
    pub(crate) w1: Vec<f64>,
    pub(crate) b1: Vec<f64>,
    pub(crate) w2: Vec<f64>,
    pub(crate) b2: Vec<f64>,
}

/// Gradient buffers with the same shapes as [`ImplicationModel`]'s weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradient {
    fn zeros_like(model: &ImplicationModel) -> Self {
        Self {
            w1: vec![0.0; model.w1.len()],
            b1: vec![0.0; model.b1.len()],
            w2: vec![0.0; model.w2.len()],
            b2: vec![0.0; model.b2.len()],
        }
    }

    fn clear(&mut self) {
        for buf in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            buf.iter_mut().for_each(|g| *g = 0.0);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub hidden_units: usize,
    pub rng_seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 5,
            learning_rate: 0.05,
            batch_size: 32,
            hidden_units: 200,
            rng_seed: rng::DEFAULT_SEED,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        // zero is accepted: it leaves the weights untouched
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::Config(format!(
                "learning rate must be a finite non-negative number, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be at least 1".into()));
        }
        if self.hidden_units == 0 {
            return Err(Error::Config("hidden units must be at least 1".into()));
        }
        Ok(())
    }
}

/// `(x1, x0)` pairs: One -> (1, 0), Zero -> (0, 1), Unknown -> (0, 0).
pub fn encode(obs: &ObservationVector) -> Vec<f64> {
    let mut x = vec![0.0; 2 * obs.len()];
    for (i, v) in obs.values().iter().enumerate() {
        match v {
            ObservationValue::One => x[2 * i] = 1.0,
            ObservationValue::Zero => x[2 * i + 1] = 1.0,
            ObservationValue::Unknown => {}
        }
    }
    x
}

/// Row of `w1` activated by observation `i` taking value `v`, if any.
#[inline]
fn active_input(i: usize, v: ObservationValue) -> Option<usize> {
    match v {
        ObservationValue::One => Some(2 * i),
        ObservationValue::Zero => Some(2 * i + 1),
        ObservationValue::Unknown => None,
    }
}

/// `P(One)` from the logit pair, `1 / (1 + e^(y0 - y1))`.
#[inline]
fn pair_prob_one(y1: f64, y0: f64) -> f64 {
    let d = y0 - y1;
    if d >= 0.0 {
        let e = (-d).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + d.exp())
    }
}

/// `-log P(target)` for a logit pair, computed without cancellation.
#[inline]
fn pair_nll(y_target: f64, y_other: f64) -> f64 {
    let d = y_other - y_target;
    // log(1 + e^d)
    if d > 0.0 {
        d + (-d).exp().ln_1p()
    } else {
        d.exp().ln_1p()
    }
}

impl ImplicationModel {
    /// Glorot-uniform weights, zero biases.
    pub fn new_random(n_obs: usize, n_hidden: usize, rng: &mut Rng) -> Self {
        let n_in = 2 * n_obs;
        let a1 = (6.0 / (n_in + n_hidden) as f64).sqrt();
        let a2 = a1; // fan_in + fan_out is the same for both layers
        let w1 = (0..n_in * n_hidden).map(|_| rng.gen_range(-a1..=a1)).collect();
        let w2 = (0..n_hidden * n_in).map(|_| rng.gen_range(-a2..=a2)).collect();
        Self {
            n_obs,
            n_hidden,
            w1,
            b1: vec![0.0; n_hidden],
            w2,
            b2: vec![0.0; n_in],
        }
    }

    pub fn zeros(n_obs: usize, n_hidden: usize) -> Self {
        Self {
            n_obs,
            n_hidden,
            w1: vec![0.0; 2 * n_obs * n_hidden],
            b1: vec![0.0; n_hidden],
            w2: vec![0.0; n_hidden * 2 * n_obs],
            b2: vec![0.0; 2 * n_obs],
        }
    }

    /// Builds a model from raw row-major parts, checking shapes and finiteness.
    pub fn from_parts(
        n_obs: usize,
        n_hidden: usize,
        w1: Vec<f64>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: Vec<f64>,
    ) -> Result<Self> {
        let n_in = 2 * n_obs;
        for (got, expected) in [
            (w1.len(), n_in * n_hidden),
            (b1.len(), n_hidden),
            (w2.len(), n_hidden * n_in),
            (b2.len(), n_in),
        ] {
            if got != expected {
                return Err(Error::LengthMismatch { expected, got });
            }
        }
        let model = Self {
            n_obs,
            n_hidden,
            w1,
            b1,
            w2,
            b2,
        };
        if !model.is_finite() {
            return Err(Error::Config("model weights must be finite".into()));
        }
        Ok(model)
    }

    pub fn n_obs(&self) -> usize {
        self.n_obs
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn w1(&self) -> &[f64] {
        &self.w1
    }
    pub fn b1(&self) -> &[f64] {
        &self.b1
    }
    pub fn w2(&self) -> &[f64] {
        &self.w2
    }
    pub fn b2(&self) -> &[f64] {
        &self.b2
    }

    /// Mutable access to the output bias, mostly useful for building test models.
    pub fn b2_mut(&mut self) -> &mut [f64] {
        &mut self.b2
    }

    pub fn is_finite(&self) -> bool {
        [&self.w1, &self.b1, &self.w2, &self.b2]
            .iter()
            .all(|buf| buf.iter().all(|w| w.is_finite()))
    }

    fn check_len(&self, obs: &ObservationVector) -> Result<()> {
        if obs.len() != self.n_obs {
            return Err(Error::LengthMismatch {
                expected: self.n_obs,
                got: obs.len(),
            });
        }
        Ok(())
    }

    /// Post-ReLU hidden activations.
    fn hidden(&self, obs: &ObservationVector) -> Vec<f64> {
        let m = self.n_hidden;
        let mut h = self.b1.clone();
        for (i, &v) in obs.values().iter().enumerate() {
            if let Some(row) = active_input(i, v) {
                let w = &self.w1[row * m..(row + 1) * m];
                h.iter_mut().zip(w).for_each(|(hk, wk)| *hk += wk);
            }
        }
        h.iter_mut().for_each(|hk| *hk = hk.max(0.0));
        h
    }

    /// Output logits `y = h W2 + b2`.
    fn logits(&self, h: &[f64]) -> Vec<f64> {
        let n_out = 2 * self.n_obs;
        let mut y = self.b2.clone();
        for (k, &hk) in h.iter().enumerate() {
            if hk != 0.0 {
                let w = &self.w2[k * n_out..(k + 1) * n_out];
                y.iter_mut().zip(w).for_each(|(yc, wc)| *yc += hk * wc);
            }
        }
        y
    }

    /// Raw (unclamped) `P(O_i = 1)` for every dimension.
    pub fn raw_probs(&self, obs: &ObservationVector) -> Result<Vec<f64>> {
        self.check_len(obs)?;
        let y = self.logits(&self.hidden(obs));
        Ok((0..self.n_obs)
            .map(|i| pair_prob_one(y[2 * i], y[2 * i + 1]))
            .collect())
    }

    /// Beliefs for every dimension, clamped away from exact 0 and 1.
    pub fn forward(&self, obs: &ObservationVector) -> Result<BeliefVector> {
        let probs = self.raw_probs(obs)?;
        Ok(BeliefVector::new(probs.into_iter().map(clamp_prob).collect()))
    }

    /// Summed cross-entropy over all outputs, added gradient into `grad`.
    fn accumulate(
        &self,
        input: &ObservationVector,
        target: &ObservationVector,
        grad: &mut Gradient,
    ) -> f64 {
        let m = self.n_hidden;
        let n_out = 2 * self.n_obs;
        let h = self.hidden(input);
        let y = self.logits(&h);

        let mut loss = 0.0;
        let mut dy = vec![0.0; n_out];
        for i in 0..self.n_obs {
            let (y1, y0) = (y[2 * i], y[2 * i + 1]);
            let p1 = pair_prob_one(y1, y0);
            let t1 = match target.get(i) {
                ObservationValue::One => 1.0,
                _ => 0.0,
            };
            loss += if t1 == 1.0 {
                pair_nll(y1, y0)
            } else {
                pair_nll(y0, y1)
            };
            dy[2 * i] = p1 - t1;
            dy[2 * i + 1] = (1.0 - p1) - (1.0 - t1);
        }

        grad.b2.iter_mut().zip(&dy).for_each(|(g, d)| *g += d);
        let mut dh = vec![0.0; m];
        for k in 0..m {
            if h[k] <= 0.0 {
                continue;
            }
            let w = &self.w2[k * n_out..(k + 1) * n_out];
            let gw = &mut grad.w2[k * n_out..(k + 1) * n_out];
            let hk = h[k];
            let mut acc = 0.0;
            for c in 0..n_out {
                gw[c] += hk * dy[c];
                acc += w[c] * dy[c];
            }
            dh[k] = acc;
        }
        grad.b1.iter_mut().zip(&dh).for_each(|(g, d)| *g += d);
        for (i, &v) in input.values().iter().enumerate() {
            if let Some(row) = active_input(i, v) {
                let gw = &mut grad.w1[row * m..(row + 1) * m];
                gw.iter_mut().zip(&dh).for_each(|(g, d)| *g += d);
            }
        }
        loss
    }

    /// Loss (natural log, summed over outputs) and its exact gradient.
    pub fn loss_and_gradient(
        &self,
        input: &ObservationVector,
        target: &ObservationVector,
    ) -> Result<(f64, Gradient)> {
        self.check_len(input)?;
        self.check_len(target)?;
        target.require_full()?;
        let mut grad = Gradient::zeros_like(self);
        let loss = self.accumulate(input, target, &mut grad);
        Ok((loss, grad))
    }

    /// Loss only.
    pub fn loss(&self, input: &ObservationVector, target: &ObservationVector) -> Result<f64> {
        self.check_len(input)?;
        self.check_len(target)?;
        target.require_full()?;
        let y = self.logits(&self.hidden(input));
        Ok((0..self.n_obs)
            .map(|i| {
                let (y1, y0) = (y[2 * i], y[2 * i + 1]);
                if target.get(i) == ObservationValue::One {
                    pair_nll(y1, y0)
                } else {
                    pair_nll(y0, y1)
                }
            })
            .sum())
    }

    /// `weights -= scale * grad`.
    pub fn apply_gradient(&mut self, grad: &Gradient, scale: f64) {
        for (w, g) in [
            (&mut self.w1, &grad.w1),
            (&mut self.b1, &grad.b1),
            (&mut self.w2, &grad.w2),
            (&mut self.b2, &grad.b2),
        ] {
            w.iter_mut().zip(g.iter()).for_each(|(w, g)| *w -= scale * g);
        }
    }
}

impl BeliefModel for ImplicationModel {
    fn n_obs(&self) -> usize {
        self.n_obs
    }

    fn beliefs(&self, observed: &ObservationVector) -> Result<BeliefVector> {
        self.forward(observed)
    }
}

/// Hides each entry with probability `epsilon`.
pub fn ablate_with_epsilon(
    full: &ObservationVector,
    epsilon: f64,
    rng: &mut Rng,
) -> Result<ObservationVector> {
    full.require_full()?;
    let mut out = full.clone();
    for i in 0..out.len() {
        if rng.gen::<f64>() < epsilon {
            out.set(i, ObservationValue::Unknown);
        }
    }
    Ok(out)
}

/// Draws `epsilon ~ U(0, 1)` once, then hides each entry with that probability.
pub fn ablate(full: &ObservationVector, rng: &mut Rng) -> Result<ObservationVector> {
    full.require_full()?;
    let epsilon: f64 = rng.gen();
    ablate_with_epsilon(full, epsilon, rng)
}

/// Minibatch SGD on ablated copies of the dataset rows.
///
/// Each presentation of a row draws a fresh ablation. Per-example losses are
/// summed over outputs and the update uses the batch-mean gradient.
pub fn train(
    mut model: ImplicationModel,
    data: &ObservationDataset,
    cfg: &TrainingConfig,
) -> Result<ImplicationModel> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if data.n_obs() != model.n_obs {
        return Err(Error::LengthMismatch {
            expected: model.n_obs,
            got: data.n_obs(),
        });
    }
    let mut rng = rng::derived(cfg.rng_seed, 0x0074_7261_696e, 1);
    let mut grad = Gradient::zeros_like(&model);
    let mut order: Vec<usize> = (0..data.len()).collect();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            grad.clear();
            for &row in batch {
                let target = &data.rows()[row];
                let input = ablate(target, &mut rng)?;
                model.accumulate(&input, target, &mut grad);
            }
            model.apply_gradient(&grad, cfg.learning_rate / batch.len() as f64);
        }
    }
    if !model.is_finite() {
        return Err(Error::Config(
            "training diverged to non-finite weights; lower the learning rate".into(),
        ));
    }
    Ok(model)
}

/// Initializes a fresh model from `cfg.rng_seed` and trains it.
pub fn train_new(data: &ObservationDataset, cfg: &TrainingConfig) -> Result<ImplicationModel> {
    cfg.validate()?;
    let mut init_rng = rng::derived(cfg.rng_seed, 0x696e_6974, 0);
    let model = ImplicationModel::new_random(data.n_obs(), cfg.hidden_units, &mut init_rng);
    train(model, data, cfg)
}

/// Mean loss over `data` with inputs ablated by a fixed seed.
pub fn mean_ablated_loss(
    model: &ImplicationModel,
    data: &ObservationDataset,
    seed: u64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut rng = rng::seeded(seed);
    let mut total = 0.0;
    for row in data.rows() {
        let input = ablate(row, &mut rng)?;
        total += model.loss(&input, row)?;
    }
    Ok(total / data.len() as f64)
}
