use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{sample_gaussian, sample_uniform_sphere};

use super::data::SyntheticDataset;
use super::loss::{loss_and_grad, FlowSample};
use super::network::{LossKind, VelocityField};
use super::optim::{clip_grad_norm, AdamW};
use super::schedule::{sample_time, TimeSampling};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub time_sampling: TimeSampling,
    /// Timestep shift `s`; 1 disables it.
    pub shift: f64,
    pub kind: LossKind,
    pub seed: u64,
    pub weight_decay: f64,
    pub grad_clip: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 128,
            steps: 2000,
            time_sampling: TimeSampling::default(),
            shift: 1.0,
            kind: LossKind::Slerp,
            seed: 0,
            weight_decay: 0.0,
            grad_clip: 1.0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate {} is invalid", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if self.shift.is_nan() || self.shift <= 0.0 {
            return Err(Error::InvalidArgument("timestep shift must be positive".into()));
        }
        if self.grad_clip.is_nan() || self.grad_clip <= 0.0 {
            return Err(Error::InvalidArgument("gradient clip must be positive".into()));
        }
        Ok(())
    }
}

/// Per-step batch losses of one training run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainReport {
    pub loss_trace: Vec<f64>,
}

impl TrainReport {
    /// Mean of the first `window` losses.
    pub fn initial_smoothed(&self, window: usize) -> Option<f64> {
        let n = window.min(self.loss_trace.len());
        (n > 0).then(|| self.loss_trace[..n].iter().sum::<f64>() / n as f64)
    }

    /// Mean of the last `window` losses.
    pub fn final_smoothed(&self, window: usize) -> Option<f64> {
        let n = window.min(self.loss_trace.len());
        let tail = &self.loss_trace[self.loss_trace.len() - n..];
        (n > 0).then(|| tail.iter().sum::<f64>() / n as f64)
    }
}

/// Draw a noise endpoint from the prior matching `kind`.
pub fn sample_prior<G: Rng + ?Sized>(kind: LossKind, d: usize, radius: f64, rng: &mut G) -> Result<Vec<f64>> {
    match kind {
        LossKind::Linear => Ok(sample_gaussian(d, rng)),
        LossKind::Slerp => Ok(sample_uniform_sphere(d, radius, rng)?.into_vec()),
    }
}

/// Draw a training batch of independent (noise, data, time) triples.
pub fn sample_batch<G: Rng + ?Sized>(
    field: &VelocityField,
    dataset: &SyntheticDataset,
    config: &TrainConfig,
    rng: &mut G,
) -> Result<Vec<FlowSample>> {
    let classes = field.shape().n_classes;
    (0..config.batch_size)
        .map(|_| {
            let z0 = sample_prior(config.kind, dataset.d, dataset.radius, rng)?;
            let (z1, label) = dataset.sample(rng)?;
            let t = sample_time(rng, config.time_sampling, config.shift)?;
            let cond = if classes == 1 { 0 } else { label };
            Ok(FlowSample { z0, z1, t, cond })
        })
        .collect()
}

/// Mini-batch AdamW on the flow-matching objective, clipping the global
/// gradient norm each step. Updates `field` in place.
pub fn train<G: Rng + ?Sized>(
    field: &mut VelocityField,
    dataset: &SyntheticDataset,
    config: &TrainConfig,
    rng: &mut G,
) -> Result<TrainReport> {
    config.validate()?;
    if field.kind() != config.kind {
        return Err(Error::InvalidArgument(format!(
            "field was built for {} loss but config asks for {}",
            field.kind(),
            config.kind
        )));
    }
    if field.shape().d != dataset.d {
        return Err(Error::DimensionMismatch {
            expected: field.shape().d,
            got: dataset.d,
        });
    }
    let classes = field.shape().n_classes;
    if classes != 1 && classes != dataset.n_centers() {
        return Err(Error::InvalidArgument(format!(
            "field has {classes} classes but the dataset has {} centers",
            dataset.n_centers()
        )));
    }
    let mut opt = AdamW::new(config.lr, config.weight_decay);
    let mut trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let batch = sample_batch(field, dataset, config, rng)?;
        let (loss, mut grad) = loss_and_grad(field, &batch, config.kind)?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::DivergenceDetected { step, loss });
        }
        clip_grad_norm(&mut grad, config.grad_clip);
        opt.update(field.params_mut(), &grad);
        trace.push(loss);
    }
    Ok(TrainReport { loss_trace: trace })
}
