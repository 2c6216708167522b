//! Flow-matching objectives with exact parameter gradients.

use crate::error::{Error, Result};
use crate::numeric::{dot, KahanSum};
use crate::paths::{PairPath, PathKind, PathPoint};
use crate::sphere::project_out;

use super::network::{LossKind, VelocityField};

/// One training example: endpoints, time and condition id.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub z0: Vec<f64>,
    pub z1: Vec<f64>,
    pub t: f64,
    pub cond: usize,
}

impl LossKind {
    pub fn path_kind(self) -> PathKind {
        match self {
            LossKind::Linear => PathKind::Linear,
            LossKind::Slerp => PathKind::Slerp,
        }
    }
}

/// Squared error of one model output against the path target, and its
/// derivative with respect to the output.
///
/// For [`LossKind::Slerp`] both the output and the target are tangent-projected
/// at `z_t` first, so the derivative passes through the projection as well.
pub fn pointwise_loss(kind: LossKind, point: &PathPoint, output: &[f64]) -> (f64, Vec<f64>) {
    match kind {
        LossKind::Linear => {
            let err: Vec<f64> = output.iter().zip(&point.u_t).map(|(v, u)| v - u).collect();
            let loss = dot(&err, &err);
            (loss, err.iter().map(|e| 2.0 * e).collect())
        }
        LossKind::Slerp => {
            let pv = project_out(output, &point.z_t);
            let pu = project_out(&point.u_t, &point.z_t);
            let err: Vec<f64> = pv.iter().zip(&pu).map(|(a, b)| a - b).collect();
            let loss = dot(&err, &err);
            // The projection is symmetric, so the chain rule applies it once more.
            let grad = project_out(&err, &point.z_t);
            (loss, grad.iter().map(|g| 2.0 * g).collect())
        }
    }
}

/// Batch-mean loss and its gradient with respect to every parameter.
pub fn loss_and_grad(
    field: &VelocityField,
    batch: &[FlowSample],
    kind: LossKind,
) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let scale = 1.0 / batch.len() as f64;
    let mut total = KahanSum::new();
    let mut grad = vec![0.0; field.n_params()];
    for s in batch {
        let point = PairPath::new(kind.path_kind(), &s.z0, &s.z1)?.at(s.t);
        let cache = field.forward_cached(&point.z_t, s.t, s.cond)?;
        let (loss, mut dout) = pointwise_loss(kind, &point, cache.output());
        total.add(loss);
        dout.iter_mut().for_each(|g| *g *= scale);
        field.backward(&cache, &dout, &mut grad);
    }
    Ok((total.value() * scale, grad))
}

/// Batch-mean loss without gradients.
pub fn loss(field: &VelocityField, batch: &[FlowSample], kind: LossKind) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut total = KahanSum::new();
    for s in batch {
        let point = PairPath::new(kind.path_kind(), &s.z0, &s.z1)?.at(s.t);
        let out = field.forward(&point.z_t, s.t, s.cond)?;
        total.add(pointwise_loss(kind, &point, &out).0);
    }
    Ok(total.value() / batch.len() as f64)
}
