//! Training-time sampling and the timestep shift.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TimeSampling {
    Uniform,
    /// `sigmoid(N(mean, std^2))`.
    LogitNormal { mean: f64, std: f64 },
}

impl Default for TimeSampling {
    fn default() -> Self {
        TimeSampling::LogitNormal { mean: 0.0, std: 1.0 }
    }
}

/// Rational timestep shift `s u / (1 + (s - 1) u)`.
///
/// Fixes 0 and 1 for every `s > 0` and is strictly increasing on `[0, 1]`;
/// `s > 1` pushes mass toward `t = 1`.
pub fn shift_time(u: f64, shift: f64) -> f64 {
    shift * u / (1.0 + (shift - 1.0) * u)
}

/// Draw a training time in the open interval `(0, 1)`.
pub fn sample_time<G: Rng + ?Sized>(rng: &mut G, sampling: TimeSampling, shift: f64) -> Result<f64> {
    if !(shift > 0.0 && shift.is_finite()) {
        return Err(Error::InvalidArgument(format!("timestep shift must be positive, got {shift}")));
    }
    if let TimeSampling::LogitNormal { std, mean } = sampling {
        if !(std > 0.0 && std.is_finite() && mean.is_finite()) {
            return Err(Error::InvalidArgument("logit-normal needs finite mean and std > 0".into()));
        }
    }
    loop {
        let u = match sampling {
            TimeSampling::Uniform => rng.random::<f64>(),
            TimeSampling::LogitNormal { mean, std } => {
                let x: f64 = mean + std * rng.sample::<f64, _>(StandardNormal);
                1.0 / (1.0 + (-x).exp())
            }
        };
        let t = shift_time(u, shift);
        if t > 0.0 && t < 1.0 {
            return Ok(t);
        }
    }
}
