//! ODE samplers: plain Euler, Euler followed by radial projection, and the
//! exponential map on the sphere.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::sphere::{exp_map, radial_project, tangent_project};

use super::network::{LossKind, VelocityField};
use super::train::sample_prior;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    Euler,
    EulerProject,
    ExpMap,
}

impl fmt::Display for Sampler {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sampler::Euler => "euler",
            Sampler::EulerProject => "euler-project",
            Sampler::ExpMap => "expmap",
        })
    }
}

impl FromStr for Sampler {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "euler" => Ok(Sampler::Euler),
            "euler-project" | "euler_project" => Ok(Sampler::EulerProject),
            "expmap" | "exp-map" | "exp_map" => Ok(Sampler::ExpMap),
            other => Err(Error::InvalidArgument(format!("unknown sampler {other:?}"))),
        }
    }
}

/// Anything that can be integrated by the samplers.
pub trait VelocityModel {
    fn dim(&self) -> usize;
    /// Objective the model was trained with; selects the prior.
    fn kind(&self) -> LossKind;
    /// Radius of the sphere used by the spherical prior and samplers.
    fn radius(&self) -> f64;
    fn velocity(&self, z: &[f64], t: f64, cond: usize) -> Result<Vec<f64>>;
}

impl VelocityModel for VelocityField {
    fn dim(&self) -> usize {
        self.shape().d
    }
    fn kind(&self) -> LossKind {
        VelocityField::kind(self)
    }
    fn radius(&self) -> f64 {
        VelocityField::radius(self)
    }
    fn velocity(&self, z: &[f64], t: f64, cond: usize) -> Result<Vec<f64>> {
        self.forward(z, t, cond)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRun {
    pub sampler: Sampler,
    pub nfe: usize,
    pub outputs: Vec<Vec<f64>>,
}

impl SampleRun {
    /// Largest relative radius error `| |z| - R | / R` over the outputs.
    pub fn max_sphere_deviation(&self, radius: f64) -> f64 {
        self.outputs
            .iter()
            .map(|z| (crate::numeric::norm(z) - radius).abs() / radius)
            .fold(0.0, f64::max)
    }
}

/// Integrate one chain from `z0` over a uniform grid of `nfe` steps.
pub fn integrate<M: VelocityModel + ?Sized>(
    model: &M,
    z0: Vec<f64>,
    sampler: Sampler,
    nfe: usize,
    cond: usize,
) -> Result<Vec<f64>> {
    if nfe == 0 {
        return Err(Error::InvalidArgument("nfe must be at least 1".into()));
    }
    let dt = 1.0 / nfe as f64;
    let radius = model.radius();
    let mut z = match sampler {
        Sampler::Euler => z0,
        Sampler::EulerProject | Sampler::ExpMap => radial_project(&z0, radius)?.into_vec(),
    };
    for k in 0..nfe {
        let t = k as f64 * dt;
        let v = model.velocity(&z, t, cond)?;
        z = match sampler {
            Sampler::Euler => z.iter().zip(&v).map(|(a, b)| a + dt * b).collect(),
            Sampler::EulerProject => {
                let moved: Vec<f64> = z.iter().zip(&v).map(|(a, b)| a + dt * b).collect();
                radial_project(&moved, radius)?.into_vec()
            }
            Sampler::ExpMap => {
                let p = radial_project(&z, radius)?;
                let step: Vec<f64> = tangent_project(&v, &p)?.iter().map(|x| x * dt).collect();
                let step = crate::sphere::TangentVector::certify(step, &p)?;
                exp_map(&p, &step).into_vec()
            }
        };
        if z.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("sampler state"));
        }
    }
    if sampler == Sampler::ExpMap {
        // re-certify against accumulated rounding
        z = radial_project(&z, radius)?.into_vec();
    }
    Ok(z)
}

/// Draw `n` chains from the model's prior and integrate each one.
pub fn sample<M: VelocityModel + ?Sized, G: Rng + ?Sized>(
    model: &M,
    n: usize,
    sampler: Sampler,
    nfe: usize,
    cond: usize,
    rng: &mut G,
) -> Result<SampleRun> {
    let mut outputs = Vec::with_capacity(n);
    for _ in 0..n {
        let z0 = sample_prior(model.kind(), model.dim(), model.radius(), rng)?;
        outputs.push(integrate(model, z0, sampler, nfe, cond)?);
    }
    Ok(SampleRun {
        sampler,
        nfe,
        outputs,
    })
}
