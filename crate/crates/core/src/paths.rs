//! Linear, shell and slerp transport paths with their conditional velocities.
//!
//! All paths act on a single token. Latent tensors are transported by applying
//! the token path independently at every spatial position
//! ([`tensor_path`]).

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::{dot, lincomb, norm, scale, sub};
use crate::sphere::{project_out, SlerpPlan, SphereToken, NORM_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathKind {
    Linear,
    Shell,
    Slerp,
}

impl fmt::Display for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathKind::Linear => "linear",
            PathKind::Shell => "shell",
            PathKind::Slerp => "slerp",
        })
    }
}

impl FromStr for PathKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(PathKind::Linear),
            "shell" => Ok(PathKind::Shell),
            "slerp" => Ok(PathKind::Slerp),
            other => Err(Error::InvalidArgument(format!("unknown path kind {other:?}"))),
        }
    }
}

/// Interpolated state `z_t` with its velocity target `u_t`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathPoint {
    pub z_t: Vec<f64>,
    pub u_t: Vec<f64>,
    pub t: f64,
    pub kind: PathKind,
}

/// Split of a velocity's squared norm into radial and tangential parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSplit {
    pub radial_energy: f64,
    pub tangential_energy: f64,
    /// `radial / (radial + tangential)`, defined as 0 for a zero velocity.
    pub share: f64,
}

/// A path between one fixed endpoint pair, ready to be evaluated at any `t`.
#[derive(Debug, Clone)]
pub enum PairPath {
    Linear { z0: Vec<f64>, z1: Vec<f64> },
    Shell { r0: f64, r1: f64, plan: SlerpPlan },
    Slerp { plan: SlerpPlan },
}

impl PairPath {
    pub fn new(kind: PathKind, z0: &[f64], z1: &[f64]) -> Result<Self> {
        if z0.len() != z1.len() {
            return Err(Error::DimensionMismatch {
                expected: z0.len(),
                got: z1.len(),
            });
        }
        match kind {
            PathKind::Linear => Ok(PairPath::Linear {
                z0: z0.to_vec(),
                z1: z1.to_vec(),
            }),
            PathKind::Shell => {
                let r0 = floored_norm(z0)?;
                let r1 = floored_norm(z1)?;
                let plan = SlerpPlan::new(
                    &SphereToken::new(scale(z0, 1.0 / r0), 1.0)?,
                    &SphereToken::new(scale(z1, 1.0 / r1), 1.0)?,
                )?;
                Ok(PairPath::Shell { r0, r1, plan })
            }
            PathKind::Slerp => {
                let x0 = SphereToken::new(z0.to_vec(), floored_norm(z0)?)?;
                let x1 = SphereToken::new(z1.to_vec(), floored_norm(z1)?)?;
                Ok(PairPath::Slerp {
                    plan: SlerpPlan::new(&x0, &x1)?,
                })
            }
        }
    }

    pub fn kind(&self) -> PathKind {
        match self {
            PairPath::Linear { .. } => PathKind::Linear,
            PairPath::Shell { .. } => PathKind::Shell,
            PairPath::Slerp { .. } => PathKind::Slerp,
        }
    }

    /// Evaluate at `t`. Values outside `[0, 1]` extrapolate the same formula.
    pub fn at(&self, t: f64) -> PathPoint {
        let (z_t, u_t) = match self {
            PairPath::Linear { z0, z1 } => (lincomb(1.0 - t, z0, t, z1), sub(z1, z0)),
            PairPath::Shell { r0, r1, plan } => {
                let dir = plan.position(t);
                let r_t = (1.0 - t) * r0 + t * r1;
                let z_t = scale(&dir, r_t);
                // product rule: d/dt (r_t dir_t)
                let u_t = lincomb(r1 - r0, &dir, r_t, &plan.velocity(t));
                (z_t, u_t)
            }
            PairPath::Slerp { plan } => {
                let z_t = plan.position(t);
                let u_t = project_out(&plan.velocity(t), &z_t);
                (z_t.into_vec(), u_t)
            }
        };
        PathPoint {
            z_t,
            u_t,
            t,
            kind: self.kind(),
        }
    }
}

fn floored_norm(z: &[f64]) -> Result<f64> {
    let n = norm(z);
    if n < NORM_FLOOR {
        return Err(Error::NearZeroNorm {
            norm: n,
            floor: NORM_FLOOR,
        });
    }
    Ok(n)
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t must lie in [0, 1], got {t}")));
    }
    Ok(())
}

/// Euclidean chord `(1 - t) z0 + t z1` with constant velocity `z1 - z0`.
pub fn linear_path(z0: &[f64], z1: &[f64], t: f64) -> Result<PathPoint> {
    check_t(t)?;
    Ok(PairPath::new(PathKind::Linear, z0, z1)?.at(t))
}

/// Slerp the directions, interpolate the radii linearly.
pub fn shell_path(z0: &[f64], z1: &[f64], t: f64) -> Result<PathPoint> {
    check_t(t)?;
    Ok(PairPath::new(PathKind::Shell, z0, z1)?.at(t))
}

/// Geodesic on the common sphere with a tangent-projected velocity target.
pub fn slerp_path(z0: &SphereToken, z1: &SphereToken, t: f64) -> Result<PathPoint> {
    check_t(t)?;
    let plan = SlerpPlan::new(z0, z1)?;
    Ok(PairPath::Slerp { plan }.at(t))
}

/// Any of the three paths by kind, on raw vectors.
pub fn path_point(kind: PathKind, z0: &[f64], z1: &[f64], t: f64) -> Result<PathPoint> {
    check_t(t)?;
    Ok(PairPath::new(kind, z0, z1)?.at(t))
}

/// Apply the token path independently at every position.
pub fn tensor_path(
    kind: PathKind,
    z0: &[Vec<f64>],
    z1: &[Vec<f64>],
    t: f64,
) -> Result<Vec<PathPoint>> {
    if z0.len() != z1.len() {
        return Err(Error::DimensionMismatch {
            expected: z0.len(),
            got: z1.len(),
        });
    }
    z0.iter()
        .zip(z1)
        .map(|(a, b)| path_point(kind, a, b, t))
        .collect()
}

/// Closed-form `|(1-t) z0 + t z1|^2` from radii and the endpoint cosine.
pub fn chord_norm_sq(r0: f64, r1: f64, cos01: f64, t: f64) -> f64 {
    let s = 1.0 - t;
    s * s * r0 * r0 + t * t * r1 * r1 + 2.0 * t * s * r0 * r1 * cos01
}

/// Decompose `u` into its component along `z` and the remainder.
pub fn radial_split(u: &[f64], z: &[f64]) -> Result<RadialSplit> {
    if u.len() != z.len() {
        return Err(Error::DimensionMismatch {
            expected: z.len(),
            got: u.len(),
        });
    }
    let zn = floored_norm(z)?;
    let along = dot(u, z) / zn;
    let total = dot(u, u);
    let radial_energy = along * along;
    let tangential_energy = (total - radial_energy).max(0.0);
    let share = if total == 0.0 {
        0.0
    } else {
        (radial_energy / total).clamp(0.0, 1.0)
    };
    Ok(RadialSplit {
        radial_energy,
        tangential_energy,
        share,
    })
}
