//! Exact vector geometry on the fixed-radius hypersphere.
//!
//! Every point handled here lives on `S^{d-1}(R) = { x in R^d : |x| = R }`.
//! Slerp is evaluated through a [`SlerpPlan`] that fixes the numerical regime
//! once per endpoint pair:
//!
//! * near-coincident endpoints: linear interpolation, then renormalization;
//! * near-antipodal endpoints: a deterministic great circle through `-x0`;
//! * everything else: the textbook `sin((1-t)w)/sin w, sin(tw)/sin w` weights.

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;
use std::ops::Deref;

use crate::error::{Error, Result};
use crate::numeric::{dot, lincomb, norm, robust_angle, scale};

/// Cosines are clamped to `[-1 + COS_CLAMP, 1 - COS_CLAMP]` before `acos`.
pub const COS_CLAMP: f64 = 1e-6;
/// Norms below this are treated as the origin.
pub const NORM_FLOOR: f64 = 1e-8;
/// Below this angle slerp falls back to normalized linear interpolation.
pub const SMALL_ANGLE: f64 = 1e-4;
/// Above `PI - ANTIPODAL_MARGIN` slerp follows a fixed great circle.
pub const ANTIPODAL_MARGIN: f64 = 0.1;
/// Relative on-sphere certificate tolerance.
pub const ON_SPHERE_TOL: f64 = 1e-6;
/// Relative tangency certificate tolerance.
pub const TANGENT_TOL: f64 = 1e-5;

/// One latent token: a finite vector in `R^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct Token(Vec<f64>);

impl Token {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyInput);
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("token"));
        }
        Ok(Token(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for Token {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// A token certified to lie on the sphere of radius `radius`.
#[derive(Debug, Clone, PartialEq)]
pub struct SphereToken {
    values: Vec<f64>,
    radius: f64,
}

impl SphereToken {
    /// Certify `values` as a point on the sphere of radius `radius`.
    pub fn new(values: Vec<f64>, radius: f64) -> Result<Self> {
        check_radius(radius)?;
        check_dim(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("sphere token"));
        }
        let n = norm(&values);
        if (n - radius).abs() > ON_SPHERE_TOL * radius {
            return Err(Error::OffSphere { norm: n, radius });
        }
        Ok(Self { values, radius })
    }

    pub(crate) fn new_unchecked(values: Vec<f64>, radius: f64) -> Self {
        debug_assert!((norm(&values) - radius).abs() <= ON_SPHERE_TOL * radius);
        Self { values, radius }
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    /// Unit direction `x / R`.
    pub fn unit(&self) -> Vec<f64> {
        scale(&self.values, 1.0 / self.radius)
    }
}

impl Deref for SphereToken {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// A vector certified tangent to the sphere at some base point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    vector: Vec<f64>,
}

impl TangentVector {
    /// Certify `vector` as tangent at `base`: `|<v, p>| <= TANGENT_TOL * |v| * R`.
    pub fn certify(vector: Vec<f64>, base: &SphereToken) -> Result<Self> {
        if vector.len() != base.dim() {
            return Err(Error::DimensionMismatch {
                expected: base.dim(),
                got: vector.len(),
            });
        }
        let inner = dot(&vector, base).abs();
        let bound = TANGENT_TOL * norm(&vector) * base.radius();
        if inner > bound {
            return Err(Error::NotTangent { inner, bound });
        }
        Ok(Self { vector })
    }

    pub fn zero(dim: usize) -> Self {
        Self {
            vector: vec![0.0; dim],
        }
    }

    pub fn norm(&self) -> f64 {
        norm(&self.vector)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.vector
    }
}

impl Deref for TangentVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.vector
    }
}

fn check_radius(radius: f64) -> Result<()> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "radius must be positive and finite, got {radius}"
        )));
    }
    Ok(())
}

fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        return Err(Error::InvalidArgument(format!(
            "spherical operations need d >= 2, got {d}"
        )));
    }
    Ok(())
}

/// Radial projection `R z / |z|`.
pub fn radial_project(z: &[f64], radius: f64) -> Result<SphereToken> {
    check_radius(radius)?;
    check_dim(z.len())?;
    let n = norm(z);
    if !n.is_finite() {
        return Err(Error::NonFinite("projection input"));
    }
    if n < NORM_FLOOR {
        return Err(Error::NearZeroNorm {
            norm: n,
            floor: NORM_FLOOR,
        });
    }
    Ok(SphereToken::new_unchecked(scale(z, radius / n), radius))
}

/// Uniform draw from `S^{d-1}(R)` via a radially projected isotropic Gaussian.
pub fn sample_uniform_sphere<G: Rng + ?Sized>(
    d: usize,
    radius: f64,
    rng: &mut G,
) -> Result<SphereToken> {
    check_dim(d)?;
    check_radius(radius)?;
    loop {
        let eps: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        if norm(&eps) >= NORM_FLOOR {
            return radial_project(&eps, radius);
        }
    }
}

/// Draw from `N(0, I_d)`.
pub fn sample_gaussian<G: Rng + ?Sized>(d: usize, rng: &mut G) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

/// Mean of the chi distribution with `d` degrees of freedom,
/// `sqrt(2) Gamma((d+1)/2) / Gamma(d/2)`, through log-gamma.
pub fn gaussian_mean_radius_exact(d: usize) -> f64 {
    assert!(d >= 1, "dimension must be at least 1");
    let d = d as f64;
    2f64.sqrt() * (ln_gamma((d + 1.0) / 2.0) - ln_gamma(d / 2.0)).exp()
}

/// `sqrt(d - 1/2)`.
pub fn gaussian_mean_radius_approx(d: usize) -> f64 {
    assert!(d >= 1, "dimension must be at least 1");
    (d as f64 - 0.5).sqrt()
}

/// Coefficient of variation of the Gaussian norm, `sqrt(d - E[R]^2) / E[R]`.
pub fn gaussian_norm_cv(d: usize) -> f64 {
    let m = gaussian_mean_radius_exact(d);
    (d as f64 - m * m).max(0.0).sqrt() / m
}

/// Analytical norm statistics of `N(0, I_d)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GaussianNormStats {
    pub d: usize,
    pub mean_radius: f64,
    pub cv: f64,
}

impl GaussianNormStats {
    pub fn for_dim(d: usize) -> Self {
        Self {
            d,
            mean_radius: gaussian_mean_radius_exact(d),
            cv: gaussian_norm_cv(d),
        }
    }
}

/// Angle between two points, with the cosine clamped before `acos`.
///
/// The clamp means coincident points report about `1.4e-3` rather than 0 and
/// antipodal points slightly less than pi.
pub fn angle_between(x0: &[f64], x1: &[f64]) -> f64 {
    clamped_cos(x0, x1).acos()
}

fn clamped_cos(x0: &[f64], x1: &[f64]) -> f64 {
    let n0 = norm(x0).max(NORM_FLOOR);
    let n1 = norm(x1).max(NORM_FLOOR);
    (dot(x0, x1) / (n0 * n1)).clamp(-1.0 + COS_CLAMP, 1.0 - COS_CLAMP)
}

#[derive(Debug, Clone, PartialEq)]
pub enum SlerpRegime {
    /// Linear interpolation of the unit endpoints, then renormalization.
    NearCoincident,
    Standard { omega: f64 },
    /// Great circle `cos(pi t) u0 + sin(pi t) n` through `-u0`.
    NearAntipodal { normal: Vec<f64> },
}

/// Precomputed slerp between two points on a common sphere.
#[derive(Debug, Clone)]
pub struct SlerpPlan {
    u0: Vec<f64>,
    u1: Vec<f64>,
    radius: f64,
    regime: SlerpRegime,
}

impl SlerpPlan {
    pub fn new(x0: &SphereToken, x1: &SphereToken) -> Result<Self> {
        if x0.dim() != x1.dim() {
            return Err(Error::DimensionMismatch {
                expected: x0.dim(),
                got: x1.dim(),
            });
        }
        let (r0, r1) = (x0.radius(), x1.radius());
        if (r0 - r1).abs() > ON_SPHERE_TOL * r0.max(r1) {
            return Err(Error::RadiusMismatch {
                r0,
                r1,
                tol: ON_SPHERE_TOL,
            });
        }
        Ok(Self::from_units(x0.unit(), x1.unit(), r0))
    }

    /// Plan between unit directions `u0`, `u1`, scaled by `radius`.
    pub(crate) fn from_units(u0: Vec<f64>, u1: Vec<f64>, radius: f64) -> Self {
        let raw_cos = dot(&u0, &u1);
        let omega = raw_cos.clamp(-1.0 + COS_CLAMP, 1.0 - COS_CLAMP).acos();
        // The clamp bounds omega below by acos(1 - COS_CLAMP) ~ 1.4e-3, so a
        // saturated upper clamp also routes to the near-coincident branch.
        let regime = if raw_cos >= 1.0 - COS_CLAMP || omega < SMALL_ANGLE {
            SlerpRegime::NearCoincident
        } else if omega > PI - ANTIPODAL_MARGIN {
            SlerpRegime::NearAntipodal {
                normal: orthogonal_unit(&u0),
            }
        } else {
            SlerpRegime::Standard { omega }
        };
        Self {
            u0,
            u1,
            radius,
            regime,
        }
    }

    pub fn regime(&self) -> &SlerpRegime {
        &self.regime
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Angle swept by the path over `t in [0, 1]`.
    pub fn sweep(&self) -> f64 {
        match &self.regime {
            SlerpRegime::NearCoincident => robust_angle(&self.u0, &self.u1),
            SlerpRegime::Standard { omega } => *omega,
            SlerpRegime::NearAntipodal { .. } => PI,
        }
    }

    /// Point on the unit sphere at time `t`.
    pub(crate) fn unit_position(&self, t: f64) -> Vec<f64> {
        match &self.regime {
            SlerpRegime::NearCoincident => {
                let p = lincomb(1.0 - t, &self.u0, t, &self.u1);
                let n = norm(&p);
                scale(&p, 1.0 / n)
            }
            SlerpRegime::Standard { omega } => {
                let s = omega.sin();
                lincomb(
                    ((1.0 - t) * omega).sin() / s,
                    &self.u0,
                    (t * omega).sin() / s,
                    &self.u1,
                )
            }
            SlerpRegime::NearAntipodal { normal } => {
                lincomb((PI * t).cos(), &self.u0, (PI * t).sin(), normal)
            }
        }
    }

    /// Time derivative of [`Self::unit_position`].
    pub(crate) fn unit_velocity(&self, t: f64) -> Vec<f64> {
        match &self.regime {
            SlerpRegime::NearCoincident => {
                let p = lincomb(1.0 - t, &self.u0, t, &self.u1);
                let dp: Vec<f64> = self.u1.iter().zip(&self.u0).map(|(a, b)| a - b).collect();
                let n = norm(&p);
                let radial = dot(&p, &dp) / (n * n);
                p.iter()
                    .zip(&dp)
                    .map(|(pi, dpi)| (dpi - radial * pi) / n)
                    .collect()
            }
            SlerpRegime::Standard { omega } => {
                let k = omega / omega.sin();
                lincomb(
                    -k * ((1.0 - t) * omega).cos(),
                    &self.u0,
                    k * (t * omega).cos(),
                    &self.u1,
                )
            }
            SlerpRegime::NearAntipodal { normal } => {
                lincomb(-PI * (PI * t).sin(), &self.u0, PI * (PI * t).cos(), normal)
            }
        }
    }

    /// Point on the sphere of radius `R` at time `t`.
    pub fn position(&self, t: f64) -> SphereToken {
        let mut u = self.unit_position(t);
        // The standard branch is exact to rounding; pin the radius for the
        // others too so the certificate holds regardless of regime.
        let n = norm(&u);
        u.iter_mut().for_each(|x| *x *= self.radius / n);
        SphereToken::new_unchecked(u, self.radius)
    }

    /// Velocity `d/dt position(t)`, tangent at `position(t)`.
    pub fn velocity(&self, t: f64) -> Vec<f64> {
        scale(&self.unit_velocity(t), self.radius)
    }
}

/// Lowest-index standard basis vector with its `u` component removed, normalized.
fn orthogonal_unit(u: &[f64]) -> Vec<f64> {
    for k in 0..u.len() {
        let mut e: Vec<f64> = u.iter().map(|x| -u[k] * x).collect();
        e[k] += 1.0;
        let n = norm(&e);
        // Residual norm is sqrt(1 - u_k^2); some k always has u_k^2 <= 1/2.
        if n > 1e-3 {
            return scale(&e, 1.0 / n);
        }
    }
    unreachable!("d >= 2 guarantees a non-parallel basis vector")
}

fn check_t(t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::InvalidArgument(format!("t must lie in [0, 1], got {t}")));
    }
    Ok(())
}

/// Spherical linear interpolation between two points of a common sphere.
pub fn slerp(x0: &SphereToken, x1: &SphereToken, t: f64) -> Result<SphereToken> {
    check_t(t)?;
    Ok(SlerpPlan::new(x0, x1)?.position(t))
}

/// Velocity of [`slerp`] at time `t`; speed is `R * omega` in the standard regime.
pub fn slerp_velocity(x0: &SphereToken, x1: &SphereToken, t: f64) -> Result<TangentVector> {
    check_t(t)?;
    let plan = SlerpPlan::new(x0, x1)?;
    Ok(TangentVector {
        vector: plan.velocity(t),
    })
}

/// Remove the radial component of `v` at `z`: `v - <v, z>/|z|^2 z`.
pub fn tangent_project(v: &[f64], z: &SphereToken) -> Result<TangentVector> {
    if v.len() != z.dim() {
        return Err(Error::DimensionMismatch {
            expected: z.dim(),
            got: v.len(),
        });
    }
    Ok(TangentVector {
        vector: project_out(v, z),
    })
}

pub(crate) fn project_out(v: &[f64], z: &[f64]) -> Vec<f64> {
    let c = dot(v, z) / dot(z, z);
    v.iter().zip(z).map(|(vi, zi)| vi - c * zi).collect()
}

/// Exponential map `cos(|v|/R) p + R sin(|v|/R) v/|v|`.
pub fn exp_map(p: &SphereToken, v: &TangentVector) -> SphereToken {
    debug_assert_eq!(p.dim(), v.len());
    let speed = v.norm();
    if speed == 0.0 {
        return p.clone();
    }
    let r = p.radius();
    let angle = speed / r;
    let out = lincomb(angle.cos(), p, r * angle.sin() / speed, v);
    SphereToken::new_unchecked(out, r)
}

/// Euler step `p + v` followed by radial projection back to the sphere.
pub fn projected_euler_step(p: &SphereToken, v: &[f64]) -> Result<SphereToken> {
    let moved: Vec<f64> = p.iter().zip(v).map(|(a, b)| a + b).collect();
    radial_project(&moved, p.radius())
}

/// Arc-length shortfall of one projected-Euler step against the exact
/// exponential-map step: `R (h w - atan(h w))`.
pub fn one_step_deficit(h: f64, omega: f64, radius: f64) -> Result<f64> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    if !(omega > 0.0 && omega < PI) {
        return Err(Error::InvalidArgument(format!(
            "angle must lie in (0, pi), got {omega}"
        )));
    }
    check_radius(radius)?;
    let x = h * omega;
    let gap = if x < 1e-2 {
        // atan series; direct subtraction cancels badly here.
        let x2 = x * x;
        x * x2 * (1.0 / 3.0 - x2 * (1.0 / 5.0 - x2 * (1.0 / 7.0 - x2 / 9.0)))
    } else {
        x - x.atan()
    };
    Ok(radius * gap)
}

/// Measured one-step gap between the exp-map and projected-Euler samplers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepGap {
    /// Arc length advanced by the exponential-map step.
    pub exp_arc: f64,
    /// Arc length advanced by the projected-Euler step.
    pub euler_arc: f64,
    /// Arc length between the two landing points.
    pub gap: f64,
}

/// Step both samplers from `slerp(x0, x1, t)` with the true slerp velocity and
/// measure where they land.
pub fn measure_step_gap(x0: &SphereToken, x1: &SphereToken, t: f64, h: f64) -> Result<StepGap> {
    let plan = SlerpPlan::new(x0, x1)?;
    let z = plan.position(t);
    let v = scale(&plan.velocity(t), h);
    let r = plan.radius();
    let by_exp = exp_map(&z, &TangentVector { vector: v.clone() });
    let by_euler = projected_euler_step(&z, &v)?;
    Ok(StepGap {
        exp_arc: r * robust_angle(&z, &by_exp),
        euler_arc: r * robust_angle(&z, &by_euler),
        gap: r * robust_angle(&by_euler, &by_exp),
    })
}
