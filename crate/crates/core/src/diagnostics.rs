//! Shell statistics, norm/off-shell/radial-share profiles along paths, and
//! direction/radius component swaps.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::numeric::{ksum, norm, scale};
use crate::paths::{radial_split, PairPath, PathKind};
use crate::sphere::{sample_uniform_sphere, NORM_FLOOR, ON_SPHERE_TOL};

/// Default number of grid points for path profiles.
pub const DEFAULT_GRID: usize = 101;
/// Default number of endpoint pairs averaged per profile.
pub const DEFAULT_PAIRS: usize = 2048;

/// Per-token norm statistics over a token set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShellStats {
    pub n_tokens: usize,
    pub mean_radius: f64,
    /// Population standard deviation of the norms.
    pub std_radius: f64,
    pub cv: f64,
}

impl ShellStats {
    /// Summarize a list of norms.
    ///
    /// A set whose norms all agree with the mean to the on-sphere tolerance is
    /// reported as an exact shell: `std_radius = 0`, `cv = 0`.
    pub fn from_norms(norms: &[f64]) -> Result<Self> {
        if norms.is_empty() {
            return Err(Error::EmptyInput);
        }
        if norms.iter().any(|r| !r.is_finite()) {
            return Err(Error::NonFinite("token norms"));
        }
        let n = norms.len() as f64;
        let mean = ksum(norms.iter().copied()) / n;
        let max_dev = norms.iter().map(|r| (r - mean).abs()).fold(0.0, f64::max);
        let std = if max_dev <= ON_SPHERE_TOL * mean {
            0.0
        } else {
            (ksum(norms.iter().map(|r| (r - mean) * (r - mean))) / n).sqrt()
        };
        let cv = if mean > 0.0 { std / mean } else { 0.0 };
        Ok(Self {
            n_tokens: norms.len(),
            mean_radius: mean,
            std_radius: std,
            cv,
        })
    }

    pub fn is_exact_shell(&self) -> bool {
        self.std_radius == 0.0
    }
}

/// Norm statistics of a token collection.
pub fn shell_stats<I, T>(tokens: I) -> Result<ShellStats>
where
    I: IntoIterator<Item = T>,
    T: AsRef<[f64]>,
{
    let mut dim = None;
    let mut norms = Vec::new();
    for tok in tokens {
        let tok = tok.as_ref();
        match dim {
            None => dim = Some(tok.len()),
            Some(d) if d != tok.len() => {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: tok.len(),
                })
            }
            _ => {}
        }
        norms.push(norm(tok));
    }
    ShellStats::from_norms(&norms)
}

/// Distance of `|z_t|` from the nearest endpoint shell in that shell's standard
/// deviations.
pub fn off_shell_sigma(z_t: &[f64], shell0: &ShellStats, shell1: &ShellStats) -> Result<f64> {
    for (which, s) in [(0, shell0), (1, shell1)] {
        if s.is_exact_shell() {
            return Err(Error::DegenerateShell { which });
        }
    }
    let r = norm(z_t);
    Ok(sigma_distance(r, shell0).min(sigma_distance(r, shell1)))
}

fn sigma_distance(r: f64, s: &ShellStats) -> f64 {
    (r - s.mean_radius).abs() / s.std_radius
}

/// Units of the off-shell column in a [`PathProfile`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OffShellUnits {
    /// Standard deviations of the nearest endpoint shell.
    Sigma,
    /// Absolute radius deviation, used when an endpoint shell is exact.
    Absolute,
}

/// Per-t aggregates of a path family over many endpoint pairs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathProfile {
    pub kind: PathKind,
    pub t_grid: Vec<f64>,
    pub mean_norm: Vec<f64>,
    pub std_norm: Vec<f64>,
    pub mean_offshell: Vec<f64>,
    pub mean_radial_share: Vec<f64>,
    pub offshell_units: OffShellUnits,
    pub shell0: ShellStats,
    pub shell1: ShellStats,
}

/// `n` evenly spaced points covering `[0, 1]`, endpoints included.
pub fn uniform_grid(n: usize) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "grid needs at least 2 points, got {n}"
        )));
    }
    let last = (n - 1) as f64;
    Ok((0..n).map(|k| k as f64 / last).collect())
}

fn check_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.is_empty() {
        return Err(Error::EmptyInput);
    }
    if t_grid.iter().any(|t| !(0.0..=1.0).contains(t)) {
        return Err(Error::InvalidArgument("grid points must lie in [0, 1]".into()));
    }
    if t_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument("grid must be non-decreasing".into()));
    }
    Ok(())
}

/// Aggregate norm, off-shell distance and radial share along `kind` paths.
///
/// Endpoint shells default to the statistics of the supplied pairs; pass
/// `shells` to override them with externally measured values.
pub fn path_profile<T: AsRef<[f64]>>(
    pairs: &[(T, T)],
    kind: PathKind,
    t_grid: &[f64],
    shells: Option<(ShellStats, ShellStats)>,
) -> Result<PathProfile> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput);
    }
    check_grid(t_grid)?;
    let (shell0, shell1) = match shells {
        Some(s) => s,
        None => (
            shell_stats(pairs.iter().map(|p| p.0.as_ref()))?,
            shell_stats(pairs.iter().map(|p| p.1.as_ref()))?,
        ),
    };
    let units = if shell0.is_exact_shell() || shell1.is_exact_shell() {
        OffShellUnits::Absolute
    } else {
        OffShellUnits::Sigma
    };
    let paths = pairs
        .iter()
        .map(|(a, b)| PairPath::new(kind, a.as_ref(), b.as_ref()))
        .collect::<Result<Vec<_>>>()?;

    let n = paths.len() as f64;
    let mut profile = PathProfile {
        kind,
        t_grid: t_grid.to_vec(),
        mean_norm: Vec::with_capacity(t_grid.len()),
        std_norm: Vec::with_capacity(t_grid.len()),
        mean_offshell: Vec::with_capacity(t_grid.len()),
        mean_radial_share: Vec::with_capacity(t_grid.len()),
        offshell_units: units,
        shell0,
        shell1,
    };
    let mut norms = Vec::with_capacity(paths.len());
    let mut offshell = Vec::with_capacity(paths.len());
    let mut shares = Vec::with_capacity(paths.len());
    for &t in t_grid {
        norms.clear();
        offshell.clear();
        shares.clear();
        for path in &paths {
            let p = path.at(t);
            let r = norm(&p.z_t);
            norms.push(r);
            offshell.push(match units {
                OffShellUnits::Sigma => sigma_distance(r, &shell0).min(sigma_distance(r, &shell1)),
                OffShellUnits::Absolute => (r - shell0.mean_radius)
                    .abs()
                    .min((r - shell1.mean_radius).abs()),
            });
            shares.push(radial_split(&p.u_t, &p.z_t)?.share);
        }
        let mean = ksum(norms.iter().copied()) / n;
        let var = ksum(norms.iter().map(|r| (r - mean) * (r - mean))) / n;
        profile.mean_norm.push(mean);
        profile.std_norm.push(var.sqrt());
        profile.mean_offshell.push(ksum(offshell.iter().copied()) / n);
        profile.mean_radial_share.push(ksum(shares.iter().copied()) / n);
    }
    Ok(profile)
}

/// Hybrids built by exchanging radius and direction between two tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct SwapPair {
    /// Anchor direction at the substitute's radius.
    pub keep_direction: Vec<f64>,
    /// Substitute direction at the anchor's radius.
    pub keep_radius: Vec<f64>,
}

pub fn component_swap(anchor: &[f64], substitute: &[f64]) -> Result<SwapPair> {
    if anchor.len() != substitute.len() {
        return Err(Error::DimensionMismatch {
            expected: anchor.len(),
            got: substitute.len(),
        });
    }
    let ra = norm(anchor);
    let rs = norm(substitute);
    for r in [ra, rs] {
        if r < NORM_FLOOR {
            return Err(Error::NearZeroNorm {
                norm: r,
                floor: NORM_FLOOR,
            });
        }
    }
    Ok(SwapPair {
        keep_direction: scale(anchor, rs / ra),
        keep_radius: scale(substitute, ra / rs),
    })
}

/// Synthetic endpoint families for profile experiments.
///
/// Grammar: `sphere:d=<int>,R=<real>` or
/// `gauss-shells:d=<int>,r0=<real>,r1=<real>,cv=<real>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SyntheticPairs {
    /// Independent uniform points on one sphere.
    Sphere { d: usize, radius: f64 },
    /// Uniform directions with Gaussian radii `N(r, (cv r)^2)` per endpoint.
    GaussShells { d: usize, r0: f64, r1: f64, cv: f64 },
}

impl SyntheticPairs {
    pub fn dim(&self) -> usize {
        match *self {
            SyntheticPairs::Sphere { d, .. } | SyntheticPairs::GaussShells { d, .. } => d,
        }
    }

    pub fn sample<G: Rng + ?Sized>(&self, n: usize, rng: &mut G) -> Result<Vec<(Vec<f64>, Vec<f64>)>> {
        (0..n)
            .map(|_| match *self {
                SyntheticPairs::Sphere { d, radius } => Ok((
                    sample_uniform_sphere(d, radius, rng)?.into_vec(),
                    sample_uniform_sphere(d, radius, rng)?.into_vec(),
                )),
                SyntheticPairs::GaussShells { d, r0, r1, cv } => {
                    Ok((shell_point(d, r0, cv, rng)?, shell_point(d, r1, cv, rng)?))
                }
            })
            .collect()
    }
}

fn shell_point<G: Rng + ?Sized>(d: usize, r: f64, cv: f64, rng: &mut G) -> Result<Vec<f64>> {
    let dir = sample_uniform_sphere(d, 1.0, rng)?;
    let radius = Normal::new(r, cv * r)
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    // Redraw the (rare for small cv) nonpositive radii.
    loop {
        let s = radius.sample(rng);
        if s > NORM_FLOOR {
            return Ok(scale(&dir, s));
        }
    }
}

impl FromStr for SyntheticPairs {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |msg: String| Error::InvalidArgument(format!("synthetic spec {s:?}: {msg}"));
        let (family, rest) = s.split_once(':').ok_or_else(|| bad("missing ':'".into()))?;
        let mut fields = std::collections::BTreeMap::new();
        for kv in rest.split(',') {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| bad(format!("expected key=value, got {kv:?}")))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|_| bad(format!("bad number for {k}")))?;
            if !v.is_finite() {
                return Err(bad(format!("{k} must be finite")));
            }
            fields.insert(k.trim().to_string(), v);
        }
        let mut take = |k: &str| fields.remove(k).ok_or_else(|| bad(format!("missing {k}")));
        let d = take("d")?;
        if d.fract() != 0.0 || d < 2.0 {
            return Err(bad("d must be an integer >= 2".into()));
        }
        let d = d as usize;
        let spec = match family {
            "sphere" => {
                let radius = take("R")?;
                if radius <= 0.0 {
                    return Err(bad("R must be positive".into()));
                }
                SyntheticPairs::Sphere { d, radius }
            }
            "gauss-shells" => {
                let (r0, r1, cv) = (take("r0")?, take("r1")?, take("cv")?);
                if r0 <= 0.0 || r1 <= 0.0 || cv < 0.0 {
                    return Err(bad("radii must be positive and cv nonnegative".into()));
                }
                SyntheticPairs::GaussShells { d, r0, r1, cv }
            }
            other => return Err(bad(format!("unknown family {other:?}"))),
        };
        if let Some(k) = fields.keys().next() {
            return Err(bad(format!("unexpected key {k}")));
        }
        Ok(spec)
    }
}
