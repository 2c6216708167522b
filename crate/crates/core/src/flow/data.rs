use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::Distribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::dot;
use crate::sphere::{radial_project, sample_gaussian, SphereToken, ON_SPHERE_TOL};

/// Mixture of projected Gaussians on `S^{d-1}(R)`.
///
/// A draw picks a center by weight, adds isotropic noise of scale `spread`,
/// and projects back onto the sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDataset {
    pub d: usize,
    pub radius: f64,
    pub centers: Vec<Vec<f64>>,
    pub spread: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SyntheticDataset {
    pub fn new(radius: f64, centers: Vec<Vec<f64>>, spread: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let d = centers.first().map(Vec::len).ok_or(Error::EmptyInput)?;
        if spread.len() != centers.len() || weights.len() != centers.len() {
            return Err(Error::InvalidArgument(
                "centers, spreads and weights must have equal length".into(),
            ));
        }
        for c in &centers {
            if c.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: c.len() });
            }
            SphereToken::new(c.clone(), radius)?;
        }
        if spread.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidArgument("spreads must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| *w < 0.0) || (total - 1.0).abs() > ON_SPHERE_TOL {
            return Err(Error::InvalidArgument(format!(
                "weights must be a probability vector, sum is {total}"
            )));
        }
        Ok(Self {
            d,
            radius,
            centers,
            spread,
            weights,
        })
    }

    /// Centers on the first `weights.len()` coordinate axes, radius `sqrt(d)`.
    pub fn axis_centers(d: usize, spread: f64, weights: Vec<f64>) -> Result<Self> {
        if weights.len() > d {
            return Err(Error::InvalidArgument("more centers than axes".into()));
        }
        let radius = (d as f64).sqrt();
        let centers = (0..weights.len())
            .map(|k| {
                let mut c = vec![0.0; d];
                c[k] = radius;
                c
            })
            .collect();
        Self::new(radius, centers, vec![spread; weights.len()], weights)
    }

    pub fn n_centers(&self) -> usize {
        self.centers.len()
    }

    /// One data point and the index of the center it was drawn around.
    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> Result<(Vec<f64>, usize)> {
        let pick = WeightedIndex::new(&self.weights)
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let k = pick.sample(rng);
        loop {
            let noise = sample_gaussian(self.d, rng);
            let z: Vec<f64> = self.centers[k]
                .iter()
                .zip(&noise)
                .map(|(c, e)| c + self.spread[k] * e)
                .collect();
            // the origin is a measure-zero event
            if let Ok(p) = radial_project(&z, self.radius) {
                return Ok((p.into_vec(), k));
            }
        }
    }

    /// Index of the center with the largest inner product with `z`.
    pub fn nearest_center(&self, z: &[f64]) -> usize {
        self.centers
            .iter()
            .enumerate()
            .map(|(k, c)| (k, dot(c, z)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(k, _)| k)
            .unwrap()
    }

    /// Fraction of `points` nearest each center.
    pub fn assignment_histogram<T: AsRef<[f64]>>(&self, points: &[T]) -> Vec<f64> {
        let mut counts = vec![0usize; self.n_centers()];
        for p in points {
            counts[self.nearest_center(p.as_ref())] += 1;
        }
        let n = points.len().max(1) as f64;
        counts.iter().map(|c| *c as f64 / n).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::norm;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn draws_are_on_sphere_and_follow_weights() {
        let ds = SyntheticDataset::axis_centers(4, 0.3, vec![0.7, 0.3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<Vec<f64>> = (0..20_000).map(|_| ds.sample(&mut rng).unwrap().0).collect();
        assert!(pts.iter().all(|p| (norm(p) - 2.0).abs() < 1e-12));
        let h = ds.assignment_histogram(&pts);
        assert!((h[0] - 0.7).abs() < 0.02, "{h:?}");
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SyntheticDataset::new(1.0, vec![vec![2.0, 0.0]], vec![0.1], vec![1.0]).is_err());
        assert!(SyntheticDataset::new(1.0, vec![vec![1.0, 0.0]], vec![0.1], vec![0.5]).is_err());
        assert!(SyntheticDataset::new(1.0, vec![vec![1.0, 0.0]], vec![0.0], vec![1.0]).is_err());
        assert!(SyntheticDataset::axis_centers(2, 0.1, vec![0.2, 0.3, 0.5]).is_err());
    }
}
