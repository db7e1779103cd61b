use serde::{Deserialize, Serialize};

use super::{Boundary, GeometryError};
use crate::scalar::Scalar;

/// Relative coincidence threshold: two sites closer than
/// `MERGE_TOLERANCE * diam(B)` are considered merged.
pub const MERGE_TOLERANCE: f64 = 1e-9;

/// Site points with per-site permeability, the fixed-point mask (sources and
/// measurement points) and the convex domain boundary.
///
/// Coordinates are stored as plain scalars; each forward pass lifts them onto
/// a fresh tape (see [`super::voronoi_geometry`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct SiteCloud<T> {
    points: Vec<[T; 2]>,
    permeability: Vec<T>,
    fixed: Vec<bool>,
    boundary: Boundary<T>,
}

impl<T: Scalar> SiteCloud<T> {
    pub fn new(
        points: Vec<[T; 2]>,
        permeability: Vec<T>,
        fixed: Vec<bool>,
        boundary: Boundary<T>,
    ) -> Result<Self, GeometryError> {
        let cloud = SiteCloud {
            points,
            permeability,
            fixed,
            boundary,
        };
        cloud.validate()?;
        Ok(cloud)
    }

    /// Checks every invariant: matching lengths, sites strictly inside the
    /// boundary, positive permeability, and no coincident sites.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let n = self.points.len();
        if self.permeability.len() != n || self.fixed.len() != n {
            return Err(GeometryError::LengthMismatch {
                points: n,
                permeability: self.permeability.len(),
                fixed: self.fixed.len(),
            });
        }
        for (i, p) in self.points.iter().enumerate() {
            if !(p[0].is_finite() && p[1].is_finite()) || !self.boundary.contains_strict(*p) {
                return Err(GeometryError::PointOutsideBoundary(i));
            }
        }
        for (i, &k) in self.permeability.iter().enumerate() {
            if !(k > T::zero() && k.is_finite()) {
                return Err(GeometryError::NonPositivePermeability(i));
            }
        }
        if let Some((i, j)) = self.find_coincident() {
            return Err(GeometryError::CoincidentSites(i, j));
        }
        Ok(())
    }

    /// First pair of sites closer than the merge tolerance, via a sweep over
    /// x-sorted sites.
    pub fn find_coincident(&self) -> Option<(usize, usize)> {
        let delta = self.merge_distance();
        let mut order: Vec<usize> = (0..self.points.len()).collect();
        order.sort_by(|&a, &b| {
            self.points[a][0]
                .partial_cmp(&self.points[b][0])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        for (k, &i) in order.iter().enumerate() {
            let p = self.points[i];
            for &j in &order[k + 1..] {
                let q = self.points[j];
                if q[0] - p[0] > delta {
                    break;
                }
                if (q[0] - p[0]).hypot(q[1] - p[1]) <= delta {
                    return Some((i.min(j), i.max(j)));
                }
            }
        }
        None
    }

    pub fn merge_distance(&self) -> T {
        T::lit(MERGE_TOLERANCE) * self.boundary.diameter()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[[T; 2]] {
        &self.points
    }

    pub fn permeability(&self) -> &[T] {
        &self.permeability
    }

    pub fn fixed(&self) -> &[bool] {
        &self.fixed
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.fixed[i]
    }

    pub fn boundary(&self) -> &Boundary<T> {
        &self.boundary
    }

    pub fn fixed_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.fixed[i]).collect()
    }

    pub fn movable_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| !self.fixed[i]).collect()
    }

    /// Same cloud with replaced coordinates; invariants are re-checked.
    pub fn with_points(&self, points: Vec<[T; 2]>) -> Result<Self, GeometryError> {
        SiteCloud::new(
            points,
            self.permeability.clone(),
            self.fixed.clone(),
            self.boundary.clone(),
        )
    }

    pub fn points_f64(&self) -> Vec<[f64; 2]> {
        self.points.iter().map(|p| [p[0].as_f64(), p[1].as_f64()]).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit() -> Boundary<f64> {
        Boundary::rectangle(0.0, 0.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn accepts_valid_cloud() {
        let c = SiteCloud::new(
            vec![[0.2, 0.2], [0.8, 0.3], [0.5, 0.9]],
            vec![1.0, 0.1, 1.0],
            vec![true, false, false],
            unit(),
        )
        .unwrap();
        assert_eq!(c.fixed_indices(), vec![0]);
        assert_eq!(c.movable_indices(), vec![1, 2]);
    }

    #[test]
    fn rejects_each_invariant_violation() {
        let pts = vec![[0.2, 0.2], [0.8, 0.3], [0.5, 0.9]];
        let k = vec![1.0; 3];
        let f = vec![false; 3];
        assert!(matches!(
            SiteCloud::new(vec![[0.2, 0.2], [1.0, 0.3], [0.5, 0.9]], k.clone(), f.clone(), unit()),
            Err(GeometryError::PointOutsideBoundary(1))
        ));
        assert!(matches!(
            SiteCloud::new(pts.clone(), vec![1.0, 0.0, 1.0], f.clone(), unit()),
            Err(GeometryError::NonPositivePermeability(1))
        ));
        assert!(matches!(
            SiteCloud::new(
                vec![[0.2, 0.2], [0.5, 0.9], [0.2, 0.2 + 1e-12]],
                k.clone(),
                f.clone(),
                unit()
            ),
            Err(GeometryError::CoincidentSites(0, 2))
        ));
        assert!(matches!(
            SiteCloud::new(pts, vec![1.0; 2], f, unit()),
            Err(GeometryError::LengthMismatch { .. })
        ));
    }
}
