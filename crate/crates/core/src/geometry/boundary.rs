use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::scalar::Scalar;

/// Convex domain boundary, stored as counterclockwise vertices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct Boundary<T> {
    vertices: Vec<[T; 2]>,
}

#[inline]
fn cross<T: Scalar>(o: [T; 2], a: [T; 2], b: [T; 2]) -> T {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

impl<T: Scalar> Boundary<T> {
    /// Builds a boundary from a convex vertex loop. Clockwise input is
    /// reversed; non-convex or degenerate input is rejected.
    pub fn new(mut vertices: Vec<[T; 2]>) -> Result<Self, GeometryError> {
        if vertices.len() < 3 {
            return Err(GeometryError::InvalidBoundary(format!(
                "need at least 3 vertices, got {}",
                vertices.len()
            )));
        }
        let n = vertices.len();
        let signed: T = (0..n)
            .map(|i| {
                let (a, b) = (vertices[i], vertices[(i + 1) % n]);
                a[0] * b[1] - b[0] * a[1]
            })
            .sum();
        if signed == T::zero() || !signed.is_finite() {
            return Err(GeometryError::InvalidBoundary("zero or non-finite area".into()));
        }
        if signed < T::zero() {
            vertices.reverse();
        }
        for i in 0..n {
            let turn = cross(vertices[i], vertices[(i + 1) % n], vertices[(i + 2) % n]);
            if turn <= T::zero() {
                return Err(GeometryError::InvalidBoundary(format!(
                    "not strictly convex at vertex {}",
                    (i + 1) % n
                )));
            }
        }
        Ok(Boundary { vertices })
    }

    /// Axis-aligned rectangle `[x0, x1] × [y0, y1]`.
    pub fn rectangle(x0: T, y0: T, x1: T, y1: T) -> Result<Self, GeometryError> {
        Self::new(vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]])
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    /// Directed edges `(start, end)` in counterclockwise order; the domain is
    /// on the left of each.
    pub fn edges(&self) -> impl Iterator<Item = ([T; 2], [T; 2])> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn area(&self) -> T {
        let o = self.vertices[0];
        let two = T::lit(2.0);
        self.vertices.windows(2).map(|w| cross(o, w[0], w[1])).sum::<T>() / two
    }

    /// Largest vertex-to-vertex distance.
    pub fn diameter(&self) -> T {
        let mut d = T::zero();
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                d = d.max((a[0] - b[0]).hypot(a[1] - b[1]));
            }
        }
        d
    }

    pub fn bounding_box(&self) -> ([T; 2], [T; 2]) {
        let mut lo = self.vertices[0];
        let mut hi = self.vertices[0];
        for v in &self.vertices[1..] {
            lo = [lo[0].min(v[0]), lo[1].min(v[1])];
            hi = [hi[0].max(v[0]), hi[1].max(v[1])];
        }
        (lo, hi)
    }

    /// Signed distance from `p` to the supporting line of each edge,
    /// positive inside. Returns the minimum over edges.
    pub fn inset_distance(&self, p: [T; 2]) -> T {
        self.edges()
            .map(|(a, b)| cross(a, b, p) / (b[0] - a[0]).hypot(b[1] - a[1]))
            .fold(T::infinity(), T::min)
    }

    pub fn contains_strict(&self, p: [T; 2]) -> bool {
        self.edges().all(|(a, b)| cross(a, b, p) > T::zero())
    }

    /// Moves `p` (if needed) so that it lies at least `inset` inside every
    /// edge. Exact for rectangles; alternating half-plane projections for
    /// general convex polygons.
    pub fn project_inside(&self, p: [T; 2], inset: T) -> [T; 2] {
        let mut q = p;
        for _ in 0..64 {
            let mut moved = false;
            for (a, b) in self.edges() {
                let len = (b[0] - a[0]).hypot(b[1] - a[1]);
                let d = cross(a, b, q) / len;
                if d < inset {
                    // inward unit normal of a CCW edge
                    let n = [-(b[1] - a[1]) / len, (b[0] - a[0]) / len];
                    let shift = inset - d;
                    q = [q[0] + n[0] * shift, q[1] + n[1] * shift];
                    moved = true;
                }
            }
            if !moved {
                break;
            }
        }
        q
    }

    pub fn cast<U: Scalar>(&self) -> Boundary<U> {
        Boundary {
            vertices: self
                .vertices
                .iter()
                .map(|v| [U::lit(v[0].as_f64()), U::lit(v[1].as_f64())])
                .collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clockwise_input_is_reoriented() {
        let b = Boundary::new(vec![[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]]).unwrap();
        assert_eq!(b.area(), 1.0);
        assert_eq!(b.vertices()[0], [1.0, 0.0]);
        assert_eq!(b.vertices()[1], [1.0, 1.0]);
    }

    #[test]
    fn rejects_non_convex_and_degenerate() {
        assert!(Boundary::new(vec![[0.0, 0.0], [1.0, 0.0]]).is_err());
        assert!(Boundary::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]).is_err());
        let dart = vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.5], [1.0, 2.0]];
        assert!(Boundary::new(dart).is_err());
    }

    #[test]
    fn rectangle_metrics() {
        let b = Boundary::<f64>::rectangle(-0.1, -0.1, 1.1, 1.1).unwrap();
        assert!((b.area() - 1.44).abs() < 1e-12);
        assert!((b.diameter() - 1.2 * 2f64.sqrt()).abs() < 1e-12);
        assert!(b.contains_strict([0.0, 1.0]));
        assert!(!b.contains_strict([1.1, 0.5]));
        assert!((b.inset_distance([0.0, 0.5]) - 0.1).abs() < 1e-12);
    }

    #[test]
    fn projection_clamps_into_inset_box() {
        let b = Boundary::<f64>::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let q = b.project_inside([1.5, -0.2], 1e-6);
        assert!((q[0] - (1.0 - 1e-6)).abs() < 1e-15);
        assert!((q[1] - 1e-6).abs() < 1e-15);
        assert_eq!(b.project_inside([0.3, 0.4], 1e-6), [0.3, 0.4]);
    }

    #[test]
    fn projection_into_triangle() {
        let b = Boundary::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let q = b.project_inside([2.0, 2.0], 1e-3);
        assert!(b.inset_distance(q) >= 1e-3 - 1e-9, "{q:?}");
    }
}
