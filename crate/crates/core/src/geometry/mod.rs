//! Differentiable Voronoi tessellation.
//!
//! The combinatorics come from a Delaunay triangulation computed on plain
//! coordinates ([`triangulate`]); every metric quantity (circumcenters,
//! clipped edge lengths, site distances, cell areas) is then evaluated with
//! tape arithmetic so gradients reach the site coordinates
//! ([`voronoi_geometry`]).

mod boundary;
mod cloud;
pub mod delaunay;
pub mod polygon;
mod voronoi;

use thiserror::Error;

pub use boundary::Boundary;
pub use cloud::{SiteCloud, MERGE_TOLERANCE};
pub use delaunay::{delaunay, Triangulation};
pub use polygon::{circumcenter, clip_cell, clip_segment, polygon_area, shoelace_area, VarPoint};
pub use voronoi::{triangulate, voronoi_geometry, voronoi_geometry_from_sites, VoronoiGeometry};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("all input points are collinear")]
    AllCollinear,
    #[error("need at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("non-finite coordinate in input")]
    NonFiniteCoordinate,
    #[error("points {0} and {1} coincide")]
    DuplicatePoint(usize, usize),
    #[error("degenerate (near-collinear) triangle, determinant {determinant:e}")]
    DegenerateTriangle { determinant: f64 },
    #[error("clipping left the cell of site {0} empty")]
    EmptyCell(usize),
    #[error("site {0} is not strictly inside the boundary")]
    PointOutsideBoundary(usize),
    #[error("site {0} has non-positive permeability")]
    NonPositivePermeability(usize),
    #[error("sites {0} and {1} are closer than the merge tolerance")]
    CoincidentSites(usize, usize),
    #[error("invalid boundary: {0}")]
    InvalidBoundary(String),
    #[error("length mismatch: {points} points, {permeability} permeabilities, {fixed} fixed flags")]
    LengthMismatch {
        points: usize,
        permeability: usize,
        fixed: usize,
    },
    #[error("triangulation has {triangulated} sites but the cloud has {sites}")]
    TriangulationMismatch { sites: usize, triangulated: usize },
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    fn grid_cloud(k: usize, lo: f64, hi: f64, boundary: Boundary<f64>) -> SiteCloud<f64> {
        let step = (hi - lo) / (k - 1) as f64;
        let pts: Vec<[f64; 2]> = (0..k)
            .flat_map(|i| (0..k).map(move |j| [lo + i as f64 * step, lo + j as f64 * step]))
            .collect();
        let n = pts.len();
        SiteCloud::new(pts, vec![1.0; n], vec![false; n], boundary).unwrap()
    }

    #[test]
    fn uniform_three_by_three_grid() {
        // sites at 0.25, 0.5, 0.75 spaced 0.25 inside [0, 1]^2 scaled so the
        // spacing is 0.5: use [-0.25, 1.25]^2 around sites 0, 0.5, 1
        let b = Boundary::rectangle(-0.25, -0.25, 1.25, 1.25).unwrap();
        let cloud = grid_cloud(3, 0.0, 1.0, b);
        let tri = triangulate(&cloud).unwrap();
        let tape = Tape::new();
        let g = voronoi_geometry(&tape, &cloud, &tri).unwrap();
        // center site is index 4
        assert!((g.cell_area[4].value() - 0.25).abs() < 1e-12);
        for (e, &[i, j]) in g.edges.iter().enumerate() {
            let len = g.edge_length[e].value();
            if (i == 4 || j == 4) && len > 1e-9 {
                assert!((len - 0.5).abs() < 1e-12, "edge {i}-{j} length {len}");
                assert!((g.site_distance[e].value() - 0.5).abs() < 1e-12);
            }
        }
        let total: f64 = g.cell_area_values().iter().sum();
        assert!((total - 2.25).abs() < 1e-12);
    }

    #[test]
    fn partition_of_unit_square() {
        let b = Boundary::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let pts: Vec<[f64; 2]> = (1..=30)
            .map(|i| {
                let t = i as f64;
                [
                    0.02 + 0.96 * (t * 0.754_877_666).fract(),
                    0.02 + 0.96 * (t * 0.569_840_291).fract(),
                ]
            })
            .collect();
        let cloud = SiteCloud::new(pts, vec![1.0; 30], vec![false; 30], b).unwrap();
        let tri = triangulate(&cloud).unwrap();
        let tape = Tape::new();
        let g = voronoi_geometry(&tape, &cloud, &tri).unwrap();
        let total: f64 = g.cell_area_values().iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        // duality: every Voronoi edge is a Delaunay edge
        let del = tri.edges();
        assert!(g.edges.iter().all(|e| del.binary_search(e).is_ok()));
    }

    #[test]
    fn total_area_gradient_vanishes() {
        // the sum of areas is constant, so its gradient is zero
        let b = Boundary::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let pts = vec![[0.2, 0.3], [0.7, 0.2], [0.5, 0.8], [0.4, 0.5], [0.85, 0.7]];
        let cloud = SiteCloud::new(pts, vec![1.0; 5], vec![false; 5], b).unwrap();
        let tri = triangulate(&cloud).unwrap();
        let tape = Tape::<f64>::new();
        let g = voronoi_geometry(&tape, &cloud, &tri).unwrap();
        let total = tape.sum(g.cell_area.iter().copied());
        let grads = tape.backward(total);
        for s in &g.sites {
            assert!(grads.wrt(s[0]).abs() < 1e-12 && grads.wrt(s[1]).abs() < 1e-12);
        }
    }
}
