use super::delaunay::{extent, Triangulation};
use super::polygon::{circumcenter, clip_cell, clip_segment, shoelace_area, VarPoint};
use super::{GeometryError, SiteCloud};
use crate::autodiff::{Tape, Var};
use crate::scalar::Scalar;

/// Differentiable Voronoi quantities for one site configuration.
///
/// `edges[e] = [i, j]` (with `i < j`) lists the site pairs whose clipped
/// Voronoi cells share a boundary segment; `edge_length[e]` is that segment's
/// length and `site_distance[e]` the distance between the two sites.
#[derive(Debug, Clone)]
pub struct VoronoiGeometry<'t, T: Scalar> {
    pub sites: Vec<VarPoint<'t, T>>,
    pub edges: Vec<[usize; 2]>,
    pub edge_length: Vec<Var<'t, T>>,
    pub site_distance: Vec<Var<'t, T>>,
    pub cell_area: Vec<Var<'t, T>>,
    /// Circumcenter of every triangle of the triangulation, super triangles
    /// included, indexed like [`Triangulation::all_triangles`].
    pub circumcenters: Vec<VarPoint<'t, T>>,
    /// Clipped cell polygons, counterclockwise.
    pub cells: Vec<Vec<VarPoint<'t, T>>>,
}

impl<T: Scalar> VoronoiGeometry<'_, T> {
    pub fn n_cells(&self) -> usize {
        self.cell_area.len()
    }

    pub fn edge_length_values(&self) -> Vec<T> {
        self.edge_length.iter().map(|v| v.value()).collect()
    }

    pub fn site_distance_values(&self) -> Vec<T> {
        self.site_distance.iter().map(|v| v.value()).collect()
    }

    pub fn cell_area_values(&self) -> Vec<T> {
        self.cell_area.iter().map(|v| v.value()).collect()
    }
}

/// Triangulates a cloud with a super-triangle sized from its boundary, which
/// keeps the super vertices' cells out of the domain.
pub fn triangulate<T: Scalar>(cloud: &SiteCloud<T>) -> Result<Triangulation, GeometryError> {
    let b = cloud
        .boundary()
        .vertices()
        .iter()
        .map(|v| [v[0].as_f64(), v[1].as_f64()]);
    let (lo, hi) = extent(b);
    Triangulation::build(&cloud.points_f64(), lo, hi)
}

/// Lifts the cloud's coordinates onto `tape` as leaves and evaluates the
/// clipped Voronoi geometry for the frozen combinatorics `tri`.
pub fn voronoi_geometry<'t, T: Scalar>(
    tape: &'t Tape<T>,
    cloud: &SiteCloud<T>,
    tri: &Triangulation,
) -> Result<VoronoiGeometry<'t, T>, GeometryError> {
    let sites: Vec<VarPoint<'t, T>> = cloud
        .points()
        .iter()
        .map(|p| [tape.var(p[0]), tape.var(p[1])])
        .collect();
    voronoi_geometry_from_sites(tape, sites, cloud, tri)
}

/// As [`voronoi_geometry`], with caller-provided site variables (whose
/// values may differ from the cloud's stored coordinates, e.g. for finite
/// differences with frozen combinatorics).
pub fn voronoi_geometry_from_sites<'t, T: Scalar>(
    tape: &'t Tape<T>,
    sites: Vec<VarPoint<'t, T>>,
    cloud: &SiteCloud<T>,
    tri: &Triangulation,
) -> Result<VoronoiGeometry<'t, T>, GeometryError> {
    let n = cloud.len();
    if tri.n_points() != n || sites.len() != n {
        return Err(GeometryError::TriangulationMismatch {
            sites: n,
            triangulated: tri.n_points(),
        });
    }
    let boundary = cloud.boundary();

    let super_vertices: Vec<VarPoint<'t, T>> = (n..n + 3)
        .map(|v| {
            let p = tri.vertex(v);
            [tape.constant(T::lit(p[0])), tape.constant(T::lit(p[1]))]
        })
        .collect();
    let vertex = |v: u32| -> VarPoint<'t, T> {
        let v = v as usize;
        if v < n {
            sites[v]
        } else {
            super_vertices[v - n]
        }
    };

    let circumcenters = tri
        .all_triangles()
        .iter()
        .map(|t| circumcenter(vertex(t[0]), vertex(t[1]), vertex(t[2])))
        .collect::<Result<Vec<_>, _>>()?;

    let mut cells = Vec::with_capacity(n);
    let mut cell_area = Vec::with_capacity(n);
    let mut edge_records: Vec<([usize; 2], Var<'t, T>)> = Vec::new();
    for i in 0..n {
        let fan = tri.fan(i);
        let polygon: Vec<VarPoint<'t, T>> = fan.iter().map(|&(t, _)| circumcenters[t]).collect();
        for (k, &(t, j)) in fan.iter().enumerate() {
            if j >= n || j < i {
                continue;
            }
            let next = fan[(k + 1) % fan.len()].0;
            if let Some((p, q)) = clip_segment(circumcenters[t], circumcenters[next], boundary) {
                edge_records.push(([i, j], (q[0] - p[0]).hypot(q[1] - p[1])));
            }
        }
        let clipped = clip_cell(&polygon, boundary);
        let area = shoelace_area(tape, &clipped);
        if clipped.len() < 3 || !(area.value() > T::zero()) {
            return Err(GeometryError::EmptyCell(i));
        }
        cells.push(clipped);
        cell_area.push(area);
    }

    edge_records.sort_by_key(|(e, _)| *e);
    let edges: Vec<[usize; 2]> = edge_records.iter().map(|(e, _)| *e).collect();
    let edge_length: Vec<Var<'t, T>> = edge_records.iter().map(|(_, l)| *l).collect();
    let site_distance = edges
        .iter()
        .map(|&[i, j]| (sites[j][0] - sites[i][0]).hypot(sites[j][1] - sites[i][1]))
        .collect();

    Ok(VoronoiGeometry {
        sites,
        edges,
        edge_length,
        site_distance,
        cell_area,
        circumcenters,
        cells,
    })
}
