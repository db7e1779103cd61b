//! Bowyer–Watson Delaunay triangulation with exact orientation and in-circle
//! predicates.
//!
//! The sites are inserted into a large enclosing super-triangle whose
//! vertices are kept in the result. Every real site is therefore an interior
//! vertex with a closed fan of triangles, so its Voronoi cell is a bounded
//! polygon of circumcenters. As long as the super vertices are far outside
//! the clipping boundary (more than one boundary diameter), their own cells
//! never reach the domain and the clipped cells of the real sites coincide
//! with the clipped Voronoi diagram of the real sites alone.

use robust::{incircle, orient2d, Coord};

use super::GeometryError;

/// Sentinel for "no neighbouring triangle".
pub const NONE: u32 = u32::MAX;

/// Super-triangle circumradius in units of the input extent diameter.
const SUPER_SCALE: f64 = 20.0;

#[inline]
fn coord(p: [f64; 2]) -> Coord<f64> {
    Coord { x: p[0], y: p[1] }
}

#[inline]
fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    orient2d(coord(a), coord(b), coord(c))
}

/// Triangulation of the real sites plus three super vertices (indices
/// `n_points()..n_points() + 3`).
///
/// Triangles are counterclockwise; `neighbors()[t][k]` is the triangle across
/// the edge opposite local vertex `k`, or [`NONE`] on the super-triangle hull.
#[derive(Debug, Clone)]
pub struct Triangulation {
    vertices: Vec<[f64; 2]>,
    n_real: usize,
    triangles: Vec<[u32; 3]>,
    neighbors: Vec<[u32; 3]>,
    vertex_triangle: Vec<u32>,
}

/// Delaunay triangulation of `points`, with the super-triangle sized from the
/// points' own extent.
pub fn delaunay(points: &[[f64; 2]]) -> Result<Triangulation, GeometryError> {
    let (lo, hi) = extent(points.iter().copied());
    Triangulation::build(points, lo, hi)
}

pub(crate) fn extent(points: impl Iterator<Item = [f64; 2]>) -> ([f64; 2], [f64; 2]) {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for p in points {
        lo = [lo[0].min(p[0]), lo[1].min(p[1])];
        hi = [hi[0].max(p[0]), hi[1].max(p[1])];
    }
    (lo, hi)
}

impl Triangulation {
    /// Builds the triangulation with a super-triangle enclosing the box
    /// `[lo, hi]` (which must contain all points) by a wide margin.
    pub fn build(points: &[[f64; 2]], lo: [f64; 2], hi: [f64; 2]) -> Result<Self, GeometryError> {
        check_general_position(points)?;
        let (plo, phi) = extent(points.iter().copied());
        let lo = [lo[0].min(plo[0]), lo[1].min(plo[1])];
        let hi = [hi[0].max(phi[0]), hi[1].max(phi[1])];
        let center = [(lo[0] + hi[0]) / 2.0, (lo[1] + hi[1]) / 2.0];
        let diam = (hi[0] - lo[0]).hypot(hi[1] - lo[1]);
        let r = SUPER_SCALE * diam;

        let n = points.len();
        let mut vertices = points.to_vec();
        for k in 0..3 {
            let angle = std::f64::consts::FRAC_PI_2 + k as f64 * 2.0 * std::f64::consts::PI / 3.0;
            vertices.push([center[0] + r * angle.cos(), center[1] + r * angle.sin()]);
        }

        let mut builder = Builder {
            vertices: &vertices,
            triangles: vec![[n as u32, n as u32 + 1, n as u32 + 2]],
            neighbors: vec![[NONE; 3]],
            alive: vec![true],
            stamp: vec![0],
            last: 0,
            cavity: Vec::new(),
            boundary: Vec::new(),
            stack: Vec::new(),
        };
        for (round, &i) in insertion_order(points).iter().enumerate() {
            builder.insert(i as u32, round as u32 + 1)?;
        }
        Ok(builder.finish(n))
    }

    /// Number of real (non-super) vertices.
    pub fn n_points(&self) -> usize {
        self.n_real
    }

    /// Coordinates of any vertex, including super vertices.
    pub fn vertex(&self, v: usize) -> [f64; 2] {
        self.vertices[v]
    }

    pub fn is_super(&self, v: usize) -> bool {
        v >= self.n_real
    }

    /// All triangles, including those touching super vertices.
    pub fn all_triangles(&self) -> &[[u32; 3]] {
        &self.triangles
    }

    pub fn neighbors(&self) -> &[[u32; 3]] {
        &self.neighbors
    }

    /// Triangles whose three vertices are real sites.
    pub fn triangles(&self) -> impl Iterator<Item = [usize; 3]> + '_ {
        self.triangles.iter().filter_map(move |t| {
            let t = [t[0] as usize, t[1] as usize, t[2] as usize];
            (t.iter().all(|&v| v < self.n_real)).then_some(t)
        })
    }

    /// Delaunay edges between real sites, as sorted pairs `i < j`.
    pub fn edges(&self) -> Vec<[usize; 2]> {
        let mut edges = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let a = tri[(k + 1) % 3] as usize;
                let b = tri[(k + 2) % 3] as usize;
                if a >= self.n_real || b >= self.n_real {
                    continue;
                }
                let nb = self.neighbors[t][k];
                // emit each shared edge once, from the lower-indexed triangle
                if nb == NONE || (t as u32) < nb {
                    edges.push([a.min(b), a.max(b)]);
                }
            }
        }
        edges.sort_unstable();
        edges
    }

    /// Triangles around real vertex `v` in counterclockwise order, each paired
    /// with the vertex shared with the next triangle of the fan.
    ///
    /// For fan entry `(t, w)`, the Voronoi edge dual to Delaunay edge `(v, w)`
    /// runs from the circumcenter of `t` to that of the following entry.
    pub fn fan(&self, v: usize) -> Vec<(usize, usize)> {
        debug_assert!(v < self.n_real);
        let start = self.vertex_triangle[v];
        let mut out = Vec::with_capacity(8);
        let mut t = start;
        loop {
            let tri = self.triangles[t as usize];
            let k = tri
                .iter()
                .position(|&x| x as usize == v)
                .expect("vertex in fan triangle");
            out.push((t as usize, tri[(k + 2) % 3] as usize));
            t = self.neighbors[t as usize][(k + 1) % 3];
            assert!(t != NONE, "real vertex {v} has an open fan");
            if t == start {
                break;
            }
        }
        out
    }
}

fn check_general_position(points: &[[f64; 2]]) -> Result<(), GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::TooFewPoints(points.len()));
    }
    if points.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
        return Err(GeometryError::NonFiniteCoordinate);
    }
    let a = points[0];
    let Some(b) = points.iter().copied().find(|&p| p != a) else {
        return Err(GeometryError::AllCollinear);
    };
    if points.iter().all(|&p| orient(a, b, p) == 0.0) {
        return Err(GeometryError::AllCollinear);
    }
    Ok(())
}

/// Hilbert-curve order of the input, so consecutive insertions are close and
/// point location walks stay short.
fn insertion_order(points: &[[f64; 2]]) -> Vec<usize> {
    let (lo, hi) = extent(points.iter().copied());
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(f64::MIN_POSITIVE);
    const SIDE: u32 = 1 << 16;
    let key = |p: [f64; 2]| {
        let q = |v: f64, l: f64| (((v - l) / span) * (SIDE - 1) as f64).round() as u32;
        hilbert_index(SIDE, q(p[0], lo[0]), q(p[1], lo[1]))
    };
    let mut order: Vec<(u64, usize)> = points.iter().enumerate().map(|(i, &p)| (key(p), i)).collect();
    order.sort_unstable();
    order.into_iter().map(|(_, i)| i).collect()
}

fn hilbert_index(side: u32, mut x: u32, mut y: u32) -> u64 {
    let mut d = 0u64;
    let mut s = side / 2;
    while s > 0 {
        let rx = u32::from(x & s > 0);
        let ry = u32::from(y & s > 0);
        d += s as u64 * s as u64 * ((3 * rx) ^ ry) as u64;
        if ry == 0 {
            if rx == 1 {
                x = side - 1 - x;
                y = side - 1 - y;
            }
            std::mem::swap(&mut x, &mut y);
        }
        s /= 2;
    }
    d
}

struct Builder<'a> {
    vertices: &'a [[f64; 2]],
    triangles: Vec<[u32; 3]>,
    neighbors: Vec<[u32; 3]>,
    alive: Vec<bool>,
    // round in which a triangle was last classified: `round` = cavity,
    // `u32::MAX - round` = tested and kept
    stamp: Vec<u32>,
    last: u32,
    cavity: Vec<u32>,
    boundary: Vec<(u32, u32, u32)>,
    stack: Vec<u32>,
}

impl Builder<'_> {
    fn point(&self, v: u32) -> [f64; 2] {
        self.vertices[v as usize]
    }

    fn in_circumcircle(&self, t: u32, p: [f64; 2]) -> bool {
        let [a, b, c] = self.triangles[t as usize];
        incircle(
            coord(self.point(a)),
            coord(self.point(b)),
            coord(self.point(c)),
            coord(p),
        ) > 0.0
    }

    /// Visibility walk to a triangle containing `p` (closed).
    fn locate(&self, p: [f64; 2]) -> u32 {
        let mut t = self.last;
        let limit = 4 * self.triangles.len() + 16;
        for step in 0..limit {
            let tri = self.triangles[t as usize];
            let mut moved = false;
            // rotate the starting edge to avoid cycling on degenerate walks
            for r in 0..3 {
                let k = (r + step) % 3;
                let a = self.point(tri[(k + 1) % 3]);
                let b = self.point(tri[(k + 2) % 3]);
                if orient(a, b, p) < 0.0 {
                    let nb = self.neighbors[t as usize][k];
                    if nb != NONE {
                        t = nb;
                        moved = true;
                        break;
                    }
                }
            }
            if !moved {
                return t;
            }
        }
        // fallback: exhaustive search
        (0..self.triangles.len() as u32)
            .find(|&t| {
                self.alive[t as usize] && {
                    let tri = self.triangles[t as usize];
                    (0..3).all(|k| orient(self.point(tri[(k + 1) % 3]), self.point(tri[(k + 2) % 3]), p) >= 0.0)
                }
            })
            .expect("point lies inside the super-triangle")
    }

    fn insert(&mut self, v: u32, round: u32) -> Result<(), GeometryError> {
        let p = self.point(v);
        let t0 = self.locate(p);
        if let Some(&w) = self.triangles[t0 as usize].iter().find(|&&w| self.point(w) == p) {
            return Err(GeometryError::DuplicatePoint(w as usize, v as usize));
        }

        // grow the cavity of triangles whose circumcircle strictly contains p
        self.cavity.clear();
        self.boundary.clear();
        self.stack.clear();
        self.stamp[t0 as usize] = round;
        self.stack.push(t0);
        let kept = u32::MAX - round;
        while let Some(t) = self.stack.pop() {
            self.cavity.push(t);
            for k in 0..3 {
                let nb = self.neighbors[t as usize][k];
                let tri = self.triangles[t as usize];
                let edge = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                if nb == NONE {
                    self.boundary.push((edge.0, edge.1, NONE));
                    continue;
                }
                let s = self.stamp[nb as usize];
                if s == round {
                    continue;
                }
                if s != kept && self.in_circumcircle(nb, p) {
                    self.stamp[nb as usize] = round;
                    self.stack.push(nb);
                } else {
                    self.stamp[nb as usize] = kept;
                    self.boundary.push((edge.0, edge.1, nb));
                }
            }
        }

        for &t in &self.cavity {
            self.alive[t as usize] = false;
        }

        // fan of new triangles (a, b, v), one per cavity boundary edge
        let base = self.triangles.len() as u32;
        for (e, &(a, b, outer)) in self.boundary.iter().enumerate() {
            let t = base + e as u32;
            self.triangles.push([a, b, v]);
            self.neighbors.push([NONE, NONE, outer]);
            self.alive.push(true);
            self.stamp.push(0);
            if outer != NONE {
                let slot = (0..3)
                    .find(|&k| {
                        let nt = self.triangles[outer as usize];
                        nt[(k + 1) % 3] == b && nt[(k + 2) % 3] == a
                    })
                    .expect("outer triangle shares the cavity edge");
                self.neighbors[outer as usize][slot] = t;
            }
        }
        let m = self.boundary.len();
        for e in 0..m {
            let (a, b, _) = self.boundary[e];
            let t = (base + e as u32) as usize;
            // across edge (b, v): the new triangle starting at b
            let next = (0..m)
                .find(|&f| self.boundary[f].0 == b)
                .expect("closed cavity boundary");
            // across edge (v, a): the new triangle ending at a
            let prev = (0..m)
                .find(|&f| self.boundary[f].1 == a)
                .expect("closed cavity boundary");
            self.neighbors[t][0] = base + next as u32;
            self.neighbors[t][1] = base + prev as u32;
        }
        self.last = base;
        Ok(())
    }

    fn finish(self, n_real: usize) -> Triangulation {
        let mut remap = vec![NONE; self.triangles.len()];
        let mut triangles = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if self.alive[t] {
                remap[t] = triangles.len() as u32;
                triangles.push(*tri);
            }
        }
        let neighbors: Vec<[u32; 3]> = (0..self.triangles.len())
            .filter(|&t| self.alive[t])
            .map(|t| self.neighbors[t].map(|nb| if nb == NONE { NONE } else { remap[nb as usize] }))
            .collect();
        let mut vertex_triangle = vec![NONE; self.vertices.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if vertex_triangle[v as usize] == NONE {
                    vertex_triangle[v as usize] = t as u32;
                }
            }
        }
        Triangulation {
            vertices: self.vertices.to_vec(),
            n_real,
            triangles,
            neighbors,
            vertex_triangle,
        }
    }
}
