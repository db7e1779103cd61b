//! Brute-force reference implementations for testing `diffcoarsen`.
//!
//! Nothing here shares code with the main crate: Voronoi cells come from
//! clipping the domain by every perpendicular bisector (O(n²)), the solver
//! assembles a dense matrix, and gradients come from central differences.

/// Reference Voronoi cell of one site, clipped to the domain.
#[derive(Debug, Clone)]
pub struct Cell {
    pub polygon: Vec<[f64; 2]>,
    pub area: f64,
    /// `(neighbor, shared edge length)` for every neighbor with a
    /// non-degenerate shared edge.
    pub neighbors: Vec<(usize, f64)>,
}

fn signed_area(poly: &[[f64; 2]]) -> f64 {
    let n = poly.len();
    (0..n)
        .map(|i| {
            let (a, b) = (poly[i], poly[(i + 1) % n]);
            a[0] * b[1] - b[0] * a[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Keeps the part of `poly` where `n · x <= c`.
fn clip_half_plane(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(poly.len() + 1);
    let m = poly.len();
    for i in 0..m {
        let (p, q) = (poly[i], poly[(i + 1) % m]);
        let sp = n[0] * p[0] + n[1] * p[1] - c;
        let sq = n[0] * q[0] + n[1] * q[1] - c;
        if sp <= 0.0 {
            out.push(p);
        }
        if (sp < 0.0 && sq > 0.0) || (sp > 0.0 && sq < 0.0) {
            let t = sp / (sp - sq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Voronoi cells of `sites` clipped to the convex counterclockwise polygon
/// `domain`. Edge lengths are the portions of each cell's boundary lying on
/// the bisector with a neighbor; lengths below `1e-12 · diam` are dropped.
pub fn voronoi_cells(sites: &[[f64; 2]], domain: &[[f64; 2]]) -> Vec<Cell> {
    let diam = domain
        .iter()
        .flat_map(|a| domain.iter().map(move |b| (a[0] - b[0]).hypot(a[1] - b[1])))
        .fold(0.0, f64::max);
    let tol = 1e-12 * diam;
    let mut cells = Vec::with_capacity(sites.len());
    for (i, &s) in sites.iter().enumerate() {
        let mut poly = domain.to_vec();
        for (j, &t) in sites.iter().enumerate() {
            if i != j {
                let (n, c) = bisector(s, t);
                poly = clip_half_plane(&poly, n, c);
            }
        }
        let mut neighbors = Vec::new();
        for (j, &t) in sites.iter().enumerate() {
            if i == j {
                continue;
            }
            let (n, c) = bisector(s, t);
            let norm = n[0].hypot(n[1]);
            let on = |p: [f64; 2]| ((n[0] * p[0] + n[1] * p[1] - c) / norm).abs() <= 1e-9 * diam;
            let m = poly.len();
            let len: f64 = (0..m)
                .filter(|&k| on(poly[k]) && on(poly[(k + 1) % m]))
                .map(|k| {
                    let (p, q) = (poly[k], poly[(k + 1) % m]);
                    (p[0] - q[0]).hypot(p[1] - q[1])
                })
                .sum();
            if len > tol {
                neighbors.push((j, len));
            }
        }
        cells.push(Cell {
            area: signed_area(&poly),
            polygon: poly,
            neighbors,
        });
    }
    cells
}

/// Half-plane `n · x <= c` of points at least as close to `s` as to `t`.
fn bisector(s: [f64; 2], t: [f64; 2]) -> ([f64; 2], f64) {
    let n = [t[0] - s[0], t[1] - s[1]];
    let mid = [(s[0] + t[0]) / 2.0, (s[1] + t[1]) / 2.0];
    (n, n[0] * mid[0] + n[1] * mid[1])
}

/// Dense finite-volume system `D⁻¹A` assembled from reference geometry.
#[derive(Debug, Clone)]
pub struct DenseSystem {
    /// `a[i][j] = -w_ij` off the diagonal, `a[i][i] = Σ_j w_ij`.
    pub a: Vec<Vec<f64>>,
    pub volumes: Vec<f64>,
}

/// Point source `c (p_bh - p)` in one cell.
#[derive(Debug, Clone, Copy)]
pub struct Well {
    pub cell: usize,
    pub c: f64,
    pub p_bh: f64,
}

impl DenseSystem {
    /// Assembles transmissibilities `(|e_ij| / |x_i - x_j|) · 2K_iK_j / (K_i + K_j)`.
    pub fn assemble(sites: &[[f64; 2]], permeability: &[f64], domain: &[[f64; 2]]) -> Self {
        let cells = voronoi_cells(sites, domain);
        let n = sites.len();
        let mut a = vec![vec![0.0; n]; n];
        for (i, cell) in cells.iter().enumerate() {
            for &(j, len) in &cell.neighbors {
                let h = (sites[i][0] - sites[j][0]).hypot(sites[i][1] - sites[j][1]);
                let (ki, kj) = (permeability[i], permeability[j]);
                let w = len / h * 2.0 * ki * kj / (ki + kj);
                a[i][j] = -w;
            }
        }
        for (i, row) in a.iter_mut().enumerate() {
            row[i] = -row.iter().sum::<f64>();
        }
        DenseSystem {
            a,
            volumes: cells.iter().map(|c| c.area).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.volumes.len()
    }

    /// `D⁻¹ A p`.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        self.a
            .iter()
            .zip(&self.volumes)
            .map(|(row, v)| row.iter().zip(p).map(|(a, x)| a * x).sum::<f64>() / v)
            .collect()
    }

    fn source(&self, p: &[f64], wells: &[Well]) -> Vec<f64> {
        let mut f = vec![0.0; self.n()];
        for w in wells {
            f[w.cell] += w.c * (w.p_bh - p[w.cell]);
        }
        f
    }

    /// States `p⁰ … pᵐ` of forward Euler `p + τ (f - D⁻¹A p)`.
    pub fn parabolic(&self, p0: &[f64], tau: f64, steps: usize, wells: &[Well]) -> Vec<Vec<f64>> {
        let mut states = vec![p0.to_vec()];
        for _ in 0..steps {
            let p = states.last().unwrap();
            let ap = self.apply(p);
            let f = self.source(p, wells);
            let next = (0..self.n()).map(|i| p[i] + tau * (f[i] - ap[i])).collect();
            states.push(next);
        }
        states
    }

    /// States of the leapfrog scheme `2pᵏ - pᵏ⁻¹ - τ²c² D⁻¹A pᵏ + τ² f`,
    /// started from rest with `p¹ = p⁰ + (τ²/2)(f - c² D⁻¹A p⁰)`.
    pub fn wave(&self, p0: &[f64], tau: f64, steps: usize, speed: f64, wells: &[Well]) -> Vec<Vec<f64>> {
        let t2 = tau * tau;
        let c2 = speed * speed;
        let mut states = vec![p0.to_vec()];
        for k in 0..steps {
            let p = &states[k];
            let ap = self.apply(p);
            let f = self.source(p, wells);
            let next = if k == 0 {
                (0..self.n()).map(|i| p[i] + t2 / 2.0 * (f[i] - c2 * ap[i])).collect()
            } else {
                let q = &states[k - 1];
                (0..self.n())
                    .map(|i| 2.0 * p[i] - q[i] - t2 * c2 * ap[i] + t2 * f[i])
                    .collect()
            };
            states.push(next);
        }
        states
    }
}

/// Within-cluster sum of squares of plain Lloyd iterations started from `k`
/// distinct input points chosen by `pick` (an index generator).
pub fn lloyd_wcss(points: &[[f64; 2]], k: usize, mut pick: impl FnMut(usize) -> usize) -> f64 {
    let mut centroids: Vec<[f64; 2]> = Vec::with_capacity(k);
    let mut used = Vec::with_capacity(k);
    while centroids.len() < k {
        let i = pick(points.len());
        if !used.contains(&i) {
            used.push(i);
            centroids.push(points[i]);
        }
    }
    let d2 = |a: [f64; 2], b: [f64; 2]| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2);
    let mut assignment = vec![usize::MAX; points.len()];
    for _ in 0..1000 {
        let mut changed = false;
        for (p, a) in points.iter().zip(assignment.iter_mut()) {
            let best = (0..k)
                .min_by(|&x, &y| d2(*p, centroids[x]).total_cmp(&d2(*p, centroids[y])))
                .unwrap();
            changed |= best != *a;
            *a = best;
        }
        if !changed {
            break;
        }
        let mut sum = vec![[0.0, 0.0, 0.0]; k];
        for (p, &a) in points.iter().zip(&assignment) {
            sum[a] = [sum[a][0] + p[0], sum[a][1] + p[1], sum[a][2] + 1.0];
        }
        for (c, s) in centroids.iter_mut().zip(&sum) {
            if s[2] > 0.0 {
                *c = [s[0] / s[2], s[1] / s[2]];
            }
        }
    }
    points.iter().zip(&assignment).map(|(p, &a)| d2(*p, centroids[a])).sum()
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Central-difference gradient of `f` at `x`, one coordinate at a time.
pub fn gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|k| {
            let orig = probe[k];
            probe[k] = orig + h;
            let plus = f(&probe);
            probe[k] = orig - h;
            let minus = f(&probe);
            probe[k] = orig;
            (plus - minus) / (2.0 * h)
        })
        .collect()
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    const UNIT: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

    #[test]
    fn two_sites_split_the_square() {
        let cells = voronoi_cells(&[[0.25, 0.5], [0.75, 0.5]], &UNIT);
        assert!((cells[0].area - 0.5).abs() < 1e-15);
        assert_eq!(cells[0].neighbors.len(), 1);
        assert!((cells[0].neighbors[0].1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_two_cell_step() {
        let sys = DenseSystem {
            a: vec![vec![1.0, -1.0], vec![-1.0, 1.0]],
            volumes: vec![2.0, 2.0],
        };
        let s = sys.parabolic(&[1.0, 0.0], 0.1, 1, &[]);
        assert!((s[1][0] - 0.95).abs() < 1e-15 && (s[1][1] - 0.05).abs() < 1e-15);
    }

    #[test]
    fn finite_differences() {
        assert!((central_difference(|x| x * x, 3.0, 1e-4) - 6.0).abs() < 1e-8);
        let g = gradient(|x| x[0] * x[1], &[2.0, 5.0], 1e-5);
        assert!((g[0] - 5.0).abs() < 1e-8 && (g[1] - 2.0).abs() < 1e-8);
    }
}
