//! Pooling: k-means on the movable sites, one averaged site per cluster.
//!
//! Fixed sites (sources and measurement points) bypass clustering and are
//! copied bit-for-bit. Clustering uses coordinates only; permeability is
//! averaged within each cluster afterwards.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::geometry::{GeometryError, SiteCloud};
use crate::scalar::Scalar;

/// Lloyd iteration cap.
pub const MAX_ITERATIONS: usize = 300;

/// Inset (relative to the boundary diameter) for pooled points that must be
/// pushed back inside the domain.
pub const PROJECTION_INSET: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PoolingError {
    #[error("requested {requested} clusters from {available} points")]
    TooFewPoints { requested: usize, available: usize },
    #[error("need at least one cluster")]
    NoClusters,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans<T> {
    /// Cluster id of every input point.
    pub assignment: Vec<usize>,
    pub centroids: Vec<[T; 2]>,
    /// Within-cluster sum of squared distances.
    pub inertia: T,
    pub iterations: usize,
}

#[inline]
fn dist2<T: Scalar>(a: [T; 2], b: [T; 2]) -> T {
    let (dx, dy) = (a[0] - b[0], a[1] - b[1]);
    dx * dx + dy * dy
}

/// Uniform bucket grid over the centroids for nearest-centroid queries.
struct CentroidGrid {
    lo: [f64; 2],
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl CentroidGrid {
    fn new<T: Scalar>(centroids: &[[T; 2]]) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for c in centroids {
            for d in 0..2 {
                lo[d] = lo[d].min(c[d].as_f64());
                hi[d] = hi[d].max(c[d].as_f64());
            }
        }
        let (w, h) = ((hi[0] - lo[0]).max(1e-300), (hi[1] - lo[1]).max(1e-300));
        let cell = ((w * h) / centroids.len() as f64).sqrt().max(w.max(h) / 1024.0);
        let nx = ((w / cell) as usize + 1).min(1024);
        let ny = ((h / cell) as usize + 1).min(1024);
        let mut grid = CentroidGrid {
            lo,
            cell,
            nx,
            ny,
            buckets: vec![Vec::new(); nx * ny],
        };
        for (k, c) in centroids.iter().enumerate() {
            let (ix, iy) = grid.locate([c[0].as_f64(), c[1].as_f64()]);
            grid.buckets[iy * nx + ix].push(k as u32);
        }
        grid
    }

    fn locate(&self, p: [f64; 2]) -> (usize, usize) {
        let fx = ((p[0] - self.lo[0]) / self.cell).floor().max(0.0) as usize;
        let fy = ((p[1] - self.lo[1]) / self.cell).floor().max(0.0) as usize;
        (fx.min(self.nx - 1), fy.min(self.ny - 1))
    }

    /// Nearest centroid to `p`; ties go to the lower index.
    fn nearest<T: Scalar>(&self, p: [T; 2], centroids: &[[T; 2]]) -> usize {
        let pf = [p[0].as_f64(), p[1].as_f64()];
        let (cx, cy) = self.locate(pf);
        // distance from p to the border of its own cell, in cell units
        let slack = {
            let ox = (pf[0] - self.lo[0]) / self.cell - cx as f64;
            let oy = (pf[1] - self.lo[1]) / self.cell - cy as f64;
            ox.min(1.0 - ox).min(oy).min(1.0 - oy).clamp(0.0, 1.0)
        };
        let mut best: Option<(T, usize)> = None;
        let max_ring = self.nx.max(self.ny);
        for r in 0..=max_ring {
            let (x0, x1) = (cx as isize - r as isize, cx as isize + r as isize);
            let (y0, y1) = (cy as isize - r as isize, cy as isize + r as isize);
            for y in y0..=y1 {
                if y < 0 || y >= self.ny as isize {
                    continue;
                }
                let on_edge_row = y == y0 || y == y1;
                let mut x = x0;
                while x <= x1 {
                    if x >= 0 && x < self.nx as isize {
                        for &k in &self.buckets[y as usize * self.nx + x as usize] {
                            let d = dist2(p, centroids[k as usize]);
                            let k = k as usize;
                            if best.is_none_or(|(bd, bk)| d < bd || (d == bd && k < bk)) {
                                best = Some((d, k));
                            }
                        }
                    }
                    x += if on_edge_row || x == x1 { 1 } else { x1 - x0 };
                }
            }
            if let Some((bd, _)) = best {
                // every centroid in ring r + 1 or beyond is at least this far
                let reach = (r as f64 + slack) * self.cell;
                if bd.as_f64() < reach * reach {
                    break;
                }
            }
        }
        best.map(|(_, k)| k).unwrap_or(0)
    }
}

fn nearest_brute<T: Scalar>(p: [T; 2], centroids: &[[T; 2]]) -> usize {
    let mut best = (T::infinity(), 0);
    for (k, &c) in centroids.iter().enumerate() {
        let d = dist2(p, c);
        if d < best.0 {
            best = (d, k);
        }
    }
    best.1
}

fn assign_all<T: Scalar>(points: &[[T; 2]], centroids: &[[T; 2]], out: &mut [usize]) -> usize {
    let grid = (centroids.len() > 32).then(|| CentroidGrid::new(centroids));
    let mut changed = 0;
    for (p, slot) in points.iter().zip(out.iter_mut()) {
        let k = match &grid {
            Some(g) => g.nearest(*p, centroids),
            None => nearest_brute(*p, centroids),
        };
        if *slot != k {
            *slot = k;
            changed += 1;
        }
    }
    changed
}

/// k-means++ seeding: the first center uniformly at random, each further
/// center with probability proportional to the squared distance to the
/// closest center chosen so far.
fn seed_centroids<T: Scalar>(points: &[[T; 2]], k: usize, rng: &mut ChaCha8Rng) -> Vec<[T; 2]> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first]];
    let mut d2: Vec<f64> = points.iter().map(|&p| dist2(p, points[first]).as_f64()).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if acc > target && d > 0.0 {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave the target just past the accumulated sum
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).expect("positive total"))
        } else {
            chosen
                .iter()
                .position(|&c| !c)
                .expect("k does not exceed the point count")
        };
        chosen[pick] = true;
        let c = points[pick];
        centroids.push(c);
        for (d, &p) in d2.iter_mut().zip(points) {
            *d = d.min(dist2(p, c).as_f64());
        }
    }
    centroids
}

/// Lloyd's algorithm with k-means++ initialization, deterministic in `seed`.
/// Stops when no assignment changes or after [`MAX_ITERATIONS`]; a cluster
/// that empties is reseeded at the point farthest from its centroid.
pub fn kmeans<T: Scalar>(points: &[[T; 2]], k: usize, seed: u64) -> Result<KMeans<T>, PoolingError> {
    if k == 0 {
        return Err(PoolingError::NoClusters);
    }
    if k > points.len() {
        return Err(PoolingError::TooFewPoints {
            requested: k,
            available: points.len(),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = seed_centroids(points, k, &mut rng);
    let mut assignment = vec![usize::MAX; points.len()];
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let changed = assign_all(points, &centroids, &mut assignment);
        let mut counts = vec![0usize; k];
        for &a in &assignment {
            counts[a] += 1;
        }
        let mut reseeded = false;
        for c in 0..k {
            if counts[c] == 0 {
                let far = farthest_point(points, &centroids, &assignment, &counts);
                counts[assignment[far]] -= 1;
                assignment[far] = c;
                counts[c] = 1;
                reseeded = true;
            }
        }
        centroids = cluster_means(points, &assignment, k);
        if changed == 0 && !reseeded {
            break;
        }
    }
    let inertia = points
        .iter()
        .zip(&assignment)
        .map(|(&p, &a)| dist2(p, centroids[a]))
        .sum();
    Ok(KMeans {
        assignment,
        centroids,
        inertia,
        iterations,
    })
}

fn farthest_point<T: Scalar>(points: &[[T; 2]], centroids: &[[T; 2]], assignment: &[usize], counts: &[usize]) -> usize {
    let mut best = (T::neg_infinity(), 0);
    for (i, (&p, &a)) in points.iter().zip(assignment).enumerate() {
        if counts[a] < 2 {
            continue;
        }
        let d = dist2(p, centroids[a]);
        if d > best.0 {
            best = (d, i);
        }
    }
    best.1
}

fn cluster_means<T: Scalar>(points: &[[T; 2]], assignment: &[usize], k: usize) -> Vec<[T; 2]> {
    let mut sum = vec![[T::zero(); 2]; k];
    let mut count = vec![0usize; k];
    for (&p, &a) in points.iter().zip(assignment) {
        sum[a] = [sum[a][0] + p[0], sum[a][1] + p[1]];
        count[a] += 1;
    }
    sum.iter()
        .zip(&count)
        .map(|(s, &c)| {
            let c = T::from_usize(c.max(1)).expect("count fits the scalar type");
            [s[0] / c, s[1] / c]
        })
        .collect()
}

/// Where an input site ended up after pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Assignment {
    /// Fixed site, copied to this output index.
    Fixed(usize),
    /// Movable site, averaged into this cluster (output index
    /// `n_fixed + cluster`).
    Cluster(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolingResult<T> {
    /// Fixed sites first (in input order), then one site per cluster.
    pub coarse: SiteCloud<T>,
    pub assignment: Vec<Assignment>,
    pub n_fixed: usize,
}

impl<T> PoolingResult<T> {
    /// Output index of input site `i` when it is fixed.
    pub fn fixed_index(&self, i: usize) -> Option<usize> {
        match self.assignment.get(i)? {
            Assignment::Fixed(j) => Some(*j),
            Assignment::Cluster(_) => None,
        }
    }
}

/// Reduces `cloud` to `n_target` sites: every fixed site plus
/// `n_target - n_fixed` cluster means of the movable sites.
pub fn pool<T: Scalar>(cloud: &SiteCloud<T>, n_target: usize, seed: u64) -> Result<PoolingResult<T>, PoolingError> {
    let fixed = cloud.fixed_indices();
    let movable = cloud.movable_indices();
    if n_target <= fixed.len() {
        return Err(PoolingError::TooFewPoints {
            requested: n_target,
            available: fixed.len() + 1,
        });
    }
    let k = n_target - fixed.len();
    let pts: Vec<[T; 2]> = movable.iter().map(|&i| cloud.points()[i]).collect();
    let km = kmeans(&pts, k, seed)?;

    // relabel clusters by first appearance so output order follows input order
    let mut label = vec![usize::MAX; k];
    let mut next = 0;
    for &a in &km.assignment {
        if label[a] == usize::MAX {
            label[a] = next;
            next += 1;
        }
    }

    let mut assignment = vec![Assignment::Cluster(0); cloud.len()];
    let mut points = Vec::with_capacity(n_target);
    let mut permeability = Vec::with_capacity(n_target);
    let mut flags = Vec::with_capacity(n_target);
    for (j, &i) in fixed.iter().enumerate() {
        assignment[i] = Assignment::Fixed(j);
        points.push(cloud.points()[i]);
        permeability.push(cloud.permeability()[i]);
        flags.push(true);
    }

    let mut sum = vec![[T::zero(); 3]; k];
    let mut count = vec![0usize; k];
    for (&i, &a) in movable.iter().zip(&km.assignment) {
        let c = label[a];
        assignment[i] = Assignment::Cluster(c);
        let (p, kp) = (cloud.points()[i], cloud.permeability()[i]);
        sum[c] = [sum[c][0] + p[0], sum[c][1] + p[1], sum[c][2] + kp];
        count[c] += 1;
    }
    let boundary = cloud.boundary();
    let inset = boundary.diameter() * T::lit(PROJECTION_INSET);
    for (s, &c) in sum.iter().zip(&count) {
        let c = T::from_usize(c).expect("count fits the scalar type");
        let mut p = [s[0] / c, s[1] / c];
        if !(boundary.inset_distance(p) >= inset) {
            p = boundary.project_inside(p, inset);
        }
        points.push(p);
        permeability.push(s[2] / c);
        flags.push(false);
    }
    let coarse = SiteCloud::new(points, permeability, flags, boundary.clone())?;
    Ok(PoolingResult {
        coarse,
        assignment,
        n_fixed: fixed.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Boundary;

    #[test]
    fn separates_two_blobs() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut pts = Vec::new();
        for b in 0..2 {
            for _ in 0..50 {
                let off = b as f64 * 10.0;
                pts.push([off + rng.random::<f64>(), rng.random::<f64>()]);
            }
        }
        let km = kmeans(&pts, 2, 3).unwrap();
        assert!(km.assignment[..50].iter().all(|&a| a == km.assignment[0]));
        assert!(km.assignment[50..].iter().all(|&a| a == km.assignment[50]));
        assert_ne!(km.assignment[0], km.assignment[50]);
    }

    #[test]
    fn one_cluster_per_point() {
        let pts: Vec<[f64; 2]> = (0..40).map(|i| [(i % 7) as f64, (i / 7) as f64 * 1.3]).collect();
        let km = kmeans(&pts, 40, 0).unwrap();
        assert_eq!(km.inertia, 0.0);
        let mut seen = km.assignment.clone();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 40);
    }

    #[test]
    fn grid_search_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<[f64; 2]> = (0..2000)
            .map(|_| [rng.random::<f64>() * 3.0, rng.random::<f64>()])
            .collect();
        let centroids: Vec<[f64; 2]> = pts[..200].to_vec();
        let grid = CentroidGrid::new(&centroids);
        for &p in &pts {
            let (g, b) = (grid.nearest(p, &centroids), nearest_brute(p, &centroids));
            assert_eq!(dist2(p, centroids[g]), dist2(p, centroids[b]));
        }
    }

    #[test]
    fn pooled_pair_is_the_mean() {
        let b = Boundary::rectangle(-1.0, -1.0, 3.0, 1.0).unwrap();
        let cloud = SiteCloud::new(
            vec![[0.0, 0.0], [2.0, 0.0], [1.0, 0.5]],
            vec![1.0, 3.0, 7.0],
            vec![false, false, true],
            b,
        )
        .unwrap();
        let r = pool(&cloud, 2, 0).unwrap();
        assert_eq!(r.coarse.points(), &[[1.0, 0.5], [1.0, 0.0]]);
        assert_eq!(r.coarse.permeability(), &[7.0, 2.0]);
        assert_eq!(r.coarse.fixed(), &[true, false]);
        assert_eq!(r.fixed_index(2), Some(0));
        assert_eq!(r.fixed_index(0), None);
    }

    #[test]
    fn too_few_targets_rejected() {
        let b = Boundary::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let cloud = SiteCloud::new(vec![[0.2, 0.2], [0.5, 0.5]], vec![1.0; 2], vec![true, false], b).unwrap();
        assert!(matches!(pool(&cloud, 1, 0), Err(PoolingError::TooFewPoints { .. })));
        assert!(matches!(pool(&cloud, 3, 0), Err(PoolingError::TooFewPoints { .. })));
    }
}
