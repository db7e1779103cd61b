//! Differentiable planar primitives: circumcenters, shoelace areas and
//! clipping against a convex boundary.

use super::{Boundary, GeometryError};
use crate::autodiff::{Tape, Var};
use crate::scalar::Scalar;

/// A point whose coordinates live on a tape.
pub type VarPoint<'t, T> = [Var<'t, T>; 2];

/// Relative collinearity threshold for circumcenter evaluation.
pub const DEGENERATE_TOLERANCE: f64 = 1e-12;

/// Circumcenter of triangle `(a, b, c)`.
///
/// Evaluates `x = [(|a|²-|c|²)(b₂-c₂) - (|b|²-|c|²)(a₂-c₂)] / D`,
/// `y = [(|b|²-|c|²)(a₁-c₁) - (|a|²-|c|²)(b₁-c₁)] / D` with
/// `D = 2[(a₁-c₁)(b₂-c₂) - (b₁-c₁)(a₂-c₂)]`, written relative to `c` (the
/// identical function, better conditioned far from the origin).
///
/// Fails when `|D|` is below [`DEGENERATE_TOLERANCE`] relative to the
/// product of the two edge lengths meeting at `c`.
pub fn circumcenter<'t, T: Scalar>(
    a: VarPoint<'t, T>,
    b: VarPoint<'t, T>,
    c: VarPoint<'t, T>,
) -> Result<VarPoint<'t, T>, GeometryError> {
    let (u1, u2) = (a[0] - c[0], a[1] - c[1]);
    let (v1, v2) = (b[0] - c[0], b[1] - c[1]);
    let d = (u1 * v2 - v1 * u2) * T::lit(2.0);
    let scale = (u1.value().hypot(u2.value())) * (v1.value().hypot(v2.value()));
    if !(d.value().abs() > T::lit(DEGENERATE_TOLERANCE) * scale) {
        return Err(GeometryError::DegenerateTriangle {
            determinant: d.value().as_f64(),
        });
    }
    let uu = u1.square() + u2.square();
    let vv = v1.square() + v2.square();
    let inv_d = d.recip();
    let x = c[0] + (uu * v2 - vv * u2) * inv_d;
    let y = c[1] + (vv * u1 - uu * v1) * inv_d;
    Ok([x, y])
}

/// Signed area of a polygon by the shoelace formula (positive for
/// counterclockwise vertices), recorded as a single tape node.
pub fn shoelace_area<'t, T: Scalar>(tape: &'t Tape<T>, polygon: &[VarPoint<'t, T>]) -> Var<'t, T> {
    let n = polygon.len();
    if n < 3 {
        return tape.constant(T::zero());
    }
    let half = T::lit(0.5);
    let x = |i: usize| polygon[i % n][0].value();
    let y = |i: usize| polygon[i % n][1].value();
    // translate to the first vertex for the value; the gradient is
    // translation invariant
    let (x0, y0) = (x(0), y(0));
    let mut twice = T::zero();
    for i in 0..n {
        twice = twice + (x(i) - x0) * (y(i + 1) - y0) - (x(i + 1) - x0) * (y(i) - y0);
    }
    let mut parents = Vec::with_capacity(2 * n);
    for (i, v) in polygon.iter().enumerate() {
        let (prev, next) = ((i + n - 1) % n, (i + 1) % n);
        parents.push((v[0].index(), half * (y(next) - y(prev))));
        parents.push((v[1].index(), half * (x(prev) - x(next))));
    }
    tape.push_indexed(twice * half, parents)
}

/// Plain-valued shoelace area, counterclockwise positive.
pub fn polygon_area<T: Scalar>(polygon: &[[T; 2]]) -> T {
    let n = polygon.len();
    if n < 3 {
        return T::zero();
    }
    let o = polygon[0];
    let mut twice = T::zero();
    for i in 0..n {
        let (p, q) = (polygon[i], polygon[(i + 1) % n]);
        twice = twice + (p[0] - o[0]) * (q[1] - o[1]) - (q[0] - o[0]) * (p[1] - o[1]);
    }
    twice / T::lit(2.0)
}

/// Signed distance-like value of `p` against directed edge `(e0, e1)`;
/// non-negative means inside.
#[inline]
fn side<'t, T: Scalar>(p: VarPoint<'t, T>, e0: [T; 2], e1: [T; 2]) -> Var<'t, T> {
    let (ex, ey) = (e1[0] - e0[0], e1[1] - e0[1]);
    (p[1] - e0[1]) * ex - (p[0] - e0[0]) * ey
}

#[inline]
fn intersect<'t, T: Scalar>(p: VarPoint<'t, T>, q: VarPoint<'t, T>, sp: Var<'t, T>, sq: Var<'t, T>) -> VarPoint<'t, T> {
    let t = sp / (sp - sq);
    [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
}

/// Sutherland–Hodgman clipping of `polygon` against every half-plane of the
/// convex `boundary`. Intersection vertices are differentiable in the input
/// vertices; the result may be empty.
pub fn clip_cell<'t, T: Scalar>(polygon: &[VarPoint<'t, T>], boundary: &Boundary<T>) -> Vec<VarPoint<'t, T>> {
    let mut current = polygon.to_vec();
    for (e0, e1) in boundary.edges() {
        if current.is_empty() {
            break;
        }
        let sides: Vec<Var<'t, T>> = current.iter().map(|&p| side(p, e0, e1)).collect();
        if sides.iter().all(|s| s.value() >= T::zero()) {
            continue;
        }
        let n = current.len();
        let mut next = Vec::with_capacity(n + 2);
        for i in 0..n {
            let j = (i + 1) % n;
            let (p, q) = (current[i], current[j]);
            let (sp, sq) = (sides[i], sides[j]);
            let p_in = sp.value() >= T::zero();
            let q_in = sq.value() >= T::zero();
            if p_in {
                next.push(p);
            }
            if p_in != q_in {
                next.push(intersect(p, q, sp, sq));
            }
        }
        current = next;
    }
    current
}

/// Clips segment `[p, q]` to the convex boundary; `None` when it lies
/// entirely outside.
pub fn clip_segment<'t, T: Scalar>(
    p: VarPoint<'t, T>,
    q: VarPoint<'t, T>,
    boundary: &Boundary<T>,
) -> Option<(VarPoint<'t, T>, VarPoint<'t, T>)> {
    let (mut p, mut q) = (p, q);
    for (e0, e1) in boundary.edges() {
        let (sp, sq) = (side(p, e0, e1), side(q, e0, e1));
        let p_in = sp.value() >= T::zero();
        let q_in = sq.value() >= T::zero();
        match (p_in, q_in) {
            (true, true) => {}
            (false, false) => return None,
            (false, true) => p = intersect(p, q, sp, sq),
            (true, false) => q = intersect(p, q, sp, sq),
        }
    }
    Some((p, q))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt<'t>(tape: &'t Tape<f64>, x: f64, y: f64) -> VarPoint<'t, f64> {
        [tape.var(x), tape.var(y)]
    }

    fn values(poly: &[VarPoint<'_, f64>]) -> Vec<[f64; 2]> {
        poly.iter().map(|p| [p[0].value(), p[1].value()]).collect()
    }

    #[test]
    fn right_triangle_circumcenter() {
        let t = Tape::new();
        let c = circumcenter(pt(&t, 0.0, 0.0), pt(&t, 1.0, 0.0), pt(&t, 0.0, 1.0)).unwrap();
        assert_eq!([c[0].value(), c[1].value()], [0.5, 0.5]);
    }

    #[test]
    fn equilateral_circumcenter_at_origin() {
        let t = Tape::new();
        let v = |k: f64| {
            let a = std::f64::consts::FRAC_PI_2 + k * 2.0 * std::f64::consts::PI / 3.0;
            pt(&t, a.cos(), a.sin())
        };
        let c = circumcenter(v(0.0), v(1.0), v(2.0)).unwrap();
        assert!(c[0].value().abs() < 1e-15 && c[1].value().abs() < 1e-15);
    }

    #[test]
    fn collinear_triangle_is_degenerate() {
        let t = Tape::new();
        let r = circumcenter(pt(&t, 0.0, 0.0), pt(&t, 1.0, 1.0), pt(&t, 2.0, 2.0));
        assert!(matches!(r, Err(GeometryError::DegenerateTriangle { .. })));
    }

    #[test]
    fn shoelace_basics() {
        let t = Tape::new();
        let sq = [pt(&t, 0.0, 0.0), pt(&t, 1.0, 0.0), pt(&t, 1.0, 1.0), pt(&t, 0.0, 1.0)];
        assert_eq!(shoelace_area(&t, &sq).value(), 1.0);
        let tri = [pt(&t, 0.0, 0.0), pt(&t, 1.0, 0.0), pt(&t, 0.0, 1.0)];
        assert_eq!(shoelace_area(&t, &tri).value(), 0.5);
    }

    #[test]
    fn shoelace_gradient_matches_finite_difference() {
        let base = [[0.1, 0.0], [1.2, 0.2], [0.9, 1.1], [-0.1, 0.8]];
        let t = Tape::new();
        let poly: Vec<_> = base.iter().map(|p| pt(&t, p[0], p[1])).collect();
        let area = shoelace_area(&t, &poly);
        let g = t.backward(area);
        let h = 1e-6;
        for i in 0..4 {
            for d in 0..2 {
                let mut plus = base;
                let mut minus = base;
                plus[i][d] += h;
                minus[i][d] -= h;
                let fd = (polygon_area(&plus) - polygon_area(&minus)) / (2.0 * h);
                assert!((g.wrt(poly[i][d]) - fd).abs() < 1e-6, "vertex {i} dim {d}");
            }
        }
    }

    #[test]
    fn clip_inside_is_noop() {
        let t = Tape::new();
        let b = Boundary::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let cell = [pt(&t, 0.2, 0.2), pt(&t, 0.8, 0.3), pt(&t, 0.5, 0.7)];
        let out = clip_cell(&cell, &b);
        assert_eq!(values(&out), values(&cell));
    }

    #[test]
    fn clip_half_cut() {
        let t = Tape::new();
        let half = Boundary::rectangle(0.5, 0.0, 1.0, 1.0).unwrap();
        let sq = [pt(&t, 0.0, 0.0), pt(&t, 1.0, 0.0), pt(&t, 1.0, 1.0), pt(&t, 0.0, 1.0)];
        let out = clip_cell(&sq, &half);
        assert!((shoelace_area(&t, &out).value() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn clip_disjoint_is_empty() {
        let t = Tape::new();
        let b = Boundary::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let cell = [pt(&t, 2.0, 2.0), pt(&t, 3.0, 2.0), pt(&t, 2.5, 3.0)];
        assert!(clip_cell(&cell, &b).is_empty());
        assert!(clip_segment(pt(&t, 2.0, 2.0), pt(&t, 3.0, 2.0), &b).is_none());
    }

    #[test]
    fn clip_segment_crossing_box() {
        let t = Tape::new();
        let b = Boundary::rectangle(0.0, 0.0, 1.0, 1.0).unwrap();
        let (p, q) = clip_segment(pt(&t, -1.0, 0.5), pt(&t, 2.0, 0.5), &b).unwrap();
        assert_eq!([p[0].value(), q[0].value()], [0.0, 1.0]);
        let len = (q[0] - p[0]).hypot(q[1] - p[1]);
        assert_eq!(len.value(), 1.0);
    }
}
