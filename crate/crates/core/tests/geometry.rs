use diffcoarsen::autodiff::Tape;
use diffcoarsen::geometry::{triangulate, voronoi_geometry, voronoi_geometry_from_sites, Boundary, SiteCloud};
use diffcoarsen_oracles::{gradient, voronoi_cells};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spade::{DelaunayTriangulation, Point2, Triangulation as _};

const UNIT: [[f64; 2]; 4] = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];

fn random_cloud(n: usize, seed: u64) -> SiteCloud<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.001..0.999), rng.random_range(0.001..0.999)])
        .collect();
    SiteCloud::new(
        pts,
        vec![1.0; n],
        vec![false; n],
        Boundary::rectangle(0.0, 0.0, 1.0, 1.0).unwrap(),
    )
    .unwrap()
}

#[test]
fn matches_brute_force_voronoi() {
    for (n, seed) in [(10, 1), (100, 2), (1000, 3)] {
        let cloud = random_cloud(n, seed);
        let tri = triangulate(&cloud).unwrap();
        let tape = Tape::new();
        let g = voronoi_geometry(&tape, &cloud, &tri).unwrap();
        let cells = voronoi_cells(cloud.points(), &UNIT);
        for (i, cell) in cells.iter().enumerate() {
            assert!((g.cell_area[i].value() - cell.area).abs() < 1e-9, "area of cell {i}");
        }
        let mut expected: Vec<([usize; 2], f64)> = cells
            .iter()
            .enumerate()
            .flat_map(|(i, c)| {
                c.neighbors
                    .iter()
                    .filter(move |(j, _)| *j > i)
                    .map(move |&(j, l)| ([i, j], l))
            })
            .collect();
        expected.sort_by_key(|e| e.0);
        let actual: Vec<([usize; 2], f64)> = g
            .edges
            .iter()
            .copied()
            .zip(g.edge_length_values())
            .filter(|(_, l)| *l > 1e-9)
            .collect();
        assert_eq!(expected.len(), actual.len(), "edge count, n = {n}");
        for (e, a) in expected.iter().zip(&actual) {
            assert_eq!(e.0, a.0);
            assert!((e.1 - a.1).abs() < 1e-9, "edge {:?}: {} vs {}", e.0, e.1, a.1);
        }
    }
}

/// The super-triangle hides a few Delaunay edges near the hull (every
/// circumcircle through them reaches a super vertex). Their dual Voronoi
/// edges lie outside the domain, so the clipped tessellation is unaffected.
#[test]
fn delaunay_edges_match_spade() {
    let cloud = random_cloud(500, 9);
    let tri = triangulate(&cloud).unwrap();
    let mut reference = DelaunayTriangulation::<Point2<f64>>::new();
    for p in cloud.points() {
        reference.insert(Point2::new(p[0], p[1])).unwrap();
    }
    let mut edges: Vec<[usize; 2]> = reference
        .undirected_edges()
        .map(|e| {
            let [a, b] = e.vertices().map(|v| v.index());
            [a.min(b), a.max(b)]
        })
        .collect();
    edges.sort();
    let ours = tri.edges();
    assert!(ours.iter().all(|e| edges.binary_search(e).is_ok()));
    let missing: Vec<_> = edges.iter().filter(|e| ours.binary_search(e).is_err()).collect();
    assert!(
        missing.len() < edges.len() / 20,
        "{} of {} edges missing",
        missing.len(),
        edges.len()
    );
    let cells = voronoi_cells(cloud.points(), &UNIT);
    for e in missing {
        assert!(
            cells[e[0]].neighbors.iter().all(|&(j, _)| j != e[1]),
            "{e:?} has a dual edge in the domain"
        );
    }
}

#[test]
fn non_rectangular_boundary() {
    let hexagon: Vec<[f64; 2]> = (0..6)
        .map(|k| {
            let a = k as f64 * std::f64::consts::PI / 3.0;
            [0.5 + 0.5 * a.cos(), 0.5 + 0.5 * a.sin()]
        })
        .collect();
    let b = Boundary::new(hexagon.clone()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pts = Vec::new();
    while pts.len() < 60 {
        let p = [rng.random::<f64>(), rng.random::<f64>()];
        if b.inset_distance(p) > 1e-3 {
            pts.push(p);
        }
    }
    let cloud = SiteCloud::new(pts, vec![1.0; 60], vec![false; 60], b.clone()).unwrap();
    let tape = Tape::new();
    let g = voronoi_geometry(&tape, &cloud, &triangulate(&cloud).unwrap()).unwrap();
    let cells = voronoi_cells(cloud.points(), &hexagon);
    for (a, c) in g.cell_area_values().iter().zip(&cells) {
        assert!((a - c.area).abs() < 1e-12);
    }
    let total: f64 = g.cell_area_values().iter().sum();
    assert!((total - b.area()).abs() < 1e-12);
}

#[test]
fn area_gradient_matches_finite_differences() {
    let cloud = random_cloud(12, 21);
    let tri = triangulate(&cloud).unwrap();
    let base: Vec<f64> = cloud.points().iter().flatten().copied().collect();
    // weighted sum of areas and edge lengths exercises every geometric path
    let objective = |x: &[f64]| -> f64 {
        let tape = Tape::new();
        let sites = x.chunks(2).map(|c| [tape.var(c[0]), tape.var(c[1])]).collect();
        let g = voronoi_geometry_from_sites(&tape, sites, &cloud, &tri).unwrap();
        let a: f64 = g
            .cell_area_values()
            .iter()
            .enumerate()
            .map(|(i, a)| (i + 1) as f64 * a * a)
            .sum();
        let l: f64 = g
            .edge_length_values()
            .iter()
            .zip(g.site_distance_values())
            .map(|(l, h)| l / h)
            .sum();
        a + l
    };
    let tape = Tape::new();
    let sites: Vec<_> = cloud
        .points()
        .iter()
        .map(|p| [tape.var(p[0]), tape.var(p[1])])
        .collect();
    let g = voronoi_geometry_from_sites(&tape, sites, &cloud, &tri).unwrap();
    let mut terms: Vec<_> = g
        .cell_area
        .iter()
        .enumerate()
        .map(|(i, &a)| a * a * (i + 1) as f64)
        .collect();
    terms.extend(g.edge_length.iter().zip(&g.site_distance).map(|(&l, &h)| l / h));
    let f = tape.sum(terms);
    assert!((f.value() - objective(&base)).abs() < 1e-12);
    let grads = tape.backward(f);
    let fd = gradient(objective, &base, 1e-6);
    for (k, s) in g.sites.iter().flatten().enumerate() {
        let ad = grads.wrt(*s);
        assert!(
            (ad - fd[k]).abs() <= 1e-6 * (1.0 + fd[k].abs()),
            "coordinate {k}: {ad} vs {}",
            fd[k]
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cells_partition_the_domain(seed in 0u64..10_000, n in 3usize..150) {
        let cloud = random_cloud(n, seed);
        let tri = triangulate(&cloud).unwrap();
        let tape = Tape::new();
        let g = voronoi_geometry(&tape, &cloud, &tri).unwrap();
        let total: f64 = g.cell_area_values().iter().sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(g.cell_area_values().iter().all(|&a| a > 0.0));
        prop_assert!(g.edge_length_values().iter().all(|&l| l >= 0.0));
        let delaunay = tri.edges();
        prop_assert!(g.edges.iter().all(|e| delaunay.binary_search(e).is_ok()));
    }

    #[test]
    fn total_area_is_stationary(seed in 0u64..10_000, n in 3usize..60) {
        let cloud = random_cloud(n, seed);
        let tri = triangulate(&cloud).unwrap();
        let tape = Tape::new();
        let g = voronoi_geometry(&tape, &cloud, &tri).unwrap();
        let total = tape.sum(g.cell_area.iter().copied());
        let grads = tape.backward(total);
        for s in g.sites.iter().flatten() {
            prop_assert!(grads.wrt(*s).abs() < 1e-9);
        }
    }
}
