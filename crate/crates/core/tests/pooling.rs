use diffcoarsen::geometry::triangulate;
use diffcoarsen::pooling::{kmeans, pool, Assignment};
use diffcoarsen::scenarios::{loop_scenario, sinusoidal_scenario};
use diffcoarsen_oracles::lloyd_wcss;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn loop_reduction_counts() {
    let s = loop_scenario::<f64>(0).unwrap();
    assert_eq!(s.cloud.len(), 312);
    let n_fixed = s.cloud.fixed_indices().len();
    for n in [234, 156, 78] {
        let r = pool(&s.cloud, n, 0).unwrap();
        assert_eq!(r.coarse.len(), n);
        assert_eq!(r.coarse.movable_indices().len(), n - n_fixed);
        assert_eq!(r.n_fixed, n_fixed);
    }
}

#[test]
fn fixed_points_are_untouched() {
    let s = loop_scenario::<f64>(3).unwrap();
    let r = pool(&s.cloud, 78, 3).unwrap();
    for i in s.cloud.fixed_indices() {
        let j = r.fixed_index(i).unwrap();
        assert!(r.coarse.is_fixed(j));
        assert_eq!(r.coarse.points()[j][0].to_bits(), s.cloud.points()[i][0].to_bits());
        assert_eq!(r.coarse.points()[j][1].to_bits(), s.cloud.points()[i][1].to_bits());
        assert_eq!(
            r.coarse.permeability()[j].to_bits(),
            s.cloud.permeability()[i].to_bits()
        );
    }
}

#[test]
fn pooled_sites_are_cluster_means() {
    let s = loop_scenario::<f64>(0).unwrap();
    let r = pool(&s.cloud, 100, 11).unwrap();
    let mut sum = vec![[0.0f64; 3]; 100];
    let mut count = vec![0usize; 100];
    for (i, a) in r.assignment.iter().enumerate() {
        if let Assignment::Cluster(c) = a {
            let j = r.n_fixed + c;
            let (p, k) = (s.cloud.points()[i], s.cloud.permeability()[i]);
            sum[j] = [sum[j][0] + p[0], sum[j][1] + p[1], sum[j][2] + k];
            count[j] += 1;
        }
    }
    for j in r.n_fixed..100 {
        let c = count[j] as f64;
        assert!(count[j] > 0);
        assert!((r.coarse.points()[j][0] - sum[j][0] / c).abs() < 1e-12);
        assert!((r.coarse.points()[j][1] - sum[j][1] / c).abs() < 1e-12);
        assert!((r.coarse.permeability()[j] - sum[j][2] / c).abs() < 1e-12);
    }
}

#[test]
fn identity_when_every_point_is_a_cluster() {
    let s = loop_scenario::<f64>(0).unwrap();
    let r = pool(&s.cloud, s.cloud.len(), 0).unwrap();
    let mut a: Vec<[u64; 2]> = r
        .coarse
        .points()
        .iter()
        .map(|p| [p[0].to_bits(), p[1].to_bits()])
        .collect();
    let mut b: Vec<[u64; 2]> = s
        .cloud
        .points()
        .iter()
        .map(|p| [p[0].to_bits(), p[1].to_bits()])
        .collect();
    a.sort();
    b.sort();
    assert_eq!(a, b);
}

#[test]
fn deterministic_in_seed() {
    let s = loop_scenario::<f64>(0).unwrap();
    assert_eq!(pool(&s.cloud, 78, 5).unwrap(), pool(&s.cloud, 78, 5).unwrap());
    assert_ne!(
        pool(&s.cloud, 78, 5).unwrap().coarse,
        pool(&s.cloud, 78, 6).unwrap().coarse
    );
}

#[test]
fn wcss_beats_random_restart_median() {
    let s = loop_scenario::<f64>(0).unwrap();
    let pts: Vec<[f64; 2]> = s.cloud.movable_indices().iter().map(|&i| s.cloud.points()[i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut reference: Vec<f64> = (0..10)
        .map(|_| lloyd_wcss(&pts, 40, |n| rng.random_range(0..n)))
        .collect();
    reference.sort_by(f64::total_cmp);
    let median = (reference[4] + reference[5]) / 2.0;
    let km = kmeans(&pts, 40, 0).unwrap();
    assert!(km.inertia <= median, "{} vs median {}", km.inertia, median);
}

#[test]
fn large_cloud_pools_to_valid_sites() {
    let s = sinusoidal_scenario::<f64>(300, 0).unwrap();
    assert_eq!(s.cloud.len(), 90_000);
    let r = pool(&s.cloud, 1000, 0).unwrap();
    assert_eq!(r.coarse.len(), 1000);
    let b = r.coarse.boundary();
    assert!(r.coarse.points().iter().all(|&p| b.contains_strict(p)));
    let mut keys: Vec<[u64; 2]> = r
        .coarse
        .points()
        .iter()
        .map(|p| [p[0].to_bits(), p[1].to_bits()])
        .collect();
    keys.sort();
    keys.dedup();
    assert_eq!(keys.len(), 1000);
    assert!(triangulate(&r.coarse).is_ok());
}
