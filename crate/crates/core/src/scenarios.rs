//! Named, seed-deterministic experiment setups.
//!
//! | name         | sites | equation  | fixed sites                          |
//! |--------------|-------|-----------|--------------------------------------|
//! | `loop`       | 312   | parabolic | source, sink                         |
//! | `sinusoidal` | g²    | parabolic | source, sink                         |
//! | `wave`       | 400   | wave      | two measurement points               |
//! | `multiwell`  | 400   | parabolic | source, four producing wells         |

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::coarsen::CoarsenConfig;
use crate::fvm::{InitialCondition, MeshValues, SimConfig, SimError, WellSpec};
use crate::geometry::{Boundary, GeometryError, SiteCloud};
use crate::scalar::Scalar;

pub const NAMES: [&str; 4] = ["loop", "sinusoidal", "wave", "multiwell"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScenarioError {
    #[error("unknown scenario {0:?} (expected one of loop, sinusoidal, wave, multiwell)")]
    Unknown(String),
    #[error("invalid scenario parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Simulation(#[from] SimError),
}

#[derive(Debug, Clone)]
pub struct Scenario<T> {
    pub name: String,
    pub cloud: SiteCloud<T>,
    /// Simulation settings on the fine cloud (training length).
    pub sim: SimConfig<T>,
    pub coarsen: CoarsenConfig<T>,
    /// Hold-out evaluation length, for scenarios that define one.
    pub eval_steps: Option<usize>,
}

impl<T: Scalar> Scenario<T> {
    /// Errors if the stated time step violates the stability guard.
    fn checked(self) -> Result<Self, ScenarioError> {
        let mesh = MeshValues::from_cloud(&self.cloud)?;
        self.sim.check_stability(&mesh)?;
        Ok(self)
    }
}

/// Builds a scenario by name with its default size.
pub fn by_name<T: Scalar>(name: &str, seed: u64) -> Result<Scenario<T>, ScenarioError> {
    match name {
        "loop" => loop_scenario(seed),
        "sinusoidal" => sinusoidal_scenario(300, seed),
        "wave" => wave_scenario(seed),
        "multiwell" => multiwell_scenario(seed),
        other => Err(ScenarioError::Unknown(other.to_string())),
    }
}

fn lit<T: Scalar>(p: [f64; 2]) -> [T; 2] {
    [T::lit(p[0]), T::lit(p[1])]
}

/// Index of the point nearest to `target` (lowest index on ties).
fn nearest(points: &[[f64; 2]], target: [f64; 2]) -> usize {
    let d = |p: &[f64; 2]| (p[0] - target[0]).powi(2) + (p[1] - target[1]).powi(2);
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if d(p) < d(&points[best]) {
            best = i;
        }
    }
    best
}

/// `side × side` cell-centered grid on `[0, length]²`.
fn cell_centered_grid(side: usize, length: f64) -> Vec<[f64; 2]> {
    let h = length / side as f64;
    (0..side)
        .flat_map(|j| (0..side).map(move |i| [(i as f64 + 0.5) * h, (j as f64 + 0.5) * h]))
        .collect()
}

fn cloud<T: Scalar>(
    points: &[[f64; 2]],
    permeability: Vec<f64>,
    fixed: &[usize],
    boundary: [f64; 4],
) -> Result<SiteCloud<T>, GeometryError> {
    let mut flags = vec![false; points.len()];
    for &i in fixed {
        flags[i] = true;
    }
    let b = Boundary::rectangle(
        T::lit(boundary[0]),
        T::lit(boundary[1]),
        T::lit(boundary[2]),
        T::lit(boundary[3]),
    )?;
    SiteCloud::new(
        points.iter().map(|&p| lit(p)).collect(),
        permeability.into_iter().map(T::lit).collect(),
        flags,
        b,
    )
}

/// 312 sites on `[0, 1]²` (16 staggered rows of 20 and 19), permeability 1
/// on the ring `0.25 ≤ |x - (0.5, 0.5)| ≤ 0.45` and 0.1 elsewhere. The
/// source (`p_bh = 1`, `c = 0.5`) and the sink sit on the ring at angles 0
/// and π; only the sink is recorded. `τ = 1e-4`, `m = 10⁴`, domain
/// `[-0.1, 1.1]²`, pooling target `round(0.25 · 312)`.
pub fn loop_scenario<T: Scalar>(seed: u64) -> Result<Scenario<T>, ScenarioError> {
    let mut points = Vec::with_capacity(312);
    for row in 0..16 {
        let y = row as f64 / 15.0;
        if row % 2 == 0 {
            points.extend((0..20).map(|i| [i as f64 / 19.0, y]));
        } else {
            points.extend((0..19).map(|i| [(i as f64 + 0.5) / 19.0, y]));
        }
    }
    let permeability = points
        .iter()
        .map(|p| {
            let r = (p[0] - 0.5).hypot(p[1] - 0.5);
            if (0.25..=0.45).contains(&r) {
                1.0
            } else {
                0.1
            }
        })
        .collect();
    let source = nearest(&points, [0.85, 0.5]);
    let sink = nearest(&points, [0.15, 0.5]);
    let cloud = cloud(&points, permeability, &[source, sink], [-0.1, -0.1, 1.1, 1.1])?;
    let sim = SimConfig {
        wells: vec![WellSpec::new(source, T::lit(0.5), T::one())],
        measurement: vec![sink],
        ..SimConfig::parabolic(T::lit(1e-4), 10_000)
    };
    let coarsen = CoarsenConfig {
        seed,
        ..CoarsenConfig::new(78)
    };
    Scenario {
        name: "loop".into(),
        cloud,
        sim,
        coarsen,
        eval_steps: Some(20_000),
    }
    .checked()
}

/// Permeability `sin(0.05 x) + sin(0.05 y) + 2.5` on a `grid_side²`
/// cell-centered grid over `[0, 100]²`. Source (`p_bh = 50`, `c = 1`) and
/// sink nearest to (50.17, 9.70) and (36.79, 9.70); `τ = 0.005`,
/// `m = 10⁴`; pooling target `grid_side² / 90` (90 000 → 1 000 at full size).
pub fn sinusoidal_scenario<T: Scalar>(grid_side: usize, seed: u64) -> Result<Scenario<T>, ScenarioError> {
    if grid_side < 10 {
        return Err(ScenarioError::InvalidParameter(format!(
            "grid side {grid_side} is below 10"
        )));
    }
    let points = cell_centered_grid(grid_side, 100.0);
    let permeability = points.iter().map(|p| sinusoidal_permeability(p[0], p[1])).collect();
    let source = nearest(&points, [50.17, 9.70]);
    let sink = nearest(&points, [36.79, 9.70]);
    let cloud = cloud(&points, permeability, &[source, sink], [0.0, 0.0, 100.0, 100.0])?;
    let sim = SimConfig {
        wells: vec![WellSpec::new(source, T::one(), T::lit(50.0))],
        measurement: vec![sink],
        checkpoint_interval: 100,
        ..SimConfig::parabolic(T::lit(0.005), 10_000)
    };
    let n_target = ((grid_side * grid_side) as f64 / 90.0).round().max(3.0) as usize;
    let coarsen = CoarsenConfig {
        seed,
        learning_rate: T::lit(0.1),
        epochs: 60,
        ..CoarsenConfig::new(n_target)
    };
    Scenario {
        name: "sinusoidal".into(),
        cloud,
        sim,
        coarsen,
        eval_steps: None,
    }
    .checked()
}

pub fn sinusoidal_permeability(x: f64, y: f64) -> f64 {
    (0.05 * x).sin() + (0.05 * y).sin() + 2.5
}

/// Wave equation on `[0, 10]²`: 20 × 20 cell-centered grid, `c = 1`,
/// `f = 0`, initial pulse `exp(-|x - (5, 5)|² / 2)` at rest, `τ = 0.001`,
/// `m = 10⁴`. Measurement points nearest to (2, 5) and (7, 8); pooling
/// target 60.
pub fn wave_scenario<T: Scalar>(seed: u64) -> Result<Scenario<T>, ScenarioError> {
    let points = cell_centered_grid(20, 10.0);
    let a = nearest(&points, [2.0, 5.0]);
    let b = nearest(&points, [7.0, 8.0]);
    let cloud = cloud(&points, vec![1.0; points.len()], &[a, b], [0.0, 0.0, 10.0, 10.0])?;
    let sim = SimConfig {
        measurement: vec![a, b],
        initial: InitialCondition::Gaussian {
            center: lit([5.0, 5.0]),
            sigma: T::one(),
            amplitude: T::one(),
        },
        ..SimConfig::wave(T::lit(0.001), 10_000, T::one())
    };
    let coarsen = CoarsenConfig {
        seed,
        learning_rate: T::lit(1e-2),
        ..CoarsenConfig::new(60)
    };
    Scenario {
        name: "wave".into(),
        cloud,
        sim,
        coarsen,
        eval_steps: None,
    }
    .checked()
}

/// Smooth random field on `[0, 1]²`: a sum of eight seeded Fourier modes,
/// affinely rescaled so its values on `points` span exactly `[lo, hi]`.
fn smooth_field(points: &[[f64; 2]], seed: u64, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let modes: Vec<[f64; 4]> = (0..8)
        .map(|_| {
            let kx = rng.random_range(-4.0..4.0) * PI;
            let ky = rng.random_range(-4.0..4.0) * PI;
            let phase = rng.random_range(0.0..2.0 * PI);
            let amp = rng.random_range(0.5..1.0);
            [kx, ky, phase, amp]
        })
        .collect();
    let raw: Vec<f64> = points
        .iter()
        .map(|p| {
            modes
                .iter()
                .map(|m| m[3] * (m[0] * p[0] + m[1] * p[1] + m[2]).sin())
                .sum()
        })
        .collect();
    let (min, max) = raw
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    raw.iter().map(|&v| lo + (hi - lo) * (v - min) / (max - min)).collect()
}

/// Heterogeneous field with one injector and four producers on `[0, 1]²`
/// (20 × 20 cell-centered grid). `log10 K` is a smooth seeded field spanning
/// `[-2, 2]`. The injector near (0.5, 0.5) has `p_bh = 10³`; producers near
/// (0.2, 0.2), (0.8, 0.2), (0.2, 0.8), (0.8, 0.8) have `p_bh = 0` and are the
/// measurement points. All wells use `c = 100`. `τ` is half the stability
/// bound rounded down to one significant digit; `m = 10⁴` for training and
/// `2 · 10⁴` for evaluation; pooling target 100.
pub fn multiwell_scenario<T: Scalar>(seed: u64) -> Result<Scenario<T>, ScenarioError> {
    let points = cell_centered_grid(20, 1.0);
    let permeability: Vec<f64> = smooth_field(&points, seed, -2.0, 2.0)
        .into_iter()
        .map(|v| 10f64.powf(v))
        .collect();
    let source = nearest(&points, [0.5, 0.5]);
    let producers: Vec<usize> = [[0.2, 0.2], [0.8, 0.2], [0.2, 0.8], [0.8, 0.8]]
        .iter()
        .map(|&t| nearest(&points, t))
        .collect();
    let mut fixed = vec![source];
    fixed.extend(&producers);
    let cloud = cloud(&points, permeability, &fixed, [0.0, 0.0, 1.0, 1.0])?;
    let c = T::lit(100.0);
    let mut wells = vec![WellSpec::new(source, c, T::lit(1e3))];
    wells.extend(producers.iter().map(|&p| WellSpec::new(p, c, T::zero())));
    let mut sim = SimConfig {
        wells,
        measurement: producers,
        ..SimConfig::parabolic(T::one(), 10_000)
    };
    let mesh = MeshValues::from_cloud(&cloud)?;
    let half = (sim.tau_max(&mesh) / T::lit(2.0)).as_f64();
    let magnitude = 10f64.powf(half.log10().floor());
    sim.tau = T::lit((half / magnitude).floor() * magnitude);
    let coarsen = CoarsenConfig {
        seed,
        ..CoarsenConfig::new(100)
    };
    Scenario {
        name: "multiwell".into(),
        cloud,
        sim,
        coarsen,
        eval_steps: Some(20_000),
    }
    .checked()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loop_counts_and_values() {
        let s = loop_scenario::<f64>(0).unwrap();
        assert_eq!(s.cloud.len(), 312);
        assert!(s.cloud.permeability().iter().all(|&k| k == 0.1 || k == 1.0));
        assert!(s.cloud.permeability().contains(&0.1) && s.cloud.permeability().contains(&1.0));
        assert_eq!((s.sim.steps, s.sim.tau), (10_000, 1e-4));
        assert_eq!(s.cloud.fixed_indices().len(), 2);
        for i in s.cloud.fixed_indices() {
            assert_eq!(s.cloud.permeability()[i], 1.0);
        }
    }

    #[test]
    fn sinusoidal_field() {
        assert_eq!(sinusoidal_permeability(0.0, 0.0), 2.5);
        let s = sinusoidal_scenario::<f64>(30, 0).unwrap();
        assert_eq!(s.cloud.len(), 900);
        assert!(s.cloud.permeability().iter().all(|&k| (0.5..=4.5).contains(&k)));
    }

    #[test]
    fn wave_setup() {
        let s = wave_scenario::<f64>(0).unwrap();
        assert_eq!(s.cloud.len(), 400);
        assert_eq!(s.coarsen.n_target, 60);
        assert!(s.sim.wells.is_empty());
        assert_eq!(s.sim.measurement.len(), 2);
    }

    #[test]
    fn multiwell_setup() {
        let s = multiwell_scenario::<f64>(3).unwrap();
        assert_eq!(s.cloud.fixed_indices().len(), 5);
        let k = s.cloud.permeability();
        let (min, max) = k
            .iter()
            .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!((min.log10() + 2.0).abs() < 1e-12 && (max.log10() - 2.0).abs() < 1e-12);
        assert_eq!(s.sim.wells[0].bottom_hole_pressure, 1e3);
        assert_eq!(s.eval_steps, Some(2 * s.sim.steps));
    }

    #[test]
    fn deterministic_in_seed() {
        let a = multiwell_scenario::<f64>(11).unwrap();
        let b = multiwell_scenario::<f64>(11).unwrap();
        assert_eq!(a.cloud, b.cloud);
        assert_eq!(a.sim, b.sim);
    }
}
