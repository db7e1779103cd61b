//! Finite-difference check of the coordinate gradients.

use diffcoarsen::coarsen::{evaluate, mse, run};
use diffcoarsen::fvm::{Equation, InitialCondition, MeshValues, WellSpec};
use diffcoarsen::{Boundary, CoarsenConfig, PressureSeries, Scenario, SimConfig, SiteCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::CliError;

pub const MAX_POINTS: usize = 50;
pub const MAX_STEPS: usize = 200;
pub const TOLERANCE: f64 = 1e-4;
pub const STEP: f64 = 1e-6;

/// Components smaller than this fraction of the largest FD component are
/// compared against it instead of against themselves.
pub const RELATIVE_FLOOR: f64 = 1e-3;

/// Relative size of the displacement that produces the reference grid.
pub const JITTER: f64 = 0.02;

/// `cloud` with every movable site moved by up to `JITTER · diam(B)` per
/// axis, deterministically in `seed`. Its trajectory serves as the
/// reference series, so the loss stays small compared with its gradient.
pub fn jittered(cloud: &SiteCloud, seed: u64) -> Result<SiteCloud, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let b = cloud.boundary();
    let (r, inset) = (JITTER * b.diameter(), 1e-3 * b.diameter());
    let points = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if cloud.is_fixed(i) {
                return p;
            }
            let q = [p[0] + rng.random_range(-r..r), p[1] + rng.random_range(-r..r)];
            if b.inset_distance(q) >= inset {
                q
            } else {
                b.project_inside(q, inset)
            }
        })
        .collect();
    Ok(cloud.with_points(points)?)
}

/// Reference series: the trajectory of [`jittered`]`(cloud, seed)`. The
/// time-step guard is skipped for the displaced grid; a genuine blow-up
/// still fails.
pub fn reference_series(cloud: &SiteCloud, sim: &SimConfig, seed: u64) -> Result<PressureSeries, CliError> {
    let sim = SimConfig {
        allow_unstable: true,
        ..sim.clone()
    };
    Ok(run(&jittered(cloud, seed)?, &sim)?)
}

/// `n` random sites in `[0.05, 0.95]²` with log-uniform permeability in
/// `[0.1, 10]`. The parabolic variant has a well in site 0 and records site
/// 1; the wave variant starts from a Gaussian pulse and records sites 0 and 1.
/// `tau` is half the stability bound of both the cloud and its jittered
/// reference.
pub fn random_system(n: usize, steps: usize, equation: Equation, seed: u64) -> Result<Scenario, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<[f64; 2]> = (0..n)
        .map(|_| [rng.random_range(0.05..0.95), rng.random_range(0.05..0.95)])
        .collect();
    let permeability: Vec<f64> = (0..n).map(|_| 10f64.powf(rng.random_range(-1.0..1.0))).collect();
    let mut fixed = vec![false; n];
    fixed[0] = true;
    fixed[1] = true;
    let cloud = SiteCloud::new(points, permeability, fixed, Boundary::rectangle(0.0, 0.0, 1.0, 1.0)?)?;
    let mut sim = match equation {
        Equation::Parabolic => SimConfig {
            wells: vec![WellSpec::new(0, 0.5, 1.0)],
            measurement: vec![1],
            ..SimConfig::parabolic(1.0, steps)
        },
        Equation::Wave => SimConfig {
            measurement: vec![0, 1],
            initial: InitialCondition::Gaussian {
                center: [0.5, 0.5],
                sigma: 0.2,
                amplitude: 1.0,
            },
            ..SimConfig::wave(1.0, steps, 1.0)
        },
    };
    let tau_max = sim.tau_max(&MeshValues::from_cloud(&cloud)?);
    let reference_tau_max = sim.tau_max(&MeshValues::from_cloud(&jittered(&cloud, seed)?)?);
    sim.tau = 0.5 * tau_max.min(reference_tau_max);
    Ok(Scenario {
        name: "random".into(),
        cloud,
        sim,
        coarsen: CoarsenConfig::new(n),
        eval_steps: None,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct GradientCheck {
    pub loss: f64,
    pub max_relative_error: f64,
    /// `(site, axis, adjoint, finite difference)` for every movable coordinate.
    pub coordinates: Vec<(usize, usize, f64, f64)>,
}

/// Compares the adjoint of the MSE against [`reference_series`] with central
/// differences over every movable coordinate.
pub fn check(cloud: &SiteCloud, sim: &SimConfig, seed: u64) -> Result<GradientCheck, CliError> {
    if cloud.len() > MAX_POINTS || sim.steps > MAX_STEPS {
        return Err(CliError::Config(format!(
            "gradcheck is limited to {MAX_POINTS} points and {MAX_STEPS} steps (got {} and {})",
            cloud.len(),
            sim.steps
        )));
    }
    let reference = reference_series(cloud, sim, seed)?;
    let eval = evaluate(cloud, sim, &reference)?;
    let loss_at = |points: Vec<[f64; 2]>| -> Result<f64, CliError> {
        let series = run(&cloud.with_points(points)?, sim)?;
        Ok(mse(&series, &reference)?)
    };
    let mut coordinates = Vec::new();
    for i in cloud.movable_indices() {
        for axis in 0..2 {
            let mut plus = cloud.points().to_vec();
            let mut minus = plus.clone();
            plus[i][axis] += STEP;
            minus[i][axis] -= STEP;
            let fd = (loss_at(plus)? - loss_at(minus)?) / (2.0 * STEP);
            coordinates.push((i, axis, eval.gradient[i][axis], fd));
        }
    }
    let scale = coordinates.iter().fold(0.0f64, |m, c| m.max(c.3.abs()));
    let max_relative_error = coordinates
        .iter()
        .map(|&(_, _, ad, fd)| {
            let denom = ad.abs().max(fd.abs()).max(RELATIVE_FLOOR * scale);
            if denom == 0.0 {
                0.0
            } else {
                (ad - fd).abs() / denom
            }
        })
        .fold(0.0, f64::max);
    Ok(GradientCheck {
        loss: eval.loss,
        max_relative_error,
        coordinates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_parabolic_system_passes() {
        let s = random_system(10, 50, Equation::Parabolic, 1).unwrap();
        let r = check(&s.cloud, &s.sim, 1).unwrap();
        assert_eq!(r.coordinates.len(), 16);
        assert!(r.max_relative_error < TOLERANCE, "{}", r.max_relative_error);
    }

    #[test]
    fn constant_state_has_zero_gradient() {
        let mut s = random_system(10, 30, Equation::Parabolic, 2).unwrap();
        s.sim.wells.clear();
        s.sim.initial = InitialCondition::Constant(0.7);
        let r = check(&s.cloud, &s.sim, 2).unwrap();
        assert!(r.coordinates.iter().all(|c| c.2 == 0.0 && c.3 == 0.0));
        assert_eq!(r.max_relative_error, 0.0);
    }

    #[test]
    fn oversized_systems_are_refused() {
        let s = random_system(10, 50, Equation::Parabolic, 1).unwrap();
        let long = SimConfig {
            steps: 500,
            ..s.sim.clone()
        };
        assert!(matches!(check(&s.cloud, &long, 1), Err(CliError::Config(_))));
    }
}
