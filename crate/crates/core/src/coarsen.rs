//! Self-supervised grid coarsening.
//!
//! The fine grid is simulated once to produce reference series at the
//! measurement points. The pooled coarse grid is then refined by gradient
//! descent (Adam) on the site coordinates, minimizing the mean squared misfit
//! between its own measurement series and the reference. Each epoch
//! re-tessellates, re-simulates and back-propagates through the whole
//! pipeline.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::{Tape, Var};
use crate::fvm::{simulate, simulate_values, MeshValues, PressureRecord, PressureSeries, SimConfig, SimError};
use crate::geometry::{triangulate, voronoi_geometry, GeometryError, SiteCloud};
use crate::pooling::{pool, PoolingError};
use crate::scalar::Scalar;

/// Displacement halvings attempted before an optimization run gives up.
pub const MAX_RETRIES: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoarsenError {
    #[error("series shape mismatch: {0}")]
    LengthMismatch(String),
    #[error("invalid coarsening config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Pooling(#[from] PoolingError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn check_shapes<T, U>(a: &[Vec<T>], b: &[Vec<U>]) -> Result<(), CoarsenError> {
    if a.len() != b.len() {
        return Err(CoarsenError::LengthMismatch(format!(
            "{} vs {} measurement points",
            a.len(),
            b.len()
        )));
    }
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        if x.len() != y.len() || x.is_empty() {
            return Err(CoarsenError::LengthMismatch(format!(
                "point {k}: {} vs {} samples",
                x.len(),
                y.len()
            )));
        }
    }
    Ok(())
}

/// Mean over measurement points of the per-point mean squared difference.
pub fn mse<T: Scalar>(series: &PressureSeries<T>, reference: &PressureSeries<T>) -> Result<T, CoarsenError> {
    check_shapes(&series.series, &reference.series)?;
    Ok(mse_unchecked(&series.series, &reference.series, |&v| v))
}

fn mse_unchecked<T: Scalar, V>(series: &[Vec<V>], reference: &[Vec<T>], value: impl Fn(&V) -> T) -> T {
    let mut total = T::zero();
    for (s, r) in series.iter().zip(reference) {
        let mut acc = T::zero();
        for (x, &y) in s.iter().zip(r) {
            let d = value(x) - y;
            acc = acc + d * d;
        }
        total = total + acc / T::from_usize(s.len()).expect("length fits the scalar type");
    }
    total / T::from_usize(series.len()).expect("length fits the scalar type")
}

pub fn rmse<T: Scalar>(series: &PressureSeries<T>, reference: &PressureSeries<T>) -> Result<T, CoarsenError> {
    Ok(mse(series, reference)?.sqrt())
}

/// RMSE of each measurement point separately over the sample window `range`.
pub fn rmse_per_point<T: Scalar>(
    series: &PressureSeries<T>,
    reference: &PressureSeries<T>,
    range: std::ops::Range<usize>,
) -> Result<Vec<T>, CoarsenError> {
    check_shapes(&series.series, &reference.series)?;
    series
        .series
        .iter()
        .zip(&reference.series)
        .map(|(s, r)| {
            if range.end > s.len() || range.is_empty() {
                return Err(CoarsenError::LengthMismatch(format!(
                    "window {range:?} of {} samples",
                    s.len()
                )));
            }
            let sum: T = s[range.clone()]
                .iter()
                .zip(&r[range.clone()])
                .map(|(&x, &y)| (x - y) * (x - y))
                .sum();
            Ok((sum / T::from_usize(range.len()).expect("length fits the scalar type")).sqrt())
        })
        .collect()
}

/// Differentiable MSE loss, recorded as a single tape node.
pub fn loss<'t, T: Scalar>(
    record: &PressureRecord<'t, T>,
    reference: &PressureSeries<T>,
) -> Result<Var<'t, T>, CoarsenError> {
    check_shapes(&record.series, &reference.series)?;
    let tape = record.series[0][0].tape();
    let value = mse_unchecked(&record.series, &reference.series, |v| v.value());
    let points = T::from_usize(record.series.len()).expect("length fits the scalar type");
    let mut parents = Vec::new();
    for (s, r) in record.series.iter().zip(&reference.series) {
        let scale = T::lit(2.0) / (points * T::from_usize(s.len()).expect("length fits the scalar type"));
        parents.extend(s.iter().zip(r).map(|(x, &y)| (x.index(), scale * (x.value() - y))));
    }
    Ok(tape.push_indexed(value, parents))
}

/// Adam with bias correction; produces displacements rather than applying
/// them so the caller can shorten a rejected step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub learning_rate: T,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    m: Vec<T>,
    v: Vec<T>,
    t: i32,
}

impl<T: Scalar> Adam<T> {
    pub fn new(learning_rate: T, n: usize) -> Self {
        Adam {
            learning_rate,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
            t: 0,
        }
    }

    /// Updates the moment estimates with `grads` and returns the step
    /// `-lr · m̂ / (sqrt(v̂) + ε)`.
    pub fn step(&mut self, grads: &[T]) -> Vec<T> {
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        self.t += 1;
        let one = T::one();
        let c1 = one - self.beta1.powi(self.t);
        let c2 = one - self.beta2.powi(self.t);
        let mut out = Vec::with_capacity(grads.len());
        for ((m, v), &g) in self.m.iter_mut().zip(self.v.iter_mut()).zip(grads) {
            *m = self.beta1 * *m + (one - self.beta1) * g;
            *v = self.beta2 * *v + (one - self.beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            out.push(-self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct CoarsenConfig<T> {
    pub n_target: usize,
    pub epochs: usize,
    pub learning_rate: T,
    pub seed: u64,
}

impl<T: Scalar> CoarsenConfig<T> {
    pub fn new(n_target: usize) -> Self {
        CoarsenConfig {
            n_target,
            epochs: 20,
            learning_rate: T::lit(1e-3),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), CoarsenError> {
        if !(self.learning_rate > T::zero() && self.learning_rate.is_finite()) {
            return Err(CoarsenError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

/// Outcome of [`optimize`]. `losses[0]` is the pooled grid's loss and
/// `losses[e]` the loss after `e` Adam updates; `cloud` is the best grid
/// seen and `final_rmse` its RMSE.
#[derive(Debug, Clone, Serialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct CoarsenReport<T> {
    pub n_fine: usize,
    pub n_coarse: usize,
    pub losses: Vec<T>,
    pub initial_rmse: T,
    pub final_rmse: T,
    pub best_epoch: usize,
    pub rejected_steps: usize,
    /// Reason the run stopped early, if it did.
    pub aborted: Option<String>,
    pub pooled: SiteCloud<T>,
    pub cloud: SiteCloud<T>,
    /// Simulation config on the coarse grid (indices remapped).
    pub config: SimConfig<T>,
    #[serde(skip)]
    pub reference: PressureSeries<T>,
    #[serde(skip)]
    pub pooled_series: PressureSeries<T>,
    #[serde(skip)]
    pub final_series: PressureSeries<T>,
    #[serde(skip)]
    pub epoch_seconds: Vec<f64>,
}

/// Loss, coordinate gradients and series of one forward/backward pass.
pub struct Evaluation<T> {
    pub loss: T,
    pub gradient: Vec<[T; 2]>,
    pub series: PressureSeries<T>,
}

/// Tessellates, simulates and differentiates the loss of `cloud`.
pub fn evaluate<T: Scalar>(
    cloud: &SiteCloud<T>,
    config: &SimConfig<T>,
    reference: &PressureSeries<T>,
) -> Result<Evaluation<T>, CoarsenError> {
    let tri = triangulate(cloud)?;
    let tape = Tape::new();
    let geom = voronoi_geometry(&tape, cloud, &tri)?;
    let record = simulate(&tape, &geom, cloud.permeability(), config)?;
    let l = loss(&record, reference)?;
    let grads = tape.backward(l);
    let gradient = geom.sites.iter().map(|s| [grads.wrt(s[0]), grads.wrt(s[1])]).collect();
    Ok(Evaluation {
        loss: l.value(),
        gradient,
        series: record.values(),
    })
}

/// Plain simulation of a cloud.
pub fn run<T: Scalar>(cloud: &SiteCloud<T>, config: &SimConfig<T>) -> Result<PressureSeries<T>, CoarsenError> {
    let mesh = MeshValues::from_cloud(cloud)?;
    Ok(simulate_values(&mesh, cloud.points(), config)?)
}

fn displaced<T: Scalar>(cloud: &SiteCloud<T>, step: &[T], scale: T) -> Result<SiteCloud<T>, GeometryError> {
    let boundary = cloud.boundary();
    let inset = boundary.diameter() * T::lit(crate::pooling::PROJECTION_INSET);
    let points = cloud
        .points()
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if cloud.is_fixed(i) {
                return p;
            }
            let q = [p[0] + step[2 * i] * scale, p[1] + step[2 * i + 1] * scale];
            if boundary.inset_distance(q) >= inset {
                q
            } else {
                boundary.project_inside(q, inset)
            }
        })
        .collect();
    cloud.with_points(points)
}

/// Pools `fine` to `coarsen.n_target` sites and optimizes the movable
/// coordinates for `coarsen.epochs` Adam steps.
///
/// `sim` refers to fine-grid indices. A step that breaks the geometry or the
/// simulation is retried with half the displacement, up to
/// [`MAX_RETRIES`] times, after which the run stops and reports what it has.
pub fn optimize<T: Scalar>(
    fine: &SiteCloud<T>,
    sim: &SimConfig<T>,
    coarsen: &CoarsenConfig<T>,
) -> Result<CoarsenReport<T>, CoarsenError> {
    coarsen.validate()?;
    let reference = run(fine, sim)?;
    let pooled = pool(fine, coarsen.n_target, coarsen.seed)?;
    let config = sim.remapped(|i| pooled.fixed_index(i))?;
    optimize_pooled(fine.len(), pooled.coarse, config, reference, coarsen)
}

/// As [`optimize`], starting from an already pooled cloud whose config and
/// reference series are given.
pub fn optimize_pooled<T: Scalar>(
    n_fine: usize,
    pooled: SiteCloud<T>,
    config: SimConfig<T>,
    reference: PressureSeries<T>,
    coarsen: &CoarsenConfig<T>,
) -> Result<CoarsenReport<T>, CoarsenError> {
    coarsen.validate()?;
    let mut timer = Instant::now();
    let first = evaluate(&pooled, &config, &reference)?;
    let mut epoch_seconds = vec![timer.elapsed().as_secs_f64()];
    let mut losses = vec![first.loss];
    let pooled_series = first.series.clone();

    let mut adam = Adam::new(coarsen.learning_rate, 2 * pooled.len());
    let mut current = pooled.clone();
    let mut eval = first;
    let mut best = (eval.loss, 0usize, current.clone(), eval.series.clone());
    let mut rejected_steps = 0;
    let mut aborted = None;

    for epoch in 1..=coarsen.epochs {
        timer = Instant::now();
        let mut grads: Vec<T> = eval.gradient.iter().flatten().copied().collect();
        for i in current.fixed_indices() {
            grads[2 * i] = T::zero();
            grads[2 * i + 1] = T::zero();
        }
        let step = adam.step(&grads);
        let mut scale = T::one();
        let mut accepted = None;
        let mut last_error = None;
        for _ in 0..=MAX_RETRIES {
            let attempt = displaced(&current, &step, scale)
                .map_err(CoarsenError::from)
                .and_then(|c| evaluate(&c, &config, &reference).map(|e| (c, e)));
            match attempt {
                Ok(ok) => {
                    accepted = Some(ok);
                    break;
                }
                Err(e) => {
                    rejected_steps += 1;
                    last_error = Some(e);
                    scale = scale / T::lit(2.0);
                }
            }
        }
        let Some((cloud, e)) = accepted else {
            aborted = Some(format!(
                "epoch {epoch}: step rejected {} times ({})",
                MAX_RETRIES + 1,
                last_error.map(|e| e.to_string()).unwrap_or_default()
            ));
            break;
        };
        current = cloud;
        eval = e;
        losses.push(eval.loss);
        if eval.loss < best.0 {
            best = (eval.loss, epoch, current.clone(), eval.series.clone());
        }
        epoch_seconds.push(timer.elapsed().as_secs_f64());
    }

    let (best_loss, best_epoch, cloud, final_series) = best;
    Ok(CoarsenReport {
        n_fine,
        n_coarse: pooled.len(),
        initial_rmse: losses[0].sqrt(),
        final_rmse: best_loss.sqrt(),
        losses,
        best_epoch,
        rejected_steps,
        aborted,
        pooled,
        cloud,
        config,
        reference,
        pooled_series,
        final_series,
        epoch_seconds,
    })
}

/// Train/test split of the misfit, per measurement point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Holdout<T> {
    pub indices: Vec<usize>,
    pub train_rmse: Vec<T>,
    pub test_rmse: Vec<T>,
}

/// Simulates both grids for `eval_steps` steps from the initial state and
/// reports per-point RMSE over the training window `[0, m)` and the test
/// window `[m, eval_steps)`, where `m = coarse_config.steps`.
pub fn evaluate_holdout<T: Scalar>(
    coarse: &SiteCloud<T>,
    coarse_config: &SimConfig<T>,
    fine: &SiteCloud<T>,
    fine_config: &SimConfig<T>,
    eval_steps: usize,
) -> Result<Holdout<T>, CoarsenError> {
    let m = coarse_config.steps;
    if eval_steps <= m {
        return Err(CoarsenError::InvalidConfig(format!(
            "eval steps {eval_steps} must exceed train steps {m}"
        )));
    }
    let extend = |c: &SimConfig<T>| SimConfig {
        steps: eval_steps,
        ..c.clone()
    };
    let reference = run(fine, &extend(fine_config))?;
    let series = run(coarse, &extend(coarse_config))?;
    Ok(Holdout {
        indices: series.indices.clone(),
        train_rmse: rmse_per_point(&series, &reference, 0..m)?,
        test_rmse: rmse_per_point(&series, &reference, m..eval_steps)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(v: Vec<Vec<f64>>) -> PressureSeries<f64> {
        PressureSeries {
            indices: (0..v.len()).collect(),
            series: v,
        }
    }

    #[test]
    fn mse_examples() {
        let a = series(vec![vec![1.0, 2.0, 3.0]]);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
        let b = series(vec![vec![1.5, 2.5, 3.5]]);
        assert_eq!(mse(&a, &b).unwrap(), 0.25);
        let two = series(vec![vec![0.0, 0.0], vec![0.0, 0.0]]);
        let off = series(vec![vec![1.0, 1.0], vec![3.0, 3.0]]);
        assert_eq!(mse(&two, &off).unwrap(), 5.0);
        assert!(mse(&a, &two).is_err());
    }

    #[test]
    fn loss_gradient() {
        let tape = Tape::new();
        let xs = [tape.var(1.0), tape.var(2.0)];
        let record = PressureRecord {
            indices: vec![0],
            series: vec![xs.to_vec()],
        };
        let reference = series(vec![vec![0.0, 0.0]]);
        let l = loss(&record, &reference).unwrap();
        assert_eq!(l.value(), 2.5);
        let g = tape.backward(l);
        assert_eq!(g.wrt(xs[0]), 1.0);
        assert_eq!(g.wrt(xs[1]), 2.0);
    }

    #[test]
    fn adam_first_step_is_lr_sign() {
        let mut adam = Adam::<f64>::new(0.1, 3);
        let s = adam.step(&[2.0, -0.5, 0.0]);
        assert!((s[0] + 0.1).abs() < 1e-8);
        assert!((s[1] - 0.1).abs() < 1e-7);
        assert_eq!(s[2], 0.0);
    }

    #[test]
    fn adam_minimizes_quadratic() {
        let mut adam = Adam::<f64>::new(0.05, 2);
        let mut x: [f64; 2] = [3.0, -2.0];
        for _ in 0..2000 {
            let s = adam.step(&[2.0 * x[0], 8.0 * x[1]]);
            x[0] += s[0];
            x[1] += s[1];
        }
        assert!(x[0].abs() < 1e-3 && x[1].abs() < 1e-3, "{x:?}");
    }
}
