use std::ops::Range;
use std::rc::Rc;

use serde::{Deserialize, Serialize};

use super::{assemble_weights, Equation, InitialCondition, MeshValues, SimConfig, SimError};
use crate::autodiff::{Tape, Var};
use crate::geometry::{VarPoint, VoronoiGeometry};
use crate::scalar::Scalar;

/// Pressure magnitude treated as numerical blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;

/// Differentiable pressure series at the measurement cells:
/// `series[k][s]` is the pressure at `indices[k]` after step `s + 1`.
#[derive(Debug, Clone)]
pub struct PressureRecord<'t, T: Scalar> {
    pub indices: Vec<usize>,
    pub series: Vec<Vec<Var<'t, T>>>,
}

impl<T: Scalar> PressureRecord<'_, T> {
    pub fn values(&self) -> PressureSeries<T> {
        PressureSeries {
            indices: self.indices.clone(),
            series: self
                .series
                .iter()
                .map(|s| s.iter().map(|v| v.value()).collect())
                .collect(),
        }
    }
}

/// Plain counterpart of [`PressureRecord`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureSeries<T> {
    pub indices: Vec<usize>,
    pub series: Vec<Vec<T>>,
}

/// Update `p' = α p + β q + s (f - κ V⁻¹ A p)` covering all three schemes:
/// forward Euler (`α = 1, β = 0, s = τ, κ = 1`), the leapfrog start
/// (`α = 1, β = 0, s = τ²/2, κ = c²`) and leapfrog (`α = 2, β = -1, s = τ², κ = c²`).
#[derive(Debug, Clone, Copy)]
struct Stencil<T> {
    alpha: T,
    beta: T,
    scale: T,
    kappa: T,
}

/// Frozen mesh connectivity, wells and scheme constants.
struct Stepper<T> {
    offsets: Vec<usize>,
    // (neighbor, edge) pairs of each cell
    adjacency: Vec<(usize, usize)>,
    well_c: Vec<T>,
    well_pbh: Vec<T>,
    measurement: Vec<usize>,
    equation: Equation,
    tau: T,
    wave_speed: T,
    n_edges: usize,
}

impl<T: Scalar> Stepper<T> {
    fn new(n: usize, edges: &[[usize; 2]], config: &SimConfig<T>) -> Self {
        let mut degree = vec![0usize; n + 1];
        for &[i, j] in edges {
            degree[i + 1] += 1;
            degree[j + 1] += 1;
        }
        let mut offsets = degree;
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut fill = offsets.clone();
        let mut adjacency = vec![(0, 0); offsets[n]];
        for (e, &[i, j]) in edges.iter().enumerate() {
            adjacency[fill[i]] = (j, e);
            fill[i] += 1;
            adjacency[fill[j]] = (i, e);
            fill[j] += 1;
        }
        let mut well_c = vec![T::zero(); n];
        let mut well_pbh = vec![T::zero(); n];
        for w in &config.wells {
            well_c[w.cell] = w.productivity;
            well_pbh[w.cell] = w.bottom_hole_pressure;
        }
        Stepper {
            offsets,
            adjacency,
            well_c,
            well_pbh,
            measurement: config.measurement.clone(),
            equation: config.equation,
            tau: config.tau,
            wave_speed: config.wave_speed,
            n_edges: edges.len(),
        }
    }

    fn n(&self) -> usize {
        self.well_c.len()
    }

    fn is_wave(&self) -> bool {
        self.equation == Equation::Wave
    }

    /// Stencil of the step producing state `k + 1`.
    fn stencil(&self, k: usize) -> Stencil<T> {
        let one = T::one();
        match self.equation {
            Equation::Parabolic => Stencil {
                alpha: one,
                beta: T::zero(),
                scale: self.tau,
                kappa: one,
            },
            Equation::Wave => {
                let t2 = self.tau * self.tau;
                let kappa = self.wave_speed * self.wave_speed;
                if k == 0 {
                    Stencil {
                        alpha: one,
                        beta: T::zero(),
                        scale: t2 / T::lit(2.0),
                        kappa,
                    }
                } else {
                    Stencil {
                        alpha: T::lit(2.0),
                        beta: -one,
                        scale: t2,
                        kappa,
                    }
                }
            }
        }
    }

    /// New value of cell `i` with its flux `Σ_j w_ij (p_i - p_j)` and weight
    /// sum `Σ_j w_ij`.
    #[inline]
    fn cell(&self, i: usize, st: Stencil<T>, p: &[T], q: &[T], w: &[T], inv_v: &[T]) -> (T, T, T) {
        let mut flux = T::zero();
        let mut wsum = T::zero();
        for &(j, e) in &self.adjacency[self.offsets[i]..self.offsets[i + 1]] {
            flux = flux + w[e] * (p[i] - p[j]);
            wsum = wsum + w[e];
        }
        let f = self.well_c[i] * (self.well_pbh[i] - p[i]);
        let value = st.alpha * p[i] + st.beta * q[i] + st.scale * (f - st.kappa * inv_v[i] * flux);
        (value, flux, wsum)
    }

    fn check(value: T, step: usize) -> Result<(), SimError> {
        if value.abs() <= T::lit(BLOW_UP_THRESHOLD) {
            Ok(())
        } else {
            Err(SimError::Instability { step })
        }
    }

    /// Plain integration of `steps`, starting from state `p` (and previous
    /// state `q`). Calls `record` with every new state.
    fn run_values(
        &self,
        w: &[T],
        inv_v: &[T],
        mut p: Vec<T>,
        mut q: Vec<T>,
        steps: Range<usize>,
        mut record: impl FnMut(&[T]),
    ) -> Result<(Vec<T>, Vec<T>), SimError> {
        let mut next = vec![T::zero(); p.len()];
        for k in steps {
            let st = self.stencil(k);
            for (i, slot) in next.iter_mut().enumerate() {
                let (value, _, _) = self.cell(i, st, &p, &q, w, inv_v);
                Self::check(value, k + 1)?;
                *slot = value;
            }
            std::mem::swap(&mut q, &mut p);
            std::mem::swap(&mut p, &mut next);
            record(&p);
        }
        Ok((p, q))
    }

    /// Taped integration: one fused node per cell and step.
    #[allow(clippy::too_many_arguments)]
    fn run_taped<'t>(
        &self,
        tape: &'t Tape<T>,
        w: &[Var<'t, T>],
        inv_v: &[Var<'t, T>],
        mut p: Vec<Var<'t, T>>,
        mut q: Vec<Var<'t, T>>,
        steps: Range<usize>,
        mut record: impl FnMut(&[Var<'t, T>]),
    ) -> Result<StatePair<'t, T>, SimError> {
        let wv: Vec<T> = w.iter().map(|v| v.value()).collect();
        let iv: Vec<T> = inv_v.iter().map(|v| v.value()).collect();
        let mut pv: Vec<T> = p.iter().map(|v| v.value()).collect();
        let mut qv: Vec<T> = q.iter().map(|v| v.value()).collect();
        let mut parents: Vec<(u32, T)> = Vec::new();
        for k in steps {
            let st = self.stencil(k);
            let mut next = Vec::with_capacity(p.len());
            let mut next_v = Vec::with_capacity(p.len());
            for i in 0..p.len() {
                let (value, flux, wsum) = self.cell(i, st, &pv, &qv, &wv, &iv);
                Self::check(value, k + 1)?;
                let s = st.scale * st.kappa * iv[i];
                parents.clear();
                parents.push((p[i].index(), st.alpha - st.scale * self.well_c[i] - s * wsum));
                for &(j, e) in &self.adjacency[self.offsets[i]..self.offsets[i + 1]] {
                    parents.push((p[j].index(), s * wv[e]));
                    parents.push((w[e].index(), -s * (pv[i] - pv[j])));
                }
                parents.push((inv_v[i].index(), -st.scale * st.kappa * flux));
                if st.beta != T::zero() {
                    parents.push((q[i].index(), st.beta));
                }
                next.push(tape.push_indexed(value, parents.drain(..)));
                next_v.push(value);
            }
            q = std::mem::replace(&mut p, next);
            qv = std::mem::replace(&mut pv, next_v);
            record(&p);
        }
        Ok((p, q))
    }
}

fn initial_values<T: Scalar>(sites: &[[T; 2]], initial: &InitialCondition<T>) -> Vec<T> {
    match initial {
        InitialCondition::Constant(c) => vec![*c; sites.len()],
        InitialCondition::Values(v) => v.clone(),
        InitialCondition::Gaussian {
            center,
            sigma,
            amplitude,
        } => {
            let k = -T::one() / (T::lit(2.0) * *sigma * *sigma);
            sites
                .iter()
                .map(|s| {
                    let (dx, dy) = (s[0] - center[0], s[1] - center[1]);
                    ((dx * dx + dy * dy) * k).exp() * *amplitude
                })
                .collect()
        }
    }
}

fn initial_vars<'t, T: Scalar>(
    tape: &'t Tape<T>,
    sites: &[VarPoint<'t, T>],
    initial: &InitialCondition<T>,
) -> Vec<Var<'t, T>> {
    match initial {
        InitialCondition::Constant(c) => sites.iter().map(|_| tape.constant(*c)).collect(),
        InitialCondition::Values(v) => v.iter().map(|&x| tape.constant(x)).collect(),
        InitialCondition::Gaussian {
            center,
            sigma,
            amplitude,
        } => {
            let k = -T::one() / (T::lit(2.0) * *sigma * *sigma);
            sites
                .iter()
                .map(|s| {
                    let (dx, dy) = (s[0] - center[0], s[1] - center[1]);
                    ((dx * dx + dy * dy) * k).exp() * *amplitude
                })
                .collect()
        }
    }
}

/// Runs `config.steps` steps on the mesh described by `geom` and records
/// the pressure at the measurement cells. The record is differentiable with
/// respect to the site coordinates of `geom`.
///
/// With `checkpoint_interval = k > 1` only segment boundaries are kept on the
/// tape; each segment of `k` steps is recomputed during the backward sweep,
/// trading one extra forward pass for memory proportional to `m / k`.
pub fn simulate<'t, T: Scalar>(
    tape: &'t Tape<T>,
    geom: &VoronoiGeometry<'t, T>,
    permeability: &[T],
    config: &SimConfig<T>,
) -> Result<PressureRecord<'t, T>, SimError> {
    let n = geom.n_cells();
    config.validate(n)?;
    let weights = assemble_weights(geom, permeability)?;
    let mesh = MeshValues {
        edges: weights.edges.clone(),
        weights: weights.values(),
        volumes: geom.cell_area_values(),
    };
    config.check_stability(&mesh)?;

    let stepper = Rc::new(Stepper::new(n, &weights.edges, config));
    let w = weights.weights;
    let inv_v: Vec<Var<'t, T>> = geom.cell_area.iter().map(|a| a.recip()).collect();
    let p0 = initial_vars(tape, &geom.sites, &config.initial);
    let q0 = p0.clone();
    let mut series: Vec<Vec<Var<'t, T>>> = config
        .measurement
        .iter()
        .map(|_| Vec::with_capacity(config.steps))
        .collect();

    if config.checkpoint_interval <= 1 {
        stepper.run_taped(tape, &w, &inv_v, p0, q0, 0..config.steps, |p| {
            for (s, &m) in series.iter_mut().zip(&config.measurement) {
                s.push(p[m]);
            }
        })?;
    } else {
        let (mut p, mut q) = (p0, q0);
        let mut start = 0;
        while start < config.steps {
            let end = (start + config.checkpoint_interval).min(config.steps);
            let (np, nq, rec) = checkpointed_segment(tape, &stepper, &w, &inv_v, &p, &q, start..end)?;
            for (s, r) in series.iter_mut().zip(rec) {
                s.extend(r);
            }
            p = np;
            q = nq;
            start = end;
        }
    }
    Ok(PressureRecord {
        indices: config.measurement.clone(),
        series,
    })
}

/// Previous and current pressure on the tape.
type StatePair<'t, T> = (Vec<Var<'t, T>>, Vec<Var<'t, T>>);

type Segment<'t, T> = (Vec<Var<'t, T>>, Vec<Var<'t, T>>, Vec<Vec<Var<'t, T>>>);

/// Records steps `range` as one tape block whose backward pass replays the
/// segment on a scratch tape.
fn checkpointed_segment<'t, T: Scalar>(
    tape: &'t Tape<T>,
    stepper: &Rc<Stepper<T>>,
    w: &[Var<'t, T>],
    inv_v: &[Var<'t, T>],
    p: &[Var<'t, T>],
    q: &[Var<'t, T>],
    range: Range<usize>,
) -> Result<Segment<'t, T>, SimError> {
    let n = stepper.n();
    let wave = stepper.is_wave();
    let n_meas = stepper.measurement.len();
    let value = |v: &[Var<'t, T>]| v.iter().map(|x| x.value()).collect::<Vec<T>>();
    let (pv, qv, wv, iv) = (value(p), value(q), value(w), value(inv_v));

    let mut recorded: Vec<T> = Vec::with_capacity(range.len() * n_meas);
    let (pe, qe) = stepper.run_values(&wv, &iv, pv.clone(), qv.clone(), range.clone(), |s| {
        recorded.extend(stepper.measurement.iter().map(|&m| s[m]));
    })?;

    let mut inputs: Vec<Var<'t, T>> = p.to_vec();
    if wave {
        inputs.extend_from_slice(q);
    }
    inputs.extend_from_slice(w);
    inputs.extend_from_slice(inv_v);
    let mut outputs = pe;
    if wave {
        outputs.extend(qe);
    }
    let n_state = outputs.len();
    outputs.extend(recorded);

    let st = Rc::clone(stepper);
    let seg = range.clone();
    let vjp = move |adjoint: &[T]| -> Vec<T> {
        let local = Tape::with_capacity(seg.len() * n * 8, seg.len() * n * 16);
        let leaves = |v: &[T]| v.iter().map(|&x| local.var(x)).collect::<Vec<_>>();
        let (lp, lw, li) = (leaves(&pv), leaves(&wv), leaves(&iv));
        let lq = if wave { leaves(&qv) } else { lp.clone() };
        let mut rec: Vec<Var<'_, T>> = Vec::with_capacity(seg.len() * st.measurement.len());
        let (ep, eq) = st
            .run_taped(&local, &lw, &li, lp.clone(), lq.clone(), seg.clone(), |s| {
                rec.extend(st.measurement.iter().map(|&m| s[m]));
            })
            .expect("replayed segment is stable");
        let mut outs: Vec<Var<'_, T>> = ep;
        if wave {
            outs.extend(eq);
        }
        outs.extend(rec);
        let terms: Vec<(Var<'_, T>, T)> = outs
            .into_iter()
            .zip(adjoint.iter().copied())
            .filter(|(_, a)| *a != T::zero())
            .collect();
        let root = local.custom(T::zero(), &terms);
        let g = local.backward(root);
        let mut grads: Vec<T> = lp.iter().map(|&v| g.wrt(v)).collect();
        if wave {
            grads.extend(lq.iter().map(|&v| g.wrt(v)));
        }
        grads.extend(lw.iter().map(|&v| g.wrt(v)));
        grads.extend(li.iter().map(|&v| g.wrt(v)));
        grads
    };
    debug_assert_eq!(inputs.len(), n * if wave { 3 } else { 2 } + stepper.n_edges);
    let vars = tape.block(&inputs, outputs, vjp);

    let np = vars[..n].to_vec();
    let nq = if wave { vars[n..n_state].to_vec() } else { p.to_vec() };
    let mut rec: Vec<Vec<Var<'t, T>>> = vec![Vec::with_capacity(range.len()); n_meas];
    for (s, chunk) in vars[n_state..].chunks(n_meas.max(1)).enumerate() {
        debug_assert!(s < range.len());
        for (k, &v) in chunk.iter().enumerate() {
            rec[k].push(v);
        }
    }
    Ok((np, nq, rec))
}

/// Plain-valued simulation on precomputed mesh data; bit-identical in value
/// to [`simulate`] and free of any tape.
pub fn simulate_values<T: Scalar>(
    mesh: &MeshValues<T>,
    sites: &[[T; 2]],
    config: &SimConfig<T>,
) -> Result<PressureSeries<T>, SimError> {
    let n = mesh.n_cells();
    config.validate(n)?;
    if sites.len() != n {
        return Err(SimError::InvalidConfig(format!("{} sites for {n} cells", sites.len())));
    }
    config.check_stability(mesh)?;
    let stepper = Stepper::new(n, &mesh.edges, config);
    let inv_v: Vec<T> = mesh.volumes.iter().map(|&v| T::one() / v).collect();
    let p0 = initial_values(sites, &config.initial);
    let mut series: Vec<Vec<T>> = config
        .measurement
        .iter()
        .map(|_| Vec::with_capacity(config.steps))
        .collect();
    stepper.run_values(&mesh.weights, &inv_v, p0.clone(), p0, 0..config.steps, |p| {
        for (s, &m) in series.iter_mut().zip(&config.measurement) {
            s.push(p[m]);
        }
    })?;
    Ok(PressureSeries {
        indices: config.measurement.clone(),
        series,
    })
}

/// Full pressure field after every step (plain values); `states[0]` is the
/// initial condition. Intended for diagnostics and small meshes.
pub fn simulate_states<T: Scalar>(
    mesh: &MeshValues<T>,
    sites: &[[T; 2]],
    config: &SimConfig<T>,
) -> Result<Vec<Vec<T>>, SimError> {
    let n = mesh.n_cells();
    config.validate(n)?;
    config.check_stability(mesh)?;
    let stepper = Stepper::new(n, &mesh.edges, config);
    let inv_v: Vec<T> = mesh.volumes.iter().map(|&v| T::one() / v).collect();
    let p0 = initial_values(sites, &config.initial);
    let mut states = vec![p0.clone()];
    stepper.run_values(&mesh.weights, &inv_v, p0.clone(), p0, 0..config.steps, |p| {
        states.push(p.to_vec())
    })?;
    Ok(states)
}
