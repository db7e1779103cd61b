//! Two-point-flux finite volumes on the clipped Voronoi mesh.
//!
//! Cells are the Voronoi regions, unknowns are cell-center pressures. The
//! operator `A` is never materialized: `(A p)_i = Σ_j w_ij (p_i - p_j)` is
//! evaluated edge by edge with the transmissibilities
//! `w_ij = (|e_ij| / h_ij) · 2 K_i K_j / (K_i + K_j)`.
//!
//! Time stepping is explicit: forward Euler for the parabolic equation and
//! a three-level leapfrog scheme for the wave equation (see [`simulate`]).

mod config;
mod solver;

use thiserror::Error;

use crate::autodiff::{Tape, Var};
use crate::geometry::{GeometryError, SiteCloud, VoronoiGeometry};
use crate::scalar::Scalar;

pub use config::{Equation, InitialCondition, SimConfig, WellSpec};
pub use solver::{simulate, simulate_states, simulate_values, PressureRecord, PressureSeries, BLOW_UP_THRESHOLD};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("pressure exceeded the blow-up threshold at step {step}")]
    Instability { step: usize },
    #[error("time step {tau:e} exceeds the stability bound {tau_max:e}")]
    UnstableTimeStep { tau: f64, tau_max: f64 },
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("site index {index} out of range for {cells} cells")]
    IndexOutOfRange { index: usize, cells: usize },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Harmonic mean `2ab / (a + b)`; zero when either argument is zero.
#[inline]
pub fn harmonic_mean<T: Scalar>(a: T, b: T) -> T {
    let s = a + b;
    if s == T::zero() {
        return T::zero();
    }
    T::lit(2.0) * a * b / s
}

/// Transmissibility of every mesh edge, differentiable in the site
/// coordinates through the edge lengths and site distances.
#[derive(Debug, Clone)]
pub struct EdgeWeights<'t, T: Scalar> {
    pub edges: Vec<[usize; 2]>,
    pub weights: Vec<Var<'t, T>>,
}

impl<T: Scalar> EdgeWeights<'_, T> {
    pub fn values(&self) -> Vec<T> {
        self.weights.iter().map(|w| w.value()).collect()
    }
}

pub fn assemble_weights<'t, T: Scalar>(
    geom: &VoronoiGeometry<'t, T>,
    permeability: &[T],
) -> Result<EdgeWeights<'t, T>, SimError> {
    let n = geom.n_cells();
    if permeability.len() != n {
        return Err(SimError::InvalidConfig(format!(
            "{} permeabilities for {n} cells",
            permeability.len()
        )));
    }
    let weights = geom
        .edges
        .iter()
        .zip(geom.edge_length.iter().zip(&geom.site_distance))
        .map(|(&[i, j], (&len, &h))| len / h * harmonic_mean(permeability[i], permeability[j]))
        .collect();
    Ok(EdgeWeights {
        edges: geom.edges.clone(),
        weights,
    })
}

/// Plain-valued mesh data: everything the time stepper needs.
#[derive(Debug, Clone, PartialEq)]
pub struct MeshValues<T> {
    pub edges: Vec<[usize; 2]>,
    pub weights: Vec<T>,
    pub volumes: Vec<T>,
}

impl<T: Scalar> MeshValues<T> {
    pub fn from_geometry(geom: &VoronoiGeometry<'_, T>, permeability: &[T]) -> Result<Self, SimError> {
        let weights = assemble_weights(geom, permeability)?;
        Ok(MeshValues {
            edges: weights.edges.clone(),
            weights: weights.values(),
            volumes: geom.cell_area_values(),
        })
    }

    /// Tessellates `cloud` and assembles its weights and volumes.
    pub fn from_cloud(cloud: &SiteCloud<T>) -> Result<Self, SimError> {
        let tri = crate::geometry::triangulate(cloud)?;
        let tape = Tape::with_capacity(64 * cloud.len(), 128 * cloud.len());
        let geom = crate::geometry::voronoi_geometry(&tape, cloud, &tri)?;
        Self::from_geometry(&geom, cloud.permeability())
    }

    pub fn n_cells(&self) -> usize {
        self.volumes.len()
    }

    /// `max_i Σ_j w_ij / V_i`, half the Gershgorin radius bound of `D⁻¹A`.
    fn max_row_rate(&self, extra: impl Fn(usize) -> T) -> T {
        let mut row = vec![T::zero(); self.n_cells()];
        for (&[i, j], &w) in self.edges.iter().zip(&self.weights) {
            row[i] = row[i] + w;
            row[j] = row[j] + w;
        }
        let two = T::lit(2.0);
        row.iter()
            .zip(&self.volumes)
            .enumerate()
            .map(|(i, (&s, &v))| two * s / v + extra(i))
            .fold(T::zero(), T::max)
    }
}

/// Largest stable forward-Euler step: `2 / λ̄` where
/// `λ̄ = max_i (2 Σ_j w_ij / V_i + c_i)` bounds the spectrum of the
/// iteration matrix by Gershgorin's theorem (`c_i` is the productivity of a
/// well in cell `i`, zero elsewhere). Without wells this is
/// `min_i V_i / Σ_j w_ij`.
pub fn stability_bound<T: Scalar>(mesh: &MeshValues<T>, wells: &[WellSpec<T>]) -> T {
    let c = well_productivity(mesh.n_cells(), wells);
    let bound = mesh.max_row_rate(|i| c[i]);
    if bound == T::zero() {
        return T::infinity();
    }
    T::lit(2.0) / bound
}

/// Largest stable leapfrog step for wave speed `c`: `2 / sqrt(λ̄)` with
/// `λ̄ = max_i (2 c² Σ_j w_ij / V_i + c_i)`.
pub fn wave_cfl_bound<T: Scalar>(mesh: &MeshValues<T>, wave_speed: T, wells: &[WellSpec<T>]) -> T {
    let c = well_productivity(mesh.n_cells(), wells);
    let c2 = wave_speed * wave_speed;
    let bound = mesh.max_row_rate(|_| T::zero()) * c2 + c.iter().copied().fold(T::zero(), T::max);
    if bound == T::zero() {
        return T::infinity();
    }
    T::lit(2.0) / bound.sqrt()
}

fn well_productivity<T: Scalar>(n: usize, wells: &[WellSpec<T>]) -> Vec<T> {
    let mut c = vec![T::zero(); n];
    for w in wells {
        if w.cell < n {
            c[w.cell] = c[w.cell] + w.productivity;
        }
    }
    c
}

/// `A p` computed edge by edge with tape arithmetic.
pub fn apply_operator<'t, T: Scalar>(weights: &EdgeWeights<'t, T>, p: &[Var<'t, T>]) -> Vec<Var<'t, T>> {
    let Some(first) = p.first() else {
        return Vec::new();
    };
    let tape = first.tape();
    let mut terms: Vec<Vec<Var<'t, T>>> = vec![Vec::new(); p.len()];
    for (&[i, j], &w) in weights.edges.iter().zip(&weights.weights) {
        let flux = w * (p[i] - p[j]);
        terms[i].push(flux);
        terms[j].push(-flux);
    }
    terms.into_iter().map(|t| tape.sum(t)).collect()
}

/// `A p` for plain values.
pub fn apply_operator_values<T: Scalar>(edges: &[[usize; 2]], weights: &[T], p: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); p.len()];
    for (&[i, j], &w) in edges.iter().zip(weights) {
        let flux = w * (p[i] - p[j]);
        out[i] = out[i] + flux;
        out[j] = out[j] - flux;
    }
    out
}

/// Well source term `f_α = c_α (p_bh,α - p_α)`, zero away from wells.
pub fn well_source<'t, T: Scalar>(p: &[Var<'t, T>], wells: &[WellSpec<T>]) -> Vec<Var<'t, T>> {
    let Some(first) = p.first() else {
        return Vec::new();
    };
    let tape = first.tape();
    let mut f: Vec<Var<'t, T>> = (0..p.len()).map(|_| tape.constant(T::zero())).collect();
    for w in wells {
        f[w.cell] += (-p[w.cell] + w.bottom_hole_pressure) * w.productivity;
    }
    f
}

pub fn well_source_values<T: Scalar>(p: &[T], wells: &[WellSpec<T>]) -> Vec<T> {
    let mut f = vec![T::zero(); p.len()];
    for w in wells {
        f[w.cell] = f[w.cell] + w.productivity * (w.bottom_hole_pressure - p[w.cell]);
    }
    f
}

/// One forward-Euler step `p + τ (f - D⁻¹ A p)` in tape arithmetic.
pub fn step_parabolic<'t, T: Scalar>(
    p: &[Var<'t, T>],
    weights: &EdgeWeights<'t, T>,
    areas: &[Var<'t, T>],
    f: &[Var<'t, T>],
    tau: T,
) -> Vec<Var<'t, T>> {
    let ap = apply_operator(weights, p);
    (0..p.len()).map(|i| p[i] + (f[i] - ap[i] / areas[i]) * tau).collect()
}

/// One leapfrog step `2 pᵏ - pᵏ⁻¹ - τ² c² D⁻¹ A pᵏ + τ² f` in tape arithmetic.
#[allow(clippy::too_many_arguments)]
pub fn step_wave<'t, T: Scalar>(
    prev: &[Var<'t, T>],
    p: &[Var<'t, T>],
    weights: &EdgeWeights<'t, T>,
    areas: &[Var<'t, T>],
    tau: T,
    wave_speed: T,
    f: &[Var<'t, T>],
) -> Vec<Var<'t, T>> {
    let ap = apply_operator(weights, p);
    let t2 = tau * tau;
    let c2 = wave_speed * wave_speed;
    (0..p.len())
        .map(|i| p[i] * T::lit(2.0) - prev[i] - ap[i] / areas[i] * (t2 * c2) + f[i] * t2)
        .collect()
}
