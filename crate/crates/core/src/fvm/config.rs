use serde::{Deserialize, Serialize};

use super::{stability_bound, wave_cfl_bound, MeshValues, SimError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Equation {
    Parabolic,
    Wave,
}

/// Point source `c (p_bh - p)` attached to one (fixed) cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellSpec<T> {
    pub cell: usize,
    pub productivity: T,
    pub bottom_hole_pressure: T,
}

impl<T> WellSpec<T> {
    pub fn new(cell: usize, productivity: T, bottom_hole_pressure: T) -> Self {
        WellSpec {
            cell,
            productivity,
            bottom_hole_pressure,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialCondition<T> {
    Constant(T),
    /// `amplitude · exp(-|x - center|² / (2 sigma²))`, evaluated at the sites.
    Gaussian {
        center: [T; 2],
        sigma: T,
        amplitude: T,
    },
    Values(Vec<T>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + serde::de::DeserializeOwned")]
pub struct SimConfig<T> {
    pub equation: Equation,
    pub tau: T,
    pub steps: usize,
    pub wells: Vec<WellSpec<T>>,
    pub wave_speed: T,
    /// Cells whose pressure is recorded after every step.
    pub measurement: Vec<usize>,
    pub initial: InitialCondition<T>,
    /// Skip the time-step guard.
    pub allow_unstable: bool,
    /// Steps per checkpointed segment; 0 or 1 records every step on the tape.
    pub checkpoint_interval: usize,
}

impl<T: Scalar> SimConfig<T> {
    pub fn parabolic(tau: T, steps: usize) -> Self {
        SimConfig {
            equation: Equation::Parabolic,
            tau,
            steps,
            wells: Vec::new(),
            wave_speed: T::one(),
            measurement: Vec::new(),
            initial: InitialCondition::Constant(T::zero()),
            allow_unstable: false,
            checkpoint_interval: 0,
        }
    }

    pub fn wave(tau: T, steps: usize, wave_speed: T) -> Self {
        SimConfig {
            equation: Equation::Wave,
            wave_speed,
            ..Self::parabolic(tau, steps)
        }
    }

    pub fn validate(&self, cells: usize) -> Result<(), SimError> {
        if !(self.tau > T::zero() && self.tau.is_finite()) {
            return Err(SimError::InvalidConfig(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.steps == 0 {
            return Err(SimError::InvalidConfig("steps must be positive".into()));
        }
        if self.equation == Equation::Wave && !(self.wave_speed > T::zero()) {
            return Err(SimError::InvalidConfig("wave speed must be positive".into()));
        }
        let check = |index: usize| {
            if index < cells {
                Ok(())
            } else {
                Err(SimError::IndexOutOfRange { index, cells })
            }
        };
        for w in &self.wells {
            check(w.cell)?;
            if !(w.productivity >= T::zero()) {
                return Err(SimError::InvalidConfig(format!(
                    "negative productivity at cell {}",
                    w.cell
                )));
            }
        }
        for (k, w) in self.wells.iter().enumerate() {
            if self.wells[..k].iter().any(|o| o.cell == w.cell) {
                return Err(SimError::InvalidConfig(format!("two wells in cell {}", w.cell)));
            }
        }
        for &m in &self.measurement {
            check(m)?;
        }
        if let InitialCondition::Values(v) = &self.initial {
            if v.len() != cells {
                return Err(SimError::InvalidConfig(format!(
                    "{} initial values for {cells} cells",
                    v.len()
                )));
            }
        }
        Ok(())
    }

    /// Largest admissible `tau` for this equation on `mesh`.
    pub fn tau_max(&self, mesh: &MeshValues<T>) -> T {
        match self.equation {
            Equation::Parabolic => stability_bound(mesh, &self.wells),
            Equation::Wave => wave_cfl_bound(mesh, self.wave_speed, &self.wells),
        }
    }

    /// Errors when `tau` exceeds [`SimConfig::tau_max`], unless
    /// `allow_unstable` is set.
    pub fn check_stability(&self, mesh: &MeshValues<T>) -> Result<(), SimError> {
        let tau_max = self.tau_max(mesh);
        if self.tau > tau_max && !self.allow_unstable {
            return Err(SimError::UnstableTimeStep {
                tau: self.tau.as_f64(),
                tau_max: tau_max.as_f64(),
            });
        }
        Ok(())
    }

    /// Rewrites every cell index through `map` (used after pooling reorders
    /// the sites). Fails when an index has no image.
    pub fn remapped(&self, map: impl Fn(usize) -> Option<usize>) -> Result<Self, SimError> {
        let mut out = self.clone();
        for w in &mut out.wells {
            w.cell =
                map(w.cell).ok_or_else(|| SimError::InvalidConfig(format!("well cell {} not preserved", w.cell)))?;
        }
        for m in &mut out.measurement {
            *m = map(*m).ok_or_else(|| SimError::InvalidConfig(format!("measurement cell {m} not preserved")))?;
        }
        if let InitialCondition::Values(_) = out.initial {
            return Err(SimError::InvalidConfig(
                "per-cell initial values cannot be remapped".into(),
            ));
        }
        Ok(out)
    }
}
