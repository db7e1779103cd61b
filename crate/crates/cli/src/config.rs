//! Run configuration: command-line flags layered over an optional TOML file.

use std::path::{Path, PathBuf};

use clap::Args;
use diffcoarsen::fvm::{Equation, InitialCondition, WellSpec};
use diffcoarsen::scenarios::{self, sinusoidal_scenario};
use diffcoarsen::{Boundary, CoarsenConfig, Scenario, SimConfig, SiteCloud};
use serde::Deserialize;

use crate::error::CliError;

/// Flags shared by every subcommand. Each one overrides the matching key of
/// the `--config` file.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Named scenario: loop, sinusoidal, wave or multiwell.
    #[arg(long)]
    pub scenario: Option<String>,
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Time step.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Number of time steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Coarse point count (including fixed points).
    #[arg(long, conflicts_with = "reduction")]
    pub target: Option<usize>,
    /// Coarse point count as a fraction of the fine count.
    #[arg(long)]
    pub reduction: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Adam learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Run even when tau exceeds the stability bound.
    #[arg(long)]
    pub allow_unstable_tau: bool,
    /// Steps per checkpointed segment during differentiation (0 = off).
    #[arg(long)]
    pub checkpoint_interval: Option<usize>,
    /// Grid side of the sinusoidal scenario.
    #[arg(long)]
    pub grid_side: Option<usize>,
    /// Hold-out evaluation length after coarsening (0 = skip).
    #[arg(long)]
    pub eval_steps: Option<usize>,
}

/// File form of [`RunArgs`]. Unknown keys are rejected.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub seed: Option<u64>,
    pub tau: Option<f64>,
    pub steps: Option<usize>,
    pub target: Option<usize>,
    pub reduction: Option<f64>,
    pub epochs: Option<usize>,
    pub learning_rate: Option<f64>,
    pub out: Option<PathBuf>,
    pub allow_unstable_tau: Option<bool>,
    pub checkpoint_interval: Option<usize>,
    pub grid_side: Option<usize>,
    pub eval_steps: Option<usize>,
    pub equation: Option<Equation>,
    pub sizes: Option<Vec<usize>>,
    pub cloud: Option<InlineCloud>,
}

/// A site cloud given directly in the config file. Well and measurement
/// cells become fixed points.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InlineCloud {
    pub points: Vec<[f64; 2]>,
    /// Defaults to 1 everywhere.
    pub permeability: Option<Vec<f64>>,
    /// Convex polygon; defaults to the unit square.
    pub boundary: Option<Vec<[f64; 2]>>,
    #[serde(default)]
    pub measurement: Vec<usize>,
    #[serde(default)]
    pub wells: Vec<WellSpec<f64>>,
    pub wave_speed: Option<f64>,
    pub initial: Option<InitialCondition<f64>>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(format!("reading {}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    /// Reads `args.config` (if any) and applies the flags on top.
    pub fn from_args(args: &RunArgs) -> Result<Self, CliError> {
        let mut c = match &args.config {
            Some(path) => Self::load(path)?,
            None => RunConfig::default(),
        };
        macro_rules! overlay {
            ($($field:ident <- $flag:ident),*) => {
                $(if args.$flag.is_some() { c.$field = args.$flag.clone(); })*
            };
        }
        overlay!(
            scenario <- scenario,
            seed <- seed,
            tau <- tau,
            steps <- steps,
            epochs <- epochs,
            learning_rate <- lr,
            out <- out,
            checkpoint_interval <- checkpoint_interval,
            grid_side <- grid_side,
            eval_steps <- eval_steps
        );
        if args.target.is_some() || args.reduction.is_some() {
            c.target = args.target;
            c.reduction = args.reduction;
        }
        if args.allow_unstable_tau {
            c.allow_unstable_tau = Some(true);
        }
        Ok(c)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("out"))
    }

    /// Builds the scenario (named or inline) and applies every override.
    /// Returns `None` when neither a scenario nor a cloud is configured.
    pub fn scenario(&self) -> Result<Option<Scenario>, CliError> {
        let seed = self.seed();
        let base = match (&self.scenario, &self.cloud) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either a scenario or a cloud, not both".into())),
            (None, None) => return Ok(None),
            (Some(name), None) => match (name.as_str(), self.grid_side) {
                ("sinusoidal", Some(side)) => sinusoidal_scenario(side, seed)?,
                (_, Some(_)) => {
                    return Err(CliError::Config(
                        "grid_side only applies to the sinusoidal scenario".into(),
                    ))
                }
                (name, None) => scenarios::by_name(name, seed)?,
            },
            (None, Some(cloud)) => self.inline_scenario(cloud)?,
        };
        self.apply(base).map(Some)
    }

    fn inline_scenario(&self, c: &InlineCloud) -> Result<Scenario, CliError> {
        let n = c.points.len();
        let tau = self
            .tau
            .ok_or_else(|| CliError::Config("an inline cloud needs tau".into()))?;
        let steps = self
            .steps
            .ok_or_else(|| CliError::Config("an inline cloud needs steps".into()))?;
        let boundary = match &c.boundary {
            Some(v) => Boundary::new(v.clone())?,
            None => Boundary::rectangle(0.0, 0.0, 1.0, 1.0)?,
        };
        let mut fixed = vec![false; n];
        for &i in c.measurement.iter().chain(c.wells.iter().map(|w| &w.cell)) {
            *fixed
                .get_mut(i)
                .ok_or_else(|| CliError::Config(format!("cell {i} out of range for {n} points")))? = true;
        }
        let permeability = c.permeability.clone().unwrap_or_else(|| vec![1.0; n]);
        let cloud = SiteCloud::new(c.points.clone(), permeability, fixed, boundary)?;
        let mut sim = match self.equation.unwrap_or(Equation::Parabolic) {
            Equation::Parabolic => SimConfig::parabolic(tau, steps),
            Equation::Wave => SimConfig::wave(tau, steps, c.wave_speed.unwrap_or(1.0)),
        };
        sim.wells = c.wells.clone();
        sim.measurement = c.measurement.clone();
        if let Some(init) = &c.initial {
            sim.initial = init.clone();
        }
        let target = (n / 4).max(cloud.fixed_indices().len() + 1);
        Ok(Scenario {
            name: "inline".into(),
            cloud,
            sim,
            coarsen: CoarsenConfig {
                seed: self.seed(),
                ..CoarsenConfig::new(target)
            },
            eval_steps: None,
        })
    }

    fn apply(&self, mut s: Scenario) -> Result<Scenario, CliError> {
        if let Some(tau) = self.tau {
            s.sim.tau = tau;
        }
        if let Some(steps) = self.steps {
            s.sim.steps = steps;
        }
        if let Some(k) = self.checkpoint_interval {
            s.sim.checkpoint_interval = k;
        }
        if let Some(flag) = self.allow_unstable_tau {
            s.sim.allow_unstable = flag;
        }
        if let Some(e) = self.epochs {
            s.coarsen.epochs = e;
        }
        if let Some(lr) = self.learning_rate {
            s.coarsen.learning_rate = lr;
        }
        s.coarsen.seed = self.seed();
        match (self.target, self.reduction) {
            (Some(_), Some(_)) => return Err(CliError::Config("give either target or reduction, not both".into())),
            (Some(t), None) => s.coarsen.n_target = t,
            (None, Some(r)) => {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(CliError::Config(format!("reduction must lie in (0, 1], got {r}")));
                }
                s.coarsen.n_target = (r * s.cloud.len() as f64).round() as usize;
            }
            (None, None) => {}
        }
        if let Some(m) = self.eval_steps {
            s.eval_steps = (m > 0).then_some(m);
        }
        Ok(s)
    }
}
