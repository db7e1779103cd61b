use std::fmt::Write as _;
use std::time::Instant;

use diffcoarsen::coarsen::{evaluate_holdout, optimize, Holdout};
use diffcoarsen::fvm::{simulate_values, Equation, MeshValues};
use diffcoarsen::pooling::pool;
use diffcoarsen::scenarios::sinusoidal_scenario;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::gradcheck;
use crate::output::{self, float, format_memory, peak_memory_bytes, MeshDocument};
use crate::plot;

fn required_scenario(config: &RunConfig) -> Result<diffcoarsen::Scenario, CliError> {
    config
        .scenario()?
        .ok_or_else(|| CliError::Config("no scenario or cloud given".into()))
}

/// Runs one forward simulation and writes the pressure series, the mesh and
/// a summary.
pub fn simulate(config: &RunConfig) -> Result<Value, CliError> {
    let s = required_scenario(config)?;
    let out = config.out_dir();
    output::create_dir(&out)?;

    let mesh = MeshValues::from_cloud(&s.cloud)?;
    let tau_max = s.sim.tau_max(&mesh);
    let start = Instant::now();
    let series = simulate_values(&mesh, s.cloud.points(), &s.sim)?;
    let wall = start.elapsed().as_secs_f64();
    let peak = peak_memory_bytes();

    let files = output::write_pressure_csvs(&out, &series, &s.sim.measurement, s.sim.tau)?;
    output::write_json(&out.join("mesh.json"), &MeshDocument::new(&s.cloud)?)?;
    let mut summary = String::new();
    writeln!(summary, "scenario: {}", s.name).unwrap();
    writeln!(summary, "points: {}", s.cloud.len()).unwrap();
    writeln!(summary, "equation: {}", equation_name(s.sim.equation)).unwrap();
    writeln!(summary, "tau: {}", float(s.sim.tau)).unwrap();
    writeln!(summary, "steps: {}", s.sim.steps).unwrap();
    writeln!(summary, "tau_max: {}", float(tau_max)).unwrap();
    writeln!(summary, "wall_seconds: {wall:.6}").unwrap();
    writeln!(summary, "peak_bytes: {}", format_memory(peak)).unwrap();
    output::write(&out.join("summary.txt"), &summary)?;

    Ok(json!({
        "scenario": s.name,
        "points": s.cloud.len(),
        "steps": s.sim.steps,
        "tau": s.sim.tau,
        "tau_max": tau_max,
        "wall_seconds": wall,
        "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
    }))
}

fn equation_name(e: Equation) -> &'static str {
    match e {
        Equation::Parabolic => "parabolic",
        Equation::Wave => "wave",
    }
}

#[derive(Serialize)]
struct HoldoutDocument {
    eval_steps: usize,
    pooled: Holdout<f64>,
    optimized: Holdout<f64>,
}

/// Pools, optimizes and writes the report, both meshes, the series
/// comparison and the plots.
pub fn coarsen(config: &RunConfig) -> Result<Value, CliError> {
    let s = required_scenario(config)?;
    let out = config.out_dir();
    output::create_dir(&out)?;

    let report = optimize(&s.cloud, &s.sim, &s.coarsen)?;
    let sites = &s.sim.measurement;
    output::write_json(&out.join("report.json"), &report)?;
    output::write_json(&out.join("coarse_mesh.json"), &MeshDocument::new(&report.cloud)?)?;
    output::write_comparison_csv(
        &out.join("comparison.csv"),
        sites,
        s.sim.tau,
        &report.reference,
        &report.pooled_series,
        &report.final_series,
    )?;
    plot::loss_curve(&out.join("loss_curve.svg"), &report.losses)?;
    plot::series(
        &out.join("series.svg"),
        sites,
        s.sim.tau,
        &report.reference.series,
        &report.pooled_series.series,
        &report.final_series.series,
    )?;

    let mut status = json!({
        "scenario": s.name,
        "n_fine": report.n_fine,
        "n_coarse": report.n_coarse,
        "epochs": report.losses.len() - 1,
        "initial_rmse": report.initial_rmse,
        "final_rmse": report.final_rmse,
        "best_epoch": report.best_epoch,
        "rejected_steps": report.rejected_steps,
        "aborted": report.aborted,
        "seconds": report.epoch_seconds.iter().sum::<f64>(),
    });
    if let Some(eval_steps) = s.eval_steps.filter(|&m| m > s.sim.steps) {
        let holdout = |cloud| evaluate_holdout(cloud, &report.config, &s.cloud, &s.sim, eval_steps);
        let doc = HoldoutDocument {
            eval_steps,
            pooled: holdout(&report.pooled)?,
            optimized: holdout(&report.cloud)?,
        };
        output::write_json(&out.join("holdout.json"), &doc)?;
        status["holdout_test_rmse"] = json!({ "pooled": doc.pooled.test_rmse, "optimized": doc.optimized.test_rmse });
    }
    Ok(status)
}

/// Times plain simulations of the sinusoidal scenario at several sizes, and
/// optionally of a pooled version of the largest one.
pub fn benchmark(config: &RunConfig) -> Result<Value, CliError> {
    if config.scenario.as_deref().is_some_and(|n| n != "sinusoidal") || config.cloud.is_some() {
        return Err(CliError::Config("benchmark runs the sinusoidal scenario only".into()));
    }
    let sizes = config.sizes.clone().unwrap_or_else(|| vec![1000, 10000]);
    if sizes.is_empty() {
        return Err(CliError::Config("no benchmark sizes".into()));
    }
    let out = config.out_dir();
    output::create_dir(&out)?;

    let mut text = String::from("points,steps,wall_seconds,peak_bytes\n");
    let mut rows = Vec::new();
    let mut time = |s: &diffcoarsen::Scenario, text: &mut String| -> Result<f64, CliError> {
        let mesh = MeshValues::from_cloud(&s.cloud)?;
        let start = Instant::now();
        simulate_values(&mesh, s.cloud.points(), &s.sim)?;
        let wall = start.elapsed().as_secs_f64();
        let peak = peak_memory_bytes();
        writeln!(
            text,
            "{},{},{wall:.6},{}",
            s.cloud.len(),
            s.sim.steps,
            format_memory(peak)
        )
        .unwrap();
        rows.push(json!({ "points": s.cloud.len(), "wall_seconds": wall }));
        Ok(wall)
    };

    let steps = config.steps.unwrap_or(1000);
    let mut largest = None;
    for &size in &sizes {
        let side = (size as f64).sqrt().round() as usize;
        let mut s = sinusoidal_scenario(side, config.seed())?;
        s.sim.steps = steps;
        if let Some(tau) = config.tau {
            s.sim.tau = tau;
        }
        s.sim.allow_unstable = config.allow_unstable_tau.unwrap_or(false);
        let wall = time(&s, &mut text)?;
        if largest.as_ref().is_none_or(|(n, _, _)| s.cloud.len() > *n) {
            largest = Some((s.cloud.len(), wall, s));
        }
    }

    let mut speedup = Value::Null;
    if config.target.is_some() || config.reduction.is_some() {
        let (n, fine_wall, fine) = largest.expect("at least one size");
        let target = match (config.target, config.reduction) {
            (Some(t), _) => t,
            (None, Some(r)) => (r * n as f64).round() as usize,
            (None, None) => unreachable!(),
        };
        let pooled = pool(&fine.cloud, target, config.seed())?;
        let coarse = diffcoarsen::Scenario {
            cloud: pooled.coarse.clone(),
            sim: fine.sim.remapped(|i| pooled.fixed_index(i))?,
            ..fine
        };
        let coarse_wall = time(&coarse, &mut text)?;
        speedup = json!(fine_wall / coarse_wall);
    }
    output::write(&out.join("benchmark.csv"), &text)?;
    Ok(json!({ "rows": rows, "speedup": speedup }))
}

/// Finite-difference check of the adjoint; fails with exit status 5 above
/// the tolerance.
pub fn gradcheck(config: &RunConfig) -> Result<Value, CliError> {
    let s = match config.scenario()? {
        Some(s) => s,
        None => {
            let mut s = gradcheck::random_system(
                10,
                config.steps.unwrap_or(50),
                config.equation.unwrap_or(Equation::Parabolic),
                config.seed(),
            )?;
            if let Some(tau) = config.tau {
                s.sim.tau = tau;
            }
            s
        }
    };
    let r = gradcheck::check(&s.cloud, &s.sim, config.seed())?;
    if let Some(out) = &config.out {
        output::create_dir(out)?;
        let mut text = String::from("site,axis,adjoint,finite_difference\n");
        for (i, axis, ad, fd) in &r.coordinates {
            writeln!(text, "{i},{axis},{},{}", float(*ad), float(*fd)).unwrap();
        }
        output::write(&out.join("gradcheck.csv"), &text)?;
    }
    if r.max_relative_error > gradcheck::TOLERANCE {
        return Err(CliError::Gradient(r.max_relative_error, gradcheck::TOLERANCE));
    }
    Ok(json!({
        "points": s.cloud.len(),
        "steps": s.sim.steps,
        "coordinates": r.coordinates.len(),
        "max_relative_error": r.max_relative_error,
    }))
}
