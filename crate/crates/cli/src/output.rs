//! File writers. Floats are printed with 17 significant digits so every
//! value round-trips exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use diffcoarsen::geometry::{triangulate, voronoi_geometry};
use diffcoarsen::{PressureSeries, SiteCloud, Tape};
use serde::Serialize;

use crate::error::CliError;

pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(CliError::io(format!("writing {}", path.display())))
}

pub fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(CliError::io(format!("creating {}", dir.display())))
}

/// Writes `pressure_<site>.csv` for every recorded site; `sites` names the
/// files (they may differ from the series' own cell indices after pooling).
pub fn write_pressure_csvs(
    dir: &Path,
    series: &PressureSeries,
    sites: &[usize],
    tau: f64,
) -> Result<Vec<PathBuf>, CliError> {
    let mut paths = Vec::new();
    for (values, site) in series.series.iter().zip(sites) {
        let mut text = String::with_capacity(64 * values.len());
        text.push_str("step,time,pressure\n");
        for (k, v) in values.iter().enumerate() {
            let step = k + 1;
            writeln!(text, "{step},{},{}", float(step as f64 * tau), float(*v)).unwrap();
        }
        let path = dir.join(format!("pressure_{site}.csv"));
        write(&path, &text)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Reference, pooled and optimized series side by side, one row per
/// (site, step).
pub fn write_comparison_csv(
    path: &Path,
    sites: &[usize],
    tau: f64,
    reference: &PressureSeries,
    pooled: &PressureSeries,
    optimized: &PressureSeries,
) -> Result<(), CliError> {
    let mut text = String::from("site,step,time,reference,pooled,optimized\n");
    for (k, &site) in sites.iter().enumerate() {
        let rows = reference.series[k]
            .iter()
            .zip(&pooled.series[k])
            .zip(&optimized.series[k]);
        for (j, ((r, p), o)) in rows.enumerate() {
            let step = j + 1;
            writeln!(
                text,
                "{site},{step},{},{},{},{}",
                float(step as f64 * tau),
                float(*r),
                float(*p),
                float(*o)
            )
            .unwrap();
        }
    }
    write(path, &text)
}

/// Tessellated grid as written to `mesh.json`.
#[derive(Debug, Serialize)]
pub struct MeshDocument {
    pub sites: Vec<[f64; 2]>,
    pub permeability: Vec<f64>,
    pub fixed: Vec<bool>,
    pub boundary: Vec<[f64; 2]>,
    pub areas: Vec<f64>,
    /// Pairs of adjacent sites with a shared edge of positive length.
    pub edges: Vec<[usize; 2]>,
    pub edge_lengths: Vec<f64>,
    pub transmissibility: Vec<f64>,
}

impl MeshDocument {
    pub fn new(cloud: &SiteCloud) -> Result<Self, CliError> {
        let tape = Tape::new();
        let geom = voronoi_geometry(&tape, cloud, &triangulate(cloud)?)?;
        let weights = diffcoarsen::fvm::assemble_weights(&geom, cloud.permeability())?.values();
        let lengths = geom.edge_length_values();
        let keep: Vec<usize> = (0..geom.edges.len()).filter(|&e| lengths[e] > 0.0).collect();
        Ok(MeshDocument {
            sites: cloud.points().to_vec(),
            permeability: cloud.permeability().to_vec(),
            fixed: cloud.fixed().to_vec(),
            boundary: cloud.boundary().vertices().to_vec(),
            areas: geom.cell_area_values(),
            edges: keep.iter().map(|&e| geom.edges[e]).collect(),
            edge_lengths: keep.iter().map(|&e| lengths[e]).collect(),
            transmissibility: keep.iter().map(|&e| weights[e]).collect(),
        })
    }
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    write(path, &text)
}

/// Peak resident set size of this process in bytes, where the platform
/// reports it.
pub fn peak_memory_bytes() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

pub fn format_memory(bytes: Option<u64>) -> String {
    bytes.map_or_else(|| "n/a".to_string(), |b| b.to_string())
}
