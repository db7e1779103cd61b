//! Static SVG plots of coarsening runs.

use std::path::Path;

use plotters::prelude::*;

use crate::error::CliError;

const MAX_POINTS: usize = 2000;

fn plot_error(e: impl std::fmt::Display) -> CliError {
    CliError::Io {
        context: "rendering plot".into(),
        source: std::io::Error::other(e.to_string()),
    }
}

/// Every `n`-th sample so long series stay a reasonable size.
fn thin(values: &[f64], tau: f64) -> Vec<(f64, f64)> {
    let stride = values.len().div_ceil(MAX_POINTS).max(1);
    values
        .iter()
        .enumerate()
        .filter(|(k, _)| k % stride == 0 || *k + 1 == values.len())
        .map(|(k, &v)| ((k + 1) as f64 * tau, v))
        .collect()
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    let pad = if hi > lo {
        0.05 * (hi - lo)
    } else {
        0.5 * lo.abs().max(1e-12)
    };
    (lo - pad, hi + pad)
}

/// Loss per epoch; log scale when every loss is positive.
pub fn loss_curve(path: &Path, losses: &[f64]) -> Result<(), CliError> {
    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    let x_max = (losses.len().max(2) - 1) as f64;
    let points: Vec<(f64, f64)> = losses.iter().enumerate().map(|(k, &l)| (k as f64, l)).collect();
    let mut builder = ChartBuilder::on(&root);
    builder
        .caption("Training loss", ("sans-serif", 22))
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(80);
    if losses.iter().all(|&l| l > 0.0) {
        let lo = losses.iter().copied().fold(f64::INFINITY, f64::min) * 0.8;
        let hi = losses.iter().copied().fold(0.0, f64::max) * 1.25;
        let mut chart = builder
            .build_cartesian_2d(0.0..x_max, (lo..hi.max(lo * 2.0)).log_scale())
            .map_err(plot_error)?;
        chart
            .configure_mesh()
            .x_desc("epoch")
            .y_desc("MSE")
            .draw()
            .map_err(plot_error)?;
        chart
            .draw_series(LineSeries::new(points.clone(), BLUE.stroke_width(2)))
            .map_err(plot_error)?;
        chart
            .draw_series(points.iter().map(|&p| Circle::new(p, 3, BLUE.filled())))
            .map_err(plot_error)?;
    } else {
        let (lo, hi) = span(losses.iter().copied());
        let mut chart = builder.build_cartesian_2d(0.0..x_max, lo..hi).map_err(plot_error)?;
        chart
            .configure_mesh()
            .x_desc("epoch")
            .y_desc("MSE")
            .draw()
            .map_err(plot_error)?;
        chart
            .draw_series(LineSeries::new(points, BLUE.stroke_width(2)))
            .map_err(plot_error)?;
    }
    root.present().map_err(plot_error)
}

/// One panel per measurement site: reference, pooled and optimized series.
pub fn series(
    path: &Path,
    sites: &[usize],
    tau: f64,
    reference: &[Vec<f64>],
    pooled: &[Vec<f64>],
    optimized: &[Vec<f64>],
) -> Result<(), CliError> {
    let panels = sites.len().max(1);
    let root = SVGBackend::new(path, (900, 320 * panels as u32)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    for (k, area) in root.split_evenly((panels, 1)).iter().enumerate().take(sites.len()) {
        let curves = [
            (&reference[k], "fine (reference)", BLACK),
            (&pooled[k], "pooled", RED),
            (&optimized[k], "optimized", BLUE),
        ];
        let t_end = reference[k].len() as f64 * tau;
        let (lo, hi) = span(curves.iter().flat_map(|c| c.0.iter().copied()));
        let mut chart = ChartBuilder::on(area)
            .caption(format!("site {}", sites[k]), ("sans-serif", 20))
            .margin(12)
            .x_label_area_size(35)
            .y_label_area_size(80)
            .build_cartesian_2d(0.0..t_end, lo..hi)
            .map_err(plot_error)?;
        chart
            .configure_mesh()
            .x_desc("time")
            .y_desc("pressure")
            .draw()
            .map_err(plot_error)?;
        for (values, label, color) in curves {
            chart
                .draw_series(LineSeries::new(thin(values, tau), color.stroke_width(2)))
                .map_err(plot_error)?
                .label(label)
                .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
        }
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .position(SeriesLabelPosition::LowerRight)
            .draw()
            .map_err(plot_error)?;
    }
    root.present().map_err(plot_error)
}
