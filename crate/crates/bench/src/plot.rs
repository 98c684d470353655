//! SVG line charts of bench CSVs.

use std::path::{Path, PathBuf};

use plotters::prelude::*;
use thiserror::Error;

use crate::harness::{BenchError, BenchRow};

#[derive(Debug, Error)]
pub enum PlotError {
    #[error(transparent)]
    Input(#[from] BenchError),
    #[error("missing input {0}")]
    Missing(PathBuf),
    #[error("drawing {path}: {reason}")]
    Draw { path: PathBuf, reason: String },
}

pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub fn line_chart(path: &Path, title: &str, y_label: &str, series: &[Series]) -> Result<(), PlotError> {
    let draw = |reason: String| PlotError::Draw {
        path: path.to_path_buf(),
        reason,
    };
    let pts = || series.iter().flat_map(|s| s.points.iter().copied());
    let x_max = pts().map(|p| p.0).fold(1.0, f64::max);
    let y_max = pts().map(|p| p.1).fold(1.0, f64::max) * 1.05;

    let root = SVGBackend::new(path, (900, 540)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| draw(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(44)
        .y_label_area_size(80)
        .build_cartesian_2d(0.0..x_max, 0.0..y_max)
        .map_err(|e| draw(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc("events")
        .y_desc(y_label)
        .draw()
        .map_err(|e| draw(e.to_string()))?;
    for (i, s) in series.iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        chart
            .draw_series(LineSeries::new(s.points.iter().copied(), color.stroke_width(2)))
            .map_err(|e| draw(e.to_string()))?
            .label(s.label.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| draw(e.to_string()))?;
    root.present().map_err(|e| draw(e.to_string()))
}

fn load(dir: &Path, name: &str) -> Result<Vec<BenchRow>, PlotError> {
    let p = dir.join(name);
    if !p.exists() {
        return Err(PlotError::Missing(p));
    }
    Ok(crate::report::read_rows(&p)?)
}

fn series(label: &str, rows: &[BenchRow], y: impl Fn(&BenchRow) -> f64) -> Series {
    Series {
        label: label.to_string(),
        points: rows.iter().map(|r| (r.event_index as f64, y(r))).collect(),
    }
}

/// File names [`suite_charts`] reads from its directory.
pub fn suite_csv(engine: &str, query: &str) -> String {
    format!("{engine}_{query}.csv")
}

/// Update time, ground and unbound `holds_at` latency, and structure size,
/// each comparing both engines. Reads the four suite CSVs from `dir`.
pub fn suite_charts(dir: &Path) -> Result<Vec<PathBuf>, PlotError> {
    let ng = load(dir, &suite_csv("naive", "ground"))?;
    let cg = load(dir, &suite_csv("ceckd", "ground"))?;
    let nu = load(dir, &suite_csv("naive", "unbound"))?;
    let cu = load(dir, &suite_csv("ceckd", "unbound"))?;
    let charts: [(&str, &str, &str, Vec<Series>); 4] = [
        (
            "update_time.svg",
            "Update time",
            "ns per event",
            vec![series("naive", &ng, |r| r.update_ns), series("ceckd", &cg, |r| r.update_ns)],
        ),
        (
            "ground_holds_at.svg",
            "Ground holds_at",
            "ns per query",
            vec![series("naive", &ng, |r| r.query_ns), series("ceckd", &cg, |r| r.query_ns)],
        ),
        (
            "unbound_holds_at.svg",
            "Unbound holds_at",
            "ns per query",
            vec![series("naive", &nu, |r| r.query_ns), series("ceckd", &cu, |r| r.query_ns)],
        ),
        (
            "memory.svg",
            "Structure size",
            "KiB",
            vec![
                series("naive", &ng, |r| r.structure_bytes as f64 / 1024.0),
                series("ceckd", &cg, |r| r.structure_bytes as f64 / 1024.0),
            ],
        ),
    ];
    let mut out = Vec::new();
    for (file, title, y, s) in charts {
        let p = dir.join(file);
        line_chart(&p, title, y, &s)?;
        out.push(p);
    }
    Ok(out)
}
