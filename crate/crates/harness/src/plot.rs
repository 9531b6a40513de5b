//! Optional static chart renderer. Emission is data-file-first (CSV); when
//! asked, the harness also renders simple SVG images: a prediction line
//! chart per cell and one error-reduction bar chart per run.

use std::fmt::Write as _;
use std::path::Path;

use anyhow::Result;

use crate::experiment::CellOutput;
use crate::report::MetricsReport;
use crate::synthetic::sanitize;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 50.0;

struct Frame {
    svg: String,
}

impl Frame {
    fn new(title: &str) -> Frame {
        let mut svg = String::new();
        write!(
            &mut svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}"><rect width="100%" height="100%" fill="white"/><text x="{}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{title}</text>"#,
            WIDTH / 2.0
        )
        .expect("writing to string");
        Frame { svg }
    }

    fn finish(mut self) -> String {
        self.svg.push_str("</svg>");
        self.svg
    }
}

fn polyline(points: &[(f64, f64)], color: &str) -> String {
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    format!(
        r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
        coords.join(" ")
    )
}

/// Line chart of true vs predicted first-step closes over the test range.
pub fn render_predictions(cell: &CellOutput, out_dir: &Path) -> Result<()> {
    let n = cell.y_true.nrows();
    if n == 0 {
        return Ok(());
    }
    let series: Vec<(&str, &str, Vec<f64>)> = {
        let mut s = vec![
            (
                "true",
                "#222222",
                cell.y_true.column(0).to_vec(),
            ),
            ("rc_cw", "#d62728", cell.rc_cw.y_pred.column(0).to_vec()),
            ("rc", "#1f77b4", cell.rc.y_pred.column(0).to_vec()),
        ];
        if let Some(b) = &cell.baseline {
            s.push(("best_ml", "#2ca02c", b.y_pred.column(0).to_vec()));
        }
        s
    };

    let lo = series
        .iter()
        .flat_map(|(_, _, v)| v.iter().cloned())
        .fold(f64::INFINITY, f64::min);
    let hi = series
        .iter()
        .flat_map(|(_, _, v)| v.iter().cloned())
        .fold(f64::NEG_INFINITY, f64::max);
    let span = (hi - lo).max(1e-12);

    let mut frame = Frame::new(&format!(
        "{} h={} test predictions (step 1)",
        cell.ticker, cell.horizon
    ));
    let x_of = |i: usize| MARGIN + (WIDTH - 2.0 * MARGIN) * i as f64 / (n.max(2) - 1) as f64;
    let y_of = |v: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * (v - lo) / span;
    for (li, (name, color, values)) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = values
            .iter()
            .enumerate()
            .map(|(i, &v)| (x_of(i), y_of(v)))
            .collect();
        frame.svg.push_str(&polyline(&pts, color));
        write!(
            &mut frame.svg,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" fill="{color}">{name}</text>"#,
            WIDTH - MARGIN + 4.0,
            MARGIN + 16.0 * li as f64
        )
        .expect("writing to string");
    }
    let path = out_dir.join(format!(
        "plot_predictions_{}_h{}.svg",
        sanitize(&cell.ticker),
        cell.horizon
    ));
    std::fs::write(path, frame.finish())?;
    Ok(())
}

/// Grouped bar chart of error reduction per ticker and horizon.
pub fn render_error_reduction(
    report: &MetricsReport,
    horizons: &[usize],
    out_dir: &Path,
) -> Result<()> {
    let mut tickers: Vec<String> = Vec::new();
    for row in &report.er_rows {
        if !tickers.contains(&row.ticker) {
            tickers.push(row.ticker.clone());
        }
    }
    if tickers.is_empty() {
        return Ok(());
    }
    let colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"];
    let mut frame = Frame::new("Error reduction of weighted RC vs best baseline");
    let group_w = (WIDTH - 2.0 * MARGIN) / tickers.len() as f64;
    let bar_w = group_w / (horizons.len() as f64 + 1.0);
    let zero_y = HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * 0.5;
    // Vertical scale: ER in [-1, 1] mapped across the plot area.
    let y_of = |er: f64| zero_y - er.clamp(-1.0, 1.0) * (HEIGHT - 2.0 * MARGIN) * 0.5;
    write!(
        &mut frame.svg,
        r##"<line x1="{MARGIN}" y1="{zero_y}" x2="{}" y2="{zero_y}" stroke="#888888"/>"##,
        WIDTH - MARGIN
    )
    .expect("writing to string");

    for (ti, ticker) in tickers.iter().enumerate() {
        for (hi, &h) in horizons.iter().enumerate() {
            let er = report
                .er_rows
                .iter()
                .find(|r| &r.ticker == ticker && r.horizon == h)
                .and_then(|r| r.er);
            if let Some(er) = er {
                let x = MARGIN + group_w * ti as f64 + bar_w * hi as f64;
                let y = y_of(er.max(0.0));
                let height = (y_of(0.0) - y_of(er)).abs();
                write!(
                    &mut frame.svg,
                    r#"<rect x="{x:.2}" y="{:.2}" width="{:.2}" height="{height:.2}" fill="{}"/>"#,
                    y.min(zero_y),
                    bar_w * 0.9,
                    colors[hi % colors.len()]
                )
                .expect("writing to string");
            }
        }
        write!(
            &mut frame.svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">{ticker}</text>"#,
            MARGIN + group_w * (ti as f64 + 0.5),
            HEIGHT - MARGIN + 24.0
        )
        .expect("writing to string");
    }
    std::fs::write(out_dir.join("plot_error_reduction.svg"), frame.finish())?;
    Ok(())
}
