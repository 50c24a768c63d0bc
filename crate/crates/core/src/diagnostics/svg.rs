use std::collections::BTreeMap;
use std::fmt::Write;

use super::ProjectionResult;
use crate::error::{Error, Result};

pub const DEFAULT_PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;
const LEGEND_WIDTH: f64 = 180.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Scatter plot of the first two coordinates, one circle per item colored by
/// label, with a legend in sorted label order. Colors are assigned in that
/// order, cycling through `palette`.
pub fn scatter_svg(
    result: &ProjectionResult,
    labels: &BTreeMap<String, String>,
    palette: &[&str],
    title: &str,
) -> Result<String> {
    if result.is_empty() {
        return Err(Error::Empty("projection has no points".into()));
    }
    if palette.is_empty() {
        return Err(Error::InvalidArgument("palette is empty".into()));
    }
    let mut item_labels = Vec::with_capacity(result.len());
    for id in &result.ids {
        let l = labels
            .get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("no label for item `{id}`")))?;
        item_labels.push(l.as_str());
    }
    let mut distinct: Vec<&str> = item_labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let color = |l: &str| palette[distinct.binary_search(&l).expect("label present") % palette.len()];

    let pts: Vec<(f64, f64)> = (0..result.len()).map(|i| result.point(i)).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let sx = if x1 > x0 { (WIDTH - 2.0 * MARGIN) / (x1 - x0) } else { 0.0 };
    let sy = if y1 > y0 { (HEIGHT - 2.0 * MARGIN) / (y1 - y0) } else { 0.0 };
    let px = |x: f64| if sx > 0.0 { MARGIN + (x - x0) * sx } else { WIDTH / 2.0 };
    let py = |y: f64| if sy > 0.0 { HEIGHT - MARGIN - (y - y0) * sy } else { HEIGHT / 2.0 };

    let total_width = WIDTH + LEGEND_WIDTH;
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_width:.0}" height="{HEIGHT:.0}" viewBox="0 0 {total_width:.0} {HEIGHT:.0}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(
        s,
        r#"<text x="{:.1}" y="20" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    )
    .unwrap();
    writeln!(s, r#"<g id="points">"#).unwrap();
    for (i, &(x, y)) in pts.iter().enumerate() {
        writeln!(
            s,
            r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="{}" fill-opacity="0.7"><title>{}</title></circle>"#,
            px(x),
            py(y),
            color(item_labels[i]),
            escape(&result.ids[i])
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();
    writeln!(s, r#"<g id="legend">"#).unwrap();
    for (k, l) in distinct.iter().enumerate() {
        let y = MARGIN + 20.0 * k as f64;
        writeln!(
            s,
            r#"<rect x="{:.1}" y="{:.1}" width="12" height="12" fill="{}"/><text x="{:.1}" y="{:.1}" font-family="sans-serif" font-size="12">{}</text>"#,
            WIDTH + 10.0,
            y,
            color(l),
            WIDTH + 28.0,
            y + 10.0,
            escape(l)
        )
        .unwrap();
    }
    writeln!(s, "</g>").unwrap();
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::{Method, ProjectionMeta};
    use nalgebra::DMatrix;

    fn projection(n: usize) -> ProjectionResult {
        ProjectionResult {
            method: Method::Pca,
            ids: (0..n).map(|i| format!("i{i}")).collect(),
            coordinates: DMatrix::from_fn(n, 2, |i, j| (i * (j + 1)) as f64),
            meta: ProjectionMeta::Pca { explained_variance_ratio: vec![] },
            seed: None,
        }
    }

    #[test]
    fn structure_and_determinism() {
        let r = projection(4);
        let labels: BTreeMap<String, String> = (0..4)
            .map(|i| (format!("i{i}"), if i % 2 == 0 { "Skill 8" } else { "Skill 4" }.to_string()))
            .collect();
        let a = scatter_svg(&r, &labels, &DEFAULT_PALETTE, "t").unwrap();
        assert_eq!(a.matches("<circle").count(), 4);
        let legend = &a[a.find(r#"<g id="legend">"#).unwrap()..];
        assert_eq!(legend.matches("<rect").count(), 2);
        assert!(legend.find("Skill 4").unwrap() < legend.find("Skill 8").unwrap());
        assert_eq!(a, scatter_svg(&r, &labels, &DEFAULT_PALETTE, "t").unwrap());
    }

    #[test]
    fn errors() {
        let labels = BTreeMap::new();
        assert!(scatter_svg(&projection(0), &labels, &DEFAULT_PALETTE, "").is_err());
        assert!(scatter_svg(&projection(2), &labels, &DEFAULT_PALETTE, "").is_err());
    }
}
