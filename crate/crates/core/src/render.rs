//! Deterministic SVG renderings: heatmaps (series curve over red-intensity
//! background), latent scatter plots, QM box plots (green noise vs red
//! explanation arm), and reconstruction overlays. Output depends only on
//! the input data: fixed canvas, fixed precision, no timestamps.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::explain::Explanation;
use crate::latent::{ScatterPoint, ScatterTag};
use crate::quality::{Condition, QmSummaryRow};
use crate::series::TimeSeries;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 320.0;
const MARGIN: f64 = 42.0;

const COLOR_SERIES: &str = "#111111";
const COLOR_RECON: &str = "#d62828";
const COLOR_OK: &str = "#2a9d4e";
const COLOR_DEVIATING: &str = "#e8a531";
const COLOR_OUTLIER: &str = "#d62828";
const COLOR_NOISE: &str = "#2a9d4e";
const COLOR_XAI: &str = "#d62828";

fn tag_color(tag: ScatterTag) -> &'static str {
    match tag {
        ScatterTag::Ok => COLOR_OK,
        ScatterTag::OkDeviating => COLOR_DEVIATING,
        ScatterTag::Outlier => COLOR_OUTLIER,
    }
}

/// Maps `v` from `[lo, hi]` onto `[a, b]`; a collapsed input range lands on
/// the midpoint.
fn map(v: f64, lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    if hi > lo {
        a + (v - lo) / (hi - lo) * (b - a)
    } else {
        (a + b) / 2.0
    }
}

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    (lo, hi)
}

struct Svg {
    out: String,
}

impl Svg {
    fn new(title: &str) -> Svg {
        let mut out = String::new();
        let _ = write!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n<title>{title}</title>\n\
             <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
        );
        Svg { out }
    }

    fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{fill}\"/>"
        );
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.out,
            "<line x1=\"{x1:.2}\" y1=\"{y1:.2}\" x2=\"{x2:.2}\" y2=\"{y2:.2}\" \
             stroke=\"{stroke}\" stroke-width=\"{width:.2}\"/>"
        );
    }

    fn polyline(&mut self, points: &[(f64, f64)], stroke: &str, dashed: bool) {
        let mut coords = String::new();
        for (x, y) in points {
            let _ = write!(coords, "{x:.2},{y:.2} ");
        }
        let dash = if dashed { " stroke-dasharray=\"6 4\"" } else { "" };
        let _ = writeln!(
            self.out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.2\"{dash}/>",
            coords.trim_end()
        );
    }

    fn circle(&mut self, x: f64, y: f64, r: f64, fill: &str) {
        let _ = writeln!(
            self.out,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"{r:.2}\" fill=\"{fill}\" fill-opacity=\"0.85\"/>"
        );
    }

    fn text(&mut self, x: f64, y: f64, size: f64, content: &str) {
        let _ = writeln!(
            self.out,
            "<text x=\"{x:.2}\" y=\"{y:.2}\" font-family=\"sans-serif\" font-size=\"{size:.2}\" \
             fill=\"#333333\">{content}</text>"
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn series_polyline(values: &[f64], lo: f64, hi: f64) -> Vec<(f64, f64)> {
    let n = values.len();
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let x = map(i as f64, 0.0, (n - 1).max(1) as f64, MARGIN, WIDTH - MARGIN);
            let y = map(v, lo, hi, HEIGHT - MARGIN, MARGIN);
            (x, y)
        })
        .collect()
}

/// Series curve over a red-intensity background. Intensity is the
/// explanation min-max normalized per rendering, so color is comparable
/// within one heatmap but deliberately not across methods.
pub fn render_heatmap(series: &TimeSeries, explanation: &Explanation) -> Result<String> {
    if series.values.is_empty() {
        return Err(Error::Data("cannot render an empty series".into()));
    }
    if series.values.len() != explanation.values.len() {
        return Err(Error::Dimension(format!(
            "series has {} points but explanation has {}",
            series.values.len(),
            explanation.values.len()
        )));
    }
    let title = format!(
        "{} {} heatmap for {}",
        explanation.method,
        explanation.target.label(),
        series.id
    );
    let mut svg = Svg::new(&title);
    let (elo, ehi) = span(explanation.values.iter().cloned());
    let n = series.values.len();
    let cell = (WIDTH - 2.0 * MARGIN) / n as f64;
    for (i, &e) in explanation.values.iter().enumerate() {
        let intensity = if ehi > elo { (e - elo) / (ehi - elo) } else { 0.0 };
        let channel = (255.0 - intensity * 255.0).round() as u8;
        let fill = format!("rgb(255,{channel},{channel})");
        svg.rect(MARGIN + i as f64 * cell, MARGIN, cell + 0.5, HEIGHT - 2.0 * MARGIN, &fill);
    }
    let (lo, hi) = span(series.values.iter().cloned());
    svg.polyline(&series_polyline(&series.values, lo, hi), COLOR_SERIES, false);
    svg.text(MARGIN, MARGIN - 12.0, 12.0, &title);
    Ok(svg.finish())
}

/// Original (black) and reconstructed (dashed red) curves on a shared scale.
pub fn render_reconstruction(series: &TimeSeries, reconstruction: &[f64]) -> Result<String> {
    if series.values.is_empty() {
        return Err(Error::Data("cannot render an empty series".into()));
    }
    if series.values.len() != reconstruction.len() {
        return Err(Error::Dimension(format!(
            "series has {} points but reconstruction has {}",
            series.values.len(),
            reconstruction.len()
        )));
    }
    let title = format!("reconstruction overlay for {}", series.id);
    let mut svg = Svg::new(&title);
    let (lo, hi) = span(series.values.iter().chain(reconstruction).cloned());
    svg.polyline(&series_polyline(&series.values, lo, hi), COLOR_SERIES, false);
    svg.polyline(&series_polyline(reconstruction, lo, hi), COLOR_RECON, true);
    svg.text(MARGIN, MARGIN - 12.0, 12.0, &title);
    svg.text(WIDTH - 260.0, MARGIN - 12.0, 11.0, "black: input, red dashed: reconstruction");
    Ok(svg.finish())
}

/// Latent 2D projection; green normal points, amber clustered-but-non-core
/// points, red outliers.
pub fn render_scatter(points: &[ScatterPoint]) -> Result<String> {
    if points.is_empty() {
        return Err(Error::Data("cannot render an empty scatter".into()));
    }
    let mut svg = Svg::new("latent space projection");
    let (xlo, xhi) = span(points.iter().map(|p| p.x));
    let (ylo, yhi) = span(points.iter().map(|p| p.y));
    // Draw normals first so sparse outliers stay visible on top.
    let mut ordered: Vec<&ScatterPoint> = points.iter().collect();
    ordered.sort_by_key(|p| match p.tag {
        ScatterTag::Ok => 0,
        ScatterTag::OkDeviating => 1,
        ScatterTag::Outlier => 2,
    });
    for p in ordered {
        let x = map(p.x, xlo, xhi, MARGIN, WIDTH - MARGIN);
        let y = map(p.y, ylo, yhi, HEIGHT - MARGIN, MARGIN);
        svg.circle(x, y, 3.0, tag_color(p.tag));
    }
    svg.text(MARGIN, MARGIN - 12.0, 12.0, "latent space projection");
    svg.text(
        WIDTH - 340.0,
        MARGIN - 12.0,
        11.0,
        "green: ok, amber: ok (non-core), red: outlier",
    );
    Ok(svg.finish())
}

/// QM box plot: one green (noise) and one red (explanation) box per
/// method and class stratum; whiskers reach the Tukey fences.
pub fn render_qm_boxplot(summary: &[QmSummaryRow]) -> Result<String> {
    let populated: Vec<&QmSummaryRow> = summary.iter().filter(|r| r.stats.is_some()).collect();
    if populated.is_empty() {
        return Err(Error::Data("no populated strata to render".into()));
    }
    let mut svg = Svg::new("perturbation quality distances");
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in &populated {
        let s = row.stats.as_ref().expect("filtered to populated rows");
        lo = lo.min(s.lower_fence);
        hi = hi.max(s.upper_fence);
    }
    let slot = (WIDTH - 2.0 * MARGIN) / populated.len() as f64;
    let box_w = (slot * 0.5).min(46.0);
    let y_of = |v: f64| map(v, lo, hi, HEIGHT - MARGIN, MARGIN);
    for (i, row) in populated.iter().enumerate() {
        let s = row.stats.as_ref().expect("filtered to populated rows");
        let cx = MARGIN + slot * (i as f64 + 0.5);
        let color = match row.condition {
            Condition::Noise => COLOR_NOISE,
            Condition::Xai => COLOR_XAI,
        };
        svg.line(cx, y_of(s.lower_fence), cx, y_of(s.q1), color, 1.0);
        svg.line(cx, y_of(s.q3), cx, y_of(s.upper_fence), color, 1.0);
        svg.rect(cx - box_w / 2.0, y_of(s.q3), box_w, (y_of(s.q1) - y_of(s.q3)).max(0.5), color);
        svg.line(cx - box_w / 2.0, y_of(s.median), cx + box_w / 2.0, y_of(s.median), "#ffffff", 1.5);
        let label = format!(
            "{} {} {} (n={})",
            row.method.as_str(),
            if row.label.is_nok() { "NOK" } else { "OK" },
            row.condition.as_str(),
            row.count
        );
        svg.text(cx - box_w / 2.0 - 8.0, HEIGHT - MARGIN + 16.0, 9.0, &label);
    }
    svg.text(MARGIN, MARGIN - 12.0, 12.0, "normalized latent distances: noise (green) vs explanation-guided (red)");
    Ok(svg.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explain::{Method, Target};
    use crate::quality::{IqrStats, QmSummaryRow};
    use crate::series::Label;

    fn series() -> TimeSeries {
        TimeSeries::new("demo", vec![0.0, 1.0, 0.5, -0.5])
    }

    #[test]
    fn heatmap_draws_one_cell_per_point_and_is_deterministic() {
        let e = Explanation::new("demo", Method::Gradcam, Target::Combined, vec![0.0, 0.2, 1.0, 0.4])
            .unwrap();
        let a = render_heatmap(&series(), &e).unwrap();
        let b = render_heatmap(&series(), &e).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.matches("<rect").count(), 4 + 1);
        // Max importance renders pure red, min pure white.
        assert!(a.contains("rgb(255,0,0)"));
        assert!(a.contains("rgb(255,255,255)"));
        assert!(a.ends_with("</svg>\n"));
    }

    #[test]
    fn constant_explanation_renders_an_all_white_background() {
        let e = Explanation::new("demo", Method::Lime, Target::Combined, vec![0.7; 4]).unwrap();
        let svg = render_heatmap(&series(), &e).unwrap();
        assert!(!svg.contains("rgb(255,0,0)"));
        assert_eq!(svg.matches("rgb(255,255,255)").count(), 4);
    }

    #[test]
    fn mismatched_lengths_are_rejected() {
        let e = Explanation::new("demo", Method::Gradcam, Target::Combined, vec![1.0]).unwrap();
        assert!(render_heatmap(&series(), &e).is_err());
        assert!(render_reconstruction(&series(), &[0.0; 3]).is_err());
    }

    #[test]
    fn reconstruction_overlay_has_two_curves() {
        let svg = render_reconstruction(&series(), &[0.1, 0.9, 0.4, -0.4]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("stroke-dasharray"));
    }

    #[test]
    fn scatter_colors_follow_tags() {
        let points = vec![
            ScatterPoint { id: "a".into(), x: 0.0, y: 0.0, tag: ScatterTag::Ok },
            ScatterPoint { id: "b".into(), x: 1.0, y: 1.0, tag: ScatterTag::Outlier },
            ScatterPoint { id: "c".into(), x: 0.5, y: 0.2, tag: ScatterTag::OkDeviating },
        ];
        let svg = render_scatter(&points).unwrap();
        assert!(svg.contains(COLOR_OK));
        assert!(svg.contains(COLOR_OUTLIER));
        assert!(svg.contains(COLOR_DEVIATING));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(render_scatter(&[]).is_err());
    }

    #[test]
    fn boxplot_skips_empty_strata() {
        let stats = IqrStats { q1: 0.2, median: 0.4, q3: 0.6, lower_fence: -0.4, upper_fence: 1.2 };
        let rows = vec![
            QmSummaryRow {
                method: Method::Gradcam,
                label: Label::Nok,
                condition: Condition::Noise,
                count: 10,
                stats: Some(stats),
            },
            QmSummaryRow {
                method: Method::Gradcam,
                label: Label::Ok,
                condition: Condition::Xai,
                count: 0,
                stats: None,
            },
        ];
        let svg = render_qm_boxplot(&rows).unwrap();
        // One populated stratum: exactly one box rect plus the canvas.
        assert_eq!(svg.matches("<rect").count(), 2);
        assert!(svg.contains("n=10"));
        assert!(render_qm_boxplot(&rows[1..]).is_err());
    }
}
