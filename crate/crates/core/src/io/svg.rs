//! Hand-written SVG 1.1 line charts.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::path::PathResult;
use crate::penalty::{PenaltyKind, PenaltySpec};

pub const DEFAULT_T_RANGE: (f64, f64) = (-4.0, 4.0);
pub const DEFAULT_CURVE_POINTS: usize = 401;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

/// Sampled values `J(|t|)` of one penalty.
#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyCurve {
    pub label: String,
    pub t: Vec<f64>,
    pub value: Vec<f64>,
}

/// The eight penalties at `λ = 1`, `τ = 3`, `γ = 0.5`.
pub fn figure_penalties() -> Vec<PenaltySpec> {
    PenaltyKind::ALL
        .iter()
        .map(|&k| PenaltySpec::new(k, 1.0, 3.0, 0.5).expect("parameters are admissible for every kind"))
        .collect()
}

fn check_range(range: (f64, f64)) -> Result<()> {
    if !(range.0.is_finite() && range.1.is_finite() && range.0 < range.1) {
        return Err(Error::InvalidConfig(format!(
            "invalid plotting range [{}, {}]",
            range.0, range.1
        )));
    }
    Ok(())
}

/// Samples each penalty at `n_points` equispaced values of `t` in `range`.
pub fn penalty_curves(specs: &[PenaltySpec], range: (f64, f64), n_points: usize) -> Result<Vec<PenaltyCurve>> {
    check_range(range)?;
    if specs.is_empty() {
        return Err(Error::InvalidConfig("no penalties to plot".into()));
    }
    if n_points < 2 {
        return Err(Error::InvalidConfig("at least two points per curve are required".into()));
    }
    let step = (range.1 - range.0) / (n_points - 1) as f64;
    let t: Vec<f64> = (0..n_points).map(|i| range.0 + step * i as f64).collect();
    Ok(specs
        .iter()
        .map(|s| PenaltyCurve {
            label: s.kind().to_string(),
            value: t.iter().map(|v| s.value(v.abs())).collect(),
            t: t.clone(),
        })
        .collect())
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

/// Linear map from data coordinates to the plotting area.
struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let y = if y.1 > y.0 {
            let pad = 0.05 * (y.1 - y.0);
            (y.0 - pad, y.1 + pad)
        } else {
            (y.0 - 1.0, y.0 + 1.0)
        };
        Frame { x, y }
    }

    fn px(&self, v: f64) -> f64 {
        LEFT + (v - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, v: f64) -> f64 {
        HEIGHT - BOTTOM - (v - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="22" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        (WIDTH - RIGHT + LEFT) / 2.0,
        escape(title)
    );
}

fn axes(out: &mut String, f: &Frame, x_label: &str, x_ticks: &[(f64, String)]) {
    let (x0, x1) = (f.px(f.x.0), f.px(f.x.1));
    let (y0, y1) = (f.py(f.y.0), f.py(f.y.1));
    let _ = writeln!(out, r#"<g class="axes" stroke="black" stroke-width="1" fill="none">"#);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/>"#);
    let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x0:.2}" y2="{y1:.2}"/>"#);
    if f.y.0 < 0.0 && f.y.1 > 0.0 {
        let z = f.py(0.0);
        let _ = writeln!(
            out,
            r#"<line class="zero" x1="{x0:.2}" y1="{z:.2}" x2="{x1:.2}" y2="{z:.2}" stroke="gray" stroke-dasharray="3,3"/>"#
        );
    }
    let _ = writeln!(out, "</g>");
    let _ = writeln!(out, r#"<g font-family="sans-serif" font-size="11">"#);
    for (v, label) in x_ticks {
        let _ = writeln!(
            out,
            r#"<text class="x-tick" x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            f.px(*v),
            y0 + 16.0,
            escape(label)
        );
    }
    for v in [f.y.0, 0.5 * (f.y.0 + f.y.1), f.y.1] {
        let _ = writeln!(
            out,
            r#"<text class="y-tick" x="{:.2}" y="{:.2}" text-anchor="end">{:.3}</text>"#,
            x0 - 6.0,
            f.py(v) + 4.0,
            v
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        0.5 * (x0 + x1),
        HEIGHT - 12.0,
        escape(x_label)
    );
    let _ = writeln!(out, "</g>");
}

fn polyline(out: &mut String, f: &Frame, xs: &[f64], ys: &[f64], color: &str, attrs: &str) {
    let _ = write!(out, r#"<polyline {attrs} fill="none" stroke="{color}" stroke-width="1.5" points=""#);
    for (i, (x, y)) in xs.iter().zip(ys).enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{:.3},{:.3}", f.px(*x), f.py(*y));
    }
    let _ = writeln!(out, r#""/>"#);
}

fn legend(out: &mut String, labels: &[String]) {
    let x = WIDTH - RIGHT + 15.0;
    let _ = writeln!(out, r#"<g class="legend" font-family="sans-serif" font-size="11">"#);
    for (i, label) in labels.iter().enumerate() {
        let y = TOP + 10.0 + 16.0 * i as f64;
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            out,
            r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"/>"#,
            x + 20.0
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}">{}</text>"#, x + 26.0, y + 4.0, escape(label));
    }
    let _ = writeln!(out, "</g>");
}

/// Penalty curves `J(|t|)` over `range`, one polyline per penalty with a
/// legend.
pub fn plot_penalties(specs: &[PenaltySpec], range: (f64, f64)) -> Result<String> {
    let curves = penalty_curves(specs, range, DEFAULT_CURVE_POINTS)?;
    let top = curves
        .iter()
        .flat_map(|c| c.value.iter())
        .fold(0.0f64, |a, &b| a.max(b));
    let frame = Frame::new(range, (0.0, top));
    let mut out = String::new();
    header(&mut out, "Penalty functions");
    let ticks: Vec<(f64, String)> = [range.0, 0.5 * (range.0 + range.1), range.1]
        .iter()
        .map(|&v| (v, format!("{v}")))
        .collect();
    axes(&mut out, &frame, "t", &ticks);
    for (i, c) in curves.iter().enumerate() {
        let attrs = format!(r#"class="curve" data-penalty="{}""#, escape(&c.label));
        polyline(&mut out, &frame, &c.t, &c.value, COLORS[i % COLORS.len()], &attrs);
    }
    legend(&mut out, &curves.iter().map(|c| c.label.clone()).collect::<Vec<_>>());
    out.push_str("</svg>\n");
    Ok(out)
}

/// Coefficient trajectories against `log λ`, largest λ on the left, with
/// the number of nonzero coefficients printed along the top.
pub fn plot_path(result: &PathResult) -> String {
    let lambda = result.grid.values();
    let logs: Vec<f64> = lambda.iter().map(|l| l.ln()).collect();
    let (first, last) = (logs[0], logs[logs.len() - 1]);
    // a single grid value still needs a non-degenerate axis
    let x_range = if first > last { (-first, -last) } else { (-first - 1.0, -first + 1.0) };
    let (lo, hi) = result
        .coefficients
        .iter()
        .fold((0.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let frame = Frame::new(x_range, (lo, hi));
    let xs: Vec<f64> = logs.iter().map(|l| -l).collect();

    let mut out = String::new();
    header(&mut out, "Solution path");
    let ticks = vec![
        (xs[0], format!("{:.4}", lambda[0])),
        (xs[xs.len() - 1], format!("{:.4}", lambda[lambda.len() - 1])),
    ];
    axes(&mut out, &frame, "lambda (log scale, decreasing)", &ticks);
    let _ = writeln!(
        out,
        r#"<g class="lambda-axis" data-lambda-max="{}" data-lambda-min="{}"/>"#,
        lambda[0],
        lambda[lambda.len() - 1]
    );

    let _ = writeln!(out, r#"<g class="df" font-family="sans-serif" font-size="10" fill="dimgray">"#);
    let every = (lambda.len() / 8).max(1);
    for k in (0..lambda.len()).step_by(every) {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" data-lambda="{}">{}</text>"#,
            frame.px(xs[k]),
            TOP - 4.0,
            lambda[k],
            result.df[k]
        );
    }
    let _ = writeln!(out, "</g>");

    for (j, name) in result.variables.iter().enumerate() {
        let ys: Vec<f64> = result.coefficients.row(j).to_vec();
        let attrs = format!(r#"class="path" data-variable="{}""#, escape(name));
        polyline(&mut out, &frame, &xs, &ys, COLORS[j % COLORS.len()], &attrs);
    }
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loss::Family;
    use crate::path::{fit_path, ProblemConfig};
    use crate::penalty::Penalty;
    use crate::testutil::random_data;
    use approx::assert_abs_diff_eq;

    fn curve<'a>(curves: &'a [PenaltyCurve], label: &str) -> &'a PenaltyCurve {
        curves.iter().find(|c| c.label == label).unwrap()
    }

    #[test]
    fn figure_defaults() {
        let curves = penalty_curves(&figure_penalties(), DEFAULT_T_RANGE, DEFAULT_CURVE_POINTS).unwrap();
        assert_eq!(curves.len(), 8);
        let origin = curves[0].t.iter().position(|&t| t == 0.0).unwrap();
        for c in &curves {
            assert_eq!(c.value[origin], 0.0, "{}", c.label);
        }
        let lasso = curve(&curves, "lasso");
        for (t, v) in lasso.t.iter().zip(&lasso.value) {
            assert_abs_diff_eq!(*v, t.abs(), epsilon = 1e-15);
        }
        for name in ["mcp", "tlp"] {
            let c = curve(&curves, name);
            let expected = if name == "mcp" { 1.5 } else { 3.0 };
            for (t, v) in c.t.iter().zip(&c.value) {
                if t.abs() >= 3.0 {
                    assert_abs_diff_eq!(*v, expected, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn penalty_plot_is_well_formed() {
        let svg = plot_penalties(&figure_penalties(), DEFAULT_T_RANGE).unwrap();
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let curves = doc.descendants().filter(|n| n.attribute("class") == Some("curve")).count();
        assert_eq!(curves, 8);
        assert!(plot_penalties(&figure_penalties(), (1.0, 1.0)).is_err());
        assert!(plot_penalties(&figure_penalties(), (0.0, f64::NAN)).is_err());
        assert!(plot_penalties(&[], DEFAULT_T_RANGE).is_err());
    }

    fn points(node: roxmltree::Node) -> Vec<(f64, f64)> {
        node.attribute("points")
            .unwrap()
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect()
    }

    #[test]
    fn path_plot_structure() {
        let data = random_data(Family::Gaussian, 40, 6, 1)
            .with_names((1..=6).map(|j| format!("x<{j}>")).collect())
            .unwrap();
        let cfg = ProblemConfig {
            n_lambda: 20,
            ..ProblemConfig::default()
        };
        let path = fit_path(&Penalty::with_defaults(PenaltyKind::Mcp), &data, &cfg).unwrap();
        let svg = plot_path(&path);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let lines: Vec<_> = doc.descendants().filter(|n| n.attribute("class") == Some("path")).collect();
        assert_eq!(lines.len(), 6);
        assert_eq!(lines[0].attribute("data-variable"), Some("x<1>"));
        let axis = doc.descendants().find(|n| n.attribute("class") == Some("lambda-axis")).unwrap();
        assert_eq!(axis.attribute("data-lambda-max").unwrap().parse::<f64>().unwrap(), path.grid.lambda_max());
        assert_eq!(axis.attribute("data-lambda-min").unwrap().parse::<f64>().unwrap(), path.grid.lambda_min());
        // largest λ on the left
        let pts = points(lines[0]);
        assert!(pts.windows(2).all(|w| w[1].0 > w[0].0));
    }

    #[test]
    fn zero_path_lies_on_the_axis() {
        let data = random_data(Family::Gaussian, 20, 3, 2);
        let cfg = ProblemConfig {
            n_lambda: 5,
            lambda_ratio: Some(0.99),
            ..ProblemConfig::default()
        };
        let mut path = fit_path(&Penalty::with_defaults(PenaltyKind::Lasso), &data, &cfg).unwrap();
        path.coefficients.fill(0.0);
        let svg = plot_path(&path);
        let doc = roxmltree::Document::parse(&svg).unwrap();
        let zero = doc.descendants().find(|n| n.attribute("class") == Some("zero")).unwrap();
        let y0: f64 = zero.attribute("y1").unwrap().parse().unwrap();
        for line in doc.descendants().filter(|n| n.attribute("class") == Some("path")) {
            assert!(points(line).iter().all(|&(_, y)| (y - y0).abs() < 1e-2));
        }
    }
}
