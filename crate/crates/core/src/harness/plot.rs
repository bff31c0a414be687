use super::experiment::ResultRow;
use std::fmt::Write as _;

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Minimal SVG line chart with a log₂ x axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LineChart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl LineChart {
    pub fn to_svg(&self) -> String {
        let (w, h, left, right, top, bottom) = (560.0, 380.0, 64.0, 140.0, 36.0, 48.0);
        let pts: Vec<(f64, f64)> = self.series.iter().flat_map(|s| s.points.iter().copied()).collect();
        let lx = |x: f64| x.max(f64::MIN_POSITIVE).log2();
        let (mut x0, mut x1) = pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), p| (a.min(lx(p.0)), b.max(lx(p.0))));
        let y1 = pts.iter().map(|p| p.1).fold(0.0, f64::max) * 1.1;
        let y1 = if y1 > 0.0 { y1 } else { 1.0 };
        if !x0.is_finite() || x1 <= x0 {
            x0 = 0.0;
            x1 = 1.0;
        }
        let px = |x: f64| left + (lx(x) - x0) / (x1 - x0) * (w - left - right);
        let py = |y: f64| h - bottom - y / y1 * (h - top - bottom);
        let mut s = String::new();
        writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#).unwrap();
        writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
        writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, (w - right + left) / 2.0, escape(&self.title)).unwrap();
        let (ax0, ax1, ay0, ay1) = (left, w - right, h - bottom, top);
        writeln!(s, r#"<path d="M{ax0},{ay1} L{ax0},{ay0} L{ax1},{ay0}" stroke="black" fill="none"/>"#).unwrap();
        for k in x0.floor() as i32..=x1.ceil() as i32 {
            let x = 2f64.powi(k);
            if lx(x) < x0 - 1e-9 || lx(x) > x1 + 1e-9 {
                continue;
            }
            writeln!(s, r#"<text x="{:.1}" y="{}" text-anchor="middle">{x}</text>"#, px(x), ay0 + 16.0).unwrap();
        }
        for k in 0..=4 {
            let y = y1 * k as f64 / 4.0;
            writeln!(s, r##"<line x1="{ax0}" x2="{ax1}" y1="{0:.1}" y2="{0:.1}" stroke="#ddd"/><text x="{1}" y="{2:.1}" text-anchor="end">{3:.1}</text>"##, py(y), ax0 - 6.0, py(y) + 4.0, y).unwrap();
        }
        writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (ax0 + ax1) / 2.0, h - 10.0, escape(&self.x_label)).unwrap();
        writeln!(s, r#"<text transform="translate(16,{}) rotate(-90)" text-anchor="middle">{}</text>"#, (ay0 + ay1) / 2.0, escape(&self.y_label)).unwrap();
        for (i, series) in self.series.iter().enumerate() {
            let c = COLORS[i % COLORS.len()];
            let d: Vec<String> = series.points.iter().map(|&(x, y)| format!("{:.1},{:.1}", px(x), py(y))).collect();
            if !d.is_empty() {
                writeln!(s, r#"<polyline points="{}" stroke="{c}" stroke-width="2" fill="none"/>"#, d.join(" ")).unwrap();
            }
            for &(x, y) in &series.points {
                writeln!(s, r#"<circle cx="{:.1}" cy="{:.1}" r="3" fill="{c}"/>"#, px(x), py(y)).unwrap();
            }
            let ly = top + 16.0 * (i as f64 + 1.0);
            writeln!(s, r#"<line x1="{0}" x2="{1}" y1="{ly}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{2}" y="{3}">{4}</text>"#, ax1 + 12.0, ax1 + 32.0, ax1 + 38.0, ly + 4.0, escape(&series.label)).unwrap();
        }
        s.push_str("</svg>\n");
        s
    }
}

/// κ₂ and iterations against H/h at N = 16 and against N at H/h = 4, one
/// series per (family, primal kind). Rows without κ₂ only enter the
/// iteration charts.
pub fn table_plots(rows: &[ResultRow]) -> Vec<(String, LineChart)> {
    let mut keys: Vec<(String, String)> = rows.iter().map(|r| (r.family.clone(), r.primal.clone())).collect();
    keys.sort();
    keys.dedup();
    let chart = |title: &str, x: &str, y: &str, pick: &dyn Fn(&ResultRow) -> Option<(f64, f64)>| LineChart {
        title: title.into(),
        x_label: x.into(),
        y_label: y.into(),
        series: keys
            .iter()
            .map(|(f, p)| Series {
                label: format!("{f} {p}"),
                points: rows
                    .iter()
                    .filter(|r| &r.family == f && &r.primal == p && r.converged)
                    .filter_map(pick)
                    .collect(),
            })
            .filter(|s| !s.points.is_empty())
            .collect(),
    };
    let ratio = |r: &ResultRow| (r.inv_h / r.inv_big_h) as f64;
    let subdomains = |r: &ResultRow| (r.inv_big_h * r.inv_big_h) as f64;
    let fixed_n = |r: &ResultRow| r.inv_big_h == 4;
    let fixed_ratio = |r: &ResultRow| r.inv_h == 4 * r.inv_big_h;
    let mut out = vec![
        ("kappa_vs_ratio", chart("κ₂, N = 16", "H/h", "κ₂", &|r| (fixed_n(r)).then_some((ratio(r), r.kappa?)))),
        ("kappa_vs_n", chart("κ₂, H/h = 4", "N", "κ₂", &|r| (fixed_ratio(r)).then_some((subdomains(r), r.kappa?)))),
        ("iterations_vs_ratio", chart("iterations, N = 16", "H/h", "iterations", &|r| fixed_n(r).then(|| (ratio(r), r.iterations as f64)))),
        ("iterations_vs_n", chart("iterations, H/h = 4", "N", "iterations", &|r| fixed_ratio(r).then(|| (subdomains(r), r.iterations as f64)))),
    ];
    out.retain(|(_, c)| !c.series.is_empty());
    out.into_iter().map(|(n, c)| (n.to_string(), c)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed() {
        let chart = LineChart {
            title: "a < b".into(),
            x_label: "H/h".into(),
            y_label: "κ₂".into(),
            series: vec![Series {
                label: "QUAD v+f".into(),
                points: vec![(4.0, 2.8), (8.0, 3.7), (16.0, 4.8)],
            }],
        };
        let svg = chart.to_svg();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("a &lt; b") && svg.contains("<polyline"));
        assert_eq!(svg.matches("<circle").count(), 3);
    }
}
