use std::fmt::Write as _;

use super::run::ResultRow;

/// One curve: `(p, P_L, ci_low, ci_high)` points.
#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64, f64, f64)>,
}

impl Series {
    pub fn from_rows(label: &str, rows: &[ResultRow]) -> Self {
        Series {
            label: label.into(),
            points: rows.iter().map(|r| (r.p, r.p_l, r.ci_low, r.ci_high)).collect(),
        }
    }
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 70.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn log_range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for v in vals.filter(|v| *v > 0.0 && v.is_finite()) {
        lo = lo.min(v.log10());
        hi = hi.max(v.log10());
    }
    if !lo.is_finite() {
        return (-6.0, 0.0);
    }
    (lo.floor(), hi.ceil().max(lo.floor() + 1.0))
}

/// Static log-log plot of `P_L` against `p` with interval whiskers. Zero
/// values are drawn on the bottom axis.
pub fn plot_svg(title: &str, series: &[Series]) -> String {
    let (x0, x1) = log_range(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y0, y1) = log_range(
        series
            .iter()
            .flat_map(|s| s.points.iter().flat_map(|p| [p.1, p.2, p.3])),
    );
    let sx = |x: f64| MARGIN + (x.max(10f64.powf(x0)).log10() - x0) / (x1 - x0) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y.max(10f64.powf(y0)).log10() - y0) / (y1 - y0) * (H - 2.0 * MARGIN);

    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title)).unwrap();
    writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    )
    .unwrap();
    for e in x0 as i32..=x1 as i32 {
        let x = sx(10f64.powi(e));
        writeln!(
            s,
            r##"<line x1="{x:.1}" y1="{}" x2="{x:.1}" y2="{}" stroke="#ddd"/><text x="{x:.1}" y="{}" text-anchor="middle">1e{e}</text>"##,
            MARGIN,
            H - MARGIN,
            H - MARGIN + 18.0
        )
        .unwrap();
    }
    for e in y0 as i32..=y1 as i32 {
        let y = sy(10f64.powi(e));
        writeln!(
            s,
            r##"<line x1="{MARGIN}" y1="{y:.1}" x2="{}" y2="{y:.1}" stroke="#ddd"/><text x="{}" y="{:.1}" text-anchor="end">1e{e}</text>"##,
            W - MARGIN,
            MARGIN - 6.0,
            y + 4.0
        )
        .unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">p</text>"#, W / 2.0, H - 20.0).unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{}" text-anchor="middle" transform="rotate(-90 18 {})">P_L</text>"#,
        H / 2.0,
        H / 2.0
    )
    .unwrap();

    for (i, ser) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        let mut pts: Vec<_> = ser.points.clone();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts.iter().map(|p| format!("{:.1},{:.1}", sx(p.0), sy(p.1))).collect();
        writeln!(s, r#"<polyline points="{}" fill="none" stroke="{c}"/>"#, path.join(" ")).unwrap();
        for p in &pts {
            let x = sx(p.0);
            writeln!(
                s,
                r#"<line x1="{x:.1}" y1="{:.1}" x2="{x:.1}" y2="{:.1}" stroke="{c}"/><circle cx="{x:.1}" cy="{:.1}" r="3" fill="{c}"/>"#,
                sy(p.2),
                sy(p.3),
                sy(p.1)
            )
            .unwrap();
        }
        let ly = MARGIN + 16.0 + 16.0 * i as f64;
        writeln!(
            s,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{c}"/><text x="{}" y="{}">{}</text>"#,
            MARGIN + 10.0,
            ly - 9.0,
            MARGIN + 26.0,
            ly,
            escape(&ser.label)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
