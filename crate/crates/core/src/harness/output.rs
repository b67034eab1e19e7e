//! CSV tables with `%.17g` numbers, and a plain SVG log-log plot.

use std::fmt::Write as _;

use crate::montecarlo::SweepTable;
use crate::symbols::SolutionField;

/// C's `printf("%.17g", x)`.
pub fn fmt_g17(x: f64) -> String {
    const P: i32 = 17;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (P - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= P {
        let m = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        strip_zeros(&format!("{:.*}", (P - 1 - exp) as usize, x)).to_string()
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Columns `x, re_u, im_u, stderr_re, stderr_im`; zero standard errors for
/// deterministic fields.
pub fn field_csv(field: &SolutionField) -> String {
    let mut out = String::from("x,re_u,im_u,stderr_re,stderr_im\n");
    for (j, (x, u)) in field.x_grid.iter().zip(&field.values).enumerate() {
        let se = field.meta.stderr.as_ref().map(|s| s[j]).unwrap_or([0.0, 0.0]);
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_g17(*x),
            fmt_g17(u.re),
            fmt_g17(u.im),
            fmt_g17(se[0]),
            fmt_g17(se[1])
        );
    }
    out
}

/// Columns `n, m, max_err, slope`; `absent` marks a missing `m` or slope.
pub fn sweep_csv(table: &SweepTable) -> String {
    let slope = table.slope.map(fmt_g17).unwrap_or_else(|| "absent".into());
    let mut out = String::from("n,m,max_err,slope\n");
    for r in &table.rows {
        let m = r.m.map(|m| m.to_string()).unwrap_or_else(|| "absent".into());
        let _ = writeln!(out, "{},{},{},{}", r.n, m, fmt_g17(r.max_err), slope);
    }
    out
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 30.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn decade_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| *v > 0.0 && v.is_finite())
        .map(f64::log10)
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return None;
    }
    let (lo, hi) = (lo.floor(), hi.ceil());
    Some(if hi > lo { (lo, hi) } else { (lo, lo + 1.0) })
}

/// Log-log plot of `max_err` against `n`, one polyline per `m`.
pub fn sweep_svg(table: &SweepTable, title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    let xr = decade_range(table.rows.iter().map(|r| r.n as f64));
    let yr = decade_range(table.rows.iter().map(|r| r.max_err));
    let (Some((x0, x1)), Some((y0, y1))) = (xr, yr) else {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">no positive errors to plot</text>"#, W / 2.0, H / 2.0);
        s.push_str("</svg>\n");
        return s;
    };
    let px = |v: f64| LEFT + (v.log10() - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |v: f64| H - BOTTOM - (v.log10() - y0) / (y1 - y0) * (H - TOP - BOTTOM);
    let _ = writeln!(
        s,
        r#"<polyline points="{LEFT},{TOP} {LEFT},{} {},{}" fill="none" stroke="black"/>"#,
        H - BOTTOM,
        W - RIGHT,
        H - BOTTOM
    );
    for d in x0 as i32..=x1 as i32 {
        let x = px(10f64.powi(d));
        let _ = writeln!(s, r#"<line x1="{x}" y1="{}" x2="{x}" y2="{}" stroke="black"/>"#, H - BOTTOM, H - BOTTOM + 6.0);
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="middle">1e{d}</text>"#, H - BOTTOM + 20.0);
    }
    for d in y0 as i32..=y1 as i32 {
        let y = py(10f64.powi(d));
        let _ = writeln!(s, r#"<line x1="{}" y1="{y}" x2="{LEFT}" y2="{y}" stroke="black"/>"#, LEFT - 6.0);
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">1e{d}</text>"#, LEFT - 10.0, y + 4.0);
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">n</text>"#, (LEFT + W - RIGHT) / 2.0, H - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">max error</text>"#,
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0
    );
    let mut groups: Vec<Option<u64>> = table.rows.iter().map(|r| r.m).collect();
    groups.dedup();
    for (g, m) in groups.iter().enumerate() {
        let color = COLORS[g % COLORS.len()];
        let pts: Vec<String> = table
            .rows
            .iter()
            .filter(|r| r.m == *m && r.max_err > 0.0 && r.max_err.is_finite())
            .map(|r| format!("{:.2},{:.2}", px(r.n as f64), py(r.max_err)))
            .collect();
        let _ = writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, pts.join(" "));
        for p in &pts {
            let (x, y) = p.split_once(',').expect("pair");
            let _ = writeln!(s, r#"<circle cx="{x}" cy="{y}" r="3" fill="{color}"/>"#);
        }
        let label = m.map(|m| format!("m = {m}")).unwrap_or_else(|| "walk".into());
        let ly = TOP + 16.0 * (g as f64 + 1.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}" fill="{color}" text-anchor="end">{label}</text>"#, W - RIGHT - 5.0);
    }
    if let Some(slope) = table.slope {
        let _ = writeln!(s, r#"<text x="{}" y="{}">slope {slope:.3}</text>"#, LEFT + 10.0, H - BOTTOM - 10.0);
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
