//! CSV → SVG rendering. Every picture is a pure function of one CSV file.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

const SIZE: f64 = 400.0;
const CENTRE: f64 = 200.0;
const RADIUS: f64 = 150.0;

#[derive(Debug)]
pub struct RenderError(pub String);

impl std::fmt::Display for RenderError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

type Rows = Vec<Vec<f64>>;

fn parse(text: &str) -> Result<(String, Rows), RenderError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| RenderError("empty CSV".into()))?.trim().to_string();
    let width = header.split(',').count();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let row: Vec<f64> = line
            .split(',')
            .map(|c| c.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| RenderError(format!("row {}: {e}", i + 2)))?;
        if row.len() != width {
            return Err(RenderError(format!("row {} has {} fields, header has {width}", i + 2, row.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

fn open(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="10" y="20" font-family="sans-serif" font-size="12">{title}</text>"#).unwrap();
    s
}

fn polar(r: f64, phi: f64) -> (f64, f64) {
    (CENTRE + r * phi.cos(), CENTRE - r * phi.sin())
}

/// Dispatches on the CSV header.
pub fn render(text: &str) -> Result<String, RenderError> {
    let (header, rows) = parse(text)?;
    match header.as_str() {
        "arc_start,arc_end" => Ok(angle_set(&rows)),
        "phi,kappa,dkappa_dphi,residual" => Ok(curve(&rows)),
        "x1,x2,abs" | "x1,x2,re,im" => field(&rows),
        other => Err(RenderError(format!("no renderer for header {other:?}"))),
    }
}

fn angle_set(rows: &Rows) -> String {
    let measure: f64 = rows.iter().map(|r| r[1] - r[0]).sum();
    let mut s = open(&format!("angle set: {} arcs, measure {:.6}", rows.len(), measure));
    writeln!(
        s,
        r##"<circle cx="{CENTRE}" cy="{CENTRE}" r="{RADIUS}" fill="none" stroke="#d62728" stroke-width="1"/>"##
    )
    .unwrap();
    for r in rows {
        // Arcs longer than π are split so each SVG arc command is unambiguous.
        let pieces = ((r[1] - r[0]) / PI).ceil().max(1.0) as usize;
        let step = (r[1] - r[0]) / pieces as f64;
        for i in 0..pieces {
            let a = r[0] + i as f64 * step;
            let (x0, y0) = polar(RADIUS, a);
            let (x1, y1) = polar(RADIUS, a + step);
            writeln!(
                s,
                r#"<path d="M {x0:.3} {y0:.3} A {RADIUS} {RADIUS} 0 0 0 {x1:.3} {y1:.3}" fill="none" stroke="black" stroke-width="4"/>"#
            )
            .unwrap();
        }
    }
    s.push_str("</svg>\n");
    s
}

fn curve(rows: &Rows) -> String {
    if rows.is_empty() {
        let mut s = open("isoenergetic curve: no samples");
        s.push_str("</svg>\n");
        return s;
    }
    let mean = rows.iter().map(|r| r[1]).sum::<f64>() / rows.len() as f64;
    let spread = rows.iter().map(|r| (r[1] - mean).abs()).fold(0.0, f64::max);
    // Radial deviations are exaggerated so the largest one spans 10% of the radius.
    let gain = if spread > 0.0 { (0.1 * mean / spread).max(1.0) } else { 1.0 };
    let mut s = open(&format!(
        "isoenergetic curve: {} samples, mean radius {:.6}, deviation x{:.3e}",
        rows.len(),
        mean,
        gain
    ));
    writeln!(
        s,
        r##"<circle cx="{CENTRE}" cy="{CENTRE}" r="{RADIUS}" fill="none" stroke="#cccccc" stroke-width="1"/>"##
    )
    .unwrap();
    let scale = RADIUS / mean;
    for r in rows {
        let rad = (mean + (r[1] - mean) * gain) * scale;
        let (x, y) = polar(rad, r[0].rem_euclid(TAU));
        writeln!(s, r#"<circle cx="{x:.3}" cy="{y:.3}" r="1.2" fill="black"/>"#).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn field(rows: &Rows) -> Result<String, RenderError> {
    if rows.is_empty() {
        return Err(RenderError("empty field".into()));
    }
    let modulus = |r: &Vec<f64>| if r.len() == 3 { r[2] } else { r[2].hypot(r[3]) };
    let y0 = rows[0][1];
    let nx = rows.iter().take_while(|r| r[1] == y0).count();
    if rows.len() % nx != 0 {
        return Err(RenderError("field is not a rectangular row-major grid".into()));
    }
    let ny = rows.len() / nx;
    let (lo, hi) = rows.iter().map(modulus).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let mut s = open(&format!("|psi| on {nx}x{ny} grid, range [{lo:.6}, {hi:.6}]"));
    let (left, top, span) = (40.0, 40.0, 320.0);
    let (w, h) = (span / nx as f64, span / ny as f64);
    for (i, r) in rows.iter().enumerate() {
        let t = if hi > lo { (modulus(r) - lo) / (hi - lo) } else { 0.5 };
        let g = (255.0 * (1.0 - t)).round() as u8;
        let (cx, cy) = (i % nx, i / nx);
        // x₂ grows upwards.
        let x = left + cx as f64 * w;
        let y = top + (ny - 1 - cy) as f64 * h;
        writeln!(
            s,
            r#"<rect x="{x:.3}" y="{y:.3}" width="{:.3}" height="{:.3}" fill="rgb({g},{g},{g})"/>"#,
            w + 0.05,
            h + 0.05
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    Ok(s)
}
