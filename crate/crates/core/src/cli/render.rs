//! Minimal SVG heatmaps from the CSV matrices written by the other
//! subcommands.
//!
//! Two layouts are understood:
//! * matrix: header `<corner>,<col…>`, each row `<label>,<value…>`;
//! * long field: header `x,y,<value…>`, pivoted on one value column.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

const CELL: f64 = 24.0;
const LABEL_W: f64 = 90.0;
const LABEL_H: f64 = 60.0;
/// Grids wider or taller than this drop their axis labels.
const MAX_LABELED: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub row_labels: Vec<String>,
    pub col_labels: Vec<String>,
    /// Row-major, `row_labels.len() × col_labels.len()`.
    pub values: Vec<f64>,
}

fn parse_value(s: &str, line: usize) -> Result<f64> {
    let v: f64 = s.trim().parse().map_err(|_| Error::NonNumeric {
        line: line as u64,
        column: String::new(),
        value: s.to_string(),
    })?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NonNumeric { line: line as u64, column: String::new(), value: s.to_string() })
    }
}

/// Parses either layout. `column` selects the value column of a long field
/// CSV (default: the first after `x,y`).
pub fn parse_heatmap(text: &str, column: Option<&str>) -> Result<Heatmap> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or_else(|| Error::Schema("empty CSV".into()))?;
    let header: Vec<&str> = header.split(',').map(str::trim).collect();
    if header.len() < 2 {
        return Err(Error::Schema("need a label column and at least one value column".into()));
    }
    let rows: Vec<(usize, Vec<&str>)> = lines.map(|(i, l)| (i + 1, l.split(',').collect())).collect();
    if rows.is_empty() {
        return Err(Error::Schema("CSV has a header but no rows".into()));
    }
    for (line, r) in &rows {
        if r.len() != header.len() {
            return Err(Error::MalformedRow {
                line: *line as u64,
                message: format!("expected {} fields, found {}", header.len(), r.len()),
            });
        }
    }

    if header.len() >= 3 && header[0] == "x" && header[1] == "y" {
        let col = match column {
            Some(name) => header
                .iter()
                .position(|h| *h == name)
                .filter(|&i| i >= 2)
                .ok_or_else(|| Error::Schema(format!("no value column `{name}`")))?,
            None => 2,
        };
        let mut grid: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for (line, r) in &rows {
            let (x, y) = (parse_value(r[0], *line)?, parse_value(r[1], *line)?);
            xs.push(x);
            ys.push(y);
            grid.insert((y.to_bits(), x.to_bits()), parse_value(r[col], *line)?);
        }
        for v in [&mut xs, &mut ys] {
            v.sort_by(f64::total_cmp);
            v.dedup();
        }
        let mut values = Vec::with_capacity(xs.len() * ys.len());
        // top row is the largest y
        for y in ys.iter().rev() {
            for x in &xs {
                values.push(
                    *grid
                        .get(&(y.to_bits(), x.to_bits()))
                        .ok_or_else(|| Error::Schema(format!("field has no value at ({x}, {y})")))?,
                );
            }
        }
        return Ok(Heatmap {
            row_labels: ys.iter().rev().map(|y| y.to_string()).collect(),
            col_labels: xs.iter().map(|x| x.to_string()).collect(),
            values,
        });
    }

    let mut values = Vec::with_capacity(rows.len() * (header.len() - 1));
    for (line, r) in &rows {
        for cell in &r[1..] {
            values.push(parse_value(cell, *line)?);
        }
    }
    Ok(Heatmap {
        row_labels: rows.iter().map(|(_, r)| r[0].trim().to_string()).collect(),
        col_labels: header[1..].iter().map(|s| s.to_string()).collect(),
        values,
    })
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// White (minimum) to dark blue (maximum). A constant matrix renders
/// uniformly at the light end.
fn color(t: f64) -> String {
    let lo = [247.0, 251.0, 255.0];
    let hi = [8.0, 48.0, 107.0];
    let c: Vec<u8> = lo.iter().zip(hi).map(|(a, b)| (a + (b - a) * t).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

pub fn heatmap_svg(map: &Heatmap, title: &str) -> String {
    let (nr, nc) = (map.row_labels.len(), map.col_labels.len());
    let labeled = nr <= MAX_LABELED && nc <= MAX_LABELED;
    let cell = if labeled { CELL } else { (600.0 / nr.max(nc) as f64).max(2.0) };
    let (ox, oy) = if labeled { (LABEL_W, LABEL_H) } else { (10.0, 30.0) };
    let w = ox + cell * nc as f64 + 10.0;
    let h = oy + cell * nr as f64 + 10.0;
    let lo = map.values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = map.values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(
        s,
        r#"<text x="4" y="16" font-family="sans-serif" font-size="12">{} [{lo}, {hi}]</text>"#,
        escape(title)
    );
    for r in 0..nr {
        for c in 0..nc {
            let v = map.values[r * nc + c];
            let t = if span > 0.0 { (v - lo) / span } else { 0.0 };
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="{cell}" height="{cell}" fill="{}"/>"#,
                ox + cell * c as f64,
                oy + cell * r as f64,
                color(t)
            );
        }
    }
    if labeled {
        for (r, label) in map.row_labels.iter().enumerate() {
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" font-family="sans-serif" font-size="10" text-anchor="end">{}</text>"#,
                ox - 4.0,
                oy + cell * (r as f64 + 0.65),
                escape(label)
            );
        }
        for (c, label) in map.col_labels.iter().enumerate() {
            let x = ox + cell * (c as f64 + 0.5);
            let _ = writeln!(
                s,
                r#"<text x="{x}" y="{}" font-family="sans-serif" font-size="10" transform="rotate(-45 {x} {})">{}</text>"#,
                oy - 4.0,
                oy - 4.0,
                escape(label)
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
