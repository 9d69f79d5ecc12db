use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{governor_label, AnalysisError, StanceScore};
use crate::hin::{EntityId, Hin};
use crate::numkit::Matrix;

fn io(path: &Path, e: impl Into<std::io::Error>) -> AnalysisError {
    AnalysisError::Io {
        path: path.display().to_string(),
        source: e.into(),
    }
}

fn csv_err(path: &Path, e: csv::Error) -> AnalysisError {
    io(path, std::io::Error::other(e))
}

/// `id,name,kind,px,py,group`, one row per listed entity.
pub fn write_projection_csv(
    path: &Path,
    hin: &Hin,
    entities: &[EntityId],
    proj: &Matrix,
    groups: &[String],
) -> Result<(), AnalysisError> {
    if proj.rows() != entities.len() || groups.len() != entities.len() {
        return Err(AnalysisError::Length(proj.rows(), entities.len()));
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(["id", "name", "kind", "px", "py", "group"])
        .map_err(|e| csv_err(path, e))?;
    for (r, &e) in entities.iter().enumerate() {
        let node = hin.node(e).expect("entity in graph");
        let py = if proj.cols() > 1 { proj.get(r, 1) } else { 0.0 };
        w.write_record([
            e.to_string(),
            node.name.clone(),
            node.kind.to_string(),
            proj.get(r, 0).to_string(),
            py.to_string(),
            groups[r].clone(),
        ])
        .map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

/// `id,name,l0..l4,c0..c4,lib_cont,con_cont,label`.
pub fn write_stance_csv(
    path: &Path,
    hin: &Hin,
    scores: &[StanceScore],
) -> Result<(), AnalysisError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["id".to_string(), "name".to_string()];
    header.extend((0..5).map(|i| format!("l{i}")));
    header.extend((0..5).map(|i| format!("c{i}")));
    header.extend(["lib_cont", "con_cont", "label"].map(String::from));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for s in scores {
        let mut row = vec![
            s.entity.to_string(),
            hin.node(s.entity).expect("entity in graph").name.clone(),
        ];
        row.extend(
            s.liberal
                .iter()
                .chain(&s.conservative)
                .map(|v| v.to_string()),
        );
        row.push(s.liberal_continuous.to_string());
        row.push(s.conservative_continuous.to_string());
        row.push(governor_label(&s.liberal).to_string());
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| io(path, e))
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
];

/// Self-contained SVG scatter of the first two projection columns, one
/// color per group.
pub fn projection_svg(proj: &Matrix, groups: &[String]) -> String {
    const SIZE: f64 = 600.0;
    const PAD: f64 = 30.0;
    let mut colors: BTreeMap<&str, &str> = BTreeMap::new();
    for g in groups {
        let next = PALETTE[colors.len() % PALETTE.len()];
        colors.entry(g.as_str()).or_insert(next);
    }
    let col = |k: usize| -> Vec<f64> {
        (0..proj.rows())
            .map(|r| if k < proj.cols() { proj.get(r, k) } else { 0.0 })
            .collect()
    };
    let (xs, ys) = (col(0), col(1));
    let range = |v: &[f64]| {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (lo, if hi > lo { hi - lo } else { 1.0 })
    };
    let ((x0, xw), (y0, yw)) = (range(&xs), range(&ys));
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (r, g) in groups.iter().enumerate() {
        let cx = PAD + (xs[r] - x0) / xw * (SIZE - 2.0 * PAD);
        let cy = SIZE - PAD - (ys[r] - y0) / yw * (SIZE - 2.0 * PAD);
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{}"/>"#,
            colors[g.as_str()]
        );
    }
    for (i, (g, c)) in colors.iter().enumerate() {
        let y = 16.0 + 14.0 * i as f64;
        let _ = writeln!(s, r#"<circle cx="10" cy="{}" r="4" fill="{c}"/>"#, y - 4.0);
        let name = g
            .replace('&', "&amp;")
            .replace('<', "&lt;")
            .replace('>', "&gt;");
        let _ = writeln!(
            s,
            r#"<text x="18" y="{y}" font-size="11" font-family="sans-serif">{name}</text>"#
        );
    }
    s.push_str("</svg>\n");
    s
}
