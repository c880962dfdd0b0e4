//! Two-dimensional PCA projection of type-level feature vectors, with
//! part-of-speech scatter output.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::corpus::{PosLabels, PosTag};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    pub mean: Vec<f64>,
    /// Top two principal directions, unit length, mutually orthogonal.
    pub components: [Vec<f64>; 2],
    pub explained_variance_ratio: [f64; 2],
    /// Variance (divisor n − 1) along each component.
    pub explained_variance: [f64; 2],
    pub total_variance: f64,
}

/// Flips `v` so its largest-magnitude entry is positive (first such entry on ties).
fn fix_sign(v: &mut [f64]) {
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if x.abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

/// PCA of the rows of `rows` via SVD of the mean-centered matrix.
pub fn fit_pca<V: AsRef<[f64]>>(rows: &[V]) -> Result<PcaModel> {
    let n = rows.len();
    if n < 3 {
        return Err(Error::InsufficientData(format!("PCA needs at least 3 rows, got {n}")));
    }
    let dim = rows[0].as_ref().len();
    if dim < 2 {
        return Err(Error::InvalidInput("PCA needs at least 2 dimensions".into()));
    }
    if rows.iter().any(|r| r.as_ref().len() != dim) {
        return Err(Error::InvalidInput("rows differ in length".into()));
    }
    if rows.iter().any(|r| r.as_ref().iter().any(|x| !x.is_finite())) {
        return Err(Error::InvalidInput("non-finite matrix entry".into()));
    }
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, x) in mean.iter_mut().zip(r.as_ref()) {
            *m += x;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = DMatrix::from_fn(n, dim, |i, j| rows[i].as_ref()[j] - mean[j]);
    let svd = centered.svd(false, true);
    let v_t = svd.v_t.as_ref().expect("right singular vectors requested");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));

    let total_ss: f64 = svd.singular_values.iter().map(|s| s * s).sum();
    let component = |idx: usize| -> Vec<f64> {
        let mut v: Vec<f64> = v_t.row(order[idx]).iter().copied().collect();
        fix_sign(&mut v);
        v
    };
    let ss = |idx: usize| svd.singular_values[order[idx]].powi(2);
    let ratio = |idx: usize| if total_ss > 0.0 { ss(idx) / total_ss } else { 0.0 };
    let denom = (n - 1) as f64;
    Ok(PcaModel {
        mean,
        components: [component(0), component(1)],
        explained_variance_ratio: [ratio(0), ratio(1)],
        explained_variance: [ss(0) / denom, ss(1) / denom],
        total_variance: total_ss / denom,
    })
}

impl PcaModel {
    pub fn project(&self, v: &[f64]) -> Result<[f64; 2]> {
        if v.len() != self.mean.len() {
            return Err(Error::InvalidInput(format!(
                "expected {}-dimensional vector, got {}",
                self.mean.len(),
                v.len()
            )));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput("non-finite vector entry".into()));
        }
        let dot = |c: &[f64]| -> f64 { v.iter().zip(&self.mean).zip(c).map(|((x, m), w)| (x - m) * w).sum() };
        Ok([dot(&self.components[0]), dot(&self.components[1])])
    }
}

/// Mean silhouette of 2-D points grouped by POS tag (words without a label
/// count as `oth`). `None` when fewer than two classes are present.
pub fn silhouette(points: &BTreeMap<String, [f64; 2]>, pos: &PosLabels) -> Option<f64> {
    let labeled: Vec<([f64; 2], PosTag)> = points
        .iter()
        .map(|(w, p)| (*p, pos.get(w).unwrap_or(PosTag::Oth)))
        .collect();
    let classes: Vec<PosTag> = PosTag::ALL
        .into_iter()
        .filter(|t| labeled.iter().any(|(_, l)| l == t))
        .collect();
    if classes.len() < 2 {
        return None;
    }
    let dist = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
    let mut total = 0.0;
    for (i, (p, tag)) in labeled.iter().enumerate() {
        let mut sums: BTreeMap<PosTag, (f64, usize)> = BTreeMap::new();
        for (j, (q, t)) in labeled.iter().enumerate() {
            if i != j {
                let e = sums.entry(*t).or_insert((0.0, 0));
                e.0 += dist(*p, *q);
                e.1 += 1;
            }
        }
        let own = sums.get(tag).copied().unwrap_or((0.0, 0));
        if own.1 == 0 {
            continue; // singleton class contributes 0
        }
        let a = own.0 / own.1 as f64;
        let b = sums
            .iter()
            .filter(|(t, _)| *t != tag)
            .map(|(_, (s, c))| s / *c as f64)
            .fold(f64::INFINITY, f64::min);
        let m = a.max(b);
        if m > 0.0 {
            total += (b - a) / m;
        }
    }
    Some(total / labeled.len() as f64)
}

pub fn write_scatter_csv<W: Write>(points: &BTreeMap<String, [f64; 2]>, pos: &PosLabels, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let res = (|| -> csv::Result<()> {
        w.write_record(["word", "pc1", "pc2", "pos"])?;
        for (word, p) in points {
            let tag = pos.get(word).unwrap_or(PosTag::Oth);
            w.write_record([word.as_str(), &p[0].to_string(), &p[1].to_string(), tag.as_str()])?;
        }
        w.flush()?;
        Ok(())
    })();
    res.map_err(|e| Error::io("<scatter csv>", e.into()))
}

fn color(tag: PosTag) -> &'static str {
    match tag {
        PosTag::Nn => "#1f77b4",
        PosTag::Vrb => "#d62728",
        PosTag::Fct => "#2ca02c",
        PosTag::Adj => "#ff7f0e",
        PosTag::Oth => "#7f7f7f",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Static SVG 1.1 scatter plot, one labeled dot per word.
pub fn render_svg(points: &BTreeMap<String, [f64; 2]>, pos: &PosLabels) -> String {
    const W: f64 = 800.0;
    const H: f64 = 600.0;
    const PAD: f64 = 40.0;
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for p in points.values() {
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let sx = if x1 > x0 { (W - 2.0 * PAD) / (x1 - x0) } else { 1.0 };
    let sy = if y1 > y0 { (H - 2.0 * PAD) / (y1 - y0) } else { 1.0 };
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(svg, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    for (word, p) in points {
        let tag = pos.get(word).unwrap_or(PosTag::Oth);
        let cx = PAD + (p[0] - x0) * sx;
        let cy = H - PAD - (p[1] - y0) * sy;
        let _ = writeln!(
            svg,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{}"/><text x="{:.2}" y="{cy:.2}" font-size="8" fill="{}">{}</text>"#,
            color(tag),
            cx + 4.0,
            color(tag),
            escape(word)
        );
    }
    for (i, tag) in PosTag::ALL.into_iter().enumerate() {
        let y = 15.0 + 14.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<circle cx="10" cy="{y}" r="4" fill="{}"/><text x="18" y="{:.0}" font-size="11">{}</text>"#,
            color(tag),
            y + 4.0,
            tag
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatterMeta {
    pub words: usize,
    pub explained_variance_ratio: [f64; 2],
    pub silhouette: Option<f64>,
    pub standardized: bool,
}

/// Writes the scatter CSV and, when `svg` is given, the SVG rendering.
pub fn emit_scatter(
    points: &BTreeMap<String, [f64; 2]>,
    pos: &PosLabels,
    csv_path: impl AsRef<Path>,
    svg_path: Option<&Path>,
) -> Result<()> {
    let csv_path = csv_path.as_ref();
    let f = fs::File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
    write_scatter_csv(points, pos, std::io::BufWriter::new(f))?;
    if let Some(p) = svg_path {
        fs::write(p, render_svg(points, pos)).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pad(v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; 88];
        out[..v.len()].copy_from_slice(v);
        out
    }

    #[test]
    fn rank_one_data() {
        let rows = [pad(&[1.0, 1.0]), pad(&[2.0, 2.0]), pad(&[3.0, 3.0])];
        let m = fit_pca(&rows).unwrap();
        let h = 1.0 / 2f64.sqrt();
        assert!((m.components[0][0] - h).abs() < 1e-12 && (m.components[0][1] - h).abs() < 1e-12);
        assert!((m.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert!(m.explained_variance_ratio[1].abs() < 1e-12);
        let dot: f64 = m.components[0].iter().zip(&m.components[1]).map(|(a, b)| a * b).sum();
        assert!(dot.abs() < 1e-9);
    }

    #[test]
    fn projection_basics() {
        let rows = [pad(&[1.0, 0.0, 2.0]), pad(&[0.0, 3.0, 1.0]), pad(&[4.0, 1.0, 0.0]), pad(&[2.0, 2.0, 5.0])];
        let m = fit_pca(&rows).unwrap();
        let p = m.project(&m.mean).unwrap();
        assert_eq!(p, [0.0, 0.0]);
        let step: Vec<f64> = m.mean.iter().zip(&m.components[0]).map(|(a, b)| a + b).collect();
        let p = m.project(&step).unwrap();
        assert!((p[0] - 1.0).abs() < 1e-12 && p[1].abs() < 1e-12);
        assert!(m.project(&[1.0]).is_err());
        assert!(fit_pca(&rows[..2]).is_err());
    }

    #[test]
    fn scatter_csv_defaults_to_oth() {
        let points: BTreeMap<String, [f64; 2]> =
            [("a".into(), [0.0, 1.0]), ("b".into(), [1.0, 0.5]), ("c".into(), [2.0, 2.0])].into();
        let pos = PosLabels::new([("a".to_string(), PosTag::Nn), ("b".to_string(), PosTag::Vrb)].into());
        let mut buf = Vec::new();
        write_scatter_csv(&points, &pos, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.contains("c,2,2,oth"));
        let mut empty = Vec::new();
        write_scatter_csv(&BTreeMap::new(), &pos, &mut empty).unwrap();
        assert_eq!(String::from_utf8(empty).unwrap(), "word,pc1,pc2,pos\n");
        assert!(render_svg(&points, &pos).contains("<svg"));
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let err = emit_scatter(&BTreeMap::new(), &PosLabels::default(), "/nonexistent-dir/x.csv", None);
        assert!(matches!(err, Err(Error::Io { .. })));
    }

    #[test]
    fn silhouette_separated_clusters() {
        let mut points = BTreeMap::new();
        let mut pos = BTreeMap::new();
        for i in 0..5 {
            points.insert(format!("n{i}"), [i as f64 * 0.1, 0.0]);
            pos.insert(format!("n{i}"), PosTag::Nn);
            points.insert(format!("v{i}"), [10.0 + i as f64 * 0.1, 0.0]);
            pos.insert(format!("v{i}"), PosTag::Vrb);
        }
        let s = silhouette(&points, &PosLabels::new(pos)).unwrap();
        assert!(s > 0.9);
    }
}
