//! CSV artifacts and atomic file writes.
//!
//! Points: one row per point, `x0..x{D-1}` plus an optional trailing integer
//! `label` column (negative = outlier). Labels: `point_index,label` with `-1`
//! for filtered outliers. Scores: `point_index,pi_score`.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;

use super::config::fmt_f64;

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let name = path
        .file_name()
        .ok_or_else(|| Error::io(path, io::Error::new(io::ErrorKind::InvalidInput, "not a file path")))?;
    let tmp = path.with_file_name(format!(".{}.tmp-{}", name.to_string_lossy(), std::process::id()));
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn bad_data(path: &Path, line: usize, msg: impl std::fmt::Display) -> Error {
    Error::io(
        path,
        io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}")),
    )
}

/// Data rows as `(line number, fields)`, skipping blank lines and the header.
fn rows<'a>(path: &Path, text: &'a str, header: bool) -> Result<(Option<Vec<&'a str>>, Vec<(usize, Vec<&'a str>)>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let head = if header {
        Some(
            lines
                .next()
                .ok_or_else(|| bad_data(path, 1, "missing header"))?
                .1
                .split(',')
                .map(str::trim)
                .collect(),
        )
    } else {
        None
    };
    let body = lines.map(|(no, l)| (no, l.split(',').map(str::trim).collect())).collect();
    Ok((head, body))
}

fn field<T: std::str::FromStr>(path: &Path, line: usize, s: &str) -> Result<T> {
    s.parse().map_err(|_| bad_data(path, line, format!("cannot parse `{s}`")))
}

/// Reads a points file; returns the cloud and, with `has_labels`, the label column.
pub fn read_points_csv(path: &Path, has_labels: bool, header: bool) -> Result<(PointCloud, Option<Vec<i64>>)> {
    let text = read_text(path)?;
    let (_, body) = rows(path, &text, header)?;
    parse_points(path, body, has_labels)
}

/// Reads a points file written by [`write_points_csv`]; the header decides
/// whether a label column is present.
pub fn read_points_csv_with_header(path: &Path) -> Result<(PointCloud, Option<Vec<i64>>)> {
    let text = read_text(path)?;
    let (head, body) = rows(path, &text, true)?;
    let has_labels = head.is_some_and(|h| h.last() == Some(&"label"));
    parse_points(path, body, has_labels)
}

fn parse_points(path: &Path, body: Vec<(usize, Vec<&str>)>, has_labels: bool) -> Result<(PointCloud, Option<Vec<i64>>)> {
    let Some((_, first)) = body.first() else {
        return Err(bad_data(path, 1, "no data rows"));
    };
    let width = first.len();
    let dim = if has_labels { width.saturating_sub(1) } else { width };
    if dim == 0 {
        return Err(bad_data(path, body[0].0, "no coordinate columns"));
    }
    let mut data = Vec::with_capacity(body.len() * dim);
    let mut labels = Vec::new();
    for (no, fields) in &body {
        if fields.len() != width {
            return Err(bad_data(path, *no, format!("expected {width} fields, found {}", fields.len())));
        }
        for f in &fields[..dim] {
            data.push(field::<f64>(path, *no, f)?);
        }
        if has_labels {
            labels.push(field::<i64>(path, *no, fields[dim])?);
        }
    }
    let cloud = PointCloud::new(dim, data).map_err(|e| bad_data(path, 0, e))?;
    Ok((cloud, has_labels.then_some(labels)))
}

pub fn points_csv(cloud: &PointCloud, labels: Option<&[i64]>) -> String {
    let mut out = String::new();
    let cols: Vec<String> = (0..cloud.dim()).map(|a| format!("x{a}")).collect();
    out.push_str(&cols.join(","));
    if labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    for i in 0..cloud.len() {
        let row: Vec<String> = cloud.point(i).iter().map(|&v| fmt_f64(v)).collect();
        out.push_str(&row.join(","));
        if let Some(l) = labels {
            let _ = write!(out, ",{}", l[i]);
        }
        out.push('\n');
    }
    out
}

pub fn write_points_csv(path: &Path, cloud: &PointCloud, labels: Option<&[i64]>) -> Result<()> {
    if let Some(l) = labels {
        if l.len() != cloud.len() {
            return Err(Error::LengthMismatch {
                left: cloud.len(),
                right: l.len(),
            });
        }
    }
    write_atomic(path, points_csv(cloud, labels).as_bytes())
}

pub fn labels_csv(labels: &[i64]) -> String {
    let mut out = String::from("point_index,label\n");
    for (i, l) in labels.iter().enumerate() {
        let _ = writeln!(out, "{i},{l}");
    }
    out
}

pub fn scores_csv(scores: &[f64]) -> String {
    let mut out = String::from("point_index,pi_score\n");
    for (i, s) in scores.iter().enumerate() {
        let _ = writeln!(out, "{i},{}", fmt_f64(*s));
    }
    out
}

/// Second column of an indexed two-column file, checked for `0..n` order.
fn read_indexed<T: std::str::FromStr>(path: &Path) -> Result<Vec<T>> {
    let text = read_text(path)?;
    let (_, body) = rows(path, &text, true)?;
    let mut out = Vec::with_capacity(body.len());
    for (expected, (no, fields)) in body.iter().enumerate() {
        if fields.len() != 2 {
            return Err(bad_data(path, *no, "expected 2 fields"));
        }
        if field::<usize>(path, *no, fields[0])? != expected {
            return Err(bad_data(path, *no, format!("expected point_index {expected}")));
        }
        out.push(field(path, *no, fields[1])?);
    }
    Ok(out)
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<i64>> {
    read_indexed(path)
}

pub fn read_scores_csv(path: &Path) -> Result<Vec<f64>> {
    read_indexed(path)
}

/// Plot-ready tables: `plot_labels.csv` (`point_index,x..,label`) and, when
/// scores are given, `plot_scores.csv` (`point_index,x..,pi_score`).
pub fn export_plot_data(dir: &Path, cloud: &PointCloud, labels: &[i64], scores: Option<&[f64]>) -> Result<Vec<PathBuf>> {
    let n = cloud.len();
    for len in std::iter::once(labels.len()).chain(scores.map(<[f64]>::len)) {
        if len != n {
            return Err(Error::LengthMismatch { left: n, right: len });
        }
    }
    let coords: Vec<String> = (0..cloud.dim()).map(|a| format!("x{a}")).collect();
    let table = |last: &str, value: &dyn Fn(usize) -> String| {
        let mut out = format!("point_index,{},{last}\n", coords.join(","));
        for i in 0..n {
            let row: Vec<String> = cloud.point(i).iter().map(|&v| fmt_f64(v)).collect();
            let _ = writeln!(out, "{i},{},{}", row.join(","), value(i));
        }
        out
    };
    let mut written = Vec::new();
    let path = dir.join("plot_labels.csv");
    write_atomic(&path, table("label", &|i| labels[i].to_string()).as_bytes())?;
    written.push(path);
    if let Some(s) = scores {
        let path = dir.join("plot_scores.csv");
        write_atomic(&path, table("pi_score", &|i| fmt_f64(s[i])).as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
