//! Point-cloud CSV files.
//!
//! Header `re1,im1[,re2,im2][,mass]` (a 1-D file may also say `re,im`), one
//! point per row. Row numbers in errors are file line numbers, so the first
//! data row is row 2.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;

use super::{CompactGrid, DiscreteMeasure, Point, SetKind};
use crate::error::{Error, Result};
use crate::linalg::compensated_sum;

struct Layout {
    dim: usize,
    mass: Option<usize>,
    cols: [usize; 4],
}

fn layout(headers: &csv::StringRecord) -> Result<Layout> {
    let names: Vec<String> = headers.iter().map(|h| h.trim().to_ascii_lowercase()).collect();
    let find = |n: &str| names.iter().position(|h| h == n);
    let bad = |m: &str| Error::Ingestion { row: 1, message: m.to_string() };
    let re1 = find("re1").or_else(|| find("re")).ok_or_else(|| bad("missing re1 column"))?;
    let im1 = find("im1").or_else(|| find("im")).ok_or_else(|| bad("missing im1 column"))?;
    let (dim, re2, im2) = match (find("re2"), find("im2")) {
        (Some(a), Some(b)) => (2, a, b),
        (None, None) => (1, 0, 0),
        _ => return Err(bad("re2 and im2 must appear together")),
    };
    let known = 2 * dim + usize::from(find("mass").is_some());
    if known != names.len() {
        return Err(bad("unexpected columns in header"));
    }
    Ok(Layout {
        dim,
        mass: find("mass"),
        cols: [re1, im1, re2, im2],
    })
}

fn read(path: &Path) -> Result<(usize, Vec<Point>, Option<Vec<f64>>)> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::Ingestion { row: 1, message: e.to_string() })?
        .clone();
    let lay = layout(&headers)?;
    let mut pts = Vec::new();
    let mut masses = lay.mass.map(|_| Vec::new());
    let mut seen = HashSet::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Ingestion { row, message: e.to_string() })?;
        let num = |c: usize| -> Result<f64> {
            let s = rec.get(c).ok_or_else(|| Error::Ingestion { row, message: "missing field".into() })?;
            let v: f64 = s
                .parse()
                .map_err(|_| Error::Ingestion { row, message: format!("'{s}' is not a number") })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Ingestion { row, message: "non-finite value".into() })
            }
        };
        let z1 = Complex64::new(num(lay.cols[0])?, num(lay.cols[1])?);
        let p = if lay.dim == 1 {
            Point::new1(z1)
        } else {
            Point::new2(z1, Complex64::new(num(lay.cols[2])?, num(lay.cols[3])?))
        };
        if !seen.insert(p.key()) {
            return Err(Error::Ingestion { row, message: "duplicate point".into() });
        }
        if let (Some(ms), Some(c)) = (masses.as_mut(), lay.mass) {
            let m = num(c)?;
            if m < 0.0 {
                return Err(Error::Ingestion { row, message: "negative mass".into() });
            }
            ms.push(m);
        }
        pts.push(p);
    }
    if pts.is_empty() {
        return Err(Error::Ingestion { row: 2, message: "no data rows".into() });
    }
    Ok((lay.dim, pts, masses))
}

/// Nearest-neighbour fill distance of a loaded cloud: the largest distance
/// from a cloud point to its nearest neighbour, halved. This is the natural
/// scale for a cloud sampling a curve; callers who know better should build
/// the grid themselves.
fn nn_fill(pts: &[Point]) -> f64 {
    if pts.len() < 2 {
        return 0.0;
    }
    let mut worst = 0.0f64;
    for (i, p) in pts.iter().enumerate() {
        let mut best = f64::INFINITY;
        for (j, q) in pts.iter().enumerate() {
            if i != j {
                best = best.min(p.dist(q));
            }
        }
        worst = worst.max(best);
    }
    worst / 2.0
}

/// Loads a point cloud; a `mass` column, if present, is ignored.
pub fn load_pointcloud(path: impl AsRef<Path>) -> Result<CompactGrid> {
    let (dim, pts, _) = read(path.as_ref())?;
    let fill = nn_fill(&pts);
    CompactGrid::new(dim, pts, fill, SetKind::Custom)
}

/// Loads a measure; the `mass` column is required and must sum to 1 within
/// `1e-9`.
pub fn load_measure(path: impl AsRef<Path>) -> Result<DiscreteMeasure> {
    let (dim, pts, masses) = read(path.as_ref())?;
    let masses = masses.ok_or(Error::Ingestion { row: 1, message: "missing mass column".into() })?;
    let total = compensated_sum(masses.iter().copied());
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Ingestion {
            row: masses.len() + 1,
            message: format!("masses sum to {total}, not 1"),
        });
    }
    let fill = nn_fill(&pts);
    let grid = CompactGrid::new(dim, pts, fill, SetKind::Custom)?;
    DiscreteMeasure::new(Arc::new(grid), masses)
}

fn header(dim: usize, mass: bool) -> String {
    let mut h = if dim == 1 { "re1,im1".to_string() } else { "re1,im1,re2,im2".to_string() };
    if mass {
        h.push_str(",mass");
    }
    h
}

fn write_rows(path: &Path, dim: usize, pts: &[Point], masses: Option<&[f64]>) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", header(dim, masses.is_some()))?;
    for (i, p) in pts.iter().enumerate() {
        let mut fields: Vec<String> = p
            .coords()
            .iter()
            .flat_map(|z| [format!("{:e}", z.re), format!("{:e}", z.im)])
            .collect();
        if let Some(m) = masses {
            fields.push(format!("{:e}", m[i]));
        }
        writeln!(out, "{}", fields.join(","))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes a cloud in the format read by [`load_pointcloud`]; values are
/// printed in shortest round-trip form.
pub fn write_pointcloud(path: impl AsRef<Path>, grid: &CompactGrid) -> Result<()> {
    write_rows(path.as_ref(), grid.dim(), grid.points(), None)
}

pub fn write_measure(path: impl AsRef<Path>, mu: &DiscreteMeasure) -> Result<()> {
    write_rows(path.as_ref(), mu.dim(), mu.points(), Some(mu.masses()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn file(contents: &str) -> tempfile::NamedTempFile {
        let f = tempfile::NamedTempFile::new().unwrap();
        fs::write(f.path(), contents).unwrap();
        f
    }

    #[test]
    fn two_point_cloud() {
        let f = file("re,im\n-1,0\n1,0\n");
        let g = load_pointcloud(f.path()).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g.points()[0].z(), Complex64::new(-1.0, 0.0));
    }

    #[test]
    fn mass_not_normalized() {
        let f = file("re1,im1,mass\n0,0,0.3\n1,0,0.6\n");
        match load_measure(f.path()) {
            Err(Error::Ingestion { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn duplicate_rows_report_row() {
        let f = file("re1,im1\n0,0\n1,0\n0,0\n");
        assert_eq!(
            load_pointcloud(f.path()).unwrap_err(),
            Error::Ingestion { row: 4, message: "duplicate point".into() }
        );
    }

    #[test]
    fn malformed_row() {
        let f = file("re1,im1\n0,0\n1,zz\n");
        assert!(matches!(load_pointcloud(f.path()), Err(Error::Ingestion { row: 3, .. })));
    }

    #[test]
    fn round_trip() {
        let g = super::super::make_parametric_set(&SetKind::Torus { n: 2 }, 5).unwrap();
        let mu = DiscreteMeasure::uniform(Arc::new(g));
        let f = tempfile::NamedTempFile::new().unwrap();
        write_measure(f.path(), &mu).unwrap();
        let back = load_measure(f.path()).unwrap();
        assert_eq!(back.points(), mu.points());
        assert_eq!(back.masses(), mu.masses());
    }
}
