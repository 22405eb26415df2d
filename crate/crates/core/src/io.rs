//! Deterministic text and binary output.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;
use crate::grid::SpatialGrid;

/// Formats a float with 17 significant digits in scientific notation.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// In-memory CSV table with a fixed header.
#[derive(Debug, Clone)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        Self {
            header: header.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.header.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{}", fmt_f64(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.render())?;
        Ok(())
    }
}

/// Writes a two-column whitespace-separated series (gnuplot friendly).
pub fn write_series(path: &Path, xs: &[f64], ys: &[f64]) -> Result<()> {
    let mut out = String::new();
    for (x, y) in xs.iter().zip(ys) {
        let _ = writeln!(out, "{} {}", fmt_f64(*x), fmt_f64(*y));
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n")?;
    Ok(())
}

/// Header of the binary snapshot container.
#[derive(Debug, Clone, Serialize, serde::Deserialize, PartialEq)]
pub struct SnapshotHeader {
    pub grid: SpatialGrid,
    pub times: Vec<f64>,
    pub config: serde_json::Value,
}

/// Magic bytes opening a snapshot file.
pub const SNAPSHOT_MAGIC: &[u8; 8] = b"NLSSNAP1";

/// Layout: magic, u64 little-endian header length, JSON header, then one row
/// of `n_points` complex64 values (two little-endian f32) per snapshot.
pub fn write_snapshots(path: &Path, header: &SnapshotHeader, rows: &[Vec<Complex64>]) -> Result<()> {
    let json = serde_json::to_vec(header)?;
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    f.write_all(SNAPSHOT_MAGIC)?;
    f.write_all(&(json.len() as u64).to_le_bytes())?;
    f.write_all(&json)?;
    for row in rows {
        for c in row {
            f.write_all(&(c.re as f32).to_le_bytes())?;
            f.write_all(&(c.im as f32).to_le_bytes())?;
        }
    }
    f.flush()?;
    Ok(())
}

pub fn read_snapshots(path: &Path) -> Result<(SnapshotHeader, Vec<Vec<Complex64>>)> {
    let bytes = fs::read(path)?;
    let bad = |m: &str| crate::error::Error::invalid(format!("{}: {m}", path.display()));
    if bytes.len() < 16 || &bytes[..8] != SNAPSHOT_MAGIC {
        return Err(bad("not a snapshot file"));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let body = bytes.get(16..16 + hlen).ok_or_else(|| bad("truncated header"))?;
    let header: SnapshotHeader = serde_json::from_slice(body)?;
    let n = header.grid.len();
    let data = &bytes[16 + hlen..];
    if data.len() != header.times.len() * n * 8 {
        return Err(bad("payload size does not match header"));
    }
    let f = |o: usize| f32::from_le_bytes(data[o..o + 4].try_into().unwrap()) as f64;
    let rows = (0..header.times.len())
        .map(|r| {
            (0..n)
                .map(|j| {
                    let o = (r * n + j) * 8;
                    Complex64::new(f(o), f(o + 4))
                })
                .collect()
        })
        .collect();
    Ok((header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_render_is_stable() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec![1.0, -0.5]);
        assert_eq!(t.render(), "a,b\n1.0000000000000000e0,-5.0000000000000000e-1\n");
    }

    #[test]
    fn snapshot_container_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let grid = SpatialGrid::new(20.0, 64).unwrap();
        let header = SnapshotHeader {
            grid,
            times: vec![0.0, 1.0],
            config: serde_json::json!({"dt": 0.1}),
        };
        let rows: Vec<Vec<Complex64>> = (0..2)
            .map(|r| (0..64).map(|j| Complex64::new(j as f64, r as f64)).collect())
            .collect();
        let path = dir.path().join("s.bin");
        write_snapshots(&path, &header, &rows).unwrap();
        let (h, back) = read_snapshots(&path).unwrap();
        assert_eq!(h, header);
        assert_eq!(back, rows);
    }
}
