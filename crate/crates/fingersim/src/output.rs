//! Deterministic artifacts: CSV time series and plain-text field snapshots
//! (optionally gzip-compressed), plus the matching snapshot reader.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::diagnostics::TimeSeries;
use crate::error::{Result, SimError};
use crate::grid::{CellField, StructuredGrid};

fn io_err(path: &Path, e: std::io::Error) -> SimError {
    SimError::io(path.display().to_string(), e)
}

/// CSV with the fixed header `t,energy,mean,variance,mixing,l1,l2,linf`, one
/// row per sample. Floats print as the shortest round-trip decimal, so reruns
/// of the same config are byte-identical. An absent mixing index leaves the
/// cell empty.
pub fn write_timeseries(series: &TimeSeries, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "t,energy,mean,variance,mixing,l1,l2,linf")?;
        for i in 0..series.len() {
            let mixing = series.mixing[i].map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                series.times[i],
                series.energy[i],
                series.mean[i],
                series.variance[i],
                mixing,
                series.l1[i],
                series.l2[i],
                series.linf[i]
            )?;
        }
        w.flush()
    })()
    .map_err(|e| io_err(path, e))
}

fn format_snapshot(field: &CellField, t: f64) -> String {
    let g = field.grid();
    let mut s = format!("# {} {} {} {} {}\n", g.nx, g.ny, g.lx, g.ly, t);
    for j in 0..g.ny {
        for i in 0..g.nx {
            if i > 0 {
                s.push(' ');
            }
            s.push_str(&field.get(i, j).to_string());
        }
        s.push('\n');
    }
    s
}

/// Plain-text snapshot: header `# nx ny Lx Ly t`, then ny rows of nx values,
/// row j ascending in y. With `gzip` the same bytes are gzip-compressed.
pub fn write_snapshot(field: &CellField, t: f64, path: &Path, gzip: bool) -> Result<()> {
    let text = format_snapshot(field, t);
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let res = if gzip {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        enc.write_all(text.as_bytes()).and_then(|_| enc.finish().map(drop))
    } else {
        let mut w = BufWriter::new(file);
        w.write_all(text.as_bytes()).and_then(|_| w.flush())
    };
    res.map_err(|e| io_err(path, e))
}

/// Read a snapshot written by [`write_snapshot`]; gzip is detected from the
/// magic bytes. Returns the field and its time stamp.
pub fn read_snapshot(path: &Path) -> Result<(CellField, f64)> {
    let mut file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic).map_err(|e| io_err(path, e))?;
    let mut raw = Vec::new();
    raw.extend_from_slice(&magic[..n]);
    file.read_to_end(&mut raw).map_err(|e| io_err(path, e))?;
    let text = if raw.starts_with(&[0x1f, 0x8b]) {
        let mut dec = GzDecoder::new(&raw[..]);
        let mut s = String::new();
        dec.read_to_string(&mut s).map_err(|e| io_err(path, e))?;
        s
    } else {
        String::from_utf8(raw).map_err(|_| SimError::SnapshotFormat {
            path: path.display().to_string(),
            what: "not valid UTF-8".into(),
        })?
    };
    parse_snapshot(&text, path)
}

fn parse_snapshot(text: &str, path: &Path) -> Result<(CellField, f64)> {
    let bad = |what: String| SimError::SnapshotFormat {
        path: path.display().to_string(),
        what,
    };
    let mut lines = BufReader::new(text.as_bytes()).lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| io_err(path, e))?
        .ok_or_else(|| bad("empty file".into()))?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 6 || parts[0] != "#" {
        return Err(bad(format!("bad header `{header}`")));
    }
    let nx: usize = parts[1].parse().map_err(|_| bad("bad nx".into()))?;
    let ny: usize = parts[2].parse().map_err(|_| bad("bad ny".into()))?;
    let lx: f64 = parts[3].parse().map_err(|_| bad("bad Lx".into()))?;
    let ly: f64 = parts[4].parse().map_err(|_| bad("bad Ly".into()))?;
    let t: f64 = parts[5].parse().map_err(|_| bad("bad t".into()))?;

    let grid = StructuredGrid::new(lx, ly, nx, ny)?;
    let mut values = Vec::with_capacity(nx * ny);
    for (j, line) in lines.enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad(format!("unparsable value in row {j}")))?;
        if row.len() != nx {
            return Err(bad(format!("row {j} has {} values, expected {nx}", row.len())));
        }
        values.extend(row);
    }
    if values.len() != nx * ny {
        return Err(bad(format!(
            "expected {} values, found {}",
            nx * ny,
            values.len()
        )));
    }
    Ok((CellField::from_values(grid, values)?, t))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::CellField;

    fn sample_series() -> TimeSeries {
        let g = StructuredGrid::new(1.0, 1.0, 2, 2).unwrap();
        let c = CellField::from_fn(g, |x, y| 1.0 + x + y);
        let mut s = TimeSeries::default();
        s.push_sample(0.0, 0.0, &c, 0.25);
        s.push_sample(1.0, 0.125, &c, 0.25);
        s
    }

    #[test]
    fn timeseries_header_and_row_count() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        write_timeseries(&sample_series(), &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "t,energy,mean,variance,mixing,l1,l2,linf");
        assert!(text.ends_with('\n'));

        let empty = TimeSeries::default();
        let path2 = dir.path().join("empty.csv");
        write_timeseries(&empty, &path2).unwrap();
        let text2 = std::fs::read_to_string(&path2).unwrap();
        assert_eq!(text2.lines().count(), 1);
    }

    #[test]
    fn timeseries_rewrite_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        let s = sample_series();
        write_timeseries(&s, &p1).unwrap();
        write_timeseries(&s, &p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
    }

    #[test]
    fn absent_mixing_leaves_empty_cell() {
        let g = StructuredGrid::new(1.0, 1.0, 2, 2).unwrap();
        let c = CellField::constant(g, 1.0);
        let mut s = TimeSeries::default();
        s.push_sample(0.0, 0.0, &c, 0.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ts.csv");
        write_timeseries(&s, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let row = text.lines().nth(1).unwrap();
        assert_eq!(row.split(',').nth(4).unwrap(), "");
    }

    #[test]
    fn snapshot_roundtrip_plain_and_gzip() {
        let g = StructuredGrid::new(3.0, 2.0, 5, 4).unwrap();
        let f = CellField::from_fn(g, |x, y| 1.0 + 0.37 * x - 0.11 * y * y);
        let dir = tempfile::tempdir().unwrap();
        for gzip in [false, true] {
            let path = dir.path().join(if gzip { "s.txt.gz" } else { "s.txt" });
            write_snapshot(&f, 2.5, &path, gzip).unwrap();
            let (back, t) = read_snapshot(&path).unwrap();
            assert_eq!(t, 2.5);
            assert_eq!(back, f);
        }
    }

    #[test]
    fn snapshot_layout_is_documented_order() {
        let g = StructuredGrid::new(1.0, 1.0, 2, 2).unwrap();
        let mut f = CellField::zeros(g);
        f.set(0, 0, 1.0);
        f.set(1, 0, 2.0);
        f.set(0, 1, 3.0);
        f.set(1, 1, 4.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.txt");
        write_snapshot(&f, 0.0, &path, false).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "# 2 2 1 1 0");
        assert_eq!(lines[1], "1 2");
        assert_eq!(lines[2], "3 4");
    }

    #[test]
    fn corrupt_snapshot_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        std::fs::write(&path, "# 2 2 1 1 0\n1 2\n3\n").unwrap();
        assert!(matches!(
            read_snapshot(&path),
            Err(SimError::SnapshotFormat { .. })
        ));
    }
}
