//! `series.csv`: one row per diagnostic record, fixed column order.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::decay::{lp_column, SeriesSource};
use crate::diagnostics::DiagnosticsRecord;
use crate::error::{Error, Result};

pub const SERIES_SCHEMA_VERSION: u32 = 1;

const LEADING: [&str; 20] = [
    "t",
    "E_kin",
    "E_pot_pair",
    "E_pot_grid",
    "E_total",
    "M0",
    "M1",
    "M2",
    "Dx",
    "Dy",
    "Dz",
    "d2x",
    "d2y",
    "d2z",
    "Ix",
    "Iy",
    "Iz",
    "R",
    "S",
    "Q",
];

/// Column names for the given norm exponents.
pub fn column_names(rho_p: &[f64], grad_u_p: &[f64]) -> Vec<String> {
    let mut cols: Vec<String> = LEADING.iter().map(|s| s.to_string()).collect();
    cols.extend(rho_p.iter().map(|&p| lp_column("rho_lp", p)));
    cols.extend(grad_u_p.iter().map(|&p| lp_column("gradU_lp", p)));
    cols.push("diss_residual".into());
    cols.push("interp_slack".into());
    cols
}

/// Scientific notation with 17 significant digits (round-trip exact); `NaN` for
/// values that were not computed.
pub fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else {
        format!("{v:.16e}")
    }
}

fn opt(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::NAN)
}

pub fn record_values(r: &DiagnosticsRecord) -> Vec<f64> {
    let mut vals = vec![
        r.t,
        r.e_kin,
        r.e_pot_pair,
        opt(r.e_pot_grid),
        r.e_total,
        r.m0,
        r.m1,
        r.m2,
        r.dipole.x,
        r.dipole.y,
        r.dipole.z,
        r.d2.x,
        r.d2.y,
        r.d2.z,
        r.i.x,
        r.i.y,
        r.i.z,
        r.r,
        r.s,
        r.q,
    ];
    vals.extend(r.rho_lp.iter().map(|(_, v)| opt(*v)));
    vals.extend(r.grad_u_lp.iter().map(|(_, v)| opt(*v)));
    vals.push(opt(r.diss_residual));
    vals.push(opt(r.interp_slack));
    vals
}

pub struct SeriesWriter {
    path: PathBuf,
    out: BufWriter<File>,
    columns: usize,
}

impl SeriesWriter {
    pub fn create(path: &Path, columns: &[String]) -> Result<Self> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "{}", columns.join(",")).map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            out,
            columns: columns.len(),
        })
    }

    pub fn write(&mut self, record: &DiagnosticsRecord) -> Result<()> {
        let vals = record_values(record);
        debug_assert_eq!(vals.len(), self.columns);
        let line: Vec<String> = vals.into_iter().map(format_value).collect();
        writeln!(self.out, "{}", line.join(",")).map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|e| Error::io(&self.path, e))
    }
}

/// In-memory series with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl SeriesTable {
    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut lines = BufReader::new(file).lines();
        let fmt = |reason: String| Error::Format {
            path: path.to_path_buf(),
            reason,
        };
        let header = lines
            .next()
            .ok_or_else(|| fmt("empty file".into()))?
            .map_err(|e| Error::io(path, e))?;
        let columns: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
        let mut rows = Vec::new();
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let row = line
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()
                .map_err(|e| fmt(format!("row {}: {e}", n + 1)))?;
            if row.len() != columns.len() {
                return Err(fmt(format!(
                    "row {} has {} fields, header has {}",
                    n + 1,
                    row.len(),
                    columns.len()
                )));
            }
            rows.push(row);
        }
        let table = Self { columns, rows };
        if table.has_column("t") {
            let t = table.column("t")?;
            if let Some(k) = t.windows(2).position(|w| !(w[1] > w[0])) {
                return Err(fmt(format!(
                    "times not strictly increasing at row {}",
                    k + 2
                )));
            }
        }
        Ok(table)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    fn index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }
}

impl SeriesTable {
    /// Values of one column, by header name.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let k = self.index(name)?;
        Ok(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.columns.iter().any(|c| c == name)
    }
}

impl SeriesSource for SeriesTable {
    fn column(&self, name: &str) -> Result<Vec<f64>> {
        SeriesTable::column(self, name)
    }

    fn has_column(&self, name: &str) -> bool {
        SeriesTable::has_column(self, name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::vec3::Vec3;

    fn record(t: f64) -> DiagnosticsRecord {
        DiagnosticsRecord {
            t,
            e_kin: 0.1 + t,
            e_pot_pair: -1.0 / 3.0,
            e_pot_grid: None,
            e_total: 0.1,
            m0: 2.0,
            m1: 0.5,
            m2: 0.2,
            dipole: Vec3::new(1.0, 2.0, 3.0),
            d2: Vec3::new(1e-300, -0.0, std::f64::consts::PI),
            i: Vec3::ZERO,
            r: 1.0,
            s: 0.0,
            q: 1.0,
            rho_lp: vec![(1.0, Some(2.0)), (5.0 / 3.0, None)],
            grad_u_lp: vec![(2.0, Some(0.25))],
            diss_residual: None,
            interp_slack: Some(0.5),
        }
    }

    #[test]
    fn header_names_every_column() {
        let cols = column_names(&[1.0, 5.0 / 3.0], &[2.0]);
        assert_eq!(cols.len(), 20 + 3 + 2);
        assert_eq!(cols[20], "rho_lp_1");
        assert_eq!(cols[21], "rho_lp_1.6667");
        assert_eq!(cols[22], "gradU_lp_2");
        assert_eq!(cols[23], "diss_residual");
    }

    #[test]
    fn write_read_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("series.csv");
        let cols = column_names(&[1.0, 5.0 / 3.0], &[2.0]);
        let mut w = SeriesWriter::create(&path, &cols).unwrap();
        w.write(&record(0.0)).unwrap();
        w.write(&record(0.1)).unwrap();
        w.finish().unwrap();
        let table = SeriesTable::read(&path).unwrap();
        assert_eq!(table.columns, cols);
        assert_eq!(table.len(), 2);
        for (row, t) in table.rows.iter().zip([0.0, 0.1]) {
            let expected = record_values(&record(t));
            for (a, b) in row.iter().zip(&expected) {
                assert!(
                    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan()),
                    "{a} vs {b}"
                );
            }
        }
        assert!(table.column("E_pot_grid").unwrap()[0].is_nan());
        assert!(matches!(table.column("nope"), Err(Error::MissingColumn(_))));
    }

    #[test]
    fn rejects_non_increasing_times() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        std::fs::write(&path, "t,x\n0,1\n0,2\n").unwrap();
        assert!(matches!(
            SeriesTable::read(&path),
            Err(Error::Format { .. })
        ));
        std::fs::write(&path, "t,x\n0,1\n1\n").unwrap();
        assert!(SeriesTable::read(&path).is_err());
    }
}
