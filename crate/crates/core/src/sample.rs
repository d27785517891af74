//! Observations `(y, z, w)` and the `y,z,w` CSV format.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

/// An immutable i.i.d. sample of `(Y, Z, W)` with `Z, W ∈ [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    y: Vec<f64>,
    z: Vec<f64>,
    w: Vec<f64>,
}

#[derive(Deserialize)]
struct CsvRow {
    y: f64,
    z: f64,
    w: f64,
}

impl Sample {
    pub fn new(y: Vec<f64>, z: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        if y.is_empty() {
            return domain("sample must contain at least one observation");
        }
        if y.len() != z.len() || y.len() != w.len() {
            return domain(format!("column lengths differ: y={}, z={}, w={}", y.len(), z.len(), w.len()));
        }
        for (i, ((yi, zi), wi)) in y.iter().zip(&z).zip(&w).enumerate() {
            validate_row(i + 1, *yi, *zi, *wi)?;
        }
        Ok(Self { y, z, w })
    }

    pub fn from_rows(rows: &[(f64, f64, f64)]) -> Result<Self> {
        let (mut y, mut z, mut w) =
            (Vec::with_capacity(rows.len()), Vec::with_capacity(rows.len()), Vec::with_capacity(rows.len()));
        for &(a, b, c) in rows {
            y.push(a);
            z.push(b);
            w.push(c);
        }
        Self::new(y, z, w)
    }

    /// Number of observations `n ≥ 1`.
    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> &[f64] {
        &self.z
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// Same `(z, w)` with every response multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { y: self.y.iter().map(|v| v * c).collect(), z: self.z.clone(), w: self.w.clone() }
    }

    /// Reads the `y,z,w` CSV format. Row numbers in errors count data rows from 1.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers =
            rdr.headers().map_err(|e| Error::Row { row: 0, message: format!("unreadable header: {e}") })?.clone();
        let names: Vec<&str> = headers.iter().collect();
        if names != ["y", "z", "w"] {
            return Err(Error::Row {
                row: 0,
                message: format!("expected header `y,z,w`, found `{}`", names.join(",")),
            });
        }
        let (mut y, mut z, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for (i, rec) in rdr.deserialize::<CsvRow>().enumerate() {
            let row = i + 1;
            let rec = rec.map_err(|e| match e.kind() {
                csv::ErrorKind::Io(_) => Error::Io(std::io::Error::other(e.to_string())),
                _ => Error::Row { row, message: e.to_string() },
            })?;
            validate_row(row, rec.y, rec.z, rec.w)?;
            y.push(rec.y);
            z.push(rec.z);
            w.push(rec.w);
        }
        if y.is_empty() {
            return domain("sample file contains no observations");
        }
        Ok(Self { y, z, w })
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref())?;
        Self::read_csv(std::io::BufReader::new(file))
    }

    /// Writes the `y,z,w` CSV format with shortest round-trip float formatting.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "y,z,w")?;
        for i in 0..self.len() {
            writeln!(out, "{:?},{:?},{:?}", self.y[i], self.z[i], self.w[i])?;
        }
        out.flush()?;
        Ok(())
    }
}

fn validate_row(row: usize, y: f64, z: f64, w: f64) -> Result<()> {
    let bad = |message: String| Err(Error::Row { row, message });
    if !y.is_finite() {
        return bad(format!("y = {y} is not finite"));
    }
    if !(0.0..=1.0).contains(&z) {
        return bad(format!("z = {z} lies outside [0, 1]"));
    }
    if !(0.0..=1.0).contains(&w) {
        return bad(format!("w = {w} lies outside [0, 1]"));
    }
    Ok(())
}
