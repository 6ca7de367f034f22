//! CSV serialization of linear policy coefficient matrices.
//!
//! Format: header `a1,...,ad`, then p+1 rows of coefficients — the intercept
//! row first, then one row per context coordinate. Values round-trip exactly.

use drobandit::policy::LinearPolicy;
use drobandit::{Error, Result};
use ndarray::Array2;
use std::io::{Read, Write};
use std::path::Path;

/// Writes Θ as CSV.
pub fn write_theta<W: Write>(writer: W, policy: &LinearPolicy) -> Result<()> {
    let theta = policy.theta();
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = (1..=theta.ncols()).map(|a| format!("a{a}")).collect();
    w.write_record(&header)?;
    for row in theta.rows() {
        let rec: Vec<String> = row.iter().map(|v| format_exact(*v)).collect();
        w.write_record(&rec)?;
    }
    w.flush().map_err(Error::Io)?;
    Ok(())
}

/// Writes Θ as CSV to a path.
pub fn write_theta_path<P: AsRef<Path>>(path: P, policy: &LinearPolicy) -> Result<()> {
    write_theta(std::fs::File::create(path)?, policy)
}

/// Reads a Θ CSV produced by [`write_theta`].
pub fn read_theta<R: Read>(reader: R) -> Result<LinearPolicy> {
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let d = r.headers()?.len();
    let mut values = Vec::new();
    let mut rows = 0usize;
    for (idx, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = idx + 2;
        if rec.len() != d {
            return Err(Error::Parse {
                line,
                msg: format!("expected {d} fields, got {}", rec.len()),
            });
        }
        for field in rec.iter() {
            values.push(field.trim().parse::<f64>().map_err(|e| Error::Parse {
                line,
                msg: format!("bad number {field:?}: {e}"),
            })?);
        }
        rows += 1;
    }
    if rows < 2 {
        return Err(Error::Parse {
            line: rows + 1,
            msg: "need an intercept row plus at least one coefficient row".into(),
        });
    }
    let theta = Array2::from_shape_vec((rows, d), values).expect("counted shape");
    LinearPolicy::new(theta)
}

/// Reads a Θ CSV from a path.
pub fn read_theta_path<P: AsRef<Path>>(path: P) -> Result<LinearPolicy> {
    read_theta(std::fs::File::open(path)?)
}

fn format_exact(v: f64) -> String {
    let s = format!("{v}");
    if s.parse::<f64>() == Ok(v) {
        s
    } else {
        format!("{v:?}")
    }
}
