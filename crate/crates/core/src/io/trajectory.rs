//! Trajectory CSV: `step,t,q0,...,q{n-1},cdf_value`, one row per executed
//! configuration. Floats are written with 17 significant digits so a read
//! gives back the exact bits.

use std::path::Path;

use crate::cdf::CdfField;
use crate::error::{Error, Result};
use crate::robot::Configuration;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub t: f64,
    pub q: Configuration,
    pub cdf_value: f64,
}

pub fn header(dim: usize) -> Vec<String> {
    let mut h = vec!["step".to_string(), "t".to_string()];
    h.extend((0..dim).map(|k| format!("q{k}")));
    h.push("cdf_value".to_string());
    h
}

fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rows for `trajectory`, with `t = step * dt` and the field evaluated at
/// every configuration.
pub fn rows(trajectory: &[Configuration], field: &CdfField, dt: f64) -> Vec<TrajectoryRow> {
    trajectory
        .iter()
        .enumerate()
        .map(|(step, q)| TrajectoryRow {
            step,
            t: step as f64 * dt,
            q: q.clone(),
            cdf_value: field.value(q.as_slice()),
        })
        .collect()
}

pub fn to_writer<W: std::io::Write>(rows: &[TrajectoryRow], dim: usize, out: W) -> Result<()> {
    let csv_err = |e: csv::Error| Error::TrajectoryCsv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header(dim)).map_err(csv_err)?;
    for row in rows {
        if row.q.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: row.q.len(),
            });
        }
        let mut rec = vec![row.step.to_string(), float(row.t)];
        rec.extend(row.q.iter().map(|&x| float(x)));
        rec.push(float(row.cdf_value));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::TrajectoryCsv(e.to_string()))
}

pub fn write_trajectory_csv(
    trajectory: &[Configuration],
    field: &CdfField,
    dt: f64,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    to_writer(
        &rows(trajectory, field, dt),
        field.dim(),
        std::io::BufWriter::new(file),
    )
}

/// Parses a trajectory table. The joint count comes from the header.
pub fn from_reader<R: std::io::Read>(input: R) -> Result<Vec<TrajectoryRow>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let found: Vec<String> = r
        .headers()
        .map_err(|e| Error::TrajectoryCsv(format!("line 1: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    let dim = found.iter().filter(|c| is_joint_column(c)).count();
    let expected = header(dim);
    if let Some(missing) = expected.iter().find(|c| !found.contains(c)) {
        return Err(Error::TrajectoryCsv(format!("missing column `{missing}`")));
    }
    if found != expected {
        return Err(Error::TrajectoryCsv(format!(
            "header must be `{}`, found `{}`",
            expected.join(","),
            found.join(",")
        )));
    }

    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::TrajectoryCsv(format!("line {line}: {e}")))?;
        let field = |k: usize| -> Result<f64> {
            rec[k].trim().parse::<f64>().map_err(|_| {
                Error::TrajectoryCsv(format!(
                    "line {line}: column `{}`: not a number: {:?}",
                    expected[k], &rec[k]
                ))
            })
        };
        let step = rec[0].trim().parse::<usize>().map_err(|_| {
            Error::TrajectoryCsv(format!(
                "line {line}: column `step`: not an integer: {:?}",
                &rec[0]
            ))
        })?;
        let q = (0..dim).map(|k| field(2 + k)).collect::<Result<Vec<_>>>()?;
        out.push(TrajectoryRow {
            step,
            t: field(1)?,
            q: Configuration::from_vec(q),
            cdf_value: field(2 + dim)?,
        });
    }
    Ok(out)
}

fn is_joint_column(name: &str) -> bool {
    name.strip_prefix('q')
        .is_some_and(|k| !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit()))
}

pub fn read_trajectory_csv(path: impl AsRef<Path>) -> Result<Vec<TrajectoryRow>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    from_reader(std::io::BufReader::new(file))
}
