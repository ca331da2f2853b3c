//! Text formats: trajectory and isocline CSV, pretty JSON.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a
//! write-read-write cycle reproduces the same bytes.

use std::fmt::Write as _;
use std::io::BufRead;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::chart::Isocline;
use crate::error::FormatError;
use crate::trajectory::FeatureTrajectory;

/// CSV with header `t,{prefix}1,...,{prefix}N`, one row per sample.
pub fn trajectory_to_csv(traj: &FeatureTrajectory, prefix: &str) -> String {
    let mut out = String::from("t");
    for k in 1..=traj.dim() {
        write!(out, ",{prefix}{k}").expect("writing to a String");
    }
    out.push('\n');
    for (t, p) in traj.times().iter().zip(traj.points()) {
        write!(out, "{t}").expect("writing to a String");
        for v in p {
            write!(out, ",{v}").expect("writing to a String");
        }
        out.push('\n');
    }
    out
}

/// Reads a trajectory CSV. The first column must be `t`; the remaining
/// column names are not interpreted.
pub fn trajectory_from_csv(reader: impl BufRead) -> Result<FeatureTrajectory, FormatError> {
    let mut lines = reader.lines().enumerate().filter(|(_, l)| l.as_ref().map_or(true, |l| !l.trim().is_empty()));
    let (_, header) = lines.next().ok_or_else(|| FormatError::Invalid("empty trajectory CSV".into()))?;
    let header = header?;
    let columns: Vec<&str> = header.trim().split(',').map(str::trim).collect();
    if columns.len() < 2 || columns[0] != "t" {
        return Err(FormatError::Csv { line: 1, message: "header must start with `t` and name at least one value".into() });
    }
    let dim = columns.len() - 1;
    let mut times = Vec::new();
    let mut data = Vec::new();
    for (index, line) in lines {
        let line = line?;
        let fields = parse_row(&line, index + 1)?;
        if fields.len() != dim + 1 {
            return Err(FormatError::Csv {
                line: index + 1,
                message: format!("expected {} fields, found {}", dim + 1, fields.len()),
            });
        }
        times.push(fields[0]);
        data.extend_from_slice(&fields[1..]);
    }
    FeatureTrajectory::from_flat(times, dim, data).map_err(|e| FormatError::Invalid(e.to_string()))
}

fn parse_row(line: &str, number: usize) -> Result<Vec<f64>, FormatError> {
    line.trim()
        .split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| FormatError::Csv { line: number, message: format!("`{}`: {e}", f.trim()) })
        })
        .collect()
}

const ISOCLINE_HEADER: &str = "component,level,vertex_index,x1,x2";

/// CSV with header `component,level,vertex_index,x1,x2`; `vertex_index`
/// restarts at 0 for every polyline.
pub fn isoclines_to_csv(isoclines: &[Isocline]) -> String {
    let mut out = format!("{ISOCLINE_HEADER}\n");
    for iso in isoclines {
        for line in &iso.polylines {
            for (i, p) in line.iter().enumerate() {
                writeln!(out, "{},{},{i},{},{}", iso.component, iso.level, p[0], p[1]).expect("writing to a String");
            }
        }
    }
    out
}

/// Inverse of [`isoclines_to_csv`]. Level sets with no polylines are not
/// represented in the CSV and so do not come back.
pub fn isoclines_from_csv(reader: impl BufRead) -> Result<Vec<Isocline>, FormatError> {
    let mut out: Vec<Isocline> = Vec::new();
    let mut lines = reader.lines().enumerate();
    match lines.next() {
        Some((_, Ok(h))) if h.trim() == ISOCLINE_HEADER => {}
        Some((_, Err(e))) => return Err(e.into()),
        _ => return Err(FormatError::Csv { line: 1, message: format!("header must be `{ISOCLINE_HEADER}`") }),
    }
    for (index, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f = parse_row(&line, index + 1)?;
        if f.len() != 5 || f[0].fract() != 0.0 || f[2].fract() != 0.0 || f[0] < 1.0 || f[2] < 0.0 {
            return Err(FormatError::Csv { line: index + 1, message: "malformed isocline row".into() });
        }
        let (component, level, vertex) = (f[0] as usize, f[1], f[2] as usize);
        let same_set = out.last().is_some_and(|iso| iso.component == component && iso.level.to_bits() == level.to_bits());
        if !same_set {
            out.push(Isocline { component, level, polylines: Vec::new() });
        }
        let iso = out.last_mut().expect("just pushed");
        if vertex == 0 {
            iso.polylines.push(Vec::new());
        }
        let Some(poly) = iso.polylines.last_mut().filter(|p| p.len() == vertex) else {
            return Err(FormatError::Csv { line: index + 1, message: format!("vertex_index {vertex} out of sequence") });
        };
        poly.push([f[3], f[4]]);
    }
    Ok(out)
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String, FormatError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text)
}

pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, FormatError> {
    Ok(serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn trajectory_csv_layout() {
        let traj = FeatureTrajectory::new(vec![0.002, 0.006], vec![vec![1.5, -0.1], vec![1e-20, 3.0]]).unwrap();
        let text = trajectory_to_csv(&traj, "x");
        assert_eq!(text, "t,x1,x2\n0.002,1.5,-0.1\n0.006,0.00000000000000000001,3\n");
        assert_eq!(trajectory_from_csv(text.as_bytes()).unwrap(), traj);
        assert!(trajectory_to_csv(&traj, "s").starts_with("t,s1,s2\n"));
    }

    #[test]
    fn trajectory_csv_errors() {
        assert!(matches!(trajectory_from_csv("".as_bytes()), Err(FormatError::Invalid(_))));
        assert!(matches!(trajectory_from_csv("x,y\n1,2\n".as_bytes()), Err(FormatError::Csv { line: 1, .. })));
        assert!(matches!(trajectory_from_csv("t,x1\n0,1\n1,2,3\n".as_bytes()), Err(FormatError::Csv { line: 3, .. })));
        assert!(matches!(trajectory_from_csv("t,x1\n0,abc\n".as_bytes()), Err(FormatError::Csv { line: 2, .. })));
        assert!(matches!(trajectory_from_csv("t,x1\n1,0\n0,1\n".as_bytes()), Err(FormatError::Invalid(_))));
    }

    #[test]
    fn isocline_csv_round_trip() {
        let iso = vec![
            Isocline { component: 1, level: -0.5, polylines: vec![vec![[0.0, 1.0], [0.5, 1.25]], vec![[2.0, 2.0], [3.0, 3.5], [2.0, 2.0]]] },
            Isocline { component: 2, level: 3.0, polylines: vec![vec![[1.0, -1.0], [1.5, -1.0]]] },
        ];
        let text = isoclines_to_csv(&iso);
        assert!(text.starts_with("component,level,vertex_index,x1,x2\n1,-0.5,0,0,1\n1,-0.5,1,0.5,1.25\n1,-0.5,0,2,2\n"));
        assert_eq!(isoclines_from_csv(text.as_bytes()).unwrap(), iso);
        assert!(isoclines_from_csv("component,level,vertex_index,x1,x2\n1,0,1,0,0\n".as_bytes()).is_err());
    }

    proptest! {
        #[test]
        fn csv_write_read_write_is_byte_identical(values in proptest::collection::vec(-1e6f64..1e6, 2..40)) {
            let n = values.len() / 2;
            let times: Vec<f64> = (0..n).map(|i| i as f64 * 0.004 + 0.008).collect();
            let traj = FeatureTrajectory::from_flat(times, 2, values[..2 * n].to_vec()).unwrap();
            let first = trajectory_to_csv(&traj, "x");
            let second = trajectory_to_csv(&trajectory_from_csv(first.as_bytes()).unwrap(), "x");
            prop_assert_eq!(first, second);
        }
    }
}
