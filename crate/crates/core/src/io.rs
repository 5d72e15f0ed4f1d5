//! Plain-text matrix files: a `rows cols` header line followed by `rows` lines of
//! whitespace-separated decimals. Priors use the same format with one column.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::mechanism::Mechanism;
use crate::prior::JointPrior;

/// Rows within this distance of summing to one are renormalized on load.
pub const LOAD_ROW_TOL: f64 = 1e-6;

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or(Error::Parse { line: 1, msg: "missing header".into() })?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Parse { line: hline, msg: format!("bad header: {e}") })?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Parse { line: hline, msg: "header must be `rows cols`".into() });
    };
    if rows == 0 || cols == 0 {
        return Err(Error::Parse { line: hline, msg: "zero dimension".into() });
    }
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (ln, line) in lines {
        if seen == rows {
            return Err(Error::Parse { line: ln, msg: format!("more than {rows} rows") });
        }
        let before = data.len();
        for tok in line.split_whitespace() {
            let v: f64 = tok
                .parse()
                .map_err(|_| Error::Parse { line: ln, msg: format!("not a number: {tok:?}") })?;
            data.push(v);
        }
        if data.len() - before != cols {
            return Err(Error::Parse {
                line: ln,
                msg: format!("expected {cols} values, found {}", data.len() - before),
            });
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Dimension(format!("header declares {rows} rows, found {seen}")));
    }
    Ok(Matrix::from_vec(rows, cols, data))
}

pub fn format_matrix(m: &Matrix) -> String {
    let mut s = format!("{} {}\n", m.rows(), m.cols());
    for row in m.iter_rows() {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

/// Validates a parsed matrix as a mechanism, renormalizing rows within `LOAD_ROW_TOL`.
pub fn mechanism_from_matrix(mut m: Matrix) -> Result<Mechanism> {
    for r in 0..m.rows() {
        let row = m.row_mut(r);
        if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::Domain(format!("row {r} has a negative or non-finite entry")));
        }
        let s: f64 = row.iter().sum();
        if (s - 1.0).abs() > LOAD_ROW_TOL {
            return Err(Error::NotStochastic { row: r, sum: s });
        }
        row.iter_mut().for_each(|v| *v /= s);
    }
    Mechanism::new(m)
}

pub fn read_mechanism(path: impl AsRef<Path>) -> Result<Mechanism> {
    mechanism_from_matrix(parse_matrix(&std::fs::read_to_string(path)?)?)
}

pub fn write_mechanism(path: impl AsRef<Path>, mech: &Mechanism) -> Result<()> {
    std::fs::write(path, format_matrix(mech.matrix()))?;
    Ok(())
}

pub fn prior_from_matrix(m: Matrix) -> Result<JointPrior> {
    if m.cols() != 1 {
        return Err(Error::Dimension(format!("prior file must have one column, found {}", m.cols())));
    }
    let v = m.as_slice().to_vec();
    if let Some(r) = v.iter().position(|x| !x.is_finite() || *x < 0.0) {
        return Err(Error::Domain(format!("entry {r} is negative or not finite")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > LOAD_ROW_TOL {
        return Err(Error::NotStochastic { row: 0, sum: s });
    }
    JointPrior::from_weights(v)
}

pub fn read_prior(path: impl AsRef<Path>) -> Result<JointPrior> {
    prior_from_matrix(parse_matrix(&std::fs::read_to_string(path)?)?)
}

pub fn write_prior(path: impl AsRef<Path>, prior: &JointPrior) -> Result<()> {
    let m = Matrix::from_vec(prior.len(), 1, prior.probs().to_vec());
    std::fs::write(path, format_matrix(&m))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_round_trips() {
        let m = parse_matrix("2 2\n0.25 0.75\n1 0\n").unwrap();
        assert_eq!(m.row(0), &[0.25, 0.75]);
        assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
    }

    #[test]
    fn rejects_malformed_text() {
        assert!(matches!(parse_matrix(""), Err(Error::Parse { .. })));
        assert!(matches!(parse_matrix("2 2\n0.5 0.5\n"), Err(Error::Dimension(_))));
        assert!(matches!(parse_matrix("1 2\n0.5\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_matrix("1 2\n0.5 x\n"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_matrix("1 2 3\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn near_stochastic_rows_are_renormalized() {
        let m = parse_matrix("2 2\n0.5 0.5000005\n0.3 0.7\n").unwrap();
        let q = mechanism_from_matrix(m).unwrap();
        assert!((q.row(0).iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn off_rows_report_their_index() {
        let m = parse_matrix("3 2\n0.5 0.5\n0.5 0.5\n0.5 0.4\n").unwrap();
        match mechanism_from_matrix(m).unwrap_err() {
            Error::NotStochastic { row, sum } => {
                assert_eq!(row, 2);
                assert!((sum - 0.9).abs() < 1e-12);
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn prior_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.mat");
        let p = JointPrior::new(vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        write_prior(&path, &p).unwrap();
        let back = read_prior(&path).unwrap();
        for (a, b) in back.probs().iter().zip(p.probs()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(prior_from_matrix(parse_matrix("2 1\n0.5\n0.6\n").unwrap()).is_err());
        assert!(prior_from_matrix(parse_matrix("1 2\n0.5 0.5\n").unwrap()).is_err());
    }
}
