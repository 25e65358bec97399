//! Plain-text CSV emission and parsing.
//!
//! All numbers are written with 17 significant digits, enough to make
//! `f64 → text → f64` the identity, so re-running a deterministic pipeline
//! reproduces its output files byte for byte.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Shortest text that still round-trips the exact binary value.
pub fn format_full(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a two-column CSV with the given header pair.
pub fn write_two_column_csv(
    path: &Path,
    header: (&str, &str),
    col1: &[f64],
    col2: &[f64],
) -> Result<()> {
    if col1.len() != col2.len() {
        return Err(Error::InvalidParameter(format!(
            "column lengths differ: {} vs {}",
            col1.len(),
            col2.len()
        )));
    }
    let mut out = String::with_capacity(32 * (col1.len() + 1));
    out.push_str(header.0);
    out.push(',');
    out.push_str(header.1);
    out.push('\n');
    for (a, b) in col1.iter().zip(col2) {
        out.push_str(&format_full(*a));
        out.push(',');
        out.push_str(&format_full(*b));
        out.push('\n');
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(out.as_bytes())?;
    Ok(())
}

/// Read a two-column CSV written by [`write_two_column_csv`].
/// Returns the header pair and both columns.
pub fn read_two_column_csv(path: &Path) -> Result<((String, String), Vec<f64>, Vec<f64>)> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter(format!("{}: empty CSV", path.display())))?;
    let header = split_two(header_line, path, 1)?;
    let mut col1 = Vec::new();
    let mut col2 = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (a, b) = split_two(line, path, i + 2)?;
        col1.push(parse_number(&a, path, i + 2)?);
        col2.push(parse_number(&b, path, i + 2)?);
    }
    Ok(((header.0, header.1), col1, col2))
}

/// Convergence-report rows plus footer, as parsed back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportCsv {
    /// (epsilon, err_plain, err_corrected) per surviving case.
    pub rows: Vec<(f64, f64, f64)>,
    /// Footer entries in file order, e.g. ("rate_plain", 1.02).
    pub footer: Vec<(String, f64)>,
}

/// Read a report CSV: header `epsilon,err_plain,err_corrected`, data rows,
/// then two-field footer rows (`rate_plain`, `rate_corrected`, `fitted_constant`).
pub fn read_report_csv(path: &Path) -> Result<ReportCsv> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidParameter(format!("{}: empty report", path.display())))?;
    if header.trim() != "epsilon,err_plain,err_corrected" {
        return Err(Error::InvalidParameter(format!(
            "{}: unexpected report header `{header}`",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    let mut footer = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match fields.as_slice() {
            [a, b, c] => rows.push((
                parse_number(a, path, i + 1)?,
                parse_number(b, path, i + 1)?,
                parse_number(c, path, i + 1)?,
            )),
            [name, v] => footer.push((name.to_string(), parse_number(v, path, i + 1)?)),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "{}: line {}: expected 2 or 3 fields",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(ReportCsv { rows, footer })
}

fn split_two(line: &str, path: &Path, lineno: usize) -> Result<(String, String)> {
    line.split_once(',')
        .map(|(a, b)| (a.to_string(), b.to_string()))
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "{}: line {lineno}: expected two comma-separated fields",
                path.display()
            ))
        })
}

fn parse_number(token: &str, path: &Path, lineno: usize) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|e| {
        Error::InvalidParameter(format!(
            "{}: line {lineno}: bad number `{token}`: {e}",
            path.display()
        ))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn formatting_round_trips_representative_values() {
        for v in [
            0.0,
            1.0,
            -1.0,
            std::f64::consts::PI,
            3.0f64.sqrt(),
            1.6,
            0.3 * std::f64::consts::PI,
            1e-300,
            -2.2250738585072014e-308, // smallest normal
            9.87e290,
        ] {
            let back: f64 = format_full(v).parse().unwrap();
            assert_eq!(back.to_bits(), v.to_bits(), "value {v}");
        }
    }

    #[test]
    fn csv_round_trips_columns_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.csv");
        let xs: Vec<f64> = (0..100).map(|i| i as f64 * 0.098_174_770_424_681).collect();
        let vs: Vec<f64> = xs.iter().map(|x| (x.sin() * 1.7).exp()).collect();
        write_two_column_csv(&path, ("x", "value"), &xs, &vs).unwrap();
        let ((h1, h2), xs2, vs2) = read_two_column_csv(&path).unwrap();
        assert_eq!((h1.as_str(), h2.as_str()), ("x", "value"));
        assert_eq!(xs, xs2);
        assert_eq!(vs, vs2);
    }

    #[test]
    fn mismatched_columns_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        let r = write_two_column_csv(&path, ("x", "y"), &[1.0, 2.0], &[1.0]);
        assert!(r.is_err());
    }

    #[test]
    fn report_parsing_separates_rows_and_footer() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.csv");
        let text = "epsilon,err_plain,err_corrected\n\
                    1.25e-1,4.4e-2,1.1e-2\n\
                    6.25e-2,2.2e-2,3.0e-3\n\
                    rate_plain,1.01\n\
                    rate_corrected,1.9\n\
                    fitted_constant,1.732\n";
        std::fs::write(&path, text).unwrap();
        let report = read_report_csv(&path).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert_eq!(report.rows[0].0, 0.125);
        assert_eq!(report.footer.len(), 3);
        assert_eq!(report.footer[0], ("rate_plain".to_string(), 1.01));
    }

    proptest! {
        /// 17 significant digits uniquely identify any finite double.
        #[test]
        fn formatting_round_trips_any_finite_double(v in prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO) {
            let back: f64 = format_full(v).parse().unwrap();
            prop_assert_eq!(back.to_bits(), v.to_bits());
        }
    }
}
