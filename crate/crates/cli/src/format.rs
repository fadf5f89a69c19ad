//! Output formatting: 17 significant digits for floats, RFC 4180 CSV.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::Failure;

/// `{:.16e}`, i.e. 17 significant digits.
pub fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn flag(v: bool) -> &'static str {
    if v {
        "true"
    } else {
        "false"
    }
}

/// Writes CSV rows to `path` when given, else to `out`.
pub fn write_csv(
    path: Option<&Path>,
    out: &mut dyn Write,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), Failure> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for row in rows {
            w.write_record(row)?;
        }
        w.flush()?;
    }
    match path {
        Some(p) => fs::write(p, &buf)?,
        None => out.write_all(&buf)?,
    }
    Ok(())
}

/// Pretty JSON followed by a newline.
pub fn json<T: Serialize>(value: &T) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

/// Whitespace-separated columns with a `#` header, for gnuplot.
pub fn dat(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = format!("# {}\n", header.join(" "));
    for row in rows {
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [1.0 / 3.0, std::f64::consts::PI * 1e-200, -2.5e300, 0.1 + 0.2] {
            assert_eq!(float(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn csv_quotes_fields_and_dat_has_header() {
        let mut out = Vec::new();
        let rows = vec![vec!["1".to_string(), "a,b".to_string()]];
        write_csv(None, &mut out, &["x", "y"], &rows).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "x,y\n1,\"a,b\"\n");
        assert_eq!(dat(&["x", "y"], &[vec!["1".into(), "2".into()]]), "# x y\n1 2\n");
    }
}
