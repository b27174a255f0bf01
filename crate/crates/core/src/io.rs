//! CSV tables, dataset files and model files.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::ppca::PpcaModel;
use crate::Matrix;

/// Significant digits used for every floating-point CSV field.
pub const SIGNIFICANT_DIGITS: usize = 9;

/// C-style `%.9g`: shortest of fixed or scientific notation with nine significant
/// digits and trailing zeros removed. Non-finite values print as `inf`, `-inf`
/// and `nan`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let p = SIGNIFICANT_DIGITS;
    let sci = format!("{:.*e}", p - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= p as i32 {
        let mantissa = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{mantissa}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (p as i32 - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Column-named table written as a header row plus one row per record.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }

    pub fn rows(&self) -> &[Vec<String>] {
        &self.rows
    }

    pub fn push(&mut self, row: Vec<String>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::DimensionMismatch {
                context: "csv row",
                expected: self.header.len(),
                found: row.len(),
            });
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        self.write_to(fs::File::create(path)?)
    }

    pub fn render(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Formats a float cell.
pub fn cell(x: f64) -> String {
    format_float(x)
}

/// Formats an optional float cell; `None` is an empty field.
pub fn opt_cell(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

/// Reads a numeric CSV (rows = samples). A first row that does not parse as
/// numbers is taken as a header.
pub fn read_matrix(path: &Path) -> Result<Matrix> {
    let text = fs::read_to_string(path)?;
    parse_matrix(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut values = Vec::new();
    let mut cols = None;
    let mut nrows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let parsed: std::result::Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        let row = match parsed {
            Ok(row) => row,
            Err(_) if i == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("row {}: {e}", i + 1))),
        };
        match cols {
            None => cols = Some(row.len()),
            Some(c) if c != row.len() => {
                return Err(Error::Parse(format!("row {} has {} fields, expected {c}", i + 1, row.len())))
            }
            _ => {}
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset entry"));
        }
        values.extend(row);
        nrows += 1;
    }
    let cols = cols.ok_or(Error::Empty("dataset"))?;
    Ok(Matrix::from_row_slice(nrows, cols, &values))
}

/// Writes a dataset with columns `x1..xd`.
pub fn write_matrix(path: &Path, data: &Matrix) -> Result<()> {
    let mut table = CsvTable::new((1..=data.ncols()).map(|j| format!("x{j}")));
    for row in data.row_iter() {
        table.push(row.iter().map(|&v| format_float(v)).collect())?;
    }
    table.write(path)
}

pub fn read_model(path: &Path) -> Result<PpcaModel> {
    PpcaModel::from_json(&fs::read_to_string(path)?)
}

pub fn write_model(path: &Path, model: &PpcaModel) -> Result<()> {
    fs::write(path, model.to_json() + "\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;

    #[test]
    fn float_formatting_matches_printf_g() {
        let cases = [
            (1.25, "1.25"),
            (2.0, "2"),
            (0.0, "0"),
            (1.0 / 3.0, "0.333333333"),
            (4.486067977, "4.48606798"),
            (123456789.0, "123456789"),
            (1234567890.0, "1.23456789e+09"),
            (1e-5, "1e-05"),
            (0.0001, "0.0001"),
            (-2.5e-7, "-2.5e-07"),
            (1e100, "1e+100"),
            (f64::INFINITY, "inf"),
            (f64::NEG_INFINITY, "-inf"),
            (f64::NAN, "nan"),
            (999999999.5, "1e+09"),
        ];
        for (x, want) in cases {
            assert_eq!(format_float(x), want, "{x}");
        }
    }

    #[test]
    fn table_round_trip() {
        let mut t = CsvTable::new(["a", "b"]);
        t.push(vec![cell(1.5), opt_cell(None)]).unwrap();
        assert!(t.push(vec![cell(1.0)]).is_err());
        assert_eq!(t.render().unwrap(), "a,b\n1.5,\n");
    }

    #[test]
    fn matrix_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.csv");
        let m = dmatrix![1.0, -2.5; 3.25, 4e-6];
        write_matrix(&path, &m).unwrap();
        assert_eq!(read_matrix(&path).unwrap(), m);
        assert_eq!(parse_matrix("1,2\n3,4\n").unwrap(), dmatrix![1.0, 2.0; 3.0, 4.0]);
        assert!(parse_matrix("1,2\n3\n").is_err());
        assert!(parse_matrix("x1,x2\n").is_err());
        assert!(parse_matrix("1,2\nfoo,4\n").is_err());
    }
}
