//! Minimal CSV writer: comma separated, header row, LF line endings and
//! floats printed with 17 significant digits.

use std::fmt::Write as _;
use std::path::Path;

/// A number formatted so that it parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Clone, Debug, Default)]
pub struct CsvTable {
    header: Vec<String>,
    body: String,
    rows: usize,
}

pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl CsvTable {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            body: String::new(),
            rows: 0,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "row width differs from header"
        );
        for (k, cell) in row.into_iter().enumerate() {
            if k > 0 {
                self.body.push(',');
            }
            match cell {
                Cell::Float(v) => self.body.push_str(&fmt_f64(v)),
                Cell::Int(v) => {
                    let _ = write!(self.body, "{v}");
                }
                Cell::Text(s) => self.body.push_str(&s),
            }
        }
        self.body.push('\n');
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn render(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        out.push_str(&self.body);
        out
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        std::fs::write(path, self.render())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v);
            let digits = s.split('e').next().unwrap().replace(['-', '.'], "");
            assert_eq!(digits.len(), 17);
        }
    }

    #[test]
    fn table_layout() {
        let mut t = CsvTable::new(["t", "n", "name"]);
        t.push(vec![0.5.into(), 3usize.into(), "u".into()]);
        assert_eq!(t.render(), "t,n,name\n5.0000000000000000e-1,3,u\n");
        assert_eq!(t.rows(), 1);
    }
}
