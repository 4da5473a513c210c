//! Numeric tables and their CSV form.
//!
//! Values are written with 17 significant digits, which round-trips every
//! finite `f64` exactly. Comment lines start with `#`.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Table {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row length does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }
}

pub fn format_value(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// CSV text for `table`, preceded by one `# ` line per entry of `comments`.
pub fn to_csv(table: &Table, comments: &[String]) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    for c in comments {
        writeln!(buf, "# {c}").expect("write to memory");
    }
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(buf);
    let map = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(&table.columns).map_err(map)?;
    for row in &table.rows {
        if row.len() != table.columns.len() {
            return Err(CliError::Io(format!(
                "table is not rectangular: row of {} values under {} columns",
                row.len(),
                table.columns.len()
            )));
        }
        w.write_record(row.iter().map(|&x| format_value(x))).map_err(map)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

pub fn emit_csv(table: &Table, comments: &[String], path: &Path) -> Result<(), CliError> {
    let bytes = to_csv(table, comments)?;
    fs::write(path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

pub fn parse_csv(text: &[u8]) -> Result<Table, CliError> {
    let mut r = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text);
    let map = |e: csv::Error| CliError::Io(e.to_string());
    let columns = r.headers().map_err(map)?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(map)?;
        let row = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| CliError::Io(format!("`{s}`: {e}"))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    Ok(Table { columns, rows })
}

pub fn read_csv(path: &Path) -> Result<Table, CliError> {
    let text = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    parse_csv(&text)
}

/// Gnuplot script plotting every column against the first.
pub fn gnuplot_stub(table: &Table, csv_name: &str) -> String {
    let mut s = String::new();
    s.push_str("set datafile separator \",\"\n");
    s.push_str("set datafile commentschars \"#\"\n");
    s.push_str("set key autotitle columnhead\n");
    if let Some(x) = table.columns.first() {
        s.push_str(&format!("set xlabel \"{x}\"\n"));
    }
    if table.columns.len() > 1 {
        s.push_str(&format!(
            "plot for [i=2:{}] \"{csv_name}\" using 1:i with linespoints\n",
            table.columns.len()
        ));
    }
    s
}
