//! Fixed-format CSV tables.

use std::io::Write;
use std::path::Path;

use crate::error::{CliError, CliResult};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// Twelve significant digits, so identical runs give identical bytes.
pub fn format_number(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.11e}")
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => format_number(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    /// Printed to stdout when no output directory is given.
    pub brief: bool,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            brief: false,
        }
    }

    pub fn brief(mut self) -> Self {
        self.brief = true;
        self
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn write<W: Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("utf-8")
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }
}

/// Tables and notes from one command.
#[derive(Clone, Debug, Default)]
pub struct Report {
    pub tables: Vec<Table>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    /// Brief tables as `# name` blocks, then notes.
    pub fn print<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for t in self.tables.iter().filter(|t| t.brief) {
            writeln!(out, "# {}", t.name)?;
            out.write_all(t.to_csv().as_bytes())?;
        }
        for n in &self.notes {
            writeln!(out, "# note: {n}")?;
        }
        Ok(())
    }

    /// One CSV per table plus `notes.txt` and a gnuplot script.
    pub fn save(&self, dir: &Path) -> CliResult<()> {
        let io = |file: &Path, source| CliError::Write {
            file: file.to_path_buf(),
            source,
        };
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        for t in &self.tables {
            let file = dir.join(format!("{}.csv", t.name));
            std::fs::write(&file, t.to_csv()).map_err(|e| io(&file, e))?;
        }
        if !self.notes.is_empty() {
            let file = dir.join("notes.txt");
            std::fs::write(&file, self.notes.join("\n") + "\n").map_err(|e| io(&file, e))?;
        }
        let file = dir.join("plot.gp");
        std::fs::write(&file, self.gnuplot()).map_err(|e| io(&file, e))?;
        Ok(())
    }

    /// Line plots of every table whose first column is time.
    pub fn gnuplot(&self) -> String {
        let mut s = String::from("set datafile separator ','\nset key autotitle columnhead\nset xlabel 't'\n");
        for t in self.tables.iter().filter(|t| t.columns.first().is_some_and(|c| c == "t")) {
            let curves: Vec<String> = (2..=t.columns.len())
                .map(|k| format!("'{}.csv' using 1:{k} with lines", t.name))
                .collect();
            s += &format!("set title '{}'\nplot {}\npause -1\n", t.name, curves.join(", \\\n     "));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_digits() {
        assert_eq!(format_number(10.0 / 11.0), "9.09090909091e-1");
        assert_eq!(format_number(0.0), "0.00000000000e0");
        let mut t = Table::new("x", &["a", "b"]);
        t.push(vec![1.5.into(), "ok".into()]);
        assert_eq!(t.to_csv(), "a,b\n1.50000000000e0,ok\n");
    }
}
