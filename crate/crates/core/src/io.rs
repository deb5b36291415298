//! CSV readers and writers for sample records and sweep tables.

use std::io::{BufRead, Write};

use num_complex::Complex64;

use crate::error::{Result, RsfError};

/// Writes `index,t_s,<name>_re,<name>_im,...`. Floats use the shortest
/// representation that parses back to the same bits.
pub fn write_samples_csv<W: Write>(
    mut w: W,
    t0_s: f64,
    delta_s: f64,
    columns: &[(&str, &[Complex64])],
) -> Result<()> {
    let n = columns.first().map_or(0, |c| c.1.len());
    if columns.iter().any(|c| c.1.len() != n) {
        return Err(RsfError::validation("columns", "sample columns differ in length"));
    }
    let mut header = vec!["index".to_string(), "t_s".to_string()];
    for (name, _) in columns {
        header.push(format!("{name}_re"));
        header.push(format!("{name}_im"));
    }
    writeln!(w, "{}", header.join(","))?;
    for i in 0..n {
        write!(w, "{i},{:e}", t0_s + i as f64 * delta_s)?;
        for (_, c) in columns {
            write!(w, ",{:e},{:e}", c[i].re, c[i].im)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a file written by [`write_samples_csv`] back into named columns.
pub fn read_samples_csv<R: BufRead>(r: R) -> Result<Vec<(String, Vec<Complex64>)>> {
    let table = read_table(r)?;
    let mut out = Vec::new();
    let names = &table.header;
    let mut j = 2;
    while j + 1 < names.len() {
        let name = names[j]
            .strip_suffix("_re")
            .ok_or_else(|| RsfError::validation("header", format!("column {} is not a _re column", names[j])))?;
        if names[j + 1] != format!("{name}_im") {
            return Err(RsfError::validation("header", format!("missing {name}_im after {name}_re")));
        }
        let col = table.rows.iter().map(|row| Complex64::new(row[j], row[j + 1])).collect();
        out.push((name.to_string(), col));
        j += 2;
    }
    Ok(out)
}

/// Numeric CSV with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| RsfError::validation("column", format!("no column named {name}")))?;
        Ok(self.rows.iter().map(|r| r[j]).collect())
    }
}

pub fn read_table<R: BufRead>(r: R) -> Result<Table> {
    let mut lines = r.lines();
    let header: Vec<String> = match lines.next() {
        Some(l) => l?.split(',').map(|s| s.trim().to_string()).collect(),
        None => return Err(RsfError::validation("csv", "empty file")),
    };
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| RsfError::validation("csv", format!("line {}: {e}", i + 2)))?;
        if row.len() != header.len() {
            return Err(RsfError::validation(
                "csv",
                format!("line {} has {} fields, header has {}", i + 2, row.len(), header.len()),
            ));
        }
        rows.push(row);
    }
    Ok(Table { header, rows })
}
