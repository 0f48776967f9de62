//! Small text/CSV table builder for report output.

use crate::error::Result;

/// Column-aligned table: first column left-aligned, the rest right-aligned,
/// which suits label + numbers layouts.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    headers: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(headers: Vec<S>) -> Self {
        Table {
            headers: headers.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row<S: Into<String>>(&mut self, row: Vec<S>) {
        let row: Vec<String> = row.into_iter().map(Into::into).collect();
        assert_eq!(row.len(), self.headers.len(), "ragged table row");
        self.rows.push(row);
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Monospace rendering with a rule under the header.
    pub fn render(&self) -> String {
        let n = self.headers.len();
        let mut widths: Vec<usize> = self.headers.iter().map(String::len).collect();
        for row in &self.rows {
            for (i, cell) in row.iter().enumerate() {
                widths[i] = widths[i].max(cell.len());
            }
        }
        let mut out = String::new();
        let emit = |cells: &[String], out: &mut String| {
            for (i, cell) in cells.iter().enumerate() {
                if i > 0 {
                    out.push_str("  ");
                }
                if i == 0 {
                    out.push_str(&format!("{cell:<width$}", width = widths[i]));
                } else {
                    out.push_str(&format!("{cell:>width$}", width = widths[i]));
                }
            }
            while out.ends_with(' ') {
                out.pop();
            }
            out.push('\n');
        };
        emit(&self.headers, &mut out);
        let rule: usize = widths.iter().sum::<usize>() + 2 * (n - 1);
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        for row in &self.rows {
            emit(row, &mut out);
        }
        out
    }

    /// CSV rendering with standard quoting.
    pub fn to_csv(&self) -> Result<String> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record(&self.headers)?;
        for row in &self.rows {
            writer.write_record(row)?;
        }
        let bytes = writer.into_inner().map_err(|e| {
            crate::error::Error::Validation(format!("csv buffer error: {e}"))
        })?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// `mean ± std` with missing values spelled out.
pub fn fmt_mean_std(mean: Option<f64>, std: Option<f64>, precision: usize) -> String {
    match (mean, std) {
        (Some(m), Some(s)) => format!("{m:.precision$} ± {s:.precision$}"),
        (Some(m), None) => format!("{m:.precision$}"),
        (None, _) => "n/a".to_string(),
    }
}

pub fn fmt_opt(value: Option<f64>, precision: usize) -> String {
    value.map_or_else(|| "n/a".to_string(), |v| format!("{v:.precision$}"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_aligned_columns() {
        let mut t = Table::new(vec!["set", "ba", "mae"]);
        t.push_row(vec!["all", "0.61", "129.30"]);
        t.push_row(vec!["landmarks_3d", "0.59", "131.00"]);
        let text = t.render();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        // Numeric columns right-aligned: the shorter value is padded left.
        assert!(lines[2].starts_with("all "));
        assert!(lines[2].contains(" 0.61"));
        assert!(lines[1].chars().all(|c| c == '-'));
    }

    #[test]
    fn csv_quotes_embedded_commas() {
        let mut t = Table::new(vec!["name", "value"]);
        t.push_row(vec!["a,b", "1"]);
        let csv = t.to_csv().unwrap();
        assert_eq!(csv, "name,value\n\"a,b\",1\n");
    }

    #[test]
    fn formats_missing_values() {
        assert_eq!(fmt_mean_std(Some(0.5), Some(0.01), 2), "0.50 ± 0.01");
        assert_eq!(fmt_mean_std(Some(0.5), None, 2), "0.50");
        assert_eq!(fmt_mean_std(None, None, 2), "n/a");
        assert_eq!(fmt_opt(None, 3), "n/a");
    }
}
