//! Column-oriented time series storage with CSV export.

use std::io::{self, Write};

/// Named channels sampled on a shared time base. Tests read channels back
/// for envelope checks; artifacts serialize to CSV with fixed six-decimal
/// formatting so identical runs produce identical bytes.
pub struct TimeSeries {
    names: Vec<String>,
    time_s: Vec<f64>,
    columns: Vec<Vec<f64>>,
}

impl TimeSeries {
    pub fn new<S: Into<String>>(names: Vec<S>) -> Self {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        let columns = names.iter().map(|_| Vec::new()).collect();
        Self {
            names,
            time_s: Vec::new(),
            columns,
        }
    }

    pub fn push(&mut self, t_s: f64, row: &[f64]) {
        assert_eq!(row.len(), self.names.len(), "one value per channel");
        self.time_s.push(t_s);
        for (column, &value) in self.columns.iter_mut().zip(row) {
            column.push(value);
        }
    }

    pub fn len(&self) -> usize {
        self.time_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time_s.is_empty()
    }

    pub fn time(&self) -> &[f64] {
        &self.time_s
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        let index = self.names.iter().position(|n| n == name)?;
        Some(&self.columns[index])
    }

    /// Header `t_s,<names...>`, each value printed with six decimals.
    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        write!(out, "t_s")?;
        for name in &self.names {
            write!(out, ",{name}")?;
        }
        writeln!(out)?;
        for (i, t) in self.time_s.iter().enumerate() {
            write!(out, "{t:.6}")?;
            for column in &self.columns {
                write!(out, ",{:.6}", column[i])?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buffer = Vec::new();
        self.write_csv(&mut buffer)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buffer).expect("CSV output is ASCII")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn channels_read_back_in_order() {
        let mut ts = TimeSeries::new(vec!["f_hz", "p_mw"]);
        ts.push(0.0, &[50.0, 300.0]);
        ts.push(0.01, &[49.9, 301.5]);
        assert_eq!(ts.len(), 2);
        assert_eq!(ts.column("p_mw").unwrap(), &[300.0, 301.5]);
        assert_eq!(ts.column("missing"), None);
        assert_eq!(ts.time(), &[0.0, 0.01]);
    }

    #[test]
    fn csv_uses_fixed_decimals() {
        let mut ts = TimeSeries::new(vec!["x"]);
        ts.push(0.0, &[1.0 / 3.0]);
        assert_eq!(ts.to_csv_string(), "t_s,x\n0.000000,0.333333\n");
    }

    #[test]
    #[should_panic(expected = "one value per channel")]
    fn row_width_is_enforced() {
        let mut ts = TimeSeries::new(vec!["a", "b"]);
        ts.push(0.0, &[1.0]);
    }
}
