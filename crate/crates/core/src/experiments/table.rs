//! CSV result tables with a JSON metadata line.
//!
//! ```text
//! # {"command":"trdist","config_hash":"…","seed":1234}
//! t,exact_d2,…
//! 0.4,0.2583…,…
//! ```

use std::io::{BufRead, Write};

use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ResultTable {
    pub metadata: Map<String, Value>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

/// Shortest text that parses back to the same `f64`.
pub fn cell(x: f64) -> String {
    x.to_string()
}

impl ResultTable {
    pub fn new(columns: &[&str]) -> Self {
        Self { metadata: Map::new(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn with_columns(columns: Vec<String>) -> Self {
        Self { metadata: Map::new(), columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn meta(&mut self, key: &str, value: impl Into<Value>) {
        self.metadata.insert(key.to_string(), value.into());
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Column `name` parsed as numbers.
    pub fn numbers(&self, name: &str) -> Result<Vec<f64>> {
        let i = self.column(name).ok_or_else(|| Error::InvalidArgument(format!("no column {name:?}")))?;
        self.rows
            .iter()
            .map(|r| r[i].parse().map_err(|_| Error::InvalidArgument(format!("non-numeric cell {:?}", r[i]))))
            .collect()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "# {}", Value::Object(self.metadata.clone()))?;
        let mut csv = csv::Writer::from_writer(w);
        csv.write_record(&self.columns)?;
        for r in &self.rows {
            csv.write_record(r)?;
        }
        csv.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("table output is UTF-8")
    }

    pub fn read_csv<R: BufRead>(mut r: R) -> Result<Self> {
        let mut first = String::new();
        r.read_line(&mut first)?;
        let json = first
            .trim_end()
            .strip_prefix("# ")
            .ok_or(Error::Parse { line: 1, msg: "missing metadata line".into() })?;
        let metadata = match serde_json::from_str(json) {
            Ok(Value::Object(m)) => m,
            _ => return Err(Error::Parse { line: 1, msg: "metadata is not a JSON object".into() }),
        };
        let mut csv = csv::Reader::from_reader(r);
        let columns = csv.headers()?.iter().map(str::to_string).collect();
        let rows = csv
            .records()
            .map(|rec| rec.map(|r| r.iter().map(str::to_string).collect()))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { metadata, columns, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_sorted_metadata() {
        let mut t = ResultTable::new(&["t", "value"]);
        t.meta("seed", 3);
        t.meta("command", "demo");
        t.push(vec![cell(0.1 + 0.2), cell(f64::NAN)]);
        t.push(vec![cell(1.0), cell(-2.5e-17)]);
        let text = t.to_csv_string();
        assert!(text.starts_with("# {\"command\":\"demo\",\"seed\":3}\nt,value\n"));
        let back = ResultTable::read_csv(text.as_bytes()).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.numbers("t").unwrap()[0], 0.1 + 0.2);
        assert!(back.numbers("value").unwrap()[0].is_nan());
        assert!(back.numbers("missing").is_err());
    }
}
