use serde_json::{Map, Number, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Real(f64),
    Int(i64),
    Text(String),
    Bool(bool),
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Real(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
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

/// Fifteen significant digits.
pub fn fmt_real(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.14e}")
    }
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Real(v) => fmt_real(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Real(v) => fmt_real(*v)
                .parse::<f64>()
                .ok()
                .and_then(Number::from_f64)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            Cell::Int(v) => Value::from(*v),
            Cell::Bool(v) => Value::Bool(*v),
            Cell::Text(s) => Value::String(s.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.header.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        self.header.iter().zip(row).map(|(h, c)| (h.to_string(), c.json())).collect();
                    Value::Object(obj)
                })
                .collect(),
        )
    }
}

/// Command result: a main table, an optional events side-table, and metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: &'static str,
    pub meta: Vec<(&'static str, Cell)>,
    pub table: Table,
    pub side: Option<(&'static str, Table)>,
}

impl Report {
    pub fn new(command: &'static str, table: Table) -> Self {
        Self { command, meta: Vec::new(), table, side: None }
    }

    pub fn meta(mut self, key: &'static str, value: impl Into<Cell>) -> Self {
        self.meta.push((key, value.into()));
        self
    }

    pub fn json(&self) -> String {
        let mut obj = Map::new();
        obj.insert("command".into(), Value::String(self.command.into()));
        for (k, v) in &self.meta {
            obj.insert(k.to_string(), v.json());
        }
        obj.insert("rows".into(), self.table.to_json());
        if let Some((name, side)) = &self.side {
            obj.insert(name.to_string(), side.to_json());
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(obj)).expect("JSON values serialize");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_digits() {
        assert_eq!(fmt_real(4.0), "4.00000000000000e0");
        assert_eq!(fmt_real(-0.1), "-1.00000000000000e-1");
        assert_eq!(fmt_real(f64::NAN), "nan");
    }

    #[test]
    fn csv_and_json_share_fields() {
        let mut t = Table::new(vec!["index", "re", "note"]);
        t.push(vec![Cell::from(0usize), Cell::from(1.5), Cell::from("a,b")]);
        assert_eq!(t.to_csv(), "index,re,note\n0,1.50000000000000e0,\"a,b\"\n");
        let j = t.to_json();
        assert_eq!(j[0]["re"], Value::from(1.5));
        assert_eq!(j[0]["note"], Value::from("a,b"));
    }
}
