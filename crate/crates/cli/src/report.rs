//! Deterministic report bodies. Run metadata lives only in the header.

use serde_json::{json, Map, Value};

#[derive(Copy, Clone, Debug)]
pub enum Format {
    Csv,
    Json,
}

/// Resolved configuration of a run, in insertion order.
pub struct Header {
    entries: Vec<(String, Value)>,
}

impl Header {
    pub fn new(command: &str, params: Vec<(String, Value)>) -> Self {
        let mut entries = vec![("command".to_string(), json!(command))];
        entries.extend(params);
        Header { entries }
    }

    pub fn push(&mut self, key: &str, value: Value) {
        self.entries.push((key.to_string(), value));
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        for (k, v) in &self.entries {
            m.insert(k.clone(), v.clone());
        }
        Value::Object(m)
    }
}

/// Rows of scalar cells, plus an optional structured document for JSON.
pub struct Table {
    columns: Vec<String>,
    rows: Vec<Vec<Value>>,
    pub document: Option<Value>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            document: None,
        }
    }

    pub fn row(&mut self, cells: Vec<Value>) {
        debug_assert_eq!(cells.len(), self.columns.len());
        self.rows.push(cells);
    }
}

fn cell(v: &Value) -> String {
    let s = match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

pub fn emit(header: &Header, table: &Table, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => {
            let mut out = String::new();
            for (k, v) in &header.entries {
                out.push_str(&format!("# {k}={}\n", cell(v)));
            }
            out.push_str(&table.columns.join(","));
            out.push('\n');
            for r in &table.rows {
                let cells: Vec<String> = r.iter().map(cell).collect();
                out.push_str(&cells.join(","));
                out.push('\n');
            }
            out.into_bytes()
        }
        Format::Json => {
            let body = match &table.document {
                Some(doc) => doc.clone(),
                None => {
                    let rows: Vec<Value> = table
                        .rows
                        .iter()
                        .map(|r| {
                            let mut m = Map::new();
                            for (c, v) in table.columns.iter().zip(r) {
                                m.insert(c.clone(), v.clone());
                            }
                            Value::Object(m)
                        })
                        .collect();
                    Value::Array(rows)
                }
            };
            let mut text = serde_json::to_string_pretty(&json!({ "header": header.to_json(), "body": body }))
                .expect("json serializes");
            text.push('\n');
            text.into_bytes()
        }
    }
}
