//! Deterministic report emission: JSON-lines records with ordered keys and
//! plain-text summary tables. Identical inputs produce identical bytes.

use std::fmt::Write as _;

#[derive(Debug, Clone)]
pub enum JsonValue {
    Str(String),
    Int(i64),
    UInt(u64),
    Float(f64),
    Bool(bool),
}

impl From<&str> for JsonValue {
    fn from(v: &str) -> Self {
        JsonValue::Str(v.to_string())
    }
}

impl From<String> for JsonValue {
    fn from(v: String) -> Self {
        JsonValue::Str(v)
    }
}

impl From<f64> for JsonValue {
    fn from(v: f64) -> Self {
        JsonValue::Float(v)
    }
}

impl From<usize> for JsonValue {
    fn from(v: usize) -> Self {
        JsonValue::UInt(v as u64)
    }
}

impl From<u64> for JsonValue {
    fn from(v: u64) -> Self {
        JsonValue::UInt(v)
    }
}

impl From<bool> for JsonValue {
    fn from(v: bool) -> Self {
        JsonValue::Bool(v)
    }
}

fn escape(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\t' => out.push_str("\\t"),
            '\r' => out.push_str("\\r"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out.push('"');
}

/// A flat JSON object with insertion-ordered keys.
#[derive(Debug, Clone, Default)]
pub struct JsonRecord {
    fields: Vec<(String, JsonValue)>,
}

impl JsonRecord {
    pub fn new() -> Self {
        JsonRecord { fields: Vec::new() }
    }

    pub fn push(mut self, key: &str, value: impl Into<JsonValue>) -> Self {
        self.fields.push((key.to_string(), value.into()));
        self
    }

    pub fn to_line(&self) -> String {
        let mut out = String::from("{");
        for (i, (k, v)) in self.fields.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            escape(k, &mut out);
            out.push(':');
            match v {
                JsonValue::Str(s) => escape(s, &mut out),
                JsonValue::Int(n) => {
                    let _ = write!(out, "{n}");
                }
                JsonValue::UInt(n) => {
                    let _ = write!(out, "{n}");
                }
                JsonValue::Float(f) => {
                    if f.is_finite() {
                        let _ = write!(out, "{f}");
                    } else {
                        out.push_str("null");
                    }
                }
                JsonValue::Bool(b) => {
                    let _ = write!(out, "{b}");
                }
            }
        }
        out.push('}');
        out
    }
}

/// Fixed-width text table with a header rule.
pub fn text_table(headers: &[&str], rows: &[Vec<String>]) -> String {
    let cols = headers.len();
    let mut widths: Vec<usize> = headers.iter().map(|h| h.len()).collect();
    for row in rows {
        for (c, cell) in row.iter().enumerate().take(cols) {
            widths[c] = widths[c].max(cell.len());
        }
    }
    let mut out = String::new();
    for (c, h) in headers.iter().enumerate() {
        if c > 0 {
            out.push_str("  ");
        }
        let _ = write!(out, "{h:<width$}", width = widths[c]);
    }
    out.push('\n');
    for (c, w) in widths.iter().enumerate() {
        if c > 0 {
            out.push_str("  ");
        }
        out.push_str(&"-".repeat(*w));
    }
    out.push('\n');
    for row in rows {
        for (c, cell) in row.iter().enumerate().take(cols) {
            if c > 0 {
                out.push_str("  ");
            }
            let _ = write!(out, "{cell:<width$}", width = widths[c]);
        }
        out.push('\n');
    }
    out
}

/// Mean and population standard deviation (n divisor).
pub fn mean_and_pop_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}
