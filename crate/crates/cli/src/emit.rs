//! CSV and JSONL serialization.
//!
//! Floats are written as `d.dddddddddddddddde±x` (17 significant digits) so
//! that parsing them back is bit-exact. Absent values are empty CSV fields or
//! JSON `null`.
//!
//! Both formats begin with the effective configuration: CSV as `# key = value`
//! comment lines before the header row, JSONL as a leading
//! `{"record":"config",...}` object. Result lines in JSONL carry
//! `"record":"result"`.

use std::io::{self, Write};

use crate::config::Format;
use crate::row::{ResultRow, Value, COLUMNS};

pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn cell_csv(v: &Value) -> String {
    match v {
        Value::Text(s) => s.clone(),
        Value::UInt(n) => n.to_string(),
        Value::Float(x) => format_float(*x),
        Value::Bool(b) => b.to_string(),
        Value::Absent => String::new(),
    }
}

fn cell_json(v: &Value) -> String {
    match v {
        Value::Text(s) => json_string(s),
        Value::UInt(n) => n.to_string(),
        Value::Float(x) => format_float(*x),
        Value::Bool(b) => b.to_string(),
        Value::Absent => "null".to_string(),
    }
}

/// One JSON object per row, keys in column order.
pub fn row_json(row: &ResultRow) -> String {
    let mut out = String::from("{\"record\":\"result\"");
    for (key, value) in row.iter() {
        out.push(',');
        out.push_str(&json_string(key));
        out.push(':');
        out.push_str(&cell_json(value));
    }
    out.push('}');
    out
}

pub fn write_csv<W: Write>(
    mut w: W,
    config: &serde_json::Value,
    rows: &[ResultRow],
) -> io::Result<()> {
    if let Some(map) = config.as_object() {
        for (key, value) in map {
            write!(w, "# {key} = {value}\r\n")?;
        }
    }
    let mut csv = csv::WriterBuilder::new()
        .terminator(csv::Terminator::CRLF)
        .from_writer(w);
    csv.write_record(COLUMNS)?;
    for row in rows {
        csv.write_record(row.iter().map(|(_, v)| cell_csv(v)))?;
    }
    csv.flush()
}

pub fn write_jsonl<W: Write>(
    mut w: W,
    config: &serde_json::Value,
    rows: &[ResultRow],
) -> io::Result<()> {
    writeln!(w, "{{\"record\":\"config\",\"config\":{config}}}")?;
    for row in rows {
        writeln!(w, "{}", row_json(row))?;
    }
    w.flush()
}

/// The full output document.
pub fn render(format: Format, config: &serde_json::Value, rows: &[ResultRow]) -> Vec<u8> {
    let mut buf = Vec::new();
    match format {
        Format::Csv => write_csv(&mut buf, config, rows),
        Format::Jsonl => write_jsonl(&mut buf, config, rows),
    }
    .expect("writing to memory cannot fail");
    buf
}
