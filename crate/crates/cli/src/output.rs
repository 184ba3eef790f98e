//! Record serialization: one JSON object per run, or a header plus one CSV row.
//! Floats are always written with 17 significant digits.

use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{CompactFormatter, Formatter};
use serde_json::{Map, Value};

pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

struct Sig17;

impl Formatter for Sig17 {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        w.write_all(fmt_f64(v).as_bytes())
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        self.write_f64(w, v as f64)
    }

    fn write_null<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        CompactFormatter.write_null(w)
    }
}

pub fn to_json<T: Serialize>(value: &T) -> io::Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Sig17);
    value.serialize(&mut ser).map_err(io::Error::other)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub command: &'static str,
    pub version: &'static str,
    /// Flags of the run, under their flag names.
    pub params: Value,
    pub result: Option<Value>,
    pub error_estimate: Option<f64>,
    pub error: Option<String>,
    pub exit_code: i32,
    pub wall_time_s: f64,
    pub seed: Option<u64>,
    /// All times are in the Brownian clock of the driver pair.
    pub time_unit: &'static str,
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    let key = |k: &str| {
        if prefix.is_empty() {
            k.to_string()
        } else {
            format!("{prefix}.{k}")
        }
    };
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                flatten(&key(k), v, out);
            }
        }
        Value::Array(a) => {
            for (i, v) in a.iter().enumerate() {
                flatten(&key(&i.to_string()), v, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), String::new())),
        Value::Bool(b) => out.push((prefix.to_string(), b.to_string())),
        Value::String(s) => out.push((prefix.to_string(), s.clone())),
        Value::Number(n) => {
            let text = match (n.as_u64(), n.as_i64(), n.as_f64()) {
                (Some(u), _, _) if !n.is_f64() => u.to_string(),
                (_, Some(i), _) if !n.is_f64() => i.to_string(),
                (_, _, Some(f)) => fmt_f64(f),
                _ => n.to_string(),
            };
            out.push((prefix.to_string(), text));
        }
    }
}

pub fn record_csv(rec: &RunRecord) -> io::Result<String> {
    let value = serde_json::to_value(rec).map_err(io::Error::other)?;
    let mut cells = Vec::new();
    flatten("", &value, &mut cells);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(cells.iter().map(|c| c.0.as_str()))?;
    w.write_record(cells.iter().map(|c| c.1.as_str()))?;
    let bytes = w
        .into_inner()
        .map_err(|e| io::Error::other(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv writes UTF-8"))
}

/// Writes `text` to `out` or stdout.
pub fn emit(text: &str, out: Option<&Path>) -> io::Result<()> {
    match out {
        Some(path) => {
            let mut f = File::create(path)?;
            f.write_all(text.as_bytes())?;
            if !text.ends_with('\n') {
                f.write_all(b"\n")?;
            }
            Ok(())
        }
        None => {
            let mut s = io::stdout().lock();
            writeln!(s, "{}", text.trim_end_matches('\n'))
        }
    }
}

/// Serializes a struct into a JSON object value.
pub fn object<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or_else(|_| Value::Object(Map::new()))
}
