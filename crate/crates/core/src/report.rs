//! Regression-diffable JSON reports.
//!
//! A report is `{command|claim, config, per_k, result, diagnostics}`.
//! Floating-point numbers are written with 17 significant digits in
//! scientific notation, so that a value always round-trips and two runs
//! that agree bit for bit produce identical bytes. Non-finite numbers
//! become `null`. Object keys keep insertion order.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};

/// Run metadata embedded in every report.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub versions: Vec<(String, String)>,
    pub k_schedule: Vec<usize>,
    /// `(name, fill distance)` for each point cloud used.
    pub fill_distances: Vec<(String, f64)>,
    pub precision_escalations: usize,
    pub seed: u64,
    pub timestamp: Option<String>,
}

impl Diagnostics {
    pub fn new(k_schedule: Vec<usize>) -> Self {
        Diagnostics {
            versions: vec![("plurilab".into(), crate::VERSION.into())],
            k_schedule,
            fill_distances: vec![],
            precision_escalations: crate::precision_escalations(),
            seed: 0,
            timestamp: None,
        }
    }
}

/// Either a command name or a verified claim heads the report.
#[derive(Clone, Debug, PartialEq)]
pub enum Heading {
    Command(String),
    Claim(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub heading: Heading,
    pub config: Value,
    pub per_k: Value,
    pub result: Value,
    pub diagnostics: Diagnostics,
}

impl Report {
    pub fn to_value(&self) -> Result<Value> {
        let mut m = Map::new();
        match &self.heading {
            Heading::Command(c) => m.insert("command".into(), Value::String(c.clone())),
            Heading::Claim(c) => m.insert("claim".into(), Value::String(c.clone())),
        };
        m.insert("config".into(), self.config.clone());
        m.insert("per_k".into(), self.per_k.clone());
        m.insert("result".into(), self.result.clone());
        m.insert("diagnostics".into(), to_value(&self.diagnostics)?);
        Ok(Value::Object(m))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(render(&self.to_value()?))
    }
}

/// `serde_json::to_value` with the crate's error type.
pub fn to_value<T: Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Evaluation(format!("cannot serialize report: {e}")))
}

/// A float with 17 significant digits, e.g. `6.9314718055994529e-1`.
pub fn format_f64(x: f64) -> String {
    if !x.is_finite() {
        return "null".into();
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0.0" } else { "0.0" }.into();
    }
    format!("{x:.16e}")
}

/// Pretty-printed JSON with two-space indentation and 17-digit floats.
pub fn render(v: &Value) -> String {
    let mut out = String::new();
    write_value(v, 0, &mut out);
    out.push('\n');
    out
}

fn write_value(v: &Value, depth: usize, out: &mut String) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if n.is_f64() {
                out.push_str(&format_f64(n.as_f64().unwrap()));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            // Short rows of scalars stay on one line.
            if a.len() <= 4 && a.iter().all(|x| !x.is_array() && !x.is_object()) {
                out.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(x, depth, out);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                indent(depth + 1, out);
                write_value(x, depth + 1, out);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            indent(depth, out);
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            for (i, (k, x)) in m.iter().enumerate() {
                indent(depth + 1, out);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(x, depth + 1, out);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            indent(depth, out);
            out.push('}');
        }
    }
}

fn indent(depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [std::f64::consts::LN_2, -1e-300, 123456.789, 0.1, f64::MAX] {
            let s = format_f64(x);
            assert_eq!(s.split('e').next().unwrap().trim_start_matches('-').replace('.', "").len(), 17);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(format_f64(f64::NAN), "null");
    }

    #[test]
    fn rendered_json_parses_back() {
        let v = json!({"a": [1, 2.5, "x", null], "b": {"c": [[0.1, 0.2]], "d": true}, "e": []});
        let s = render(&v);
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"][1].as_f64(), Some(2.5));
        assert_eq!(back["b"]["c"][0][1].as_f64(), Some(0.2));
        assert!(s.contains("2.5000000000000000e0"));
    }
}
