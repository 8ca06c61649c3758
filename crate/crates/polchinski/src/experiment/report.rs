//! Scalar results with tolerances and pass/fail, plus CSV tables.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Finite numbers as JSON numbers; ±∞ and NaN as strings.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else if v.is_nan() {
        Value::String("nan".into())
    } else if v > 0.0 {
        Value::String("inf".into())
    } else {
        Value::String("-inf".into())
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    /// |value − reference| ≤ tolerance
    Equal,
    /// value ≤ reference + tolerance
    AtMost,
    /// value ≥ reference − tolerance
    AtLeast,
    /// boolean property
    Holds,
}

#[derive(Clone, Debug, Serialize)]
pub struct Quantity {
    pub value: Value,
    pub relation: Option<Relation>,
    pub reference: Option<Value>,
    pub tolerance: Option<f64>,
    pub pass: Option<bool>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct Report {
    pub quantities: BTreeMap<String, Quantity>,
    pub records: BTreeMap<String, Value>,
    #[serde(skip)]
    pub tables: BTreeMap<String, String>,
}

impl Report {
    pub fn info(&mut self, name: impl Into<String>, v: f64) {
        self.quantities.insert(name.into(), Quantity { value: num(v), relation: None, reference: None, tolerance: None, pass: None });
    }

    pub fn compare(&mut self, name: impl Into<String>, v: f64, rel: Relation, reference: f64, tol: f64) -> bool {
        let pass = match rel {
            Relation::Equal => (v - reference).abs() <= tol,
            Relation::AtMost => v <= reference + tol,
            Relation::AtLeast => v >= reference - tol,
            Relation::Holds => v != 0.0,
        };
        self.quantities.insert(
            name.into(),
            Quantity { value: num(v), relation: Some(rel), reference: Some(num(reference)), tolerance: Some(tol), pass: Some(pass) },
        );
        pass
    }

    pub fn equal(&mut self, name: impl Into<String>, v: f64, reference: f64, tol: f64) -> bool {
        self.compare(name, v, Relation::Equal, reference, tol)
    }

    pub fn at_most(&mut self, name: impl Into<String>, v: f64, bound: f64, tol: f64) -> bool {
        self.compare(name, v, Relation::AtMost, bound, tol)
    }

    pub fn at_least(&mut self, name: impl Into<String>, v: f64, bound: f64, tol: f64) -> bool {
        self.compare(name, v, Relation::AtLeast, bound, tol)
    }

    pub fn holds(&mut self, name: impl Into<String>, ok: bool) -> bool {
        self.quantities.insert(
            name.into(),
            Quantity { value: Value::Bool(ok), relation: Some(Relation::Holds), reference: None, tolerance: None, pass: Some(ok) },
        );
        ok
    }

    pub fn record(&mut self, name: impl Into<String>, v: impl Serialize) {
        self.records.insert(name.into(), serde_json::to_value(v).unwrap_or(Value::Null));
    }

    pub fn table(&mut self, file: impl Into<String>, csv: String) {
        self.tables.insert(file.into(), csv);
    }

    pub fn passed(&self) -> bool {
        self.quantities.values().all(|q| q.pass != Some(false))
    }

    /// Numeric value of a stored quantity; "inf"/"-inf"/"nan" strings map back to floats.
    pub fn value_of(&self, name: &str) -> Option<f64> {
        match &self.quantities.get(name)?.value {
            Value::Number(n) => n.as_f64(),
            Value::String(s) if s == "inf" => Some(f64::INFINITY),
            Value::String(s) if s == "-inf" => Some(f64::NEG_INFINITY),
            Value::String(s) if s == "nan" => Some(f64::NAN),
            Value::Bool(b) => Some(if *b { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    pub fn failures(&self) -> Vec<String> {
        self.quantities.iter().filter(|(_, q)| q.pass == Some(false)).map(|(k, _)| k.clone()).collect()
    }
}

/// CSV with a header row; values in shortest round-trip form.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:e}")).collect();
        s.push_str(&cells.join(","));
        s.push('\n');
    }
    s
}
