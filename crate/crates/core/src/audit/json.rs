//! Diffable JSON: object keys sorted, floats rounded to six significant
//! digits, two-space indentation and a trailing newline.

use serde::Serialize;
use serde_json::{Number, Value};

/// Rounds to `digits` significant decimal digits via scientific formatting,
/// which is exact with respect to the printed representation.
pub fn round_significant(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    let s = format!("{:.*e}", digits.saturating_sub(1), x);
    s.parse().unwrap_or(x)
}

fn canonicalize(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = round_significant(n.as_f64().expect("f64 number"), 6);
            // -0.0 and 0.0 print differently; collapse them
            let x = if x == 0.0 { 0.0 } else { x };
            Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        // serde_json's default map is ordered by key
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonicalize(v))).collect()),
        other => other,
    }
}

pub fn to_canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialise to JSON");
    let mut s = serde_json::to_string_pretty(&canonicalize(v)).expect("JSON value serialises");
    s.push('\n');
    s
}
