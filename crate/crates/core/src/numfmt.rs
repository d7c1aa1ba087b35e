//! Shared float formatting for CSV and JSON artifacts.

use serde::Serializer;
use serde_json::value::RawValue;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Serializes a float slice as JSON numbers written with [`fmt17`].
pub fn serialize_f64_17<S: Serializer>(values: &[f64], serializer: S) -> Result<S::Ok, S::Error> {
    use serde::ser::{Error, SerializeSeq};
    let mut seq = serializer.serialize_seq(Some(values.len()))?;
    for &v in values {
        if !v.is_finite() {
            return Err(S::Error::custom("non-finite value in JSON output"));
        }
        let raw = RawValue::from_string(fmt17(v)).map_err(S::Error::custom)?;
        seq.serialize_element(&raw)?;
    }
    seq.end()
}

pub fn serialize_scalar_17<S: Serializer>(value: &f64, serializer: S) -> Result<S::Ok, S::Error> {
    use serde::ser::Error;
    if !value.is_finite() {
        return Err(S::Error::custom("non-finite value in JSON output"));
    }
    let raw = RawValue::from_string(fmt17(*value)).map_err(S::Error::custom)?;
    serde::Serialize::serialize(&raw, serializer)
}
