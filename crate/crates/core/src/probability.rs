//! Probability parsing and serde helpers.
//!
//! JSON inputs accept probabilities either as numbers or as decimal /
//! scientific-notation strings ("2e-4"), sidestepping float-literal
//! ambiguity in hand-written documents.

use serde::{Deserialize, Deserializer, Serializer};

use crate::error::{Error, Result};

/// Check `value` lies in [0, 1]; `name` identifies the offending field.
pub fn check_unit_interval(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(Error::ProbabilityRange { name, value })
    }
}

/// Deserialize a float from either a JSON number or a string.
pub fn deserialize_flexible<'de, D>(deserializer: D) -> std::result::Result<f64, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum NumOrStr {
        Num(f64),
        Str(String),
    }
    match NumOrStr::deserialize(deserializer)? {
        NumOrStr::Num(v) => Ok(v),
        NumOrStr::Str(s) => s
            .trim()
            .parse::<f64>()
            .map_err(|e| serde::de::Error::custom(format!("invalid number `{s}`: {e}"))),
    }
}

/// As [`deserialize_flexible`] but for optional fields.
pub fn deserialize_flexible_opt<'de, D>(
    deserializer: D,
) -> std::result::Result<Option<f64>, D::Error>
where
    D: Deserializer<'de>,
{
    #[derive(Deserialize)]
    struct Wrap(#[serde(deserialize_with = "deserialize_flexible")] f64);
    Ok(Option::<Wrap>::deserialize(deserializer)?.map(|w| w.0))
}

/// Serialize probabilities in scientific notation with 9 significant digits.
pub fn serialize_sci<S: Serializer>(v: &f64, serializer: S) -> std::result::Result<S::Ok, S::Error> {
    serializer.serialize_str(&format_sci(*v))
}

/// Scientific notation, 9 significant digits (e.g. `5.01803380e-5`).
pub fn format_sci(v: f64) -> String {
    format!("{v:.8e}")
}

/// Round to 3 significant digits, the reporting precision used for derived
/// requirement targets.
pub fn round_3sig(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let exp = v.abs().log10().floor() as i32;
    let scale = 10f64.powi(2 - exp);
    (v * scale).round() / scale
}
