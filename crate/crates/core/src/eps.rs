//! Privacy-budget parsing and serialization.
//!
//! ε = ∞ (the non-private limit) is a first-class value, but JSON has no
//! literal for infinity, so ε fields serialize as a number when finite and as
//! the string "inf" otherwise. The helpers here are used via
//! `#[serde(with = "crate::eps")]` on every ε field that crosses a file
//! boundary.

use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};
use std::fmt;

use crate::error::{Error, Result};

/// Parse an ε value from text; accepts a float or "inf".
pub fn parse_eps(s: &str) -> Result<f64> {
    let t = s.trim();
    if t.eq_ignore_ascii_case("inf") || t.eq_ignore_ascii_case("infinity") {
        return Ok(f64::INFINITY);
    }
    let v: f64 = t
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("cannot parse eps value '{s}'")))?;
    if v.is_nan() {
        return Err(Error::InvalidConfig("eps cannot be NaN".into()));
    }
    Ok(v)
}

/// Render an ε value as text; infinite values become "inf".
pub fn format_eps(v: f64) -> String {
    if v.is_infinite() {
        "inf".to_string()
    } else {
        format!("{v}")
    }
}

pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*v)
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    struct EpsVisitor;

    impl Visitor<'_> for EpsVisitor {
        type Value = f64;

        fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
            write!(f, "a number or the string \"inf\"")
        }

        fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<f64, E> {
            Ok(v)
        }

        fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<f64, E> {
            Ok(v as f64)
        }

        fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<f64, E> {
            parse_eps(v).map_err(|e| E::custom(e.to_string()))
        }
    }

    d.deserialize_any(EpsVisitor)
}
