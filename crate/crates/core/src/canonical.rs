//! Canonical JSON used for proof hashes, JSONL persistence and wire messages.
//!
//! Rules: a single object per document, keys sorted by code point, `", "`
//! between members and `": "` between key and value, non-ASCII emitted as raw
//! UTF-8, `null` for absent optionals. Scores are rendered from basis points
//! with a fixed renderer so the bytes do not depend on float formatting.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CanonicalValue {
    Null,
    Bool(bool),
    Int(i64),
    /// A pre-rendered decimal literal, emitted verbatim.
    Decimal(String),
    Str(String),
    Array(Vec<CanonicalValue>),
    Object(BTreeMap<String, CanonicalValue>),
}

impl CanonicalValue {
    pub fn object<I, K>(members: I) -> CanonicalValue
    where
        I: IntoIterator<Item = (K, CanonicalValue)>,
        K: Into<String>,
    {
        CanonicalValue::Object(members.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn opt_str(s: Option<&str>) -> CanonicalValue {
        s.map_or(CanonicalValue::Null, |s| CanonicalValue::Str(s.to_string()))
    }

    pub fn to_canonical_string(&self) -> String {
        let mut out = String::new();
        self.write_into(&mut out);
        out
    }

    fn write_into(&self, out: &mut String) {
        match self {
            CanonicalValue::Null => out.push_str("null"),
            CanonicalValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
            CanonicalValue::Int(i) => out.push_str(&i.to_string()),
            CanonicalValue::Decimal(d) => out.push_str(d),
            CanonicalValue::Str(s) => write_str(s, out),
            CanonicalValue::Array(items) => {
                out.push('[');
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    item.write_into(out);
                }
                out.push(']');
            }
            CanonicalValue::Object(members) => {
                out.push('{');
                for (i, (k, v)) in members.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_str(k, out);
                    out.push_str(": ");
                    v.write_into(out);
                }
                out.push('}');
            }
        }
    }
}

fn write_str(s: &str, out: &mut String) {
    out.push('"');
    for c in s.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            '\u{08}' => out.push_str("\\b"),
            '\u{0c}' => out.push_str("\\f"),
            c if (c as u32) < 0x20 => out.push_str(&format!("\\u{:04x}", c as u32)),
            c => out.push(c),
        }
    }
    out.push('"');
}

/// Lowercase hex SHA-256 of the canonical bytes.
pub fn sha256_hex(payload: &str) -> String {
    hex::encode(Sha256::digest(payload.as_bytes()))
}

/// Renders basis points (0..=10000) as a decimal with at least one fractional digit.
///
/// `8700 -> "0.87"`, `3000 -> "0.3"`, `10000 -> "1.0"`, `0 -> "0.0"`.
pub fn render_basis_points(bp: u32) -> String {
    let whole = bp / 10_000;
    let frac = format!("{:04}", bp % 10_000);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{whole}.0")
    } else {
        format!("{whole}.{frac}")
    }
}

/// Inverse of [`render_basis_points`] for any decimal with at most four fractional digits.
pub fn parse_basis_points(text: &str) -> Option<u32> {
    let dec = crate::money::Decimal::parse(text).ok()?;
    let bp = dec.to_scaled(4).ok()?;
    u32::try_from(bp).ok().filter(|bp| *bp <= 10_000)
}

/// A value in `[0, 1]` held as integer basis points (`0.87` is `8700`).
///
/// Serializes as a JSON number and parses back exactly from at most four fractional digits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BasisPoints(u32);

impl BasisPoints {
    pub const ZERO: BasisPoints = BasisPoints(0);
    pub const ONE: BasisPoints = BasisPoints(10_000);

    pub fn new(bp: u32) -> Option<BasisPoints> {
        (bp <= 10_000).then_some(BasisPoints(bp))
    }

    pub fn get(self) -> u32 {
        self.0
    }

    pub fn from_f64(v: f64) -> Option<BasisPoints> {
        let dec = crate::money::Decimal::from_f64(v).ok()?;
        let bp = dec.to_scaled(4).ok()?;
        u32::try_from(bp).ok().and_then(BasisPoints::new)
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.0) / 10_000.0
    }

    pub fn to_canonical(self) -> CanonicalValue {
        CanonicalValue::Decimal(render_basis_points(self.0))
    }
}

impl std::fmt::Display for BasisPoints {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&render_basis_points(self.0))
    }
}

impl serde::Serialize for BasisPoints {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.as_f64())
    }
}

impl<'de> serde::Deserialize<'de> for BasisPoints {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        BasisPoints::from_f64(v)
            .ok_or_else(|| serde::de::Error::custom(format!("{v} is not in [0, 1] with at most 4 fractional digits")))
    }
}
