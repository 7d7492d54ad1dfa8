//! Canonical document encoding.
//!
//! Every hashed or replicated structure in the ledger is serialized through
//! this module: JSON text with object keys sorted by byte order, no
//! insignificant whitespace, and no floating point numbers. Two logically equal
//! documents always encode to the same bytes.

use std::io::Write;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use thiserror::Error;

/// A structured document: maps, arrays, strings, integers, booleans and null.
pub type Doc = Value;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CanonicalError {
    #[error("unsupported value: {0}")]
    UnsupportedValue(String),
    #[error("malformed document: {0}")]
    Malformed(String),
    #[error("document is not in canonical form")]
    NonCanonical,
}

/// Encodes a document into its canonical byte form.
pub fn canonical_encode(doc: &Doc) -> Result<Vec<u8>, CanonicalError> {
    let mut out = Vec::with_capacity(64);
    write_value(doc, &mut out)?;
    Ok(out)
}

fn write_value(doc: &Doc, out: &mut Vec<u8>) -> Result<(), CanonicalError> {
    match doc {
        Value::Null => out.extend_from_slice(b"null"),
        Value::Bool(true) => out.extend_from_slice(b"true"),
        Value::Bool(false) => out.extend_from_slice(b"false"),
        Value::Number(n) => {
            if let Some(u) = n.as_u64() {
                write!(out, "{u}").expect("write to vec");
            } else if let Some(i) = n.as_i64() {
                write!(out, "{i}").expect("write to vec");
            } else {
                return Err(CanonicalError::UnsupportedValue(format!("float {n}")));
            }
        }
        Value::String(s) => write_string(s, out),
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_value(item, out)?;
            }
            out.push(b']');
        }
        Value::Object(map) => {
            // serde_json's map may preserve insertion order depending on
            // features enabled elsewhere in the build, so sort explicitly.
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort_unstable_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
            out.push(b'{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_string(key, out);
                out.push(b':');
                write_value(&map[key], out)?;
            }
            out.push(b'}');
        }
    }
    Ok(())
}

fn write_string(s: &str, out: &mut Vec<u8>) {
    serde_json::to_writer(&mut *out, s).expect("string serialization is infallible");
}

/// Converts any serializable value into a document, rejecting floats.
pub fn to_doc<T: Serialize + ?Sized>(value: &T) -> Result<Doc, CanonicalError> {
    let doc = serde_json::to_value(value).map_err(|e| {
        let msg = e.to_string();
        if msg.contains("key must be a string") {
            CanonicalError::UnsupportedValue("non-string map key".into())
        } else {
            CanonicalError::Malformed(msg)
        }
    })?;
    check_supported(&doc)?;
    Ok(doc)
}

fn check_supported(doc: &Doc) -> Result<(), CanonicalError> {
    match doc {
        Value::Number(n) if !(n.is_u64() || n.is_i64()) => {
            Err(CanonicalError::UnsupportedValue(format!("float {n}")))
        }
        Value::Array(items) => items.iter().try_for_each(check_supported),
        Value::Object(map) => map.values().try_for_each(check_supported),
        _ => Ok(()),
    }
}

/// Serializes a value straight to canonical bytes.
pub fn to_canonical_bytes<T: Serialize + ?Sized>(value: &T) -> Result<Vec<u8>, CanonicalError> {
    canonical_encode(&to_doc(value)?)
}

pub fn from_doc<T: DeserializeOwned>(doc: &Doc) -> Result<T, CanonicalError> {
    T::deserialize(doc).map_err(|e| CanonicalError::Malformed(e.to_string()))
}

/// Parses bytes into a document without any canonical-form check.
pub fn parse_doc(bytes: &[u8]) -> Result<Doc, CanonicalError> {
    let doc: Doc =
        serde_json::from_slice(bytes).map_err(|e| CanonicalError::Malformed(e.to_string()))?;
    check_supported(&doc)?;
    Ok(doc)
}

/// Decodes bytes and requires that they are exactly the canonical encoding of
/// the decoded value.
pub fn decode_canonical<T: DeserializeOwned + Serialize>(bytes: &[u8]) -> Result<T, CanonicalError> {
    let value: T =
        serde_json::from_slice(bytes).map_err(|e| CanonicalError::Malformed(e.to_string()))?;
    if to_canonical_bytes(&value)? != bytes {
        return Err(CanonicalError::NonCanonical);
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_map() {
        assert_eq!(canonical_encode(&json!({})).unwrap(), b"{}");
    }

    #[test]
    fn keys_sorted() {
        let doc: Doc = serde_json::from_str(r#"{"b":1,"a":2}"#).unwrap();
        assert_eq!(canonical_encode(&doc).unwrap(), br#"{"a":2,"b":1}"#);
    }

    #[test]
    fn nested_and_scalars() {
        let doc = json!({"z": [true, false, null, -3, 18446744073709551615u64], "a": {"y": "x\"\n", "b": ""}});
        assert_eq!(
            canonical_encode(&doc).unwrap(),
            br#"{"a":{"b":"","y":"x\"\n"},"z":[true,false,null,-3,18446744073709551615]}"#.to_vec()
        );
    }

    #[test]
    fn floats_rejected() {
        assert!(matches!(
            canonical_encode(&json!({"x": 1.5})),
            Err(CanonicalError::UnsupportedValue(_))
        ));
        assert!(matches!(to_doc(&2.0f64), Err(CanonicalError::UnsupportedValue(_))));
    }

    #[test]
    fn non_string_keys_rejected() {
        let mut m = std::collections::BTreeMap::new();
        m.insert((1u8, 2u8), 3u8);
        assert!(matches!(to_doc(&m), Err(CanonicalError::UnsupportedValue(_))));
    }

    #[test]
    fn decode_rejects_whitespace() {
        let r: Result<Doc, _> = decode_canonical(br#"{"a": 1}"#);
        assert_eq!(r.unwrap_err(), CanonicalError::NonCanonical);
        let ok: Doc = decode_canonical(br#"{"a":1}"#).unwrap();
        assert_eq!(ok, json!({"a": 1}));
    }
}
