//! Canonical JSON encoding and content hashing.

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::{ArtifactBundle, Validate, ValidationError};

#[derive(Debug, thiserror::Error)]
pub enum CodecError {
    /// Input is not well-formed JSON.
    #[error("malformed JSON: {0}")]
    Syntax(String),
    /// Well-formed JSON that does not match the type, or violates an invariant.
    #[error("invalid document at {}: {}", .0.path, .0.message)]
    Invalid(ValidationError),
    #[error("encoding failed at {}: {}", .0.path, .0.message)]
    Encode(ValidationError),
}

impl CodecError {
    pub fn field_path(&self) -> Option<&str> {
        match self {
            CodecError::Syntax(_) => None,
            CodecError::Invalid(e) | CodecError::Encode(e) => Some(&e.path),
        }
    }
}

/// Canonical bytes: validated, keys sorted, no insignificant whitespace.
pub fn encode<T: Serialize + Validate>(value: &T) -> Result<Vec<u8>, CodecError> {
    value.validate().map_err(CodecError::Encode)?;
    let tree = serde_json::to_value(value)
        .map_err(|e| CodecError::Encode(ValidationError::new("", e.to_string())))?;
    let mut out = Vec::with_capacity(1024);
    write_canonical(&tree, &mut out);
    Ok(out)
}

/// Decode and validate. Syntax errors and schema errors are distinguished so
/// callers can map them to different responses.
pub fn decode<T: DeserializeOwned + Validate>(bytes: &[u8]) -> Result<T, CodecError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    let value: T = match serde_path_to_error::deserialize(&mut de) {
        Ok(v) => v,
        Err(err) => {
            let path = err.path().to_string();
            let inner = err.into_inner();
            return Err(match inner.classify() {
                serde_json::error::Category::Data => {
                    let path = if path == "." { String::new() } else { path };
                    CodecError::Invalid(ValidationError::new(path, inner.to_string()))
                }
                _ => CodecError::Syntax(inner.to_string()),
            });
        }
    };
    de.end().map_err(|e| CodecError::Syntax(e.to_string()))?;
    value.validate().map_err(CodecError::Invalid)?;
    Ok(value)
}

pub fn encode_bundle(bundle: &ArtifactBundle) -> Result<Vec<u8>, CodecError> {
    encode(bundle)
}

pub fn decode_bundle(bytes: &[u8]) -> Result<ArtifactBundle, CodecError> {
    decode(bytes)
}

/// Hex SHA-256 of the canonical encoding.
pub fn bundle_hash(bundle: &ArtifactBundle) -> Result<String, CodecError> {
    Ok(sha256_hex(&encode_bundle(bundle)?))
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Canonical form of an arbitrary JSON tree (used for prompt hashing as well).
pub fn canonical_json(value: &Value) -> String {
    let mut out = Vec::new();
    write_canonical(value, &mut out);
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

fn write_canonical(value: &Value, out: &mut Vec<u8>) {
    match value {
        Value::Object(map) => {
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push(b'{');
            for (i, key) in keys.into_iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                serde_json::to_writer(&mut *out, key).expect("string serialization");
                out.push(b':');
                write_canonical(&map[key], out);
            }
            out.push(b'}');
        }
        Value::Array(items) => {
            out.push(b'[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(b',');
                }
                write_canonical(item, out);
            }
            out.push(b']');
        }
        // Scalars: serde_json already prints floats as shortest round-trip decimals.
        scalar => serde_json::to_writer(&mut *out, scalar).expect("scalar serialization"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::artifact::*;
    use chrono::TimeZone;
    use std::collections::BTreeMap;

    pub(crate) fn sample_bundle() -> ArtifactBundle {
        let mut metrics = BTreeMap::new();
        metrics.insert("cramers_v".to_string(), 0.92);
        ArtifactBundle {
            bundle_version: BUNDLE_VERSION.into(),
            modality: TABULAR_MODALITY.into(),
            created_at: Utc.with_ymd_and_hms(2026, 1, 2, 3, 4, 5).unwrap(),
            train_stats: DatasetStatistics {
                sample_count: 4,
                per_column: vec![],
                class_distribution: Some(BTreeMap::from([("a".into(), 3), ("b".into(), 1)])),
            },
            test_stats: DatasetStatistics {
                sample_count: 0,
                per_column: vec![],
                class_distribution: None,
            },
            integrity_results: vec![],
            validation_results: vec![CheckResult {
                check_id: "label_drift".into(),
                category: CheckCategory::TrainTestValidation,
                status: CheckStatus::Fail,
                metrics,
                condition: "cramers_v ≤ 0.15".into(),
                summary: "label distribution differs".into(),
                details: BTreeMap::new(),
                flagged_columns: vec![LABEL_REF.into()],
            }],
            evaluation_results: vec![],
            checkpoint: None,
            client_info: BTreeMap::new(),
        }
    }

    #[test]
    fn round_trip_and_stable_hash() {
        let bundle = sample_bundle();
        let bytes = encode_bundle(&bundle).unwrap();
        let back = decode_bundle(&bytes).unwrap();
        assert_eq!(back, bundle);
        assert_eq!(encode_bundle(&back).unwrap(), bytes);
        assert_eq!(bundle_hash(&bundle).unwrap(), bundle_hash(&back).unwrap());
        assert_eq!(bundle_hash(&bundle).unwrap().len(), 64);
    }

    #[test]
    fn permuted_keys_give_identical_bytes() {
        let bundle = sample_bundle();
        let bytes = encode_bundle(&bundle).unwrap();
        // Re-serialize through a tree and reverse the top-level key order.
        let tree: Value = serde_json::from_slice(&bytes).unwrap();
        let Value::Object(map) = tree else { unreachable!() };
        let mut reversed = String::from("{");
        for (i, (k, v)) in map.iter().rev().enumerate() {
            if i > 0 {
                reversed.push_str(", ");
            }
            reversed.push_str(&format!("{}: {}", Value::String(k.clone()), v));
        }
        reversed.push('}');
        let decoded = decode_bundle(reversed.as_bytes()).unwrap();
        assert_eq!(encode_bundle(&decoded).unwrap(), bytes);
    }

    #[test]
    fn metric_change_changes_digest() {
        let a = sample_bundle();
        let mut b = sample_bundle();
        *b.validation_results[0].metrics.get_mut("cramers_v").unwrap() += 1e-3;
        assert_ne!(bundle_hash(&a).unwrap(), bundle_hash(&b).unwrap());
    }

    #[test]
    fn nan_metric_is_an_encoding_error() {
        let mut b = sample_bundle();
        b.validation_results[0].metrics.insert("cramers_v".into(), f64::NAN);
        let err = encode_bundle(&b).unwrap_err();
        assert!(err.to_string().contains("non-finite metric"), "{err}");
        assert_eq!(err.field_path(), Some("validation_results[0].metrics.cramers_v"));
    }

    #[test]
    fn syntax_and_schema_errors_are_distinguished() {
        let bytes = encode_bundle(&sample_bundle()).unwrap();
        let truncated = &bytes[..bytes.len() / 2];
        assert!(matches!(decode_bundle(truncated), Err(CodecError::Syntax(_))));

        let mut tree: Value = serde_json::from_slice(&bytes).unwrap();
        tree["validation_results"][0]["status"] = Value::String("exploded".into());
        let err = decode_bundle(tree.to_string().as_bytes()).unwrap_err();
        assert!(matches!(err, CodecError::Invalid(_)));
        assert_eq!(err.field_path(), Some("validation_results[0].status"));
    }

    #[test]
    fn unknown_major_version_rejected() {
        let mut b = sample_bundle();
        b.bundle_version = "2.0".into();
        let bytes = serde_json::to_vec(&b).unwrap();
        let err = decode_bundle(&bytes).unwrap_err();
        assert_eq!(err.field_path(), Some("bundle_version"));
    }

    #[test]
    fn duplicate_check_ids_rejected() {
        let mut b = sample_bundle();
        let dup = b.validation_results[0].clone();
        b.validation_results.push(dup);
        let bytes = serde_json::to_vec(&b).unwrap();
        let err = decode_bundle(&bytes).unwrap_err();
        assert_eq!(err.field_path(), Some("validation_results[1].check_id"));
    }
}
