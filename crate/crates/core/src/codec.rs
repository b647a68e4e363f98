//! Canonical `.svcspec.json` text and import/export bundles.
//!
//! Canonical form: UTF-8 JSON, object keys sorted, two-space indentation and
//! a trailing newline, so equal specs always produce identical bytes.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::model::{ServiceSpec, FORMAT_VERSION};
use crate::validate::validate_spec;

pub const SPEC_FILE_EXTENSION: &str = ".svcspec.json";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("parse error at line {line}, column {column}{}: {message}", path_suffix(.path))]
    Parse {
        line: usize,
        column: usize,
        path: String,
        message: String,
    },
    #[error("unsupported format_version {found:?} (expected {FORMAT_VERSION:?})")]
    VersionMismatch { found: String },
}

fn path_suffix(path: &str) -> String {
    if path.is_empty() || path == "." {
        String::new()
    } else {
        format!(" ({path})")
    }
}

/// Recursively sorts object keys, independent of serde_json's map backend.
pub fn canonicalize(value: Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            let mut out = Map::new();
            for (k, v) in entries {
                out.insert(k, canonicalize(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

pub fn to_canonical_string<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("model types always serialize");
    let mut text = serde_json::to_string_pretty(&canonicalize(v)).expect("value serializes");
    text.push('\n');
    text
}

pub fn serialize(spec: &ServiceSpec) -> String {
    to_canonical_string(spec)
}

fn syntax_error(e: serde_json::Error) -> FormatError {
    FormatError::Parse {
        line: e.line(),
        column: e.column(),
        path: String::new(),
        message: e.to_string(),
    }
}

/// Turns serde's "missing field `x`" at `a.b` into a path naming `a.b.x`.
fn data_error(e: serde_path_to_error::Error<serde_json::Error>) -> FormatError {
    let mut path = e.path().to_string();
    let inner = e.inner();
    let message = inner.to_string();
    if let Some(field) = message
        .strip_prefix("missing field `")
        .and_then(|rest| rest.split('`').next())
    {
        path = if path.is_empty() || path == "." {
            field.to_string()
        } else {
            format!("{path}.{field}")
        };
    }
    FormatError::Parse {
        line: inner.line(),
        column: inner.column(),
        path,
        message,
    }
}

fn check_version(found: Option<&Value>) -> Result<(), FormatError> {
    match found {
        Some(Value::String(v)) if v == FORMAT_VERSION => Ok(()),
        Some(Value::String(v)) => Err(FormatError::VersionMismatch { found: v.clone() }),
        Some(other) => Err(FormatError::VersionMismatch {
            found: other.to_string(),
        }),
        // absence is reported by the structural pass
        None => Ok(()),
    }
}

pub fn deserialize(text: &str) -> Result<ServiceSpec, FormatError> {
    let raw: Value = serde_json::from_str(text).map_err(syntax_error)?;
    check_version(raw.pointer("/metadata/format_version"))?;
    let mut de = serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(&mut de).map_err(data_error)
}

fn from_value(value: Value) -> Result<ServiceSpec, FormatError> {
    check_version(value.pointer("/metadata/format_version"))?;
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        let path = match message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
        {
            Some(field) if path.is_empty() || path == "." => field.to_string(),
            Some(field) => format!("{path}.{field}"),
            None => path,
        };
        FormatError::Parse {
            line: 0,
            column: 0,
            path,
            message,
        }
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct Bundle {
    format_version: String,
    services: Vec<Value>,
}

pub fn export_bundle(specs: &[ServiceSpec]) -> String {
    let bundle = Bundle {
        format_version: FORMAT_VERSION.to_string(),
        services: specs
            .iter()
            .map(|s| serde_json::to_value(s).expect("model types always serialize"))
            .collect(),
    };
    to_canonical_string(&bundle)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectedEntry {
    pub index: usize,
    pub id: Option<String>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportReport {
    pub imported: Vec<ServiceSpec>,
    pub rejected: Vec<RejectedEntry>,
}

/// Suffix appended to names of services whose id had to be regenerated.
pub const IMPORTED_SUFFIX: &str = " (imported)";

/// Parses a bundle. Entries that fail to parse or validate are rejected
/// individually. An entry whose id is already taken (per `id_taken`, or by an
/// earlier entry of the same bundle) gets a fresh id and a suffixed name.
pub fn import_bundle(
    text: &str,
    id_taken: &dyn Fn(&str) -> bool,
) -> Result<ImportReport, FormatError> {
    let raw: Value = serde_json::from_str(text).map_err(syntax_error)?;
    check_version(raw.get("format_version"))?;
    let mut de = serde_json::Deserializer::from_str(text);
    let bundle: Bundle = serde_path_to_error::deserialize(&mut de).map_err(data_error)?;

    let mut report = ImportReport::default();
    let mut claimed: HashSet<String> = HashSet::new();
    for (index, entry) in bundle.services.into_iter().enumerate() {
        let id_hint = entry.get("id").and_then(Value::as_str).map(str::to_string);
        let mut spec = match from_value(entry) {
            Ok(s) => s,
            Err(e) => {
                report.rejected.push(RejectedEntry {
                    index,
                    id: id_hint,
                    reason: e.to_string(),
                });
                continue;
            }
        };
        let validation = validate_spec(&spec);
        if !validation.is_valid() {
            report.rejected.push(RejectedEntry {
                index,
                id: id_hint,
                reason: validation.summary(),
            });
            continue;
        }
        if id_taken(&spec.id) || claimed.contains(&spec.id) {
            spec.id = fresh_id(&spec.id, |c| id_taken(c) || claimed.contains(c));
            spec.name.push_str(IMPORTED_SUFFIX);
        }
        claimed.insert(spec.id.clone());
        report.imported.push(spec);
    }
    Ok(report)
}

/// `base` plus a short random suffix, not satisfying `taken`.
pub fn fresh_id(base: &str, taken: impl Fn(&str) -> bool) -> String {
    loop {
        let suffix = uuid::Uuid::new_v4().simple().to_string();
        let candidate = format!("{base}-{}", &suffix[..8]);
        if !taken(&candidate) {
            return candidate;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validate::tests::minimal_spec;

    #[test]
    fn round_trip_and_sorted_keys() {
        let spec = minimal_spec();
        let text = serialize(&spec);
        assert_eq!(deserialize(&text).unwrap(), spec);
        assert_eq!(serialize(&deserialize(&text).unwrap()), text);
        let binding_pos = text.find("\"binding\"").unwrap();
        let id_pos = text.find("\"id\"").unwrap();
        let meta_pos = text.find("\"metadata\"").unwrap();
        assert!(binding_pos < id_pos && id_pos < meta_pos);
    }

    #[test]
    fn missing_input_names_the_path() {
        let mut v = serde_json::to_value(minimal_spec()).unwrap();
        v["binding"].as_object_mut().unwrap().remove("input");
        let err = deserialize(&v.to_string()).unwrap_err();
        match err {
            FormatError::Parse { path, .. } => assert_eq!(path, "binding.input"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = deserialize("{\n  \"id\": ,\n}").unwrap_err();
        match err {
            FormatError::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert!(column > 0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn version_mismatch() {
        let mut spec = minimal_spec();
        spec.metadata.format_version = "2".into();
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            deserialize(&text).unwrap_err(),
            FormatError::VersionMismatch { found: "2".into() }
        );
        let bundle = r#"{"format_version":"9","services":[]}"#;
        assert!(matches!(
            import_bundle(bundle, &|_| false),
            Err(FormatError::VersionMismatch { .. })
        ));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = serde_json::to_value(minimal_spec()).unwrap();
        v["cookies"] = Value::String("x".into());
        assert!(deserialize(&v.to_string()).is_err());
    }

    #[test]
    fn bundle_round_trip_and_partial_import() {
        let a = minimal_spec();
        let mut b = minimal_spec();
        b.id = "other".into();
        let text = export_bundle(&[a.clone(), b.clone()]);
        let report = import_bundle(&text, &|_| false).unwrap();
        assert_eq!(report.imported, vec![a.clone(), b.clone()]);
        assert_eq!(export_bundle(&report.imported), text);

        let mut bad = b.clone();
        bad.id = "bad".into();
        bad.result_spec.target_url = None;
        let report = import_bundle(&export_bundle(&[a.clone(), bad]), &|_| false).unwrap();
        assert_eq!(report.imported.len(), 1);
        assert_eq!(report.rejected.len(), 1);
        assert_eq!(report.rejected[0].id.as_deref(), Some("bad"));
        assert!(report.rejected[0].reason.contains("target_url"));
    }

    #[test]
    fn colliding_ids_are_regenerated() {
        let a = minimal_spec();
        let text = export_bundle(&[a.clone()]);
        let report = import_bundle(&text, &|id| id == "books").unwrap();
        let got = &report.imported[0];
        assert_ne!(got.id, "books");
        assert!(got.id.starts_with("books-"));
        assert_eq!(got.name, "Books (imported)");

        // duplicates inside one bundle collide with each other too
        let twice = export_bundle(&[a.clone(), a]);
        let report = import_bundle(&twice, &|_| false).unwrap();
        assert_eq!(report.imported[0].id, "books");
        assert_ne!(report.imported[1].id, "books");
    }
}
