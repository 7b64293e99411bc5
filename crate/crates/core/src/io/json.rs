use std::path::Path;

use nalgebra::{Matrix3, Matrix4};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{json, Value};
use thiserror::Error;

use super::{read_bytes, write_bytes, IoError};
use crate::camgeo::Camera;

/// A configuration document that failed to deserialize; `pointer` locates
/// the offending field as a JSON pointer.
#[derive(Debug, Error, Clone, PartialEq)]
#[error("config error at {pointer}: {message}")]
pub struct ConfigError {
    pub pointer: String,
    pub message: String,
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Deserializes a JSON document, reporting failures with a field pointer.
pub fn parse_config<T: DeserializeOwned>(text: &[u8]) -> Result<T, ConfigError> {
    let de = &mut serde_json::Deserializer::from_slice(text);
    serde_path_to_error::deserialize(de).map_err(|e| ConfigError {
        pointer: pointer_of(e.path()),
        message: e.inner().to_string(),
    })
}

pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    Ok(parse_config(&read_bytes(path)?)?)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, IoError> {
    read_config(path)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), IoError> {
    let mut text = serde_json::to_vec_pretty(value).map_err(|e| IoError::Schema {
        pointer: "/".into(),
        message: e.to_string(),
    })?;
    text.push(b'\n');
    write_bytes(path, &text)
}

fn schema(pointer: impl Into<String>, message: impl Into<String>) -> IoError {
    IoError::Schema {
        pointer: pointer.into(),
        message: message.into(),
    }
}

fn floats<const N: usize>(v: &Value, pointer: &str) -> Result<[f64; N], IoError> {
    let arr = v
        .as_array()
        .ok_or_else(|| schema(pointer, "expected an array"))?;
    if arr.len() != N {
        return Err(schema(pointer, format!("expected {N} numbers, got {}", arr.len())));
    }
    let mut out = [0.0; N];
    for (i, x) in arr.iter().enumerate() {
        out[i] = x
            .as_f64()
            .ok_or_else(|| schema(format!("{pointer}/{i}"), "expected a number"))?;
    }
    Ok(out)
}

/// Parses `{"views": [{"K": [9], "T": [16]}, ...]}` (row-major, `T`
/// world-to-camera) and validates every camera.
pub fn decode_cameras(bytes: &[u8]) -> Result<Vec<Camera>, IoError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| schema("", e.to_string()))?;
    let views = doc
        .get("views")
        .ok_or_else(|| schema("/views", "missing field"))?
        .as_array()
        .ok_or_else(|| schema("/views", "expected an array"))?;
    views
        .iter()
        .enumerate()
        .map(|(i, view)| {
            let field = |name: &str| {
                let p = format!("/views/{i}/{name}");
                view.get(name)
                    .ok_or_else(|| schema(p.clone(), "missing field"))
                    .map(|v| (v, p))
            };
            let (k, kp) = field("K")?;
            let (t, tp) = field("T")?;
            let k = Matrix3::from_row_slice(&floats::<9>(k, &kp)?);
            let t = Matrix4::from_row_slice(&floats::<16>(t, &tp)?);
            Ok(Camera::new(k, t)?)
        })
        .collect()
}

pub fn encode_cameras(cams: &[Camera]) -> Vec<u8> {
    let row_major = |m: &[f64], n: usize| -> Vec<f64> {
        (0..n * n).map(|i| m[(i % n) * n + i / n]).collect()
    };
    let views: Vec<Value> = cams
        .iter()
        .map(|c| {
            json!({
                "K": row_major(c.k().as_slice(), 3),
                "T": row_major(c.t().as_slice(), 4),
            })
        })
        .collect();
    let mut out = serde_json::to_vec_pretty(&json!({ "views": views })).expect("plain JSON values");
    out.push(b'\n');
    out
}

pub fn read_cameras(path: &Path) -> Result<Vec<Camera>, IoError> {
    decode_cameras(&read_bytes(path)?)
}

pub fn write_cameras(path: &Path, cams: &[Camera]) -> Result<(), IoError> {
    write_bytes(path, &encode_cameras(cams))
}
