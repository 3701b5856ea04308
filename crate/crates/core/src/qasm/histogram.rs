//! Shot-histogram files: a JSON object mapping bitstrings to counts, with
//! an optional sibling `"metadata"` object.
//!
//! ```json
//! {"metadata": {"config_hash": "ab12..", "member": 3}, "000": 4000, "101": 96}
//! ```
//!
//! Bit order is little-endian: the rightmost character is qubit 0, which is
//! classical bit `c[0]` in exported programs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::circuit::Histogram;
use crate::error::{Error, Result};

const METADATA_KEY: &str = "metadata";

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HistogramMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub member: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repetitions: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistogramFile {
    pub histogram: Histogram,
    pub metadata: HistogramMetadata,
}

pub fn serialize_histogram(h: &Histogram, metadata: &HistogramMetadata) -> Result<String> {
    let mut map = Map::new();
    if *metadata != HistogramMetadata::default() {
        map.insert(METADATA_KEY.into(), serde_json::to_value(metadata)?);
    }
    for (k, &v) in h.counts() {
        map.insert(k.clone(), Value::from(v));
    }
    Ok(serde_json::to_string_pretty(&Value::Object(map))?)
}

/// Parses one histogram file body. Never panics; every failure is a
/// [`Error::MalformedHistogram`] naming the line or field at fault.
pub fn parse_histograms(text: &str) -> Result<HistogramFile> {
    let value: Value = serde_json::from_str(text)
        .map_err(|e| Error::malformed(Some(format!("line {}, column {}", e.line(), e.column())), e.to_string()))?;
    let Value::Object(map) = value else {
        return Err(Error::malformed(Some("top level".to_string()), "expected a JSON object"));
    };
    let mut metadata = HistogramMetadata::default();
    let mut counts = BTreeMap::new();
    let mut width = None;
    for (key, v) in map {
        if key == METADATA_KEY {
            metadata = serde_json::from_value(v).map_err(|e| Error::malformed(Some(METADATA_KEY.to_string()), e.to_string()))?;
            continue;
        }
        let here = || Some(format!("key {key:?}"));
        if key.is_empty() || !key.bytes().all(|b| b == b'0' || b == b'1') {
            return Err(Error::malformed(here(), "keys must be non-empty strings of 0 and 1"));
        }
        match width {
            None => width = Some(key.len()),
            Some(w) if w != key.len() => {
                return Err(Error::malformed(
                    here(),
                    format!("bitstring length {} differs from {w}", key.len()),
                ));
            }
            _ => {}
        }
        let count = v
            .as_u64()
            .ok_or_else(|| Error::malformed(here(), format!("count {v} is not a non-negative integer")))?;
        counts.insert(key, count);
    }
    let Some(width) = width else {
        return Err(Error::malformed(None, "histogram has no outcomes"));
    };
    Ok(HistogramFile {
        histogram: Histogram::new(width, counts)?,
        metadata,
    })
}

pub fn read_histogram_file(path: &Path) -> Result<HistogramFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_histograms(&text).map_err(|e| match e {
        Error::MalformedHistogram { location, message } => Error::MalformedHistogram {
            location: Some(match location {
                Some(l) => format!("{}: {l}", path.display()),
                None => path.display().to_string(),
            }),
            message,
        },
        other => other,
    })
}
