use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Height;
use crate::primitives::Digest;

/// One logged event. Records are ordered by `(height, index)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventRecord {
    pub height: Height,
    pub index: u32,
    pub tx_hash: Option<Digest>,
    pub topic: String,
    pub payload: BTreeMap<String, String>,
}

impl EventRecord {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.payload.get(key).map(String::as_str)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogError {
    #[error("inverted height range {from}..={to}")]
    InvertedRange { from: Height, to: Height },
}

/// Builds an event payload from literal pairs.
pub fn fields<const N: usize>(pairs: [(&str, String); N]) -> BTreeMap<String, String> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

/// Events matching every given filter, in log order. The height range is
/// inclusive on both ends.
pub fn extract_logs(
    events: &[Arc<EventRecord>],
    topic: Option<&str>,
    range: Option<(Height, Height)>,
) -> Result<Vec<EventRecord>, LogError> {
    if let Some((from, to)) = range {
        if from > to {
            return Err(LogError::InvertedRange { from, to });
        }
    }
    Ok(events
        .iter()
        .filter(|e| topic.is_none_or(|t| e.topic == t))
        .filter(|e| range.is_none_or(|(from, to)| (from..=to).contains(&e.height)))
        .map(|e| (**e).clone())
        .collect())
}
