//! Volatile per-session store of recently used or witnessed objects.
//!
//! Each record keeps an object's identity, world position, state label,
//! image path, and the embedding of its canonical text rendering. Residency
//! is governed by a replacement [`Policy`]; queries retrieve the top-K
//! records by cosine distance to an embedded query.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::embedding::{cosine_distance, EmbeddingError, LocalEmbedder, TextEmbedder};
use crate::policy::{EvictionReport, Policy, PolicyError, PolicyVariant, Segment, UnitKey};
use crate::{Embedding, Position};

/// Default number of recalled units when callers do not choose one.
pub const DEFAULT_RECALL_K: usize = 3;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error("unknown state label {0:?}")]
    UnknownState(String),
    #[error("recall k must be at least 1")]
    ZeroK,
    #[error("parse error in record {record}: {message}")]
    Record { record: usize, message: String },
    #[error("parse error: {0}")]
    Parse(String),
}

/// Object state labels a vision model can assign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectState {
    Heated,
    Cooked,
    Sliced,
    Cleaned,
    Dirty,
    Filled,
    UsedUp,
    Off,
    On,
    Opened,
    Closed,
    None,
}

impl ObjectState {
    pub const ALL: [ObjectState; 12] = [
        ObjectState::Heated,
        ObjectState::Cooked,
        ObjectState::Sliced,
        ObjectState::Cleaned,
        ObjectState::Dirty,
        ObjectState::Filled,
        ObjectState::UsedUp,
        ObjectState::Off,
        ObjectState::On,
        ObjectState::Opened,
        ObjectState::Closed,
        ObjectState::None,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            ObjectState::Heated => "heated",
            ObjectState::Cooked => "cooked",
            ObjectState::Sliced => "sliced",
            ObjectState::Cleaned => "cleaned",
            ObjectState::Dirty => "dirty",
            ObjectState::Filled => "filled",
            ObjectState::UsedUp => "used_up",
            ObjectState::Off => "off",
            ObjectState::On => "on",
            ObjectState::Opened => "opened",
            ObjectState::Closed => "closed",
            ObjectState::None => "none",
        }
    }
}

impl fmt::Display for ObjectState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ObjectState {
    type Err = StoreError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let normalized = s.trim().to_lowercase().replace(' ', "_");
        Self::ALL
            .iter()
            .find(|state| state.label() == normalized)
            .copied()
            .ok_or_else(|| StoreError::UnknownState(s.to_string()))
    }
}

/// One short-term record.
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryUnit {
    pub object_type: String,
    pub object_id: UnitKey,
    pub position: Position,
    pub state: ObjectState,
    pub image_path: String,
    pub text_rendering: String,
    pub embedding: Embedding,
}

impl MemoryUnit {
    /// Build a unit, deriving its text rendering and embedding with the
    /// local embedder.
    pub fn new(
        object_type: impl Into<String>,
        object_id: UnitKey,
        position: Position,
        state: ObjectState,
        image_path: impl Into<String>,
    ) -> Self {
        Self::with_embedder(object_type, object_id, position, state, image_path, &LocalEmbedder)
            .expect("local embedder cannot fail")
    }

    pub fn with_embedder(
        object_type: impl Into<String>,
        object_id: UnitKey,
        position: Position,
        state: ObjectState,
        image_path: impl Into<String>,
        embedder: &dyn TextEmbedder,
    ) -> Result<Self, EmbeddingError> {
        let object_type = object_type.into();
        let text_rendering = render_unit_text(&object_type, &position, state);
        let embedding = embedder.embed(&text_rendering)?;
        Ok(Self {
            object_type,
            object_id,
            position,
            state,
            image_path: image_path.into(),
            text_rendering,
            embedding,
        })
    }
}

/// Canonical sentence fed to the embedder, coordinates at two decimals.
pub fn render_unit_text(object_type: &str, position: &Position, state: ObjectState) -> String {
    format!(
        "{} at position ({:.2}, {:.2}, {:.2}), state: {}",
        object_type, position.x, position.y, position.z, state
    )
}

/// Capacity-bounded short-term memory queried by embedding similarity.
///
/// `Debug` elides the embedder, which is an opaque trait object.
pub struct ShortTermStore {
    policy: Policy,
    units: HashMap<UnitKey, MemoryUnit>,
    embedder: Box<dyn TextEmbedder>,
}

impl std::fmt::Debug for ShortTermStore {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ShortTermStore")
            .field("policy", &self.policy)
            .field("units", &self.units)
            .finish_non_exhaustive()
    }
}

impl ShortTermStore {
    /// A fresh, empty store. Nothing is ever loaded implicitly; persisted
    /// documents come back only through [`ShortTermStore::deserialize`].
    pub fn new(policy: Policy) -> Self {
        Self {
            policy,
            units: HashMap::new(),
            embedder: Box::new(LocalEmbedder),
        }
    }

    pub fn with_embedder(mut self, embedder: Box<dyn TextEmbedder>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn policy(&self) -> &Policy {
        &self.policy
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn get(&self, key: &UnitKey) -> Option<&MemoryUnit> {
        self.units.get(key)
    }

    /// Record a unit, evicting per the policy. A merge overwrites the
    /// resident payload in place; a plain-FIFO re-insert keeps the old one.
    pub fn record(&mut self, unit: MemoryUnit) -> EvictionReport {
        let key = unit.object_id.clone();
        let was_resident = self.policy.contains(&key);
        let report = self.policy.insert(&key);
        if let Some(evicted) = &report.evicted {
            self.units.remove(evicted);
        }
        let keep_old =
            was_resident && self.policy.variant() == PolicyVariant::Fifo && !report.merged;
        // Admission may reject the candidate itself; it then never lands
        // in the map.
        let rejected = report.evicted.as_ref() == Some(&key);
        if !keep_old && !rejected {
            self.units.insert(key, unit);
        }
        debug_assert_eq!(self.units.len(), self.policy.len());
        report
    }

    /// Count a policy query for `key` without recalling; hit iff resident.
    pub fn probe(&mut self, key: &UnitKey) -> bool {
        self.policy.access(key).is_hit()
    }

    /// Top-k units by ascending cosine distance to the query embedding.
    /// Each returned unit counts as one policy query (a hit); an empty
    /// result counts one global miss query.
    pub fn recall(&mut self, query_text: &str, k: usize) -> Result<Vec<(MemoryUnit, f32)>, StoreError> {
        let ranked = self.rank(query_text, k)?;
        if ranked.is_empty() {
            self.policy.record_miss_query();
        } else {
            for (unit, _) in &ranked {
                self.policy.access(&unit.object_id);
            }
        }
        Ok(ranked)
    }

    /// Pure variant of [`ShortTermStore::recall`]: no hit bookkeeping, no
    /// recency or frequency updates.
    pub fn recall_untracked(
        &self,
        query_text: &str,
        k: usize,
    ) -> Result<Vec<(MemoryUnit, f32)>, StoreError> {
        self.rank(query_text, k)
    }

    fn rank(&self, query_text: &str, k: usize) -> Result<Vec<(MemoryUnit, f32)>, StoreError> {
        if k == 0 {
            return Err(StoreError::ZeroK);
        }
        let query = self.embedder.embed(query_text)?;
        let mut scored = Vec::with_capacity(self.units.len());
        // Iterate in resident order so equal distances rank deterministically.
        for (key, _) in self.policy.resident_keys() {
            let unit = self.units.get(&key).expect("unit map tracks residency");
            let distance = cosine_distance(&query, &unit.embedding)?;
            scored.push((unit.clone(), distance));
        }
        scored.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("finite distances"));
        scored.truncate(k);
        Ok(scored)
    }

    /// Serialize resident units (in policy order) plus the policy shape.
    pub fn serialize(&self) -> String {
        let units: Vec<UnitRecord> = self
            .policy
            .resident_keys()
            .into_iter()
            .map(|(key, segment)| {
                let unit = self.units.get(&key).expect("unit map tracks residency");
                UnitRecord::from_unit(unit, segment)
            })
            .collect();
        let doc = StoreDocument {
            policy: PolicyHeader::from_policy(&self.policy),
            units,
        };
        serde_json::to_string_pretty(&doc).expect("document serializes")
    }

    /// Rebuild a store from [`ShortTermStore::serialize`] output.
    pub fn deserialize(text: &str) -> Result<Self, StoreError> {
        let raw: Value =
            serde_json::from_str(text).map_err(|e| StoreError::Parse(e.to_string()))?;
        let obj = raw
            .as_object()
            .ok_or_else(|| StoreError::Parse("top level must be an object".into()))?;
        let header: PolicyHeader = serde_json::from_value(
            obj.get("policy")
                .cloned()
                .ok_or_else(|| StoreError::Parse("missing policy header".into()))?,
        )
        .map_err(|e| StoreError::Parse(e.to_string()))?;
        let raw_units = obj
            .get("units")
            .and_then(Value::as_array)
            .ok_or_else(|| StoreError::Parse("missing units array".into()))?;

        let mut store = Self::new(header.build_policy()?);
        let mut entries = Vec::new();
        for (index, raw_unit) in raw_units.iter().enumerate() {
            let record: UnitRecord =
                serde_json::from_value(raw_unit.clone()).map_err(|e| StoreError::Record {
                    record: index,
                    message: e.to_string(),
                })?;
            entries.push(record.into_unit().map_err(|e| StoreError::Record {
                record: index,
                message: e.to_string(),
            })?);
        }
        let placements: Vec<(UnitKey, Segment)> = entries
            .iter()
            .map(|(unit, segment)| (unit.object_id.clone(), *segment))
            .collect();
        store.policy.restore_residents(&placements)?;
        for (unit, _) in entries {
            store.units.insert(unit.object_id.clone(), unit);
        }
        debug_assert_eq!(store.units.len(), store.policy.len());
        Ok(store)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StoreDocument {
    policy: PolicyHeader,
    units: Vec<UnitRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PolicyHeader {
    variant: String,
    capacity: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    window: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    main: Option<usize>,
}

impl PolicyHeader {
    fn from_policy(policy: &Policy) -> Self {
        let (variant, window, main) = match policy.variant() {
            PolicyVariant::Fifo => ("fifo", None, None),
            PolicyVariant::FifoMerge => ("fifo_merge", None, None),
            PolicyVariant::WTinyLfu => (
                "w_tiny_lfu",
                Some(policy.window_capacity()),
                Some(policy.main_capacity()),
            ),
        };
        Self {
            variant: variant.to_string(),
            capacity: policy.capacity(),
            window,
            main,
        }
    }

    fn build_policy(&self) -> Result<Policy, StoreError> {
        let policy = match self.variant.as_str() {
            "fifo" => Policy::fifo(self.capacity)?,
            "fifo_merge" => Policy::fifo_merge(self.capacity)?,
            "w_tiny_lfu" => Policy::w_tiny_lfu(
                self.capacity,
                self.window.unwrap_or(0),
                self.main.unwrap_or(self.capacity),
            )?,
            other => return Err(StoreError::Parse(format!("unknown policy variant {other:?}"))),
        };
        Ok(policy)
    }
}

/// On-disk unit record; field names follow the short-term memory document
/// layout (`objectType`, `position`, `objectId`, `imagePath`), with the
/// state and embedding metadata in an extensions block.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnitRecord {
    #[serde(rename = "objectType")]
    object_type: String,
    position: Position,
    #[serde(rename = "objectId")]
    object_id: String,
    #[serde(rename = "imagePath")]
    image_path: String,
    #[serde(default)]
    extensions: Extensions,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Extensions {
    #[serde(default = "default_state")]
    state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    embedding: Option<EmbeddingMeta>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    segment: Option<String>,
}

fn default_state() -> String {
    "none".to_string()
}

impl Default for Extensions {
    fn default() -> Self {
        Self {
            state: default_state(),
            embedding: None,
            segment: None,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingMeta {
    provider: String,
    dim: usize,
}

impl UnitRecord {
    fn from_unit(unit: &MemoryUnit, segment: Segment) -> Self {
        Self {
            object_type: unit.object_type.clone(),
            position: unit.position,
            object_id: unit.object_id.as_str().to_string(),
            image_path: unit.image_path.clone(),
            extensions: Extensions {
                state: unit.state.label().to_string(),
                embedding: Some(EmbeddingMeta {
                    provider: "local".to_string(),
                    dim: unit.embedding.dim(),
                }),
                segment: Some(segment.label().to_string()),
            },
        }
    }

    fn into_unit(self) -> Result<(MemoryUnit, Segment), StoreError> {
        let state: ObjectState = self.extensions.state.parse()?;
        let key = UnitKey::new(self.object_id)?;
        let segment = match self.extensions.segment.as_deref() {
            None | Some("queue") => Segment::Queue,
            Some("window") => Segment::Window,
            Some("probation") => Segment::Probation,
            Some("protected") => Segment::Protected,
            Some(other) => return Err(StoreError::Parse(format!("unknown segment {other:?}"))),
        };
        let unit = MemoryUnit::new(self.object_type, key, self.position, state, self.image_path);
        Ok((unit, segment))
    }
}
