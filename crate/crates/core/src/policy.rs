//! Capacity-bounded replacement policies over memory-unit keys.
//!
//! Three variants: plain FIFO, FIFO with in-place merge on matching object
//! id, and W-TinyLFU (an LRU window plus a segmented main region whose
//! protected/probation split is refreshed by frequency-sketch admission).
//! All variants track hit statistics and a bounded resident key set.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::sketch::FrequencySketch;

/// Occupancy above which the memory counts as warmed up (strictly greater).
pub const WARMUP_OCCUPANCY: f64 = 0.95;

/// Fraction of the main segment reserved for protected keys by default.
pub const DEFAULT_PROTECTED_RATIO: f64 = 0.8;

/// Stable identifier of one object; equality defines "same object".
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UnitKey(String);

impl UnitKey {
    pub fn new(id: impl Into<String>) -> Result<Self, PolicyError> {
        let id = id.into();
        if id.is_empty() {
            return Err(PolicyError::EmptyKey);
        }
        Ok(Self(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_bytes(&self) -> &[u8] {
        self.0.as_bytes()
    }
}

impl std::fmt::Display for UnitKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PolicyError {
    #[error("unit key must be non-empty")]
    EmptyKey,
    #[error("capacity must be at least 1")]
    ZeroCapacity,
    #[error("window {window} + main {main} segments must sum to capacity {capacity}")]
    SegmentMismatch {
        window: usize,
        main: usize,
        capacity: usize,
    },
    #[error("main segment must hold at least 1 unit")]
    ZeroMain,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyVariant {
    Fifo,
    FifoMerge,
    WTinyLfu,
}

/// Which region a resident key currently occupies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Segment {
    /// FIFO queue (both FIFO variants).
    Queue,
    Window,
    Probation,
    Protected,
}

impl Segment {
    pub fn label(&self) -> &'static str {
        match self {
            Segment::Queue => "queue",
            Segment::Window => "window",
            Segment::Probation => "probation",
            Segment::Protected => "protected",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessOutcome {
    Hit,
    Miss,
}

impl AccessOutcome {
    pub fn is_hit(&self) -> bool {
        matches!(self, AccessOutcome::Hit)
    }
}

/// What an insert did: the evicted key, if any, and whether the new unit
/// merged into an already-resident one instead of taking a fresh slot.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EvictionReport {
    pub evicted: Option<UnitKey>,
    pub merged: bool,
}

/// One line of the optional eviction trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub step: u64,
    pub op: &'static str,
    pub key: UnitKey,
    pub segment: &'static str,
    pub evicted: Option<UnitKey>,
}

/// Replacement-policy bookkeeping over unit keys.
#[derive(Debug, Clone)]
pub struct Policy {
    variant: PolicyVariant,
    capacity: usize,
    // FIFO variants.
    queue: VecDeque<UnitKey>,
    queue_set: HashSet<UnitKey>,
    // W-TinyLFU segments, each ordered LRU (front) to MRU (back).
    window: Vec<UnitKey>,
    probation: Vec<UnitKey>,
    protected: Vec<UnitKey>,
    window_capacity: usize,
    main_capacity: usize,
    protected_capacity: usize,
    sketch: Option<FrequencySketch>,
    // Monotone tick for LRU-age tie-breaking at eviction.
    tick: u64,
    last_touch: HashMap<UnitKey, u64>,
    hits: u64,
    queries: u64,
    step: u64,
    trace: Option<Vec<TraceEvent>>,
}

impl Policy {
    pub fn fifo(capacity: usize) -> Result<Self, PolicyError> {
        Self::build(PolicyVariant::Fifo, capacity, 0, 0, None)
    }

    pub fn fifo_merge(capacity: usize) -> Result<Self, PolicyError> {
        Self::build(PolicyVariant::FifoMerge, capacity, 0, 0, None)
    }

    /// W-TinyLFU with the given window/main split. The split must sum to
    /// `capacity` with a main segment of at least one unit.
    pub fn w_tiny_lfu(capacity: usize, window: usize, main: usize) -> Result<Self, PolicyError> {
        Self::build(
            PolicyVariant::WTinyLfu,
            capacity,
            window,
            main,
            Some(FrequencySketch::for_capacity(capacity)),
        )
    }

    pub fn with_sketch(mut self, sketch: FrequencySketch) -> Self {
        if self.variant == PolicyVariant::WTinyLfu {
            self.sketch = Some(sketch);
        }
        self
    }

    pub fn with_protected_ratio(mut self, ratio: f64) -> Self {
        let ratio = ratio.clamp(0.0, 1.0);
        self.protected_capacity = (self.main_capacity as f64 * ratio).floor() as usize;
        self
    }

    fn build(
        variant: PolicyVariant,
        capacity: usize,
        window: usize,
        main: usize,
        sketch: Option<FrequencySketch>,
    ) -> Result<Self, PolicyError> {
        if capacity == 0 {
            return Err(PolicyError::ZeroCapacity);
        }
        if variant == PolicyVariant::WTinyLfu {
            if main == 0 {
                return Err(PolicyError::ZeroMain);
            }
            if window + main != capacity {
                return Err(PolicyError::SegmentMismatch {
                    window,
                    main,
                    capacity,
                });
            }
        }
        let protected_capacity = (main as f64 * DEFAULT_PROTECTED_RATIO).floor() as usize;
        Ok(Self {
            variant,
            capacity,
            queue: VecDeque::new(),
            queue_set: HashSet::new(),
            window: Vec::new(),
            probation: Vec::new(),
            protected: Vec::new(),
            window_capacity: window,
            main_capacity: main,
            protected_capacity,
            sketch,
            tick: 0,
            last_touch: HashMap::new(),
            hits: 0,
            queries: 0,
            step: 0,
            trace: None,
        })
    }

    pub fn variant(&self) -> PolicyVariant {
        self.variant
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn window_capacity(&self) -> usize {
        self.window_capacity
    }

    pub fn main_capacity(&self) -> usize {
        self.main_capacity
    }

    pub fn len(&self) -> usize {
        match self.variant {
            PolicyVariant::Fifo | PolicyVariant::FifoMerge => self.queue.len(),
            PolicyVariant::WTinyLfu => {
                self.window.len() + self.probation.len() + self.protected.len()
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn hits(&self) -> u64 {
        self.hits
    }

    pub fn queries(&self) -> u64 {
        self.queries
    }

    pub fn contains(&self, key: &UnitKey) -> bool {
        match self.variant {
            PolicyVariant::Fifo | PolicyVariant::FifoMerge => self.queue_set.contains(key),
            PolicyVariant::WTinyLfu => {
                self.window.contains(key)
                    || self.probation.contains(key)
                    || self.protected.contains(key)
            }
        }
    }

    /// Enable the eviction trace; events accumulate until drained.
    pub fn enable_trace(&mut self) {
        if self.trace.is_none() {
            self.trace = Some(Vec::new());
        }
    }

    pub fn take_trace(&mut self) -> Vec<TraceEvent> {
        self.trace.as_mut().map(std::mem::take).unwrap_or_default()
    }

    /// Read-only frequency estimate for a key (W-TinyLFU only; 0 otherwise).
    pub fn frequency_estimate(&self, key: &UnitKey) -> u32 {
        self.sketch
            .as_ref()
            .map(|s| s.estimate(key.as_bytes()))
            .unwrap_or(0)
    }

    fn touch(&mut self, key: &UnitKey) {
        self.tick += 1;
        self.last_touch.insert(key.clone(), self.tick);
    }

    fn record_trace(&mut self, op: &'static str, key: &UnitKey, evicted: Option<&UnitKey>) {
        if self.trace.is_none() {
            return;
        }
        let segment = self
            .segment_of(key)
            .map(|s| s.label())
            .unwrap_or("evicted");
        let event = TraceEvent {
            step: self.step,
            op,
            key: key.clone(),
            segment,
            evicted: evicted.cloned(),
        };
        if let Some(trace) = &mut self.trace {
            trace.push(event);
        }
    }

    fn segment_of(&self, key: &UnitKey) -> Option<Segment> {
        match self.variant {
            PolicyVariant::Fifo | PolicyVariant::FifoMerge => {
                self.queue_set.contains(key).then_some(Segment::Queue)
            }
            PolicyVariant::WTinyLfu => {
                if self.window.contains(key) {
                    Some(Segment::Window)
                } else if self.probation.contains(key) {
                    Some(Segment::Probation)
                } else if self.protected.contains(key) {
                    Some(Segment::Protected)
                } else {
                    None
                }
            }
        }
    }

    /// Look a key up, updating hit statistics and recency/frequency
    /// bookkeeping. Never changes the resident set.
    pub fn access(&mut self, key: &UnitKey) -> AccessOutcome {
        self.step += 1;
        self.queries += 1;
        if let Some(sketch) = self.sketch.as_mut() {
            sketch.increment(key.as_bytes());
        }
        let outcome = if self.contains(key) {
            self.hits += 1;
            if self.variant == PolicyVariant::WTinyLfu {
                self.reorder_on_hit(key);
            }
            AccessOutcome::Hit
        } else {
            AccessOutcome::Miss
        };
        self.record_trace("access", key, None);
        outcome
    }

    fn reorder_on_hit(&mut self, key: &UnitKey) {
        self.touch(key);
        if let Some(pos) = self.window.iter().position(|k| k == key) {
            let k = self.window.remove(pos);
            self.window.push(k);
        } else if let Some(pos) = self.probation.iter().position(|k| k == key) {
            let k = self.probation.remove(pos);
            if self.protected_capacity == 0 {
                // No room for a protected region; stay in probation as MRU.
                self.probation.push(k);
                return;
            }
            self.protected.push(k);
            if self.protected.len() > self.protected_capacity {
                // Demote the protected LRU back into probation.
                let demoted = self.protected.remove(0);
                self.touch(&demoted);
                self.probation.push(demoted);
            }
        } else if let Some(pos) = self.protected.iter().position(|k| k == key) {
            let k = self.protected.remove(pos);
            self.protected.push(k);
        }
    }

    /// Make `key` resident, evicting if needed. Returns the eviction report.
    pub fn insert(&mut self, key: &UnitKey) -> EvictionReport {
        self.step += 1;
        let report = match self.variant {
            PolicyVariant::Fifo => self.insert_fifo(key, false),
            PolicyVariant::FifoMerge => self.insert_fifo(key, true),
            PolicyVariant::WTinyLfu => self.insert_w_tiny_lfu(key),
        };
        self.record_trace("insert", key, report.evicted.as_ref());
        report
    }

    fn insert_fifo(&mut self, key: &UnitKey, merge: bool) -> EvictionReport {
        if self.queue_set.contains(key) {
            // Resident already: plain FIFO ignores the insert, the merge
            // variant replaces the payload in place. Queue position is
            // unchanged either way.
            return EvictionReport {
                evicted: None,
                merged: merge,
            };
        }
        self.queue.push_back(key.clone());
        self.queue_set.insert(key.clone());
        let evicted = if self.queue.len() > self.capacity {
            let victim = self.queue.pop_front().expect("non-empty queue");
            self.queue_set.remove(&victim);
            Some(victim)
        } else {
            None
        };
        EvictionReport {
            evicted,
            merged: false,
        }
    }

    fn insert_w_tiny_lfu(&mut self, key: &UnitKey) -> EvictionReport {
        let sketch = self.sketch.as_mut().expect("w-tinylfu has a sketch");
        sketch.increment(key.as_bytes());
        if self.contains(key) {
            // Fresh payload for a resident key: refresh recency only.
            self.reorder_on_hit(key);
            return EvictionReport::default();
        }
        self.touch(key);
        self.window.push(key.clone());
        let evicted = if self.len() > self.capacity {
            let victim = self.pick_victim();
            self.remove_from_segments(&victim);
            self.last_touch.remove(&victim);
            Some(victim)
        } else {
            None
        };
        // Spill window overflow into probation; the eviction above already
        // restored the total bound, so the main segment cannot overflow.
        while self.window.len() > self.window_capacity {
            let demoted = self.window.remove(0);
            self.touch(&demoted);
            self.probation.push(demoted);
        }
        EvictionReport {
            evicted,
            merged: false,
        }
    }

    /// Victim = minimum frequency estimate over window and probation keys,
    /// ties broken by evicting the least recently touched. Protected keys
    /// are never candidates.
    fn pick_victim(&self) -> UnitKey {
        let sketch = self.sketch.as_ref().expect("w-tinylfu has a sketch");
        self.window
            .iter()
            .chain(self.probation.iter())
            .min_by_key(|k| {
                (
                    sketch.estimate(k.as_bytes()),
                    self.last_touch.get(*k).copied().unwrap_or(0),
                )
            })
            .expect("candidate set is non-empty when over capacity")
            .clone()
    }

    fn remove_from_segments(&mut self, key: &UnitKey) {
        if let Some(pos) = self.window.iter().position(|k| k == key) {
            self.window.remove(pos);
        } else if let Some(pos) = self.probation.iter().position(|k| k == key) {
            self.probation.remove(pos);
        } else if let Some(pos) = self.protected.iter().position(|k| k == key) {
            self.protected.remove(pos);
        }
    }

    /// Count a query that could not be matched against any key (an empty
    /// recall); always a miss.
    pub fn record_miss_query(&mut self) {
        self.step += 1;
        self.queries += 1;
    }

    /// Rebuild the resident set from a serialized snapshot. Keys land in
    /// the given segments (FIFO variants use the queue in list order).
    /// Statistics and sketch state start fresh.
    pub fn restore_residents(
        &mut self,
        entries: &[(UnitKey, Segment)],
    ) -> Result<(), PolicyError> {
        if entries.len() > self.capacity {
            return Err(PolicyError::SegmentMismatch {
                window: entries.len(),
                main: 0,
                capacity: self.capacity,
            });
        }
        self.queue.clear();
        self.queue_set.clear();
        self.window.clear();
        self.probation.clear();
        self.protected.clear();
        self.last_touch.clear();
        for (key, segment) in entries {
            match self.variant {
                PolicyVariant::Fifo | PolicyVariant::FifoMerge => {
                    if self.queue_set.insert(key.clone()) {
                        self.queue.push_back(key.clone());
                    }
                }
                PolicyVariant::WTinyLfu => {
                    self.touch(key);
                    match segment {
                        Segment::Probation => self.probation.push(key.clone()),
                        Segment::Protected => self.protected.push(key.clone()),
                        _ => self.window.push(key.clone()),
                    }
                }
            }
        }
        Ok(())
    }

    /// Hits over queries; 0 when nothing has been queried yet.
    pub fn hit_rate(&self) -> f64 {
        if self.queries == 0 {
            0.0
        } else {
            self.hits as f64 / self.queries as f64
        }
    }

    /// Snapshot of resident keys with their segment labels. FIFO variants
    /// list arrival order; W-TinyLFU lists window, probation, then
    /// protected, each LRU to MRU.
    pub fn resident_keys(&self) -> Vec<(UnitKey, Segment)> {
        match self.variant {
            PolicyVariant::Fifo | PolicyVariant::FifoMerge => self
                .queue
                .iter()
                .map(|k| (k.clone(), Segment::Queue))
                .collect(),
            PolicyVariant::WTinyLfu => self
                .window
                .iter()
                .map(|k| (k.clone(), Segment::Window))
                .chain(self.probation.iter().map(|k| (k.clone(), Segment::Probation)))
                .chain(self.protected.iter().map(|k| (k.clone(), Segment::Protected)))
                .collect(),
        }
    }

    pub fn occupancy(&self) -> f64 {
        self.len() as f64 / self.capacity as f64
    }

    /// Warmed up once occupancy strictly exceeds 95%.
    pub fn is_warmed(&self) -> bool {
        self.occupancy() > WARMUP_OCCUPANCY
    }
}
