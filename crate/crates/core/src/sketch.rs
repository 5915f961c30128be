//! Approximate per-key usage-frequency counting for cache admission.
//!
//! A counting-Bloom-filter sketch: `depth` hash rows of `width` saturating
//! counters. Each increment bumps one counter per row and a global counter;
//! when the global counter reaches the reset threshold every counter is
//! halved (integer floor), which keeps the frequency statistics fresh.

use thiserror::Error;

/// Default saturation cap, equivalent to 4-bit counters.
pub const DEFAULT_COUNTER_CAP: u32 = 15;

/// Default sketch seed; fix it so estimates are reproducible across runs.
pub const DEFAULT_SKETCH_SEED: u64 = 0x5eed_cafe_f00d_0001;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SketchError {
    #[error("sketch depth must be at least 1")]
    ZeroDepth,
    #[error("sketch width must be at least 1")]
    ZeroWidth,
    #[error("sketch reset threshold must be at least 1")]
    ZeroResetThreshold,
}

/// Counting-Bloom-filter frequency estimator with periodic halving.
#[derive(Debug, Clone)]
pub struct FrequencySketch {
    depth: usize,
    width: usize,
    counters: Vec<u32>,
    counter_cap: u32,
    global_count: u64,
    reset_threshold: u64,
    hash_seeds: Vec<u64>,
}

impl FrequencySketch {
    pub fn new(depth: usize, width: usize, reset_threshold: u64) -> Result<Self, SketchError> {
        if depth == 0 {
            return Err(SketchError::ZeroDepth);
        }
        if width == 0 {
            return Err(SketchError::ZeroWidth);
        }
        if reset_threshold == 0 {
            return Err(SketchError::ZeroResetThreshold);
        }
        let hash_seeds = (0..depth)
            .map(|row| split_mix(DEFAULT_SKETCH_SEED.wrapping_add(row as u64)))
            .collect();
        Ok(Self {
            depth,
            width,
            counters: vec![0; depth * width],
            counter_cap: DEFAULT_COUNTER_CAP,
            global_count: 0,
            reset_threshold,
            hash_seeds,
        })
    }

    /// Default dimensions for a cache of `capacity` units: depth 4,
    /// width 8x capacity, reset threshold 10x capacity.
    pub fn for_capacity(capacity: usize) -> Self {
        let capacity = capacity.max(1);
        Self::new(4, capacity * 8, capacity as u64 * 10).expect("positive dimensions")
    }

    pub fn with_counter_cap(mut self, cap: u32) -> Self {
        self.counter_cap = cap.max(1);
        self
    }

    /// Re-derive the row seeds from a run-level seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.hash_seeds = (0..self.depth)
            .map(|row| split_mix(seed.wrapping_add(row as u64)))
            .collect();
        self
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn global_count(&self) -> u64 {
        self.global_count
    }

    pub fn reset_threshold(&self) -> u64 {
        self.reset_threshold
    }

    fn index(&self, row: usize, key: &[u8]) -> usize {
        let h = seeded_hash(self.hash_seeds[row], key);
        row * self.width + (h % self.width as u64) as usize
    }

    /// Record one use of `key`. Fires the halving reset the moment the
    /// global counter reaches the threshold.
    pub fn increment(&mut self, key: &[u8]) {
        for row in 0..self.depth {
            let idx = self.index(row, key);
            let c = &mut self.counters[idx];
            if *c < self.counter_cap {
                *c += 1;
            }
        }
        self.global_count += 1;
        if self.global_count >= self.reset_threshold {
            self.reset_halve();
        }
    }

    /// Minimum over the row counters addressed by `key`. Read-only.
    pub fn estimate(&self, key: &[u8]) -> u32 {
        (0..self.depth)
            .map(|row| self.counters[self.index(row, key)])
            .min()
            .unwrap_or(0)
    }

    /// Halve every counter (floor) and zero the global counter.
    pub fn reset_halve(&mut self) {
        for c in &mut self.counters {
            *c /= 2;
        }
        self.global_count = 0;
    }
}

fn split_mix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seeded FNV-1a with a final mix; stable across processes and platforms.
pub(crate) fn seeded_hash(seed: u64, bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64 ^ seed;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    split_mix(h)
}
