//! Synthetic task streams, the simulated agent cost model, and experiment
//! metrics (hit rate, retrieval accuracy, reduced exploration and time).
//!
//! Each task targets one object from a fixed pool. The agent consults its
//! short-term memory first: a hit skips the exploration action, a miss
//! pays for it. Costs accumulate only after the memory has warmed up
//! (occupancy strictly above 95%), which makes reduced exploration equal
//! the post-warm-up hit rate by construction.

use rand::distributions::Distribution as _;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Zipf;
use thiserror::Error;

use crate::geometry::Point3;
use crate::policy::{Policy, PolicyError, PolicyVariant, UnitKey};
use crate::short_term::{MemoryUnit, ObjectState, ShortTermStore, StoreError, DEFAULT_RECALL_K};
use crate::sketch::FrequencySketch;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid stream parameters: {0}")]
    InvalidParams(String),
    #[error("experiment requires a fresh store (no units, no queries)")]
    StoreNotFresh,
    #[error("sweep grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// How task targets are drawn from the object pool.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TargetDistribution {
    Uniform,
    /// Power-law popularity with the given exponent.
    Zipf { exponent: f64 },
    /// A fresh uniform target every `block_len` tasks, repeated in between.
    RepeatBlock { block_len: usize },
}

/// Parameters of a synthetic task stream.
#[derive(Debug, Clone, PartialEq)]
pub struct StreamParams {
    pub pool_size: usize,
    pub length: usize,
    pub distribution: TargetDistribution,
    pub seed: u64,
    /// Fraction of tasks whose instruction shares no token with the
    /// target's type, exercising recall failure on vague wording.
    pub ambiguous_fraction: f64,
}

impl StreamParams {
    pub fn new(pool_size: usize, length: usize, distribution: TargetDistribution, seed: u64) -> Self {
        Self {
            pool_size,
            length,
            distribution,
            seed,
            ambiguous_fraction: 0.0,
        }
    }

    pub fn with_ambiguous_fraction(mut self, fraction: f64) -> Self {
        self.ambiguous_fraction = fraction;
        self
    }

    fn validate(&self) -> Result<(), SimError> {
        if self.pool_size == 0 {
            return Err(SimError::InvalidParams("pool_size must be positive".into()));
        }
        if self.length == 0 {
            return Err(SimError::InvalidParams("length must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.ambiguous_fraction) {
            return Err(SimError::InvalidParams(
                "ambiguous_fraction must be in [0, 1]".into(),
            ));
        }
        match self.distribution {
            TargetDistribution::Zipf { exponent } => {
                if !(exponent.is_finite() && exponent > 0.0) {
                    return Err(SimError::InvalidParams(
                        "zipf exponent must be positive and finite".into(),
                    ));
                }
            }
            TargetDistribution::RepeatBlock { block_len } => {
                if block_len == 0 {
                    return Err(SimError::InvalidParams("block_len must be positive".into()));
                }
            }
            TargetDistribution::Uniform => {}
        }
        Ok(())
    }
}

/// One instruction aimed at one pool object.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub instruction: String,
    pub target: UnitKey,
    pub target_index: usize,
    pub requires_memory: bool,
}

/// An object in the simulated environment; position and state are the
/// ground truth injected into recorded memory units.
#[derive(Debug, Clone, PartialEq)]
pub struct PoolObject {
    pub object_type: String,
    pub object_id: UnitKey,
    pub position: Point3<f64>,
    pub state: ObjectState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskStream {
    pub pool: Vec<PoolObject>,
    pub tasks: Vec<Task>,
}

fn pool_object(index: usize) -> PoolObject {
    let object_type = format!("Obj{index:03}");
    let object_id = UnitKey::new(format!("{object_type}|{index}")).expect("non-empty id");
    // Deterministic pseudo-layout: a 0.5 m grid.
    let position = Point3::new(
        (index % 10) as f64 * 0.5,
        0.5,
        (index / 10) as f64 * 0.5,
    );
    PoolObject {
        object_type,
        object_id,
        position,
        state: ObjectState::ALL[index % ObjectState::ALL.len()],
    }
}

/// Generate a reproducible task stream.
pub fn generate_stream(params: &StreamParams) -> Result<TaskStream, SimError> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let pool: Vec<PoolObject> = (0..params.pool_size).map(pool_object).collect();

    let zipf = match params.distribution {
        TargetDistribution::Zipf { exponent } => Some(
            Zipf::new(params.pool_size as u64, exponent)
                .map_err(|e| SimError::InvalidParams(format!("zipf: {e}")))?,
        ),
        _ => None,
    };

    let mut seen = vec![false; params.pool_size];
    let mut block_target = 0usize;
    let mut tasks = Vec::with_capacity(params.length);
    for step in 0..params.length {
        let index = match params.distribution {
            TargetDistribution::Uniform => rng.gen_range(0..params.pool_size),
            TargetDistribution::Zipf { .. } => {
                let rank = zipf.as_ref().expect("zipf configured").sample(&mut rng);
                rank as usize - 1
            }
            TargetDistribution::RepeatBlock { block_len } => {
                if step % block_len == 0 {
                    block_target = rng.gen_range(0..params.pool_size);
                }
                block_target
            }
        };
        let object = &pool[index];
        let ambiguous =
            params.ambiguous_fraction > 0.0 && rng.gen_bool(params.ambiguous_fraction);
        let instruction = if ambiguous {
            "fetch the item needed for the next step".to_string()
        } else {
            format!("bring the {}", object.object_type.to_lowercase())
        };
        tasks.push(Task {
            instruction,
            target: object.object_id.clone(),
            target_index: index,
            requires_memory: seen[index],
        });
        seen[index] = true;
    }
    Ok(TaskStream { pool, tasks })
}

/// Abstract action costs in simulated time units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostModel {
    pub explore_cost: f64,
    pub goto_cost: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            explore_cost: 5.0,
            goto_cost: 1.0,
        }
    }
}

/// Per-run metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport {
    /// Overall memory hit rate; equals the policy's own counter.
    pub mhr: f64,
    /// Hit rate over post-warm-up steps only.
    pub post_warmup_mhr: f64,
    /// Fraction of memory-requiring tasks whose rank-1 recall matched.
    pub mra: f64,
    /// Reduced exploration: explorations avoided over would-be
    /// explorations, post-warm-up.
    pub re: f64,
    /// Reduced time over would-be total time, post-warm-up.
    pub rt: f64,
    /// First step (1-based) at which occupancy strictly exceeded 95%.
    pub warmup_step: Option<usize>,
    /// Cumulative hit rate after each step.
    pub hit_rate_series: Vec<f64>,
    pub e_total: u64,
    pub e_reduced: u64,
    pub t_total: f64,
    pub t_reduced: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Run one experiment over a fresh store.
///
/// Per task: untracked recall feeds retrieval accuracy; a policy probe of
/// the target decides hit or miss (the only counted query); post-warm-up,
/// a hit skips the exploration cost; finally the target's fresh unit is
/// recorded.
pub fn run_experiment(
    stream: &TaskStream,
    store: &mut ShortTermStore,
    cost_model: &CostModel,
    recall_k: usize,
) -> Result<ExperimentReport, SimError> {
    if !store.is_empty() || store.policy().queries() > 0 {
        return Err(SimError::StoreNotFresh);
    }
    let recall_k = if recall_k == 0 { DEFAULT_RECALL_K } else { recall_k };

    let mut warmup_step: Option<usize> = None;
    let mut hit_rate_series = Vec::with_capacity(stream.tasks.len());
    let (mut e_total, mut e_reduced) = (0u64, 0u64);
    let (mut t_total, mut t_reduced) = (0.0f64, 0.0f64);
    let (mut mra_hits, mut mra_tasks) = (0u64, 0u64);

    for (step0, task) in stream.tasks.iter().enumerate() {
        let step = step0 + 1;

        if task.requires_memory {
            mra_tasks += 1;
            let recalled = store.recall_untracked(&task.instruction, recall_k)?;
            if recalled
                .first()
                .is_some_and(|(unit, _)| unit.object_id == task.target)
            {
                mra_hits += 1;
            }
        }

        let hit = store.probe(&task.target);

        if warmup_step.is_some() {
            e_total += 1;
            t_total += cost_model.explore_cost + cost_model.goto_cost;
            if hit {
                e_reduced += 1;
                t_reduced += cost_model.explore_cost;
            }
        }

        let object = &stream.pool[task.target_index];
        store.record(MemoryUnit::new(
            object.object_type.clone(),
            object.object_id.clone(),
            object.position,
            object.state,
            format!("/short_term/images/{}.jpg", object.object_type),
        ));

        if warmup_step.is_none() && store.policy().is_warmed() {
            warmup_step = Some(step);
        }
        hit_rate_series.push(store.policy().hit_rate());
    }

    Ok(ExperimentReport {
        mhr: store.policy().hit_rate(),
        post_warmup_mhr: ratio(e_reduced as f64, e_total as f64),
        mra: ratio(mra_hits as f64, mra_tasks as f64),
        re: ratio(e_reduced as f64, e_total as f64),
        rt: ratio(t_reduced, t_total),
        warmup_step,
        hit_rate_series,
        e_total,
        e_reduced,
        t_total,
        t_reduced,
    })
}

/// One policy configuration in a sweep grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicySpec {
    pub variant: PolicyVariant,
    pub capacity: usize,
    /// Window/main split; ignored by the FIFO variants.
    pub window: usize,
    pub main: usize,
}

impl PolicySpec {
    pub fn fifo(capacity: usize) -> Self {
        Self {
            variant: PolicyVariant::Fifo,
            capacity,
            window: 0,
            main: 0,
        }
    }

    pub fn fifo_merge(capacity: usize) -> Self {
        Self {
            variant: PolicyVariant::FifoMerge,
            capacity,
            window: 0,
            main: 0,
        }
    }

    pub fn w_tiny_lfu(capacity: usize, window: usize, main: usize) -> Self {
        Self {
            variant: PolicyVariant::WTinyLfu,
            capacity,
            window,
            main,
        }
    }

    /// Build the policy, seeding the sketch from the run seed.
    pub fn build(&self, seed: u64) -> Result<Policy, PolicyError> {
        match self.variant {
            PolicyVariant::Fifo => Policy::fifo(self.capacity),
            PolicyVariant::FifoMerge => Policy::fifo_merge(self.capacity),
            PolicyVariant::WTinyLfu => {
                let sketch = FrequencySketch::for_capacity(self.capacity).with_seed(seed);
                Ok(Policy::w_tiny_lfu(self.capacity, self.window, self.main)?
                    .with_sketch(sketch))
            }
        }
    }

    pub fn label(&self) -> String {
        match self.variant {
            PolicyVariant::Fifo => format!("fifo[{}]", self.capacity),
            PolicyVariant::FifoMerge => format!("fifo_merge[{}]", self.capacity),
            PolicyVariant::WTinyLfu => format!("w_tiny_lfu[{},{}]", self.window, self.main),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub policies: Vec<PolicySpec>,
    pub stream: StreamParams,
    /// Seeds override the stream seed, one run per (policy, seed).
    pub seeds: Vec<u64>,
    pub cost_model: CostModel,
    pub recall_k: usize,
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub policy: PolicySpec,
    pub seed: u64,
    pub report: ExperimentReport,
}

/// Run every grid point on a fresh store, the same stream shared per seed.
pub fn sweep(config: &SweepConfig) -> Result<Vec<SweepRow>, SimError> {
    if config.policies.is_empty() || config.seeds.is_empty() {
        return Err(SimError::EmptyGrid);
    }
    let mut rows = Vec::with_capacity(config.policies.len() * config.seeds.len());
    for &seed in &config.seeds {
        let mut params = config.stream.clone();
        params.seed = seed;
        let stream = generate_stream(&params)?;
        for policy in &config.policies {
            let mut store = ShortTermStore::new(policy.build(seed)?);
            let report = run_experiment(&stream, &mut store, &config.cost_model, config.recall_k)?;
            rows.push(SweepRow {
                policy: *policy,
                seed,
                report,
            });
        }
    }
    Ok(rows)
}
