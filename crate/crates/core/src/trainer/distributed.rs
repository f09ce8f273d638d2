//! Actor / worker / chief training. Actors roll out episodes into a shared
//! buffer, workers turn buffer batches into gradients against their own
//! parameter snapshot, and the chief (the calling thread) applies them with
//! Adam and publishes versioned snapshots.
//!
//! Pacing: the number of gradients the workers may claim is tied to the
//! amount of data collected (`training_steps` per `rollout_steps` units), and
//! an actor starts a new episode only once the chief has applied the updates
//! owed for the data already collected. Actors never wait while the buffer is
//! empty, and workers can always claim the updates an actor waits for, so the
//! scheme cannot deadlock.

use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use crossbeam::channel::{self, RecvTimeoutError};
use parking_lot::{Mutex, RwLock};
use rand::RngCore;

use super::config::{BufferKind, DistributedConfig, RolloutMode, TrainConfig};
use super::exploration::{shape, StateVisitCounts};
use super::metrics::TrainMetrics;
use super::single::{init_policy, policy_action, stream};
use crate::envs::make_env;
use crate::error::{Error, Result};
use crate::mdp::{episodic_reward, try_rollout};
use crate::policy::{loss_and_grad, AdamState, PolicyParams};
use crate::replay::{AnyBuffer, RankingBuffer, RingBuffer, SharedBuffer};

const IDLE: Duration = Duration::from_micros(100);

/// A published parameter version. Readers clone the `Arc` and always see a
/// complete parameter vector.
#[derive(Debug)]
pub struct Snapshot {
    pub version: u64,
    pub params: PolicyParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedStats {
    pub submitted: u64,
    pub applied: u64,
    pub final_version: u64,
    pub max_buffer_len: usize,
    pub buffer_capacity: usize,
    /// Every worker saw snapshot versions in non-decreasing order.
    pub versions_monotone: bool,
    /// Gradients computed against a version older than the one they were applied to.
    pub stale_gradients: u64,
    pub episodes: u64,
}

#[derive(Debug)]
pub struct DistributedRun {
    pub params: PolicyParams,
    pub metrics: TrainMetrics,
    pub stats: DistributedStats,
}

struct Gradient {
    grad: Vec<f64>,
    loss: f64,
    version: u64,
}

struct EpisodeLog {
    metrics: TrainMetrics,
    steps: u64,
}

struct Shared<'a> {
    config: &'a TrainConfig,
    dist: &'a DistributedConfig,
    buffer: SharedBuffer,
    snapshot: RwLock<Arc<Snapshot>>,
    log: Mutex<EpisodeLog>,
    /// Env steps handed out to running episodes or already used.
    reserved: AtomicU64,
    /// Collected data in `rollout_mode` units.
    units: AtomicU64,
    claimed: AtomicU64,
    submitted: AtomicU64,
    applied: AtomicU64,
    actors_running: AtomicUsize,
    stop: AtomicBool,
    versions_monotone: AtomicBool,
    max_buffer_len: AtomicUsize,
    last_loss: Mutex<Option<f64>>,
    error: Mutex<Option<Error>>,
    start: Instant,
}

impl Shared<'_> {
    fn quota(&self) -> u64 {
        let units = self.units.load(Ordering::Acquire) as u128;
        (units * self.config.training_steps as u128 / self.config.rollout_steps as u128) as u64
    }

    fn fail(&self, e: Error) {
        let mut slot = self.error.lock();
        if slot.is_none() {
            *slot = Some(e);
        }
        self.stop.store(true, Ordering::Release);
    }

    fn stopped(&self) -> bool {
        self.stop.load(Ordering::Acquire)
    }

    /// Reserves up to `want` env steps of the global budget.
    fn reserve(&self, want: u64) -> u64 {
        let total = self.config.total_steps;
        let mut cur = self.reserved.load(Ordering::Acquire);
        loop {
            let grant = want.min(total.saturating_sub(cur));
            if grant == 0 {
                return 0;
            }
            match self.reserved.compare_exchange_weak(cur, cur + grant, Ordering::AcqRel, Ordering::Acquire) {
                Ok(_) => return grant,
                Err(actual) => cur = actual,
            }
        }
    }

    fn clock(&self) -> f64 {
        if self.config.wallclock {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }
}

fn actor(shared: &Shared, index: usize) -> Result<()> {
    let config = shared.config;
    let mut seeder = stream(config.seed, 16 + index as u64);
    let mut env = make_env(&config.env, seeder.next_u64())?;
    let mut rng = stream(config.seed, 1024 + index as u64);
    let cap = env.spec().max_episode_steps as u64;
    let bound = env.spec().action_bound;
    let mut counts = StateVisitCounts::new();
    while !shared.stopped() {
        while !shared.stopped() && !shared.buffer.is_empty() && shared.applied.load(Ordering::Acquire) < shared.quota()
        {
            thread::sleep(IDLE);
        }
        let grant = shared.reserve(cap);
        if grant == 0 || shared.stopped() {
            break;
        }
        let snap = shared.snapshot.read().clone();
        let raw = try_rollout(
            env.as_mut(),
            |obs, rng| policy_action(&snap.params, config.sigma, bound, obs, rng),
            grant as usize,
            &mut rng,
        )?;
        let used = raw.len() as u64;
        shared.reserved.fetch_sub(grant - used, Ordering::AcqRel);
        let shaped = shape(&raw, &mut counts, config.exploration_beta)?;
        shared.buffer.insert_keyed(&raw, episodic_reward(&shaped));
        let (len, range) = shared.buffer.with(|b| (b.len(), b.raw_reward_range().ok()));
        shared.max_buffer_len.fetch_max(len, Ordering::AcqRel);
        {
            let mut log = shared.log.lock();
            log.steps += used;
            let step = log.steps;
            let loss = *shared.last_loss.lock();
            log.metrics.record_episode(step, episodic_reward(&raw), shared.clock(), range, loss);
            if config.target_return.is_some_and(|t| log.metrics.reached(t)) {
                shared.stop.store(true, Ordering::Release);
            }
        }
        let units = match config.rollout_mode {
            RolloutMode::Episodes => 1,
            RolloutMode::Steps => used,
        };
        shared.units.fetch_add(units, Ordering::AcqRel);
    }
    Ok(())
}

fn worker(shared: &Shared, index: usize, tx: channel::Sender<Gradient>) -> Result<()> {
    let config = shared.config;
    let mut rng = stream(config.seed, 4096 + index as u64);
    let mut last_version = 0;
    loop {
        if shared.stopped() || shared.actors_running.load(Ordering::Acquire) == 0 {
            return Ok(());
        }
        if shared.buffer.is_empty() {
            thread::sleep(IDLE);
            continue;
        }
        let limit = shared.quota() + shared.dist.n_workers as u64;
        let claimed = shared.claimed.load(Ordering::Acquire);
        if claimed >= limit {
            thread::sleep(IDLE);
            continue;
        }
        if shared.claimed.compare_exchange(claimed, claimed + 1, Ordering::AcqRel, Ordering::Acquire).is_err() {
            continue;
        }
        let snap = shared.snapshot.read().clone();
        if snap.version < last_version {
            shared.versions_monotone.store(false, Ordering::Release);
        }
        last_version = snap.version;
        let batch = shared.buffer.sample_batch(config.batch_size, &mut rng)?;
        let (loss, grad) = loss_and_grad(&snap.params, &batch, config.entropy_coef)?;
        shared.submitted.fetch_add(1, Ordering::AcqRel);
        if tx.send(Gradient { grad, loss, version: snap.version }).is_err() {
            return Ok(());
        }
    }
}

/// Trains with `n_actors` actor threads, `n_workers` worker threads and the
/// calling thread as chief. Requires `config.distributed`.
pub fn train_distributed(config: &TrainConfig) -> Result<DistributedRun> {
    config.validate()?;
    let dist = config
        .distributed
        .as_ref()
        .ok_or_else(|| Error::Config("train_distributed needs distributed settings".into()))?;
    let probe = make_env(&config.env, config.seed)?;
    let mut init_rng = stream(config.seed, 0);
    let mut params = init_policy(config, probe.as_ref(), &mut init_rng)?;
    drop(probe);
    let mut adam = AdamState::new(params.theta().len(), config.learning_rate);
    let buffer = match dist.buffer_kind {
        BufferKind::Ranking => AnyBuffer::Ranking(RankingBuffer::new(config.buffer_size)?),
        BufferKind::Ring => AnyBuffer::Ring(RingBuffer::new(dist.ring_capacity, dist.ring_threshold)?),
    };
    let capacity = buffer.capacity();
    let shared = Shared {
        config,
        dist,
        buffer: SharedBuffer::new(buffer),
        snapshot: RwLock::new(Arc::new(Snapshot { version: 0, params: params.clone() })),
        log: Mutex::new(EpisodeLog { metrics: TrainMetrics::new(), steps: 0 }),
        reserved: AtomicU64::new(0),
        units: AtomicU64::new(0),
        claimed: AtomicU64::new(0),
        submitted: AtomicU64::new(0),
        applied: AtomicU64::new(0),
        actors_running: AtomicUsize::new(dist.n_actors),
        stop: AtomicBool::new(false),
        versions_monotone: AtomicBool::new(true),
        max_buffer_len: AtomicUsize::new(0),
        last_loss: Mutex::new(None),
        error: Mutex::new(None),
        start: Instant::now(),
    };
    let mut version = 0u64;
    let mut stale = 0u64;
    let (tx, rx) = channel::unbounded::<Gradient>();
    thread::scope(|scope| {
        let shared = &shared;
        for i in 0..dist.n_actors {
            scope.spawn(move || {
                if let Err(e) = actor(shared, i) {
                    shared.fail(e);
                }
                shared.actors_running.fetch_sub(1, Ordering::AcqRel);
            });
        }
        for j in 0..dist.n_workers {
            let tx = tx.clone();
            scope.spawn(move || {
                if let Err(e) = worker(shared, j, tx) {
                    shared.fail(e);
                }
            });
        }
        drop(tx);
        loop {
            match rx.recv_timeout(Duration::from_millis(5)) {
                Ok(g) => {
                    if let Err(e) = adam.step(params.theta_mut(), &g.grad) {
                        shared.fail(e);
                        continue;
                    }
                    if g.version < version {
                        stale += 1;
                    }
                    version += 1;
                    shared.applied.fetch_add(1, Ordering::AcqRel);
                    *shared.last_loss.lock() = Some(g.loss);
                    *shared.snapshot.write() = Arc::new(Snapshot { version, params: params.clone() });
                }
                Err(RecvTimeoutError::Timeout) => {}
                Err(RecvTimeoutError::Disconnected) => break,
            }
        }
    });
    if let Some(e) = shared.error.lock().take() {
        return Err(e);
    }
    let log = shared.log.into_inner();
    let stats = DistributedStats {
        submitted: shared.submitted.load(Ordering::Acquire),
        applied: shared.applied.load(Ordering::Acquire),
        final_version: version,
        max_buffer_len: shared.max_buffer_len.load(Ordering::Acquire),
        buffer_capacity: capacity,
        versions_monotone: shared.versions_monotone.load(Ordering::Acquire),
        stale_gradients: stale,
        episodes: log.metrics.episodes.len() as u64,
    };
    Ok(DistributedRun { params, metrics: log.metrics, stats })
}
