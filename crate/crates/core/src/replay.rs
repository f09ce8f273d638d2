//! Ranking buffer (top-D state-action pairs by episodic reward) and the
//! threshold-filtered ring buffer used by the distributed trainer.

use std::io::Write;

use ndarray::Array2;
use parking_lot::RwLock;
use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{episodic_reward, format_trajectory_line, ActionValue, Step, Trajectory};
use crate::policy::{BatchActions, BatchSample};

#[derive(Debug, Clone, PartialEq)]
pub struct RankedPair {
    pub observation: Vec<f64>,
    pub action: ActionValue,
    /// Ranking key: the source episode's episodic reward, shaped when
    /// exploration is on.
    pub episodic_reward: f64,
    /// The source episode's unshaped episodic reward.
    pub raw_reward: f64,
    pub seq: u64,
    pub episode: u64,
    pub timestep: usize,
    pub step_reward: f64,
}

impl RankedPair {
    fn to_step(&self) -> Step {
        Step {
            observation: self.observation.clone(),
            state_id: None,
            action: self.action.clone(),
            reward: self.step_reward,
        }
    }
}

/// Orders pairs as the buffer stores them: higher reward first, newer first
/// among equal rewards.
pub fn rank_order(a: &RankedPair, b: &RankedPair) -> std::cmp::Ordering {
    b.episodic_reward.total_cmp(&a.episodic_reward).then(b.seq.cmp(&a.seq))
}

#[derive(Debug, Clone, Default)]
struct Counters {
    next_seq: u64,
    next_episode: u64,
}

impl Counters {
    fn annotate(&mut self, traj: &Trajectory, key: f64) -> Vec<RankedPair> {
        let raw = episodic_reward(traj);
        let episode = self.next_episode;
        self.next_episode += 1;
        traj.steps()
            .iter()
            .enumerate()
            .map(|(t, step)| {
                let seq = self.next_seq;
                self.next_seq += 1;
                RankedPair {
                    observation: step.observation.clone(),
                    action: step.action.clone(),
                    episodic_reward: key,
                    raw_reward: raw,
                    seq,
                    episode,
                    timestep: t,
                    step_reward: step.reward,
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct RankingBuffer {
    capacity: usize,
    pairs: Vec<RankedPair>,
    counters: Counters,
}

impl RankingBuffer {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("buffer capacity must be at least 1".into()));
        }
        Ok(Self { capacity, pairs: Vec::with_capacity(capacity), counters: Counters::default() })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Retained pairs in rank order.
    pub fn pairs(&self) -> &[RankedPair] {
        &self.pairs
    }

    /// Inserts every pair of `traj` keyed by its episodic reward and returns
    /// how many of them survive truncation to capacity.
    pub fn insert_episode(&mut self, traj: &Trajectory) -> usize {
        self.insert_keyed(traj, episodic_reward(traj))
    }

    /// As [`insert_episode`](Self::insert_episode) but ranked by `key`
    /// instead of the trajectory's own rewards.
    pub fn insert_keyed(&mut self, traj: &Trajectory, key: f64) -> usize {
        let mut fresh = self.counters.annotate(traj, key);
        // Fresh pairs outrank every stored pair of equal reward, so they go
        // right after the strictly better ones, newest first.
        let at = self.pairs.partition_point(|p| p.episodic_reward > key);
        if at >= self.capacity {
            return 0;
        }
        fresh.reverse();
        let kept = fresh.len().min(self.capacity - at);
        fresh.truncate(kept);
        self.pairs.splice(at..at, fresh);
        self.pairs.truncate(self.capacity);
        kept
    }

    pub fn sample_indices<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Vec<usize>> {
        if self.pairs.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        Ok((0..n).map(|_| rng.random_range(0..self.pairs.len())).collect())
    }

    /// `n` pairs drawn uniformly with replacement.
    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<BatchSample> {
        let idx = self.sample_indices(n, rng)?;
        batch_from(&self.pairs, &idx)
    }

    pub fn min_retained_reward(&self) -> Result<f64> {
        self.pairs.last().map(|p| p.episodic_reward).ok_or(Error::EmptyBuffer)
    }

    pub fn max_retained_reward(&self) -> Result<f64> {
        self.pairs.first().map(|p| p.episodic_reward).ok_or(Error::EmptyBuffer)
    }

    /// Smallest and largest unshaped episodic reward among retained pairs.
    pub fn raw_reward_range(&self) -> Result<(f64, f64)> {
        raw_range(&self.pairs)
    }

    /// Ids of episodes with at least one retained pair.
    pub fn episode_ids(&self) -> Vec<u64> {
        let mut ids: Vec<u64> = self.pairs.iter().map(|p| p.episode).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Id the next inserted episode will receive.
    pub fn next_episode_id(&self) -> u64 {
        self.counters.next_episode
    }

    /// Writes retained pairs in rank order, one trajectory-format line each
    /// with the episodic reward appended.
    pub fn dump<W: Write>(&self, out: W) -> Result<()> {
        dump_pairs(out, &self.pairs)
    }
}

#[derive(Debug, Clone)]
pub struct RingBuffer {
    capacity: usize,
    threshold: f64,
    pairs: Vec<RankedPair>,
    cursor: usize,
    counters: Counters,
}

impl RingBuffer {
    pub fn new(capacity: usize, threshold: f64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidArgument("ring capacity must be at least 1".into()));
        }
        if threshold.is_nan() {
            return Err(Error::InvalidArgument("ring threshold is NaN".into()));
        }
        Ok(Self { capacity, threshold, pairs: Vec::new(), cursor: 0, counters: Counters::default() })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Stored pairs in slot order (not insertion order once wrapped).
    pub fn pairs(&self) -> &[RankedPair] {
        &self.pairs
    }

    /// Writes all pairs of `traj` if its episodic reward clears the threshold.
    pub fn ring_insert(&mut self, traj: &Trajectory) -> bool {
        self.insert_keyed(traj, episodic_reward(traj))
    }

    pub fn insert_keyed(&mut self, traj: &Trajectory, key: f64) -> bool {
        if key < self.threshold {
            return false;
        }
        for pair in self.counters.annotate(traj, key) {
            if self.pairs.len() < self.capacity {
                self.pairs.push(pair);
            } else {
                self.pairs[self.cursor] = pair;
            }
            self.cursor = (self.cursor + 1) % self.capacity;
        }
        true
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<BatchSample> {
        if self.pairs.is_empty() {
            return Err(Error::EmptyBuffer);
        }
        let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..self.pairs.len())).collect();
        batch_from(&self.pairs, &idx)
    }

    pub fn raw_reward_range(&self) -> Result<(f64, f64)> {
        raw_range(&self.pairs)
    }
}

fn raw_range(pairs: &[RankedPair]) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Err(Error::EmptyBuffer);
    }
    Ok(pairs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.raw_reward), hi.max(p.raw_reward))))
}

/// Stacks the selected pairs into a training batch.
pub fn batch_from(pairs: &[RankedPair], idx: &[usize]) -> Result<BatchSample> {
    let first = idx
        .first()
        .map(|&i| &pairs[i])
        .ok_or_else(|| Error::InvalidArgument("batch size must be at least 1".into()))?;
    let dim = first.observation.len();
    let mut obs = Array2::zeros((idx.len(), dim));
    for (mut row, &i) in obs.rows_mut().into_iter().zip(idx) {
        let o = &pairs[i].observation;
        if o.len() != dim {
            return Err(Error::Shape(format!("observation of length {} in a batch of width {dim}", o.len())));
        }
        row.assign(&ndarray::ArrayView1::from(o.as_slice()));
    }
    let actions = match &first.action {
        ActionValue::Discrete(_) => BatchActions::Discrete(
            idx.iter()
                .map(|&i| pairs[i].action.as_discrete().ok_or_else(|| Error::Shape("mixed action kinds".into())))
                .collect::<Result<_>>()?,
        ),
        ActionValue::Continuous(a) => {
            let mut acts = Array2::zeros((idx.len(), a.len()));
            for (mut row, &i) in acts.rows_mut().into_iter().zip(idx) {
                let a = pairs[i].action.as_continuous().ok_or_else(|| Error::Shape("mixed action kinds".into()))?;
                if a.len() != row.len() {
                    return Err(Error::Shape("mixed action dimensions".into()));
                }
                row.assign(&ndarray::ArrayView1::from(a));
            }
            BatchActions::Continuous(acts)
        }
    };
    BatchSample::new(obs, actions)
}

pub fn dump_pairs<W: Write>(mut out: W, pairs: &[RankedPair]) -> Result<()> {
    for p in pairs {
        writeln!(out, "{}", format_trajectory_line(p.timestep, &p.to_step(), &[p.episodic_reward]))?;
    }
    Ok(())
}

/// Either buffer kind, for code that is generic over the distributed
/// trainer's buffer setting.
#[derive(Debug, Clone)]
pub enum AnyBuffer {
    Ranking(RankingBuffer),
    Ring(RingBuffer),
}

impl AnyBuffer {
    /// Returns the number of the episode's pairs now stored.
    pub fn insert_keyed(&mut self, traj: &Trajectory, key: f64) -> usize {
        match self {
            AnyBuffer::Ranking(b) => b.insert_keyed(traj, key),
            AnyBuffer::Ring(b) => {
                if b.insert_keyed(traj, key) {
                    traj.len().min(b.capacity())
                } else {
                    0
                }
            }
        }
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<BatchSample> {
        match self {
            AnyBuffer::Ranking(b) => b.sample_batch(n, rng),
            AnyBuffer::Ring(b) => b.sample_batch(n, rng),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            AnyBuffer::Ranking(b) => b.len(),
            AnyBuffer::Ring(b) => b.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        match self {
            AnyBuffer::Ranking(b) => b.capacity(),
            AnyBuffer::Ring(b) => b.capacity(),
        }
    }

    pub fn raw_reward_range(&self) -> Result<(f64, f64)> {
        match self {
            AnyBuffer::Ranking(b) => b.raw_reward_range(),
            AnyBuffer::Ring(b) => b.raw_reward_range(),
        }
    }
}

/// Buffer shared between threads: inserts take the write lock for the whole
/// episode, sampling takes the read lock.
#[derive(Debug)]
pub struct SharedBuffer {
    inner: RwLock<AnyBuffer>,
}

impl SharedBuffer {
    pub fn new(buffer: AnyBuffer) -> Self {
        Self { inner: RwLock::new(buffer) }
    }

    pub fn insert_keyed(&self, traj: &Trajectory, key: f64) -> usize {
        self.inner.write().insert_keyed(traj, key)
    }

    pub fn sample_batch<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<BatchSample> {
        self.inner.read().sample_batch(n, rng)
    }

    pub fn len(&self) -> usize {
        self.inner.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn capacity(&self) -> usize {
        self.inner.read().capacity()
    }

    pub fn raw_reward_range(&self) -> Result<(f64, f64)> {
        self.inner.read().raw_reward_range()
    }

    pub fn with<T>(&self, f: impl FnOnce(&AnyBuffer) -> T) -> T {
        f(&self.inner.read())
    }

    pub fn into_inner(self) -> AnyBuffer {
        self.inner.into_inner()
    }
}
