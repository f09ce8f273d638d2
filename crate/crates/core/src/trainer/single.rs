use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{RolloutMode, TrainConfig};
use super::exploration::{shape, StateVisitCounts};
use super::metrics::{IterationRecord, TrainMetrics};
use crate::envs::make_env;
use crate::error::{Error, Result};
use crate::mdp::{episodic_reward, try_rollout, write_trajectory, ActionValue, Environment, Trajectory};
use crate::policy::{greedy_action, loss_and_grad, sample_action, AdamState, HeadKind, Layout, PolicyParams};
use crate::replay::RankingBuffer;

/// Seeded generators for the separate random streams of one run.
pub(crate) fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Samples an action from the stochastic policy.
pub fn policy_action<R: Rng + ?Sized>(
    params: &PolicyParams,
    sigma: f64,
    bound: f64,
    obs: &[f64],
    rng: &mut R,
) -> Result<ActionValue> {
    let out = params.forward(obs)?;
    sample_action(&out, params.head(), sigma, bound, rng)
}

/// Runs `episodes` greedy episodes and returns their episodic rewards.
pub fn evaluate(params: &PolicyParams, env: &mut dyn Environment, episodes: usize) -> Result<Vec<f64>> {
    let bound = env.spec().action_bound;
    let cap = env.spec().max_episode_steps;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    (0..episodes)
        .map(|_| {
            let traj = try_rollout(
                env,
                |obs, _: &mut ChaCha8Rng| Ok(greedy_action(&params.forward(obs)?, params.head(), bound)),
                cap,
                &mut rng,
            )?;
            Ok(episodic_reward(&traj))
        })
        .collect()
}

/// One supervised step: sample a batch from the buffer, take the
/// head-appropriate loss, apply Adam. Reads nothing but its arguments.
pub fn supervised_update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    adam: &mut AdamState,
    buffer: &RankingBuffer,
    batch_size: usize,
    entropy_coef: f64,
    rng: &mut R,
) -> Result<f64> {
    let batch = buffer.sample_batch(batch_size, rng)?;
    let (loss, grad) = loss_and_grad(params, &batch, entropy_coef)?;
    adam.step(params.theta_mut(), &grad)?;
    Ok(loss)
}

/// Builds the initial policy for `config` on an environment with `spec`.
pub(crate) fn init_policy(config: &TrainConfig, env: &dyn Environment, rng: &mut ChaCha8Rng) -> Result<PolicyParams> {
    let spec = env.spec();
    let head = config.resolve_head(spec)?;
    if config.exploration_beta > 0.0 && env.state_id().is_none() {
        return Err(Error::Config(format!(
            "environment {} has no discrete state ids; count-based exploration is unavailable",
            spec.name
        )));
    }
    let layout = Layout::with_hidden(spec.observation_dim, config.hidden, spec.action_count_or_dim);
    Ok(PolicyParams::init(layout, head, rng))
}

/// An episode id with its stored trajectory.
pub type TaggedEpisode<'a> = (u64, &'a Trajectory);

/// Single-threaded trainer: collect episodes, rank them into the buffer,
/// regress the policy onto the buffer, repeat.
pub struct Trainer {
    config: TrainConfig,
    env: Box<dyn Environment>,
    bound: f64,
    params: PolicyParams,
    adam: AdamState,
    buffer: RankingBuffer,
    counts: StateVisitCounts,
    metrics: TrainMetrics,
    act_rng: ChaCha8Rng,
    learn_rng: ChaCha8Rng,
    steps: u64,
    iteration: u64,
    last_loss: Option<f64>,
    /// Raw episodes with at least one buffered pair, kept only when tracing.
    episodes: Option<HashMap<u64, Trajectory>>,
    start: Instant,
    stopped: bool,
}

impl Trainer {
    pub fn new(config: TrainConfig) -> Result<Self> {
        let env = make_env(&config.env, config.seed)?;
        Self::with_env(config, env)
    }

    /// Trains on a caller-supplied environment; `config.env` is only a label.
    pub fn with_env(config: TrainConfig, env: Box<dyn Environment>) -> Result<Self> {
        config.validate()?;
        let mut init_rng = stream(config.seed, 0);
        let params = init_policy(&config, env.as_ref(), &mut init_rng)?;
        Ok(Self {
            bound: env.spec().action_bound,
            adam: AdamState::new(params.theta().len(), config.learning_rate),
            buffer: RankingBuffer::new(config.buffer_size)?,
            counts: StateVisitCounts::new(),
            metrics: TrainMetrics::new(),
            act_rng: stream(config.seed, 1),
            learn_rng: stream(config.seed, 2),
            steps: 0,
            iteration: 0,
            last_loss: None,
            episodes: (config.trace_every > 0).then(HashMap::new),
            start: Instant::now(),
            stopped: false,
            params,
            env,
            config,
        })
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn params(&self) -> &PolicyParams {
        &self.params
    }

    pub fn adam(&self) -> &AdamState {
        &self.adam
    }

    pub fn buffer(&self) -> &RankingBuffer {
        &self.buffer
    }

    pub fn metrics(&self) -> &TrainMetrics {
        &self.metrics
    }

    pub fn counts(&self) -> &StateVisitCounts {
        &self.counts
    }

    pub fn learn_rng(&self) -> &ChaCha8Rng {
        &self.learn_rng
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    pub fn head(&self) -> HeadKind {
        self.params.head()
    }

    pub fn done(&self) -> bool {
        self.stopped || self.steps >= self.config.total_steps
    }

    fn clock(&self) -> f64 {
        if self.config.wallclock {
            self.start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    fn collect_episode(&mut self) -> Result<()> {
        let remaining = (self.config.total_steps - self.steps) as usize;
        let (params, sigma, bound) = (&self.params, self.config.sigma, self.bound);
        let raw = try_rollout(
            self.env.as_mut(),
            |obs, rng| policy_action(params, sigma, bound, obs, rng),
            remaining,
            &mut self.act_rng,
        )?;
        let shaped = shape(&raw, &mut self.counts, self.config.exploration_beta)?;
        let id = self.buffer.next_episode_id();
        let kept = self.buffer.insert_keyed(&raw, episodic_reward(&shaped));
        if let Some(episodes) = &mut self.episodes {
            if kept > 0 {
                episodes.insert(id, raw.clone());
            }
        }
        self.steps += raw.len() as u64;
        let range = self.buffer.raw_reward_range().ok();
        let wall = self.clock();
        self.metrics.record_episode(self.steps, episodic_reward(&raw), wall, range, self.last_loss);
        if let Some(target) = self.config.target_return {
            if self.metrics.reached(target) {
                self.stopped = true;
            }
        }
        Ok(())
    }

    /// One iteration: collect episodes, then run the supervised updates.
    pub fn iterate(&mut self) -> Result<()> {
        let start_steps = self.steps;
        let mut collected = 0;
        while !self.done() {
            let enough = match self.config.rollout_mode {
                RolloutMode::Episodes => collected >= self.config.rollout_steps,
                RolloutMode::Steps => self.steps - start_steps >= self.config.rollout_steps as u64,
            };
            if enough {
                break;
            }
            self.collect_episode()?;
            collected += 1;
        }
        if collected == 0 || self.buffer.is_empty() {
            return Ok(());
        }
        let mean_loss = self.train_round()?;
        self.iteration += 1;
        let (buffer_min, buffer_max) = self.buffer.raw_reward_range()?;
        self.metrics.iterations.push(IterationRecord {
            iteration: self.iteration,
            step: self.steps,
            buffer_min,
            buffer_max,
            mean_loss,
        });
        if let Some(episodes) = &mut self.episodes {
            let live = self.buffer.episode_ids();
            episodes.retain(|id, _| live.binary_search(id).is_ok());
        }
        Ok(())
    }

    /// The `training_steps` supervised updates of one iteration; returns
    /// their mean loss.
    pub fn train_round(&mut self) -> Result<f64> {
        let mut total = 0.0;
        for _ in 0..self.config.training_steps {
            total += supervised_update(
                &mut self.params,
                &mut self.adam,
                &self.buffer,
                self.config.batch_size,
                self.config.entropy_coef,
                &mut self.learn_rng,
            )?;
        }
        let mean_loss = total / self.config.training_steps as f64;
        self.last_loss = Some(mean_loss);
        Ok(mean_loss)
    }

    /// Trains until the step budget is spent or the target return is reached.
    /// With `trace_dir` and a nonzero `trace_every`, best and worst buffered
    /// episodes are exported along the way.
    pub fn run(mut self, trace_dir: Option<&Path>) -> Result<(PolicyParams, TrainMetrics)> {
        while !self.done() {
            self.iterate()?;
            if let Some(dir) = trace_dir {
                if self.config.trace_every > 0 && self.iteration.is_multiple_of(self.config.trace_every as u64) {
                    self.export_buffer_trace(dir)?;
                }
            }
        }
        if let Some(dir) = trace_dir {
            self.export_buffer_trace(dir)?;
        }
        Ok((self.params, self.metrics))
    }

    /// Best and worst buffered episodes, with their episode ids.
    pub fn extreme_episodes(&self) -> Option<(TaggedEpisode<'_>, TaggedEpisode<'_>)> {
        let episodes = self.episodes.as_ref()?;
        let best = self.buffer.pairs().first()?.episode;
        let worst = self.buffer.pairs().last()?.episode;
        Some(((best, episodes.get(&best)?), (worst, episodes.get(&worst)?)))
    }

    /// Writes `iter<N>_best.txt` and `iter<N>_worst.txt` into `dir`. A no-op
    /// returning no paths when tracing is off or the buffer is empty.
    pub fn export_buffer_trace(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let Some(((best_id, best), (worst_id, worst))) = self.extreme_episodes() else {
            return Ok(Vec::new());
        };
        fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for (tag, id, traj) in [("best", best_id, best), ("worst", worst_id, worst)] {
            let path = dir.join(format!("iter{:06}_{tag}.txt", self.iteration));
            let mut body = format!(
                "# iteration={} episode={id} episodic_reward={} steps={}\n",
                self.iteration,
                episodic_reward(traj),
                traj.len()
            )
            .into_bytes();
            write_trajectory(&mut body, traj)?;
            crate::io::atomic_write(&path, &body)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Runs the single-threaded trainer to completion.
pub fn train(config: TrainConfig) -> Result<(PolicyParams, TrainMetrics)> {
    Trainer::new(config)?.run(None)
}
