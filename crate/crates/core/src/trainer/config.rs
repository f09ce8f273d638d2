use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mdp::{ActionKind, EnvSpec};
use crate::policy::{HeadKind, DEFAULT_HIDDEN};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RolloutMode {
    /// `rollout_steps` complete episodes per iteration.
    Episodes,
    /// Complete episodes until at least `rollout_steps` env steps were taken.
    Steps,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BufferKind {
    Ranking,
    Ring,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistributedConfig {
    pub n_actors: usize,
    pub n_workers: usize,
    pub buffer_kind: BufferKind,
    pub ring_capacity: usize,
    pub ring_threshold: f64,
}

impl Default for DistributedConfig {
    fn default() -> Self {
        Self {
            n_actors: 4,
            n_workers: 8,
            buffer_kind: BufferKind::Ranking,
            ring_capacity: 100_000,
            ring_threshold: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub env: String,
    pub buffer_size: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub rollout_steps: usize,
    pub rollout_mode: RolloutMode,
    pub training_steps: usize,
    pub total_steps: u64,
    pub gamma: f64,
    pub entropy_coef: f64,
    /// Count-based exploration strength; 0 disables it.
    pub exploration_beta: f64,
    /// Standard deviation of the Gaussian action noise.
    pub sigma: f64,
    /// Forced head; inferred from the environment when `None`.
    pub head: Option<HeadKind>,
    pub hidden: [usize; 2],
    pub distributed: Option<DistributedConfig>,
    pub seed: u64,
    /// Stop once the rolling-100 return reaches this value over at least
    /// 100 episodes.
    pub target_return: Option<f64>,
    /// Export best/worst buffered episodes every this many iterations; 0 is off.
    pub trace_every: usize,
    /// Record wall-clock seconds in metrics; when false the column is 0 so
    /// runs are byte-reproducible.
    pub wallclock: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            env: "cartpole".into(),
            buffer_size: 1000,
            batch_size: 256,
            learning_rate: 1e-3,
            rollout_steps: 1,
            rollout_mode: RolloutMode::Episodes,
            training_steps: 5,
            total_steps: 200_000,
            gamma: 0.99,
            entropy_coef: 0.0,
            exploration_beta: 0.0,
            sigma: 0.3,
            head: None,
            hidden: [DEFAULT_HIDDEN; 2],
            distributed: None,
            seed: 0,
            target_return: None,
            trace_every: 0,
            wallclock: true,
        }
    }
}

fn parse_num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| Error::Config(format!("{key}={value}: {e}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(Error::Config(format!("{key}={value}: expected true or false"))),
    }
}

impl TrainConfig {
    /// Parses flat `key=value` lines over the defaults. Blank lines and
    /// lines starting with `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut config = Self::default();
        config.apply(text)?;
        Ok(config)
    }

    pub fn apply(&mut self, text: &str) -> Result<()> {
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "env" => self.env = value.to_string(),
            "buffer_size" => self.buffer_size = parse_num(key, value)?,
            "batch_size" => self.batch_size = parse_num(key, value)?,
            "learning_rate" => self.learning_rate = parse_num(key, value)?,
            "rollout_steps" => self.rollout_steps = parse_num(key, value)?,
            "rollout_mode" => {
                self.rollout_mode = match value {
                    "episodes" => RolloutMode::Episodes,
                    "steps" => RolloutMode::Steps,
                    _ => return Err(Error::Config(format!("rollout_mode={value}: expected episodes or steps"))),
                }
            }
            "training_steps" => self.training_steps = parse_num(key, value)?,
            "total_steps" => self.total_steps = parse_num(key, value)?,
            "gamma" => self.gamma = parse_num(key, value)?,
            "entropy_coef" => self.entropy_coef = parse_num(key, value)?,
            "exploration_beta" => self.exploration_beta = parse_num(key, value)?,
            "sigma" => self.sigma = parse_num(key, value)?,
            "head" => {
                self.head = match value {
                    "auto" => None,
                    other => Some(HeadKind::parse(other).map_err(|e| Error::Config(e.to_string()))?),
                }
            }
            "hidden" => {
                let (a, b) = value
                    .split_once(',')
                    .ok_or_else(|| Error::Config(format!("hidden={value}: expected two widths like 64,64")))?;
                self.hidden = [parse_num(key, a.trim())?, parse_num(key, b.trim())?];
            }
            "distributed" => {
                if parse_bool(key, value)? {
                    self.distributed.get_or_insert_with(DistributedConfig::default);
                } else {
                    self.distributed = None;
                }
            }
            "n_actors" => self.distributed_mut().n_actors = parse_num(key, value)?,
            "n_workers" => self.distributed_mut().n_workers = parse_num(key, value)?,
            "buffer_kind" => {
                self.distributed_mut().buffer_kind = match value {
                    "ranking" => BufferKind::Ranking,
                    "ring" => BufferKind::Ring,
                    _ => return Err(Error::Config(format!("buffer_kind={value}: expected ranking or ring"))),
                }
            }
            "ring_capacity" => self.distributed_mut().ring_capacity = parse_num(key, value)?,
            "ring_threshold" => self.distributed_mut().ring_threshold = parse_num(key, value)?,
            "seed" => self.seed = parse_num(key, value)?,
            "target_return" => {
                self.target_return = match value {
                    "none" | "" => None,
                    v => Some(parse_num(key, v)?),
                }
            }
            "trace_every" => self.trace_every = parse_num(key, value)?,
            "wallclock" => self.wallclock = parse_bool(key, value)?,
            other => return Err(Error::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    // Distributed-only keys switch distributed mode on.
    fn distributed_mut(&mut self) -> &mut DistributedConfig {
        self.distributed.get_or_insert_with(DistributedConfig::default)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("buffer_size", self.buffer_size),
            ("batch_size", self.batch_size),
            ("rollout_steps", self.rollout_steps),
            ("training_steps", self.training_steps),
            ("hidden", self.hidden[0].min(self.hidden[1])),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.exploration_beta >= 0.0 && self.exploration_beta.is_finite()) {
            return Err(Error::Config(format!("exploration_beta must be >= 0, got {}", self.exploration_beta)));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma must lie in (0, 1], got {}", self.gamma)));
        }
        if !(self.entropy_coef >= 0.0 && self.entropy_coef.is_finite()) {
            return Err(Error::Config(format!("entropy_coef must be >= 0, got {}", self.entropy_coef)));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if let Some(d) = &self.distributed {
            if d.n_actors == 0 || d.n_workers == 0 || d.ring_capacity == 0 {
                return Err(Error::Config("n_actors, n_workers and ring_capacity must be at least 1".into()));
            }
            if d.ring_threshold.is_nan() {
                return Err(Error::Config("ring_threshold is NaN".into()));
            }
        }
        Ok(())
    }

    /// The head matching `spec`, or a config error if a forced head does not.
    pub fn resolve_head(&self, spec: &EnvSpec) -> Result<HeadKind> {
        let natural = match spec.action_kind {
            ActionKind::Discrete => HeadKind::Categorical,
            ActionKind::Continuous => HeadKind::GaussianMean,
        };
        match self.head {
            Some(forced) if forced != natural => Err(Error::Config(format!(
                "environment {} needs a {} head, config forces {}",
                spec.name,
                natural.as_str(),
                forced.as_str()
            ))),
            _ => Ok(natural),
        }
    }

    /// Renders the config in the same `key=value` format [`parse`](Self::parse) reads.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "env={}", self.env);
        let _ = writeln!(s, "buffer_size={}", self.buffer_size);
        let _ = writeln!(s, "batch_size={}", self.batch_size);
        let _ = writeln!(s, "learning_rate={}", self.learning_rate);
        let _ = writeln!(s, "rollout_steps={}", self.rollout_steps);
        let mode = match self.rollout_mode {
            RolloutMode::Episodes => "episodes",
            RolloutMode::Steps => "steps",
        };
        let _ = writeln!(s, "rollout_mode={mode}");
        let _ = writeln!(s, "training_steps={}", self.training_steps);
        let _ = writeln!(s, "total_steps={}", self.total_steps);
        let _ = writeln!(s, "gamma={}", self.gamma);
        let _ = writeln!(s, "entropy_coef={}", self.entropy_coef);
        let _ = writeln!(s, "exploration_beta={}", self.exploration_beta);
        let _ = writeln!(s, "sigma={}", self.sigma);
        let _ = writeln!(s, "head={}", self.head.map_or("auto", |h| h.as_str()));
        let _ = writeln!(s, "hidden={},{}", self.hidden[0], self.hidden[1]);
        match &self.distributed {
            None => {
                let _ = writeln!(s, "distributed=false");
            }
            Some(d) => {
                let kind = match d.buffer_kind {
                    BufferKind::Ranking => "ranking",
                    BufferKind::Ring => "ring",
                };
                let _ = writeln!(s, "distributed=true");
                let _ = writeln!(s, "n_actors={}", d.n_actors);
                let _ = writeln!(s, "n_workers={}", d.n_workers);
                let _ = writeln!(s, "buffer_kind={kind}");
                let _ = writeln!(s, "ring_capacity={}", d.ring_capacity);
                let _ = writeln!(s, "ring_threshold={}", d.ring_threshold);
            }
        }
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "target_return={}", self.target_return.map_or("none".to_string(), |t| t.to_string()));
        let _ = writeln!(s, "trace_every={}", self.trace_every);
        let _ = writeln!(s, "wallclock={}", self.wallclock);
        s
    }
}
