//! Trajectories, returns and the environment interface.
//!
//! Two reward conventions live in this crate. Environments reward
//! transitions (the reward returned by `step`), while the tabular oracle
//! rewards states. [`crate::envs::TabularEnv`] bridges the two by emitting
//! `r(s_t)` for the state being left, so both conventions agree on
//! `R(τ) = Σ γ^t r_t` for tabular rollouts.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};

pub type Observation = Vec<f64>;

#[derive(Debug, Clone, PartialEq)]
pub enum ActionValue {
    Discrete(usize),
    Continuous(Vec<f64>),
}

impl ActionValue {
    pub fn as_discrete(&self) -> Option<usize> {
        match self {
            ActionValue::Discrete(a) => Some(*a),
            ActionValue::Continuous(_) => None,
        }
    }

    pub fn as_continuous(&self) -> Option<&[f64]> {
        match self {
            ActionValue::Discrete(_) => None,
            ActionValue::Continuous(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub name: String,
    pub observation_dim: usize,
    pub action_kind: ActionKind,
    /// Number of discrete actions, or the dimension of a continuous action.
    pub action_count_or_dim: usize,
    pub max_episode_steps: usize,
    pub deterministic: bool,
    /// Symmetric box for continuous actions, `[-action_bound, action_bound]`.
    pub action_bound: f64,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.observation_dim == 0 || self.action_count_or_dim == 0 || self.max_episode_steps == 0 {
            return Err(Error::InvalidArgument(format!("env spec {:?} has a zero dimension or step cap", self.name)));
        }
        Ok(())
    }

    /// Checks that `action` belongs to this environment's action space.
    pub fn check_action(&self, action: &ActionValue) -> Result<()> {
        match (self.action_kind, action) {
            (ActionKind::Discrete, ActionValue::Discrete(a)) if *a < self.action_count_or_dim => Ok(()),
            (ActionKind::Discrete, ActionValue::Discrete(a)) => {
                Err(Error::InvalidAction(format!("index {a} out of range for {} actions", self.action_count_or_dim)))
            }
            (ActionKind::Continuous, ActionValue::Continuous(v)) if v.len() == self.action_count_or_dim => {
                if v.iter().all(|x| x.is_finite()) {
                    Ok(())
                } else {
                    Err(Error::InvalidAction("non-finite continuous action".into()))
                }
            }
            (ActionKind::Continuous, ActionValue::Continuous(v)) => Err(Error::InvalidAction(format!(
                "continuous action has {} components, expected {}",
                v.len(),
                self.action_count_or_dim
            ))),
            (kind, _) => Err(Error::InvalidAction(format!("action kind does not match {kind:?} env"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub observation: Observation,
    pub reward: f64,
    pub done: bool,
}

/// A reproducible episodic environment.
///
/// `reset(Some(seed))` reseeds the internal random stream; `reset(None)`
/// continues it. `step` must not be called after `done` until the next reset.
pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;
    fn reset(&mut self, seed: Option<u64>) -> Observation;
    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome>;
    /// Discrete id of the current state, for environments with a finite state space.
    fn state_id(&self) -> Option<usize> {
        None
    }
}

impl<E: Environment + ?Sized> Environment for Box<E> {
    fn spec(&self) -> &EnvSpec {
        (**self).spec()
    }
    fn reset(&mut self, seed: Option<u64>) -> Observation {
        (**self).reset(seed)
    }
    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome> {
        (**self).step(action)
    }
    fn state_id(&self) -> Option<usize> {
        (**self).state_id()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Step {
    pub observation: Observation,
    pub state_id: Option<usize>,
    pub action: ActionValue,
    pub reward: f64,
}

/// One episode, `τ = {⟨s_t, a_t, r_t⟩}` for `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    steps: Vec<Step>,
}

impl Trajectory {
    pub fn new(steps: Vec<Step>) -> Result<Self> {
        if steps.is_empty() {
            return Err(Error::InvalidArgument("trajectory has no steps".into()));
        }
        if let Some(t) = steps.iter().position(|s| !s.reward.is_finite()) {
            return Err(Error::Numeric(format!("reward at t={t} is not finite")));
        }
        Ok(Self { steps })
    }

    /// Builds a trajectory from rewards alone, with empty observations and action 0.
    pub fn from_rewards(rewards: &[f64]) -> Result<Self> {
        Self::new(
            rewards
                .iter()
                .map(|&reward| Step {
                    observation: Vec::new(),
                    state_id: None,
                    action: ActionValue::Discrete(0),
                    reward,
                })
                .collect(),
        )
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn terminal_timestep(&self) -> usize {
        self.steps.len() - 1
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.reward)
    }

    pub fn into_steps(self) -> Vec<Step> {
        self.steps
    }

    /// Same steps with rewards replaced, e.g. to carry shaped rewards.
    pub fn with_rewards(&self, rewards: &[f64]) -> Result<Self> {
        if rewards.len() != self.steps.len() {
            return Err(Error::Shape(format!("{} rewards for a {}-step trajectory", rewards.len(), self.steps.len())));
        }
        let steps = self.steps.iter().zip(rewards).map(|(s, &reward)| Step { reward, ..s.clone() }).collect();
        Self::new(steps)
    }
}

/// Undiscounted sum of rewards, the ranking key.
pub fn episodic_reward(traj: &Trajectory) -> f64 {
    traj.rewards().sum()
}

/// `Σ_t γ^t r_t`, for `0 < γ ≤ 1`.
pub fn discounted_return(traj: &Trajectory, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma <= 1.0) {
        return Err(Error::InvalidArgument(format!("gamma {gamma} outside (0, 1]")));
    }
    if gamma == 1.0 {
        return Ok(episodic_reward(traj));
    }
    let mut discount = 1.0;
    let mut total = 0.0;
    for r in traj.rewards() {
        total += discount * r;
        discount *= gamma;
    }
    Ok(total)
}

/// Resets `env` (continuing its random stream) and runs `policy` until the
/// environment reports done or `max_steps` steps have been taken.
pub fn rollout<E, P, R>(env: &mut E, mut policy: P, max_steps: usize, rng: &mut R) -> Result<Trajectory>
where
    E: Environment + ?Sized,
    P: FnMut(&[f64], &mut R) -> ActionValue,
    R: Rng + ?Sized,
{
    try_rollout(env, |obs, rng| Ok(policy(obs, rng)), max_steps, rng)
}

/// [`rollout`] with a fallible policy; the first policy error aborts the episode.
pub fn try_rollout<E, P, R>(env: &mut E, mut policy: P, max_steps: usize, rng: &mut R) -> Result<Trajectory>
where
    E: Environment + ?Sized,
    P: FnMut(&[f64], &mut R) -> Result<ActionValue>,
    R: Rng + ?Sized,
{
    if max_steps == 0 {
        return Err(Error::InvalidArgument("max_steps must be at least 1".into()));
    }
    let cap = max_steps.min(env.spec().max_episode_steps);
    let mut obs = env.reset(None);
    let mut steps = Vec::new();
    loop {
        let state_id = env.state_id();
        let action = policy(&obs, rng)?;
        env.spec().check_action(&action)?;
        let outcome = env.step(&action)?;
        steps.push(Step {
            observation: std::mem::replace(&mut obs, outcome.observation),
            state_id,
            action,
            reward: outcome.reward,
        });
        if outcome.done || steps.len() >= cap {
            break;
        }
    }
    Trajectory::new(steps)
}

fn write_csv(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        let _ = write!(out, "{v}");
    }
}

fn format_action(action: &ActionValue) -> String {
    match action {
        ActionValue::Discrete(a) => a.to_string(),
        ActionValue::Continuous(v) => {
            let mut s = String::new();
            write_csv(&mut s, v);
            s
        }
    }
}

/// One line per step: `t \t state_csv \t action \t reward`, followed by any
/// `extra` columns.
pub fn format_trajectory_line(t: usize, step: &Step, extra: &[f64]) -> String {
    let mut line = format!("{t}\t");
    write_csv(&mut line, &step.observation);
    let _ = write!(line, "\t{}\t{}", format_action(&step.action), step.reward);
    for e in extra {
        let _ = write!(line, "\t{e}");
    }
    line
}

pub fn write_trajectory<W: Write>(mut out: W, traj: &Trajectory) -> Result<()> {
    for (t, step) in traj.steps().iter().enumerate() {
        writeln!(out, "{}", format_trajectory_line(t, step, &[]))?;
    }
    Ok(())
}

fn parse_csv(field: &str) -> Result<Vec<f64>> {
    if field.is_empty() {
        return Ok(Vec::new());
    }
    field.split(',').map(|x| x.trim().parse::<f64>().map_err(|e| Error::Parse(format!("{x:?}: {e}")))).collect()
}

/// Parses the text format written by [`write_trajectory`]. Blank lines and
/// lines starting with `#` are skipped. `kind` decides how the action column
/// is read.
pub fn read_trajectory<R: BufRead>(input: R, kind: ActionKind) -> Result<Trajectory> {
    let mut steps = Vec::new();
    for line in input.lines() {
        let line = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 4 {
            return Err(Error::Parse(format!("expected 4 tab-separated fields, got {line:?}")));
        }
        let t: usize = fields[0].parse().map_err(|e| Error::Parse(format!("timestep {:?}: {e}", fields[0])))?;
        if t != steps.len() {
            return Err(Error::Parse(format!("timestep {t} out of sequence")));
        }
        let action = match kind {
            ActionKind::Discrete => ActionValue::Discrete(
                fields[2].parse().map_err(|e| Error::Parse(format!("action {:?}: {e}", fields[2])))?,
            ),
            ActionKind::Continuous => ActionValue::Continuous(parse_csv(fields[2])?),
        };
        let reward = fields[3].parse().map_err(|e| Error::Parse(format!("reward {:?}: {e}", fields[3])))?;
        steps.push(Step { observation: parse_csv(fields[1])?, state_id: None, action, reward });
    }
    Trajectory::new(steps)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn episodic_reward_examples() {
        assert_eq!(episodic_reward(&Trajectory::from_rewards(&[0.0, 0.0, 0.0]).unwrap()), 0.0);
        assert_eq!(episodic_reward(&Trajectory::from_rewards(&[1.0, 1.0, 1.0]).unwrap()), 3.0);
        assert_eq!(episodic_reward(&Trajectory::from_rewards(&[-1.0, -1.0, -10.0, 20.0]).unwrap()), 8.0);
    }

    #[test]
    fn discounted_return_examples() {
        let ones = Trajectory::from_rewards(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(discounted_return(&ones, 1.0).unwrap(), 3.0);
        let first = Trajectory::from_rewards(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(discounted_return(&first, 0.9).unwrap(), 1.0);
        let t = Trajectory::from_rewards(&[-1.0, -1.0, 20.0]).unwrap();
        assert!((discounted_return(&t, 0.99).unwrap() - 17.612).abs() < 1e-12);
    }

    #[test]
    fn discounted_return_rejects_bad_gamma() {
        let t = Trajectory::from_rewards(&[1.0]).unwrap();
        for g in [0.0, -0.5, 1.5, f64::NAN] {
            assert!(matches!(discounted_return(&t, g), Err(Error::InvalidArgument(_))));
        }
    }

    #[test]
    fn trajectory_rejects_empty_and_nonfinite() {
        assert!(Trajectory::new(Vec::new()).is_err());
        assert!(Trajectory::from_rewards(&[1.0, f64::INFINITY]).is_err());
    }

    #[test]
    fn text_format_round_trip() {
        let steps = vec![
            Step {
                observation: vec![0.5, -1.0],
                state_id: None,
                action: ActionValue::Continuous(vec![0.25, 1.0]),
                reward: -0.5,
            },
            Step {
                observation: vec![1.0, 2.0],
                state_id: None,
                action: ActionValue::Continuous(vec![-1.0, 0.0]),
                reward: 3.0,
            },
        ];
        let traj = Trajectory::new(steps).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &traj).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), "0\t0.5,-1\t0.25,1\t-0.5");
        let back = read_trajectory(&buf[..], ActionKind::Continuous).unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn check_action_discrete_bounds() {
        let spec = EnvSpec {
            name: "x".into(),
            observation_dim: 1,
            action_kind: ActionKind::Discrete,
            action_count_or_dim: 3,
            max_episode_steps: 1,
            deterministic: true,
            action_bound: 1.0,
        };
        assert!(spec.check_action(&ActionValue::Discrete(2)).is_ok());
        assert!(matches!(spec.check_action(&ActionValue::Discrete(3)), Err(Error::InvalidAction(_))));
        assert!(spec.check_action(&ActionValue::Continuous(vec![0.0])).is_err());
    }
}
