//! Environment view of a [`TabularMdp`], so oracle MDPs can be trained on.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{ActionKind, ActionValue, EnvSpec, Environment, Observation, StepOutcome};
use crate::oracle::TabularMdp;

/// Observations are one-hot state ids. The reward of each step is `r(s_t)`
/// for the state being left, and every episode runs the full horizon
/// (`T + 1` steps), so episode returns match `R(τ) = Σ_t γ^t r(s_t)`.
#[derive(Debug, Clone)]
pub struct TabularEnv {
    spec: EnvSpec,
    mdp: TabularMdp,
    rng: ChaCha8Rng,
    state: usize,
    t: usize,
    done: bool,
}

impl TabularEnv {
    pub fn new(mdp: TabularMdp, seed: u64) -> Self {
        let spec = EnvSpec {
            name: "tabular".into(),
            observation_dim: mdp.n_states(),
            action_kind: ActionKind::Discrete,
            action_count_or_dim: mdp.n_actions(),
            max_episode_steps: mdp.horizon() + 1,
            deterministic: mdp.is_deterministic(),
            action_bound: 1.0,
        };
        Self { spec, mdp, rng: ChaCha8Rng::seed_from_u64(seed), state: 0, t: 0, done: true }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.spec.name = name.into();
        self
    }

    pub fn mdp(&self) -> &TabularMdp {
        &self.mdp
    }

    fn observe(&self) -> Observation {
        let mut obs = vec![0.0; self.mdp.n_states()];
        obs[self.state] = 1.0;
        obs
    }
}

/// Builds the environment for `mdp`, seeded with `seed`.
pub fn tabular_env_from(mdp: TabularMdp, seed: u64) -> TabularEnv {
    TabularEnv::new(mdp, seed)
}

impl Environment for TabularEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: Option<u64>) -> Observation {
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        self.state = crate::oracle::tabular_sample(&mut self.rng, self.mdp.p0());
        self.t = 0;
        self.done = false;
        self.observe()
    }

    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidArgument("step called after episode end".into()));
        }
        self.spec.check_action(action)?;
        let a = action.as_discrete().expect("checked above");
        let reward = self.mdp.rewards()[self.state];
        if self.t == self.mdp.horizon() {
            self.done = true;
        } else {
            self.state = crate::oracle::tabular_sample(&mut self.rng, self.mdp.transition(self.state, a));
            self.t += 1;
        }
        Ok(StepOutcome { observation: self.observe(), reward, done: self.done })
    }

    fn state_id(&self) -> Option<usize> {
        Some(self.state)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{discounted_return, rollout};
    use crate::oracle::{exact_return, TabularPolicy};

    #[test]
    fn deterministic_two_state_chain() {
        let mdp = TabularMdp::new(2, 1, vec![1.0, 0.0], vec![0.0, 1.0, 0.0, 1.0], vec![0.0, 1.0], 1.0, 1).unwrap();
        let mut env = tabular_env_from(mdp, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..5 {
            let traj = rollout(&mut env, |_, _| ActionValue::Discrete(0), 10, &mut rng).unwrap();
            let ids: Vec<_> = traj.steps().iter().map(|s| s.state_id.unwrap()).collect();
            assert_eq!(ids, vec![0, 1]);
        }
    }

    #[test]
    fn rollout_return_matches_exact_return_when_deterministic() {
        let mdp = TabularMdp::chain(4, 2).unwrap();
        let pi = TabularPolicy::deterministic(2, &[0, 0, 1, 0]).unwrap();
        let mut env = tabular_env_from(mdp.clone(), 0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let traj = rollout(&mut env, |obs, _| ActionValue::Discrete(if obs[2] == 1.0 { 1 } else { 0 }), 100, &mut rng)
            .unwrap();
        assert_eq!(traj.len(), mdp.horizon() + 1);
        let r = discounted_return(&traj, mdp.gamma()).unwrap();
        assert!((r - exact_return(&pi, &mdp)).abs() < 1e-12);
    }
}
