//! Classic cart-pole balancing with the usual benchmark constants and
//! explicit Euler integration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{ActionKind, ActionValue, EnvSpec, Environment, Observation, StepOutcome};

pub const GRAVITY: f64 = 9.8;
pub const CART_MASS: f64 = 1.0;
pub const POLE_MASS: f64 = 0.1;
pub const HALF_LENGTH: f64 = 0.5;
pub const FORCE: f64 = 10.0;
pub const DT: f64 = 0.02;
pub const ANGLE_LIMIT: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const POSITION_LIMIT: f64 = 2.4;
pub const MAX_STEPS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CartPoleState {
    pub x: f64,
    pub x_dot: f64,
    pub theta: f64,
    pub theta_dot: f64,
}

impl CartPoleState {
    pub fn to_vec(self) -> Vec<f64> {
        vec![self.x, self.x_dot, self.theta, self.theta_dot]
    }

    pub fn out_of_bounds(&self) -> bool {
        self.x.abs() > POSITION_LIMIT || self.theta.abs() > ANGLE_LIMIT
    }
}

/// One Euler step under a horizontal `force` on the cart.
pub fn integrate(state: CartPoleState, force: f64) -> CartPoleState {
    let total_mass = CART_MASS + POLE_MASS;
    let pole_mass_length = POLE_MASS * HALF_LENGTH;
    let (sin, cos) = state.theta.sin_cos();
    let temp = (force + pole_mass_length * state.theta_dot * state.theta_dot * sin) / total_mass;
    let theta_acc = (GRAVITY * sin - cos * temp) / (HALF_LENGTH * (4.0 / 3.0 - POLE_MASS * cos * cos / total_mass));
    let x_acc = temp - pole_mass_length * theta_acc * cos / total_mass;
    CartPoleState {
        x: state.x + DT * state.x_dot,
        x_dot: state.x_dot + DT * x_acc,
        theta: state.theta + DT * state.theta_dot,
        theta_dot: state.theta_dot + DT * theta_acc,
    }
}

/// Action 0 pushes left, 1 pushes right. Reward is +1 for every step,
/// including the one that ends the episode; the step cap is handled by
/// [`CartPole`].
pub fn cartpole_step(state: CartPoleState, action: usize) -> Result<(CartPoleState, f64, bool)> {
    let force = match action {
        0 => -FORCE,
        1 => FORCE,
        _ => return Err(Error::InvalidAction(format!("cartpole action {action} out of range (< 2)"))),
    };
    let next = integrate(state, force);
    Ok((next, 1.0, next.out_of_bounds()))
}

#[derive(Debug, Clone)]
pub struct CartPole {
    spec: EnvSpec,
    rng: ChaCha8Rng,
    state: CartPoleState,
    steps: usize,
    done: bool,
}

impl CartPole {
    pub fn new(seed: u64) -> Self {
        Self {
            spec: EnvSpec {
                name: "cartpole".into(),
                observation_dim: 4,
                action_kind: ActionKind::Discrete,
                action_count_or_dim: 2,
                max_episode_steps: MAX_STEPS,
                deterministic: false,
                action_bound: 1.0,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
            state: CartPoleState::default(),
            steps: 0,
            done: true,
        }
    }

    pub fn state(&self) -> CartPoleState {
        self.state
    }

    /// Places the environment in `state` with a fresh step counter.
    pub fn set_state(&mut self, state: CartPoleState) {
        self.state = state;
        self.steps = 0;
        self.done = false;
    }
}

impl Environment for CartPole {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: Option<u64>) -> Observation {
        if let Some(seed) = seed {
            self.rng = ChaCha8Rng::seed_from_u64(seed);
        }
        let mut draw = || self.rng.random_range(-0.05..0.05);
        let state = CartPoleState { x: draw(), x_dot: draw(), theta: draw(), theta_dot: draw() };
        self.set_state(state);
        state.to_vec()
    }

    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidArgument("step called after episode end".into()));
        }
        let a = action.as_discrete().ok_or_else(|| Error::InvalidAction("cartpole takes discrete actions".into()))?;
        let (next, reward, fell) = cartpole_step(self.state, a)?;
        self.state = next;
        self.steps += 1;
        self.done = fell || self.steps >= MAX_STEPS;
        Ok(StepOutcome { observation: next.to_vec(), reward, done: self.done })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn angle_past_limit_ends_episode() {
        let state = CartPoleState { theta: 0.21, ..Default::default() };
        assert!(state.out_of_bounds());
        let near = CartPoleState { theta: 0.2, ..Default::default() };
        assert!(!near.out_of_bounds());
    }

    #[test]
    fn unforced_zero_state_is_a_fixed_point() {
        let mut s = CartPoleState::default();
        for _ in 0..1000 {
            s = integrate(s, 0.0);
        }
        assert_eq!(s, CartPoleState::default());
    }

    #[test]
    fn episode_capped_at_500() {
        let mut env = CartPole::new(0);
        env.reset(None);
        env.set_state(CartPoleState::default());
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            // bang-bang balance on the pole angle and angular velocity
            let s = env.state();
            let a = usize::from(s.theta + 0.5 * s.theta_dot + 0.01 * s.x + 0.1 * s.x_dot > 0.0);
            let out = env.step(&ActionValue::Discrete(a)).unwrap();
            total += out.reward;
            steps += 1;
            if out.done {
                break;
            }
        }
        assert_eq!(steps, 500);
        assert_eq!(total, 500.0);
    }

    #[test]
    fn reset_is_reproducible() {
        let mut a = CartPole::new(3);
        let mut b = CartPole::new(3);
        assert_eq!(a.reset(None), b.reset(None));
        assert_eq!(a.reset(Some(9)), b.reset(Some(9)));
    }
}
