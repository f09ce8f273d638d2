//! Transition counting `C(𝛕, s, a, s', t)` and the policies built from it.

use rand::Rng;

use super::tabular::{sample_index, PolicyTable, TabularMdp, TabularPolicy, TimeIndexedPolicy};
use crate::error::{Error, Result};
use crate::mdp::Trajectory;

/// Whole tabular episode: `states[t]` and `actions[t]` for `t = 0..=T`.
///
/// The action at `T` is recorded but has no successor inside the horizon.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TabularTrajectory {
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
}

impl TabularTrajectory {
    pub fn new(states: Vec<usize>, actions: Vec<usize>) -> Result<Self> {
        if states.is_empty() || states.len() != actions.len() {
            return Err(Error::Shape(format!(
                "{} states and {} actions; need equal, non-zero lengths",
                states.len(),
                actions.len()
            )));
        }
        Ok(Self { states, actions })
    }

    /// Reads state ids and discrete actions off an environment trajectory.
    pub fn from_trajectory(traj: &Trajectory) -> Result<Self> {
        let mut states = Vec::with_capacity(traj.len());
        let mut actions = Vec::with_capacity(traj.len());
        for (t, step) in traj.steps().iter().enumerate() {
            states.push(step.state_id.ok_or_else(|| Error::InvalidArgument(format!("step {t} has no state id")))?);
            actions.push(
                step.action
                    .as_discrete()
                    .ok_or_else(|| Error::InvalidArgument(format!("step {t} has a continuous action")))?,
            );
        }
        Self::new(states, actions)
    }

    pub fn horizon(&self) -> usize {
        self.states.len() - 1
    }

    /// `R(τ) = Σ_t γ^t r(s_t)` under the MDP's state rewards.
    pub fn discounted_return(&self, mdp: &TabularMdp) -> f64 {
        let mut discount = 1.0;
        let mut total = 0.0;
        for &s in &self.states {
            total += discount * mdp.rewards()[s];
            discount *= mdp.gamma();
        }
        total
    }

    pub fn undiscounted_return(&self, mdp: &TabularMdp) -> f64 {
        self.states.iter().map(|&s| mdp.rewards()[s]).sum()
    }
}

/// Samples one full-horizon episode of `policy` in `mdp`.
pub fn sample_trajectory<P, R>(mdp: &TabularMdp, policy: &P, rng: &mut R) -> TabularTrajectory
where
    P: PolicyTable + ?Sized,
    R: Rng + ?Sized,
{
    let horizon = mdp.horizon();
    let mut states = Vec::with_capacity(horizon + 1);
    let mut actions = Vec::with_capacity(horizon + 1);
    let mut s = sample_index(rng, mdp.p0());
    let mut row = vec![0.0; mdp.n_actions()];
    for t in 0..=horizon {
        for (a, p) in row.iter_mut().enumerate() {
            *p = policy.prob(t, s, a);
        }
        let a = sample_index(rng, &row);
        states.push(s);
        actions.push(a);
        if t < horizon {
            s = sample_index(rng, mdp.transition(s, a));
        }
    }
    TabularTrajectory { states, actions }
}

/// Non-empty collection of equal-horizon tabular trajectories.
///
/// Episodes that end early must be modelled inside the MDP by an absorbing,
/// zero-reward state so that every trajectory spans `t = 0..=T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    n_states: usize,
    n_actions: usize,
    trajs: Vec<TabularTrajectory>,
}

impl TrajectorySet {
    pub fn new(trajs: Vec<TabularTrajectory>, n_states: usize, n_actions: usize) -> Result<Self> {
        let first = trajs.first().ok_or_else(|| Error::InvalidArgument("empty trajectory set".into()))?;
        let len = first.states.len();
        for (i, tr) in trajs.iter().enumerate() {
            if tr.states.len() != len {
                return Err(Error::InvalidArgument(format!(
                    "trajectory {i} has {} steps, expected {len}; pad with an absorbing state",
                    tr.states.len()
                )));
            }
            if tr.states.iter().any(|&s| s >= n_states) || tr.actions.iter().any(|&a| a >= n_actions) {
                return Err(Error::InvalidArgument(format!("trajectory {i} has an id out of range")));
            }
        }
        Ok(Self { n_states, n_actions, trajs })
    }

    pub fn for_mdp(trajs: Vec<TabularTrajectory>, mdp: &TabularMdp) -> Result<Self> {
        let set = Self::new(trajs, mdp.n_states(), mdp.n_actions())?;
        if set.horizon() != mdp.horizon() {
            return Err(Error::InvalidArgument(format!(
                "trajectories span horizon {}, MDP horizon is {}",
                set.horizon(),
                mdp.horizon()
            )));
        }
        Ok(set)
    }

    pub fn trajectories(&self) -> &[TabularTrajectory] {
        &self.trajs
    }

    pub fn len(&self) -> usize {
        self.trajs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajs.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.trajs[0].horizon()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    /// Mean of `R(τ_i)` over the set.
    pub fn mean_discounted_return(&self, mdp: &TabularMdp) -> f64 {
        self.trajs.iter().map(|t| t.discounted_return(mdp)).sum::<f64>() / self.trajs.len() as f64
    }

    /// Dense tally of every count the oracle needs.
    pub fn tally(&self) -> Tally {
        let (ns, na, horizon) = (self.n_states, self.n_actions, self.horizon());
        let mut occupancy = vec![0usize; (horizon + 1) * ns * na];
        let mut transitions = vec![0usize; horizon.max(1) * ns * na * ns];
        for tr in &self.trajs {
            for t in 0..=horizon {
                let (s, a) = (tr.states[t], tr.actions[t]);
                occupancy[(t * ns + s) * na + a] += 1;
                if t < horizon {
                    transitions[((t * ns + s) * na + a) * ns + tr.states[t + 1]] += 1;
                }
            }
        }
        Tally { n_states: ns, n_actions: na, horizon, n_trajs: self.trajs.len(), occupancy, transitions }
    }
}

/// Counts of `(t, s, a)` occupancies and `(t, s, a, s')` transitions.
#[derive(Debug, Clone)]
pub struct Tally {
    n_states: usize,
    n_actions: usize,
    horizon: usize,
    n_trajs: usize,
    occupancy: Vec<usize>,
    transitions: Vec<usize>,
}

impl Tally {
    /// `C(𝛕, s, a, ·, t)`; includes the final step at `t = T`.
    pub fn occupancy(&self, t: usize, s: usize, a: usize) -> usize {
        self.occupancy[(t * self.n_states + s) * self.n_actions + a]
    }

    /// `C(𝛕, s, ·, ·, t)`.
    pub fn state_occupancy(&self, t: usize, s: usize) -> usize {
        (0..self.n_actions).map(|a| self.occupancy(t, s, a)).sum()
    }

    /// `C(𝛕, s, a, s', t)` for `t < T`; zero at `t = T`.
    pub fn transition(&self, t: usize, s: usize, a: usize, next: usize) -> usize {
        if t >= self.horizon {
            return 0;
        }
        self.transitions[((t * self.n_states + s) * self.n_actions + a) * self.n_states + next]
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_trajs(&self) -> usize {
        self.n_trajs
    }
}

/// `C(𝛕, s, a, s', t)` with `None` as the wildcard `·`.
///
/// The `s'` coordinate only matches transitions inside the horizon, so a
/// query with a concrete `s'` at `t = T` is 0, while `s' = ·` at `t = T`
/// counts the final occupancies (the instances that transitioned into `s`
/// at `T − 1`).
pub fn count(
    trajs: &TrajectorySet,
    s: Option<usize>,
    a: Option<usize>,
    s_next: Option<usize>,
    t: Option<usize>,
) -> Result<usize> {
    let check = |what: &str, v: Option<usize>, bound: usize| match v {
        Some(x) if x >= bound => Err(Error::InvalidArgument(format!("{what} {x} out of range (< {bound})"))),
        _ => Ok(()),
    };
    check("state", s, trajs.n_states)?;
    check("action", a, trajs.n_actions)?;
    check("next state", s_next, trajs.n_states)?;
    check("timestep", t, trajs.horizon() + 1)?;

    let horizon = trajs.horizon();
    let matches = |want: Option<usize>, got: usize| want.is_none_or(|w| w == got);
    let mut total = 0;
    for tr in trajs.trajectories() {
        for step in 0..=horizon {
            if !matches(t, step) || !matches(s, tr.states[step]) || !matches(a, tr.actions[step]) {
                continue;
            }
            match s_next {
                None => total += 1,
                Some(target) => {
                    if step < horizon && tr.states[step + 1] == target {
                        total += 1;
                    }
                }
            }
        }
    }
    Ok(total)
}

/// Checks the uniformly-distributed condition: empirical initial-state and
/// per-timestep transition frequencies match `p0` and `P` within `tol`.
/// Returns the flag and the largest deviation seen.
pub fn is_uniformly_distributed(trajs: &TrajectorySet, mdp: &TabularMdp, tol: f64) -> (bool, f64) {
    let tally = trajs.tally();
    let n = trajs.len() as f64;
    let mut worst: f64 = 0.0;
    for s in 0..mdp.n_states() {
        let freq = tally.state_occupancy(0, s) as f64 / n;
        worst = worst.max((mdp.p0()[s] - freq).abs());
    }
    for t in 0..tally.horizon() {
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                let visits: usize = (0..mdp.n_states()).map(|next| tally.transition(t, s, a, next)).sum();
                if visits == 0 {
                    continue;
                }
                for (next, &p) in mdp.transition(s, a).iter().enumerate() {
                    let freq = tally.transition(t, s, a, next) as f64 / visits as f64;
                    worst = worst.max((p - freq).abs());
                }
            }
        }
    }
    (worst <= tol, worst)
}

/// Empirical action frequencies pooled over all timesteps,
/// `π̃(a|s) = C(𝛕, s, a, ·, ·) / C(𝛕, s, ·, ·, ·)`. Unvisited states get a uniform row.
pub fn hypothetical_policy(trajs: &TrajectorySet) -> TabularPolicy {
    let (ns, na) = (trajs.n_states, trajs.n_actions);
    let mut counts = vec![0usize; ns * na];
    for tr in trajs.trajectories() {
        for (&s, &a) in tr.states.iter().zip(&tr.actions) {
            counts[s * na + a] += 1;
        }
    }
    TabularPolicy::from_rows_unchecked(ns, na, normalize_rows(&counts, na))
}

/// Empirical action frequencies at each timestep,
/// `π̃_t(a|s) = C(𝛕, s, a, ·, t) / C(𝛕, s, ·, ·, t)`.
///
/// This is the policy whose state distribution reproduces the buffer's
/// per-timestep state frequencies exactly. It coincides with
/// [`hypothetical_policy`] whenever each state's action frequencies are the
/// same at every timestep it is visited.
pub fn time_indexed_hypothetical_policy(trajs: &TrajectorySet) -> TimeIndexedPolicy {
    let tally = trajs.tally();
    let (ns, na) = (trajs.n_states, trajs.n_actions);
    let layers = (0..=tally.horizon())
        .map(|t| {
            let counts: Vec<usize> =
                (0..ns).flat_map(|s| (0..na).map(move |a| (s, a))).map(|(s, a)| tally.occupancy(t, s, a)).collect();
            TabularPolicy::from_rows_unchecked(ns, na, normalize_rows(&counts, na))
        })
        .collect();
    TimeIndexedPolicy::new(layers).expect("layers share dimensions")
}

fn normalize_rows(counts: &[usize], n_actions: usize) -> Vec<f64> {
    let mut probs = Vec::with_capacity(counts.len());
    for row in counts.chunks(n_actions) {
        let total: usize = row.iter().sum();
        if total == 0 {
            probs.extend(std::iter::repeat_n(1.0 / n_actions as f64, n_actions));
        } else {
            probs.extend(row.iter().map(|&c| c as f64 / total as f64));
        }
    }
    probs
}
