#![allow(dead_code)]

use std::collections::VecDeque;

use ssrl_core::envs::taxi::{DELIVERY_REWARD, GOAL_CELL, GRID, PASSENGER_CELL, START, STEP_PENALTY};

/// Best achievable Taxi episodic reward, by breadth-first search over
/// (row, col, passenger aboard). Written from the movement rules directly so
/// it shares no code with the environment. Illegal pick-ups and drop-offs
/// never help, so only moves and the single legal pick-up are expanded.
pub fn taxi_optimal_return() -> f64 {
    let idx = |r: usize, c: usize, p: usize| (r * GRID + c) * 2 + p;
    let mut dist = vec![usize::MAX; GRID * GRID * 2];
    let mut queue = VecDeque::new();
    dist[idx(START.0, START.1, 0)] = 0;
    queue.push_back((START.0, START.1, 0usize));
    while let Some((r, c, p)) = queue.pop_front() {
        let d = dist[idx(r, c, p)];
        if p == 1 && (r, c) == GOAL_CELL {
            // d paid steps, then the drop-off itself
            return d as f64 * STEP_PENALTY + DELIVERY_REWARD;
        }
        let mut next = vec![
            (r.saturating_sub(1), c, p),
            ((r + 1).min(GRID - 1), c, p),
            (r, c.saturating_sub(1), p),
            (r, (c + 1).min(GRID - 1), p),
        ];
        if p == 0 && (r, c) == PASSENGER_CELL {
            next.push((r, c, 1));
        }
        for (nr, nc, np) in next {
            if dist[idx(nr, nc, np)] == usize::MAX {
                dist[idx(nr, nc, np)] = d + 1;
                queue.push_back((nr, nc, np));
            }
        }
    }
    unreachable!("goal is reachable on an open grid")
}

use rand::Rng;
use ssrl_core::oracle::{sample_trajectory, PolicyTable, TabularMdp, TabularPolicy, TabularTrajectory};

/// One draw of the random tabular sweep: a deterministic MDP with 3–8
/// states, 2–4 actions, horizon 1–10, a random stochastic policy and 5–50
/// of its rollouts.
pub fn theory_case<R: Rng>(rng: &mut R) -> (TabularMdp, TabularPolicy, Vec<TabularTrajectory>) {
    let ns = rng.random_range(3..=8);
    let na = rng.random_range(2..=4);
    let horizon = rng.random_range(1..=10);
    let gamma = rng.random_range(0.5..=1.0);
    let mdp = TabularMdp::random_deterministic(rng, ns, na, gamma, horizon).unwrap();
    let policy = TabularPolicy::random(rng, ns, na);
    let n = rng.random_range(5..=50);
    let trajs = (0..n).map(|_| sample_trajectory(&mdp, &policy, rng)).collect();
    (mdp, policy, trajs)
}

/// Expected discounted return by backward induction over timesteps, an
/// oracle independent of the visitation-frequency evaluator.
pub fn backward_return<P: PolicyTable + ?Sized>(policy: &P, mdp: &TabularMdp) -> f64 {
    let ns = mdp.n_states();
    let mut value: Vec<f64> = mdp.rewards().to_vec();
    for t in (0..mdp.horizon()).rev() {
        value = (0..ns)
            .map(|s| {
                let future: f64 = (0..mdp.n_actions())
                    .map(|a| {
                        let next: f64 = mdp.transition(s, a).iter().zip(&value).map(|(p, v)| p * v).sum();
                        policy.prob(t, s, a) * next
                    })
                    .sum();
                mdp.rewards()[s] + mdp.gamma() * future
            })
            .collect();
    }
    mdp.p0().iter().zip(&value).map(|(p, v)| p * v).sum()
}
