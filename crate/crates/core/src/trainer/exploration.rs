use std::collections::HashMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::mdp::{rollout, ActionValue, Environment, Trajectory};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StateVisitCounts {
    counts: HashMap<usize, u64>,
    total: u64,
}

impl StateVisitCounts {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records one visit and returns the new count.
    pub fn visit(&mut self, state_id: usize) -> u64 {
        self.total += 1;
        let c = self.counts.entry(state_id).or_insert(0);
        *c += 1;
        *c
    }

    pub fn get(&self, state_id: usize) -> u64 {
        self.counts.get(&state_id).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn distinct(&self) -> usize {
        self.counts.len()
    }
}

/// `β / √N(s)` for a state visited `count` times.
pub fn bonus_for_count(count: u64, beta: f64) -> f64 {
    if beta == 0.0 || count == 0 {
        0.0
    } else {
        beta / (count as f64).sqrt()
    }
}

/// Records a visit to `state_id` and returns `β / √N(s)` with the updated count.
pub fn count_bonus(state_id: usize, counts: &mut StateVisitCounts, beta: f64) -> f64 {
    bonus_for_count(counts.visit(state_id), beta)
}

/// Adds the count bonus of each step's state to its reward. Returns the
/// shaped trajectory; `raw` is untouched.
pub fn shape(raw: &Trajectory, counts: &mut StateVisitCounts, beta: f64) -> Result<Trajectory> {
    if beta == 0.0 {
        return Ok(raw.clone());
    }
    let rewards = raw
        .steps()
        .iter()
        .map(|s| {
            let id =
                s.state_id.ok_or_else(|| Error::Config("count-based exploration needs discrete state ids".into()))?;
            Ok(s.reward + count_bonus(id, counts, beta))
        })
        .collect::<Result<Vec<f64>>>()?;
    raw.with_rewards(&rewards)
}

/// Rolls out one episode and returns `(shaped, raw)`.
pub fn shaped_rollout<E, P, R>(
    env: &mut E,
    policy: P,
    counts: &mut StateVisitCounts,
    beta: f64,
    max_steps: usize,
    rng: &mut R,
) -> Result<(Trajectory, Trajectory)>
where
    E: Environment + ?Sized,
    P: FnMut(&[f64], &mut R) -> ActionValue,
    R: Rng + ?Sized,
{
    if beta > 0.0 && env.state_id().is_none() {
        return Err(Error::Config(format!(
            "environment {} has no discrete state ids; count-based exploration is unavailable",
            env.spec().name
        )));
    }
    let raw = rollout(env, policy, max_steps, rng)?;
    let shaped = shape(&raw, counts, beta)?;
    Ok((shaped, raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bonus_decays_with_visits() {
        let mut counts = StateVisitCounts::new();
        assert_eq!(count_bonus(7, &mut counts, 0.001), 0.001);
        count_bonus(7, &mut counts, 0.001);
        count_bonus(7, &mut counts, 0.001);
        assert!((count_bonus(7, &mut counts, 0.001) - 0.0005).abs() < 1e-18);
        assert_eq!(count_bonus(8, &mut counts, 0.0), 0.0);
        assert_eq!(counts.total(), 5);
        assert_eq!(counts.distinct(), 2);
    }
}
