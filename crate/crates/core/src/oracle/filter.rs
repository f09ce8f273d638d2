use super::counting::TabularTrajectory;
use super::tabular::TabularMdp;
use crate::error::{Error, Result};
use crate::mdp::{ActionValue, Step, Trajectory};
use crate::replay::RankingBuffer;

/// Passes equal-length tabular episodes through a ranking buffer sized for
/// `ceil(fraction · n)` whole episodes, keyed by discounted return, and
/// returns the episodes it retains (best first).
pub fn ranking_filter(trajs: &[TabularTrajectory], mdp: &TabularMdp, fraction: f64) -> Result<Vec<TabularTrajectory>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!("filter fraction must lie in (0, 1], got {fraction}")));
    }
    let Some(first) = trajs.first() else {
        return Ok(Vec::new());
    };
    let len = first.states.len();
    if trajs.iter().any(|t| t.states.len() != len) {
        return Err(Error::Shape("filtered episodes must share one horizon".into()));
    }
    let keep = ((fraction * trajs.len() as f64).ceil() as usize).max(1);
    let mut buffer = RankingBuffer::new(keep * len)?;
    for tr in trajs {
        let steps = tr
            .states
            .iter()
            .zip(&tr.actions)
            .map(|(&s, &a)| Step {
                observation: Vec::new(),
                state_id: Some(s),
                action: ActionValue::Discrete(a),
                reward: mdp.rewards()[s],
            })
            .collect();
        buffer.insert_keyed(&Trajectory::new(steps)?, tr.discounted_return(mdp));
    }
    // Every episode has the same length and the capacity is a multiple of
    // it, so the buffer holds whole episodes only.
    let mut kept = Vec::with_capacity(keep);
    for p in buffer.pairs() {
        if kept.last() != Some(&p.episode) {
            kept.push(p.episode);
        }
    }
    Ok(kept.into_iter().map(|id| trajs[id as usize].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_the_better_half() {
        let mdp = TabularMdp::chain(3, 2).unwrap();
        let good = TabularTrajectory::new(vec![0, 1, 2, 2, 2], vec![0; 5]).unwrap();
        let bad = TabularTrajectory::new(vec![0, 0, 0, 0, 0], vec![1; 5]).unwrap();
        let trajs = vec![bad.clone(), good.clone(), bad.clone(), good.clone()];
        let kept = ranking_filter(&trajs, &mdp, 0.5).unwrap();
        assert_eq!(kept, vec![good.clone(), good]);
        assert_eq!(ranking_filter(&trajs, &mdp, 0.1).unwrap().len(), 1);
        assert!(ranking_filter(&trajs, &mdp, 0.0).is_err());
    }
}
