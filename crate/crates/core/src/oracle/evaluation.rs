//! Exact policy evaluation through discounted visitation frequencies, and the
//! policy-improvement verifier built on it.

use std::fmt;

use super::counting::{hypothetical_policy, is_uniformly_distributed, time_indexed_hypothetical_policy, TrajectorySet};
use super::tabular::{PolicyTable, TabularMdp};
use crate::error::{Error, Result};

/// `p[t][s]`, the probability of being in `s` at timestep `t`, for `t = 0..=T`.
pub fn visitation_frequencies<P: PolicyTable + ?Sized>(policy: &P, mdp: &TabularMdp) -> Vec<Vec<f64>> {
    let ns = mdp.n_states();
    let mut rows = Vec::with_capacity(mdp.horizon() + 1);
    rows.push(mdp.p0().to_vec());
    for t in 0..mdp.horizon() {
        let current = &rows[t];
        let mut next = vec![0.0; ns];
        for (from, &mass) in current.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for a in 0..mdp.n_actions() {
                let pa = policy.prob(t, from, a);
                if pa == 0.0 {
                    continue;
                }
                for (to, &p) in mdp.transition(from, a).iter().enumerate() {
                    next[to] += mass * pa * p;
                }
            }
        }
        rows.push(next);
    }
    rows
}

/// `ρ_π(s) = Σ_t γ^t p[t][s]`.
pub fn discounted_visitation<P: PolicyTable + ?Sized>(policy: &P, mdp: &TabularMdp) -> Vec<f64> {
    let mut rho = vec![0.0; mdp.n_states()];
    let mut discount = 1.0;
    for row in visitation_frequencies(policy, mdp) {
        for (acc, p) in rho.iter_mut().zip(row) {
            *acc += discount * p;
        }
        discount *= mdp.gamma();
    }
    rho
}

/// Expected discounted return `R(π) = Σ_s ρ_π(s) r(s)`.
pub fn exact_return<P: PolicyTable + ?Sized>(policy: &P, mdp: &TabularMdp) -> f64 {
    discounted_visitation(policy, mdp).iter().zip(mdp.rewards()).map(|(rho, r)| rho * r).sum()
}

/// `δ(𝛕)`: mean discounted trajectory return minus the policy's exact return.
pub fn trajectories_improvement<P: PolicyTable + ?Sized>(trajs: &TrajectorySet, policy: &P, mdp: &TabularMdp) -> f64 {
    trajs.mean_discounted_return(mdp) - exact_return(policy, mdp)
}

/// Largest `|p_π̃[t][s] − C(𝛕, s, ·, ·, t)/|𝛕||` over all `(t, s)`, with π̃ the
/// time-indexed hypothetical policy.
pub fn induction_identity_error(trajs: &TrajectorySet, mdp: &TabularMdp) -> f64 {
    let policy = time_indexed_hypothetical_policy(trajs);
    let tally = trajs.tally();
    let n = trajs.len() as f64;
    let mut worst: f64 = 0.0;
    for (t, row) in visitation_frequencies(&policy, mdp).iter().enumerate() {
        for (s, &p) in row.iter().enumerate() {
            worst = worst.max((p - tally.state_occupancy(t, s) as f64 / n).abs());
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    /// `|R(π̃) − mean R(τ_i)|` for the time-indexed hypothetical policy.
    pub equality_error: f64,
    pub delta: f64,
    pub mean_trajectory_return: f64,
    pub return_hypothetical: f64,
    pub return_current: f64,
    /// Same equality for the pooled (stationary) hypothetical policy. Zero
    /// whenever each state's action frequencies do not vary with `t`.
    pub stationary_equality_error: f64,
    /// Whether a state never seen in the buffer receives positive visitation
    /// mass under the stationary hypothetical policy.
    pub unvisited_state_mass: bool,
    pub holds: bool,
}

impl fmt::Display for TheoremReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "equality_error={:e}", self.equality_error)?;
        writeln!(f, "delta={}", self.delta)?;
        writeln!(f, "return_hypothetical={}", self.return_hypothetical)?;
        writeln!(f, "return_current={}", self.return_current)?;
        writeln!(f, "stationary_equality_error={:e}", self.stationary_equality_error)?;
        writeln!(f, "unvisited_state_mass={}", self.unvisited_state_mass)?;
        write!(f, "holds={}", self.holds)
    }
}

/// Builds the hypothetical policy from `trajs` and checks that its exact
/// return equals the buffer's mean discounted return, and that a
/// non-negative improvement `δ` implies it does at least as well as
/// `current`.
pub fn verify_theorem_1<P: PolicyTable + ?Sized>(
    trajs: &TrajectorySet,
    current: &P,
    mdp: &TabularMdp,
    tol: f64,
) -> Result<TheoremReport> {
    let (uniform, max_deviation) = is_uniformly_distributed(trajs, mdp, tol);
    if !uniform {
        return Err(Error::Precondition { max_deviation });
    }
    let mean = trajs.mean_discounted_return(mdp);
    let hypothetical = time_indexed_hypothetical_policy(trajs);
    let return_hypothetical = exact_return(&hypothetical, mdp);
    let return_current = exact_return(current, mdp);
    let delta = mean - return_current;
    let equality_error = (return_hypothetical - mean).abs();

    let stationary = hypothetical_policy(trajs);
    let stationary_equality_error = (exact_return(&stationary, mdp) - mean).abs();
    let visited: Vec<bool> = {
        let mut v = vec![false; mdp.n_states()];
        for tr in trajs.trajectories() {
            for &s in &tr.states {
                v[s] = true;
            }
        }
        v
    };
    let unvisited_state_mass =
        discounted_visitation(&stationary, mdp).iter().zip(&visited).any(|(&rho, &seen)| !seen && rho > 0.0);

    let improvement_ok = delta < 0.0 || return_hypothetical >= return_current - tol;
    Ok(TheoremReport {
        equality_error,
        delta,
        mean_trajectory_return: mean,
        return_hypothetical,
        return_current,
        stationary_equality_error,
        unvisited_state_mass,
        holds: equality_error <= tol && improvement_ok,
    })
}
