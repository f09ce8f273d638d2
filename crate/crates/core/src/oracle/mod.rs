//! Exact tabular machinery behind the policy-improvement argument for
//! ranking-buffer imitation: transition counts, the uniformly-distributed
//! condition, hypothetical policies, and exact returns via discounted
//! visitation frequencies.

mod counting;
mod evaluation;
mod filter;
mod tabular;

pub use counting::{
    count, hypothetical_policy, is_uniformly_distributed, sample_trajectory, time_indexed_hypothetical_policy,
    TabularTrajectory, Tally, TrajectorySet,
};
pub use evaluation::{
    discounted_visitation, exact_return, induction_identity_error, trajectories_improvement, verify_theorem_1,
    visitation_frequencies, TheoremReport,
};
pub use filter::ranking_filter;
pub use tabular::{sample_index as tabular_sample, PolicyTable, TabularMdp, TabularPolicy, TimeIndexedPolicy};
