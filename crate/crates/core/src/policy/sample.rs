use rand::Rng;
use rand_distr::StandardNormal;

use super::loss::softmax;
use super::net::HeadKind;
use crate::error::{Error, Result};
use crate::mdp::ActionValue;

/// Draws an action from the policy distribution described by `head_output`:
/// a softmax over logits, or `mean + sigma·N(0, 1)` per dimension clamped to
/// `[-bound, bound]`.
pub fn sample_action<R: Rng + ?Sized>(
    head_output: &[f64],
    head: HeadKind,
    sigma: f64,
    bound: f64,
    rng: &mut R,
) -> Result<ActionValue> {
    match head {
        HeadKind::Categorical => {
            if head_output.iter().any(|z| !z.is_finite()) {
                return Err(Error::Numeric("non-finite logits".into()));
            }
            let probs = softmax(head_output);
            Ok(ActionValue::Discrete(crate::oracle::tabular_sample(rng, &probs)))
        }
        HeadKind::GaussianMean => {
            if sigma.is_nan() || sigma <= 0.0 {
                return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
            }
            if head_output.iter().any(|z| !z.is_finite()) {
                return Err(Error::Numeric("non-finite action mean".into()));
            }
            Ok(ActionValue::Continuous(
                head_output
                    .iter()
                    .map(|&mean| {
                        let noise: f64 = rng.sample(StandardNormal);
                        (mean + sigma * noise).clamp(-bound, bound)
                    })
                    .collect(),
            ))
        }
    }
}

/// Argmax of the logits, or the mean action clamped to the box.
pub fn greedy_action(head_output: &[f64], head: HeadKind, bound: f64) -> ActionValue {
    match head {
        HeadKind::Categorical => {
            let mut best = 0;
            for (i, &z) in head_output.iter().enumerate() {
                if z > head_output[best] {
                    best = i;
                }
            }
            ActionValue::Discrete(best)
        }
        HeadKind::GaussianMean => ActionValue::Continuous(head_output.iter().map(|m| m.clamp(-bound, bound)).collect()),
    }
}
