//! Supervised losses for regressing the policy onto buffered pairs.

use ndarray::{Array2, Axis};

use super::net::{backward, check_input, forward_cached, HeadKind, Layout, PolicyParams};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum BatchActions {
    Discrete(Vec<usize>),
    /// One row per sample.
    Continuous(Array2<f64>),
}

/// `N` observations (rows) with their target actions.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchSample {
    pub observations: Array2<f64>,
    pub actions: BatchActions,
}

impl BatchSample {
    pub fn new(observations: Array2<f64>, actions: BatchActions) -> Result<Self> {
        let n = observations.nrows();
        let rows = match &actions {
            BatchActions::Discrete(a) => a.len(),
            BatchActions::Continuous(a) => a.nrows(),
        };
        if n == 0 || rows != n {
            return Err(Error::Shape(format!("{n} observations and {rows} actions")));
        }
        Ok(Self { observations, actions })
    }

    pub fn len(&self) -> usize {
        self.observations.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.nrows() == 0
    }
}

/// Numerically stable softmax of one row of logits.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exp: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exp.iter().sum();
    exp.into_iter().map(|e| e / total).collect()
}

/// Negative log-likelihood of the buffered actions under the categorical
/// head, averaged over the batch, minus `entropy_coef` times the mean policy
/// entropy. Returns the loss and its gradient with respect to `theta`.
pub fn discrete_loss_and_grad_raw(
    layout: &Layout,
    theta: &[f64],
    batch: &BatchSample,
    entropy_coef: f64,
) -> Result<(f64, Vec<f64>)> {
    let actions = match &batch.actions {
        BatchActions::Discrete(a) => a,
        BatchActions::Continuous(_) => return Err(Error::Shape("discrete loss needs discrete actions".into())),
    };
    check_input(layout, batch.observations.view())?;
    if let Some(&bad) = actions.iter().find(|&&a| a >= layout.output_dim) {
        return Err(Error::Shape(format!("action {bad} out of range for {} logits", layout.output_dim)));
    }
    let n = batch.len() as f64;
    let acts = forward_cached(layout, theta, batch.observations.view());
    let mut d_out = Array2::zeros(acts.out.raw_dim());
    let mut loss = 0.0;
    for ((logits, mut d), &a) in acts.out.axis_iter(Axis(0)).zip(d_out.axis_iter_mut(Axis(0))).zip(actions) {
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_norm = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss += log_norm - logits[a];
        let log_p: Vec<f64> = logits.iter().map(|z| z - log_norm).collect();
        let entropy: f64 = -log_p.iter().map(|lp| lp.exp() * lp).sum::<f64>();
        loss -= entropy_coef * entropy;
        for (j, (dj, lp)) in d.iter_mut().zip(&log_p).enumerate() {
            let p = lp.exp();
            let nll = p - if j == a { 1.0 } else { 0.0 };
            *dj = (nll + entropy_coef * p * (lp + entropy)) / n;
        }
    }
    let grad = backward(layout, theta, batch.observations.view(), &acts, &d_out);
    Ok((loss / n, grad))
}

/// Mean squared error between the Gaussian-mean head and the buffered
/// actions, averaged over batch rows and action dimensions.
pub fn continuous_loss_and_grad_raw(layout: &Layout, theta: &[f64], batch: &BatchSample) -> Result<(f64, Vec<f64>)> {
    let targets = match &batch.actions {
        BatchActions::Continuous(a) => a,
        BatchActions::Discrete(_) => return Err(Error::Shape("continuous loss needs continuous actions".into())),
    };
    check_input(layout, batch.observations.view())?;
    if targets.ncols() != layout.output_dim {
        return Err(Error::Shape(format!(
            "actions have {} dimensions, head has {}",
            targets.ncols(),
            layout.output_dim
        )));
    }
    let scale = (batch.len() * layout.output_dim) as f64;
    let acts = forward_cached(layout, theta, batch.observations.view());
    let diff = &acts.out - targets;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / scale;
    let d_out = diff * (2.0 / scale);
    let grad = backward(layout, theta, batch.observations.view(), &acts, &d_out);
    Ok((loss, grad))
}

pub fn discrete_loss_and_grad(
    params: &PolicyParams,
    batch: &BatchSample,
    entropy_coef: f64,
) -> Result<(f64, Vec<f64>)> {
    if params.head() != HeadKind::Categorical {
        return Err(Error::Config("discrete loss needs a categorical head".into()));
    }
    discrete_loss_and_grad_raw(params.layout(), params.theta(), batch, entropy_coef)
}

pub fn continuous_loss_and_grad(params: &PolicyParams, batch: &BatchSample) -> Result<(f64, Vec<f64>)> {
    if params.head() != HeadKind::GaussianMean {
        return Err(Error::Config("continuous loss needs a gaussian-mean head".into()));
    }
    continuous_loss_and_grad_raw(params.layout(), params.theta(), batch)
}

/// Head-appropriate loss: log loss for categorical heads, MSE for Gaussian means.
pub fn loss_and_grad(params: &PolicyParams, batch: &BatchSample, entropy_coef: f64) -> Result<(f64, Vec<f64>)> {
    match params.head() {
        HeadKind::Categorical => discrete_loss_and_grad(params, batch, entropy_coef),
        HeadKind::GaussianMean => continuous_loss_and_grad(params, batch),
    }
}
