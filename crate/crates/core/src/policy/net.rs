use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rand::Rng;

use crate::error::{Error, Result};

pub const DEFAULT_HIDDEN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HeadKind {
    /// Logits of a softmax over discrete actions.
    Categorical,
    /// Mean of a fixed-variance Gaussian over continuous actions.
    GaussianMean,
}

impl HeadKind {
    pub fn as_str(self) -> &'static str {
        match self {
            HeadKind::Categorical => "categorical",
            HeadKind::GaussianMean => "gaussian",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "categorical" => Ok(HeadKind::Categorical),
            "gaussian" | "gaussian-mean" => Ok(HeadKind::GaussianMean),
            other => Err(Error::Parse(format!("unknown head kind {other:?}"))),
        }
    }
}

/// Two tanh hidden layers followed by a linear output layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Layout {
    pub input_dim: usize,
    pub hidden: [usize; 2],
    pub output_dim: usize,
}

/// Offsets of each block in the flat parameter vector:
/// `W1 (h1×in), b1, W2 (h2×h1), b2, W3 (out×h2), b3`, weights row-major.
#[derive(Debug, Clone, Copy)]
struct Blocks {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    end: usize,
}

impl Layout {
    pub fn new(input_dim: usize, output_dim: usize) -> Self {
        Self { input_dim, hidden: [DEFAULT_HIDDEN; 2], output_dim }
    }

    pub fn with_hidden(input_dim: usize, hidden: [usize; 2], output_dim: usize) -> Self {
        Self { input_dim, hidden, output_dim }
    }

    fn blocks(&self) -> Blocks {
        let [h1, h2] = self.hidden;
        let w1 = 0;
        let b1 = w1 + h1 * self.input_dim;
        let w2 = b1 + h1;
        let b2 = w2 + h2 * h1;
        let w3 = b2 + h2;
        let b3 = w3 + self.output_dim * h2;
        Blocks { w1, b1, w2, b2, w3, b3, end: b3 + self.output_dim }
    }

    pub fn param_count(&self) -> usize {
        self.blocks().end
    }

    fn fan(&self) -> [(usize, usize); 3] {
        let [h1, h2] = self.hidden;
        [(self.input_dim, h1), (h1, h2), (h2, self.output_dim)]
    }
}

struct Weights<'a> {
    w1: ArrayView2<'a, f64>,
    b1: ArrayView1<'a, f64>,
    w2: ArrayView2<'a, f64>,
    b2: ArrayView1<'a, f64>,
    w3: ArrayView2<'a, f64>,
    b3: ArrayView1<'a, f64>,
}

fn view<'a>(layout: &Layout, theta: &'a [f64]) -> Weights<'a> {
    let b = layout.blocks();
    let [h1, h2] = layout.hidden;
    let mat = |start: usize, rows: usize, cols: usize| {
        ArrayView2::from_shape((rows, cols), &theta[start..start + rows * cols]).expect("block sized by layout")
    };
    Weights {
        w1: mat(b.w1, h1, layout.input_dim),
        b1: ArrayView1::from(&theta[b.b1..b.w2]),
        w2: mat(b.w2, h2, h1),
        b2: ArrayView1::from(&theta[b.b2..b.w3]),
        w3: mat(b.w3, layout.output_dim, h2),
        b3: ArrayView1::from(&theta[b.b3..b.end]),
    }
}

/// Flat parameter vector plus the shape it encodes.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyParams {
    layout: Layout,
    head: HeadKind,
    theta: Vec<f64>,
}

impl PolicyParams {
    pub fn new(layout: Layout, head: HeadKind, theta: Vec<f64>) -> Result<Self> {
        if theta.len() != layout.param_count() {
            return Err(Error::Shape(format!(
                "{} parameters for a layout needing {}",
                theta.len(),
                layout.param_count()
            )));
        }
        if theta.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("policy parameter is not finite".into()));
        }
        Ok(Self { layout, head, theta })
    }

    pub fn zeros(layout: Layout, head: HeadKind) -> Self {
        Self { layout, head, theta: vec![0.0; layout.param_count()] }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(layout: Layout, head: HeadKind, rng: &mut R) -> Self {
        let mut theta = vec![0.0; layout.param_count()];
        let b = layout.blocks();
        for ((fan_in, fan_out), start) in layout.fan().into_iter().zip([b.w1, b.w2, b.w3]) {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut theta[start..start + fan_in * fan_out] {
                *w = rng.random_range(-limit..=limit);
            }
        }
        Self { layout, head, theta }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn head(&self) -> HeadKind {
        self.head
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn theta_mut(&mut self) -> &mut [f64] {
        &mut self.theta
    }

    pub fn with_theta(&self, theta: Vec<f64>) -> Result<Self> {
        Self::new(self.layout, self.head, theta)
    }

    /// Head output for one observation.
    pub fn forward(&self, obs: &[f64]) -> Result<Vec<f64>> {
        if obs.len() != self.layout.input_dim {
            return Err(Error::Shape(format!(
                "observation has {} entries, network expects {}",
                obs.len(),
                self.layout.input_dim
            )));
        }
        let w = view(&self.layout, &self.theta);
        let dense = |x: &[f64], m: &ArrayView2<f64>, bias: &ArrayView1<f64>, act: bool| -> Vec<f64> {
            m.outer_iter()
                .zip(bias.iter())
                .map(|(row, &b)| {
                    let z = row.iter().zip(x).fold(b, |acc, (w, x)| acc + w * x);
                    if act {
                        z.tanh()
                    } else {
                        z
                    }
                })
                .collect()
        };
        let h1 = dense(obs, &w.w1, &w.b1, true);
        let h2 = dense(&h1, &w.w2, &w.b2, true);
        Ok(dense(&h2, &w.w3, &w.b3, false))
    }

    /// Head outputs for a batch of observations, one per row.
    pub fn forward_batch(&self, obs: ArrayView2<f64>) -> Result<Array2<f64>> {
        check_batch_width(&self.layout, obs)?;
        Ok(forward_cached(&self.layout, &self.theta, obs).out)
    }
}

fn check_batch_width(layout: &Layout, obs: ArrayView2<f64>) -> Result<()> {
    if obs.ncols() != layout.input_dim {
        return Err(Error::Shape(format!(
            "batch rows have {} entries, network expects {}",
            obs.ncols(),
            layout.input_dim
        )));
    }
    Ok(())
}

pub(crate) struct Activations {
    h1: Array2<f64>,
    h2: Array2<f64>,
    pub out: Array2<f64>,
}

fn affine(x: ArrayView2<f64>, w: &ArrayView2<f64>, b: &ArrayView1<f64>) -> Array2<f64> {
    let mut z = x.dot(&w.t());
    z += b;
    z
}

pub(crate) fn forward_cached(layout: &Layout, theta: &[f64], obs: ArrayView2<f64>) -> Activations {
    let w = view(layout, theta);
    let h1 = affine(obs, &w.w1, &w.b1).mapv_into(f64::tanh);
    let h2 = affine(h1.view(), &w.w2, &w.b2).mapv_into(f64::tanh);
    let out = affine(h2.view(), &w.w3, &w.b3);
    Activations { h1, h2, out }
}

/// Gradient of a loss with respect to every parameter, given the loss's
/// gradient `d_out` with respect to the head output.
pub(crate) fn backward(
    layout: &Layout,
    theta: &[f64],
    obs: ArrayView2<f64>,
    acts: &Activations,
    d_out: &Array2<f64>,
) -> Vec<f64> {
    let w = view(layout, theta);
    let b = layout.blocks();
    let [h1, h2] = layout.hidden;
    let mut grad = vec![0.0; layout.param_count()];
    {
        let (head, rest) = grad.split_at_mut(b.w2);
        let (g_w1, g_b1) = head.split_at_mut(b.b1);
        let (mid, tail) = rest.split_at_mut(b.w3 - b.w2);
        let (g_w2, g_b2) = mid.split_at_mut(h2 * h1);
        let (g_w3, g_b3) = tail.split_at_mut(layout.output_dim * h2);

        let write = |dst: &mut [f64], rows: usize, cols: usize, src: Array2<f64>| {
            ArrayViewMut2::from_shape((rows, cols), dst).expect("block sized by layout").assign(&src);
        };
        let write_bias = |dst: &mut [f64], src: Array1<f64>| ArrayViewMut1::from(dst).assign(&src);

        write(g_w3, layout.output_dim, h2, d_out.t().dot(&acts.h2));
        write_bias(g_b3, d_out.sum_axis(Axis(0)));

        let mut dz2 = d_out.dot(&w.w3);
        dz2.zip_mut_with(&acts.h2, |d, &h| *d *= 1.0 - h * h);
        write(g_w2, h2, h1, dz2.t().dot(&acts.h1));
        write_bias(g_b2, dz2.sum_axis(Axis(0)));

        let mut dz1 = dz2.dot(&w.w2);
        dz1.zip_mut_with(&acts.h1, |d, &h| *d *= 1.0 - h * h);
        write(g_w1, h1, layout.input_dim, dz1.t().dot(&obs));
        write_bias(g_b1, dz1.sum_axis(Axis(0)));
    }
    grad
}

pub(crate) fn check_input(layout: &Layout, obs: ArrayView2<f64>) -> Result<()> {
    check_batch_width(layout, obs)
}
