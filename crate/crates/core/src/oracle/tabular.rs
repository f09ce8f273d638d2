use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};

const SUM_TOL: f64 = 1e-9;

/// Finite-horizon MDP with state rewards `r: S → ℝ`.
///
/// Episodes visit `horizon + 1` states, `s_0 ..= s_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    n_states: usize,
    n_actions: usize,
    p0: Vec<f64>,
    /// Row-major `[s][a][s']`.
    transitions: Vec<f64>,
    rewards: Vec<f64>,
    gamma: f64,
    horizon: usize,
}

fn check_distribution(what: &str, row: &[f64]) -> Result<()> {
    if row.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::InvalidArgument(format!("{what} has an entry outside [0, 1]")));
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > SUM_TOL {
        return Err(Error::InvalidArgument(format!("{what} sums to {sum}, not 1")));
    }
    Ok(())
}

impl TabularMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        p0: Vec<f64>,
        transitions: Vec<f64>,
        rewards: Vec<f64>,
        gamma: f64,
        horizon: usize,
    ) -> Result<Self> {
        if n_states == 0 || n_actions == 0 {
            return Err(Error::InvalidArgument("MDP needs at least one state and one action".into()));
        }
        if p0.len() != n_states || rewards.len() != n_states || transitions.len() != n_states * n_actions * n_states {
            return Err(Error::Shape(format!(
                "p0 {} / rewards {} / transitions {} do not match {n_states} states x {n_actions} actions",
                p0.len(),
                rewards.len(),
                transitions.len()
            )));
        }
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(Error::InvalidArgument(format!("gamma {gamma} outside (0, 1]")));
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return Err(Error::Numeric("state reward is not finite".into()));
        }
        check_distribution("p0", &p0)?;
        for (i, row) in transitions.chunks(n_states).enumerate() {
            check_distribution(&format!("P[s={}][a={}]", i / n_actions, i % n_actions), row)?;
        }
        Ok(Self { n_states, n_actions, p0, transitions, rewards, gamma, horizon })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }
    pub fn n_actions(&self) -> usize {
        self.n_actions
    }
    pub fn p0(&self) -> &[f64] {
        &self.p0
    }
    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }
    pub fn gamma(&self) -> f64 {
        self.gamma
    }
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// `P(· | s, a)`.
    pub fn transition(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.transitions[start..start + self.n_states]
    }

    pub fn is_deterministic(&self) -> bool {
        let one_hot = |row: &[f64]| row.iter().filter(|&&p| p == 1.0).count() == 1;
        one_hot(&self.p0) && self.transitions.chunks(self.n_states).all(one_hot)
    }

    pub fn with_rewards(&self, rewards: Vec<f64>) -> Result<Self> {
        Self::new(
            self.n_states,
            self.n_actions,
            self.p0.clone(),
            self.transitions.clone(),
            rewards,
            self.gamma,
            self.horizon,
        )
    }

    /// `n`-state chain: action 0 advances one state (the last state absorbs),
    /// any other action returns to state 0. Only the last state is rewarded.
    /// Horizon is `2·(n−1)`.
    pub fn chain(n: usize, n_actions: usize) -> Result<Self> {
        if n < 2 || n_actions < 2 {
            return Err(Error::InvalidArgument("chain needs at least 2 states and 2 actions".into()));
        }
        let mut p0 = vec![0.0; n];
        p0[0] = 1.0;
        let mut transitions = vec![0.0; n * n_actions * n];
        for s in 0..n {
            for a in 0..n_actions {
                let next = if a == 0 { (s + 1).min(n - 1) } else { 0 };
                transitions[(s * n_actions + a) * n + next] = 1.0;
            }
        }
        let mut rewards = vec![0.0; n];
        rewards[n - 1] = 1.0;
        Self::new(n, n_actions, p0, transitions, rewards, 0.99, 2 * (n - 1))
    }

    /// Random deterministic MDP: one-hot `p0` and transition rows, rewards uniform in `[-1, 1]`.
    pub fn random_deterministic<R: Rng + ?Sized>(
        rng: &mut R,
        n_states: usize,
        n_actions: usize,
        gamma: f64,
        horizon: usize,
    ) -> Result<Self> {
        let mut p0 = vec![0.0; n_states];
        p0[rng.random_range(0..n_states)] = 1.0;
        let mut transitions = vec![0.0; n_states * n_actions * n_states];
        for row in transitions.chunks_mut(n_states) {
            row[rng.random_range(0..n_states)] = 1.0;
        }
        let rewards = (0..n_states).map(|_| rng.random_range(-1.0..=1.0)).collect();
        Self::new(n_states, n_actions, p0, transitions, rewards, gamma, horizon)
    }

    /// Parses the plain-text MDP format:
    ///
    /// ```text
    /// n_states n_actions gamma T
    /// p0 row
    /// r row
    /// n_states·n_actions transition rows, ordered s-major then a
    /// ```
    ///
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty());
        let header: Vec<&str> =
            lines.next().ok_or_else(|| Error::Parse("empty MDP file".into()))?.split_whitespace().collect();
        if header.len() != 4 {
            return Err(Error::Parse("header must be `n_states n_actions gamma T`".into()));
        }
        let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s:?}: {e}")));
        let n_states = parse_usize(header[0])?;
        let n_actions = parse_usize(header[1])?;
        let gamma: f64 = header[2].parse().map_err(|e| Error::Parse(format!("gamma {:?}: {e}", header[2])))?;
        let horizon = parse_usize(header[3])?;
        let mut row = |what: &str| -> Result<Vec<f64>> {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing {what} row")))?;
            let values = line
                .split_whitespace()
                .map(|x| x.parse::<f64>().map_err(|e| Error::Parse(format!("{what}: {x:?}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if values.len() != n_states {
                return Err(Error::Parse(format!("{what} row has {} entries, expected {n_states}", values.len())));
            }
            Ok(values)
        };
        let p0 = row("p0")?;
        let rewards = row("reward")?;
        let mut transitions = Vec::with_capacity(n_states * n_actions * n_states);
        for s in 0..n_states {
            for a in 0..n_actions {
                transitions.extend(row(&format!("P[{s}][{a}]"))?);
            }
        }
        if lines.next().is_some() {
            return Err(Error::Parse("trailing rows after transition table".into()));
        }
        Self::new(n_states, n_actions, p0, transitions, rewards, gamma, horizon)
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("{} {} {} {}\n", self.n_states, self.n_actions, self.gamma, self.horizon);
        let mut push_row = |row: &[f64]| {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "{}", cells.join(" "));
        };
        push_row(&self.p0);
        push_row(&self.rewards);
        for row in self.transitions.chunks(self.n_states) {
            push_row(row);
        }
        out
    }
}

/// Action probabilities that may depend on the timestep.
pub trait PolicyTable {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn prob(&self, t: usize, s: usize, a: usize) -> f64;
}

/// Stationary policy `π[s][a]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self> {
        if probs.len() != n_states * n_actions || n_actions == 0 {
            return Err(Error::Shape(format!("{} probabilities for {n_states}x{n_actions}", probs.len())));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            check_distribution(&format!("policy row {s}"), row)?;
        }
        Ok(Self { n_states, n_actions, probs })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self { n_states, n_actions, probs: vec![1.0 / n_actions as f64; n_states * n_actions] }
    }

    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Result<Self> {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= n_actions {
                return Err(Error::InvalidArgument(format!("action {a} out of range")));
            }
            probs[s * n_actions + a] = 1.0;
        }
        Self::new(actions.len(), n_actions, probs)
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R, n_states: usize, n_actions: usize) -> Self {
        let mut probs = Vec::with_capacity(n_states * n_actions);
        for _ in 0..n_states {
            let row: Vec<f64> = (0..n_actions).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = row.iter().sum();
            probs.extend(row.iter().map(|x| x / total));
        }
        Self { n_states, n_actions, probs }
    }

    /// Whitespace-separated matrix, one row per state; `#` starts a comment.
    pub fn parse(text: &str, n_states: usize, n_actions: usize) -> Result<Self> {
        let probs = text
            .lines()
            .flat_map(|l| l.split('#').next().unwrap_or("").split_whitespace())
            .map(|x| x.parse::<f64>().map_err(|e| Error::Parse(format!("{x:?}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n_states, n_actions, probs)
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..(s + 1) * self.n_actions]
    }

    pub(crate) fn from_rows_unchecked(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Self {
        Self { n_states, n_actions, probs }
    }
}

impl PolicyTable for TabularPolicy {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn prob(&self, _t: usize, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }
}

/// One stationary table per timestep; timesteps past the last table reuse it.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeIndexedPolicy {
    layers: Vec<TabularPolicy>,
}

impl TimeIndexedPolicy {
    pub fn new(layers: Vec<TabularPolicy>) -> Result<Self> {
        let first = layers.first().ok_or_else(|| Error::InvalidArgument("no policy layers".into()))?;
        if layers.iter().any(|l| l.n_states != first.n_states || l.n_actions != first.n_actions) {
            return Err(Error::Shape("policy layers disagree on dimensions".into()));
        }
        Ok(Self { layers })
    }

    pub fn layer(&self, t: usize) -> &TabularPolicy {
        &self.layers[t.min(self.layers.len() - 1)]
    }

    pub fn len(&self) -> usize {
        self.layers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }
}

impl PolicyTable for TimeIndexedPolicy {
    fn n_states(&self) -> usize {
        self.layers[0].n_states
    }
    fn n_actions(&self) -> usize {
        self.layers[0].n_actions
    }
    fn prob(&self, t: usize, s: usize, a: usize) -> f64 {
        self.layer(t).prob(t, s, a)
    }
}

pub fn sample_index<R: Rng + ?Sized>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the cumulative sum; take the last non-zero entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}
