use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::io::atomic_write;

pub const CSV_HEADER: &str = "step,episode_reward,rolling100,wallclock_s,buffer_min,buffer_max,loss";
pub const ROLLING_WINDOW: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRecord {
    /// Global env-step count after this episode.
    pub step: u64,
    pub episode_reward: f64,
    pub rolling100: f64,
    pub wallclock_s: f64,
    pub buffer_min: Option<f64>,
    pub buffer_max: Option<f64>,
    /// Mean loss of the most recent update round, if any has run.
    pub loss: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iteration: u64,
    pub step: u64,
    pub buffer_min: f64,
    pub buffer_max: f64,
    pub mean_loss: f64,
}

/// Running average over the most recent [`ROLLING_WINDOW`] episodes.
#[derive(Debug, Clone, Default)]
pub struct Rolling {
    window: VecDeque<f64>,
}

impl Rolling {
    pub fn push(&mut self, x: f64) -> f64 {
        self.window.push_back(x);
        if self.window.len() > ROLLING_WINDOW {
            self.window.pop_front();
        }
        self.mean()
    }

    pub fn mean(&self) -> f64 {
        if self.window.is_empty() {
            0.0
        } else {
            self.window.iter().sum::<f64>() / self.window.len() as f64
        }
    }

    pub fn full(&self) -> bool {
        self.window.len() >= ROLLING_WINDOW
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainMetrics {
    pub episodes: Vec<EpisodeRecord>,
    pub iterations: Vec<IterationRecord>,
    rolling: Rolling,
}

impl TrainMetrics {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an episode and returns the updated rolling average.
    pub fn record_episode(
        &mut self,
        step: u64,
        episode_reward: f64,
        wallclock_s: f64,
        buffer: Option<(f64, f64)>,
        loss: Option<f64>,
    ) -> f64 {
        let rolling100 = self.rolling.push(episode_reward);
        self.episodes.push(EpisodeRecord {
            step,
            episode_reward,
            rolling100,
            wallclock_s,
            buffer_min: buffer.map(|b| b.0),
            buffer_max: buffer.map(|b| b.1),
            loss,
        });
        rolling100
    }

    pub fn rolling100(&self) -> f64 {
        self.rolling.mean()
    }

    /// True once at least 100 episodes have been logged and their rolling
    /// average reaches `target`.
    pub fn reached(&self, target: f64) -> bool {
        self.rolling.full() && self.rolling.mean() >= target
    }

    /// Env step of the first episode at which [`reached`](Self::reached) held.
    pub fn first_step_reaching(&self, target: f64) -> Option<u64> {
        self.episodes
            .iter()
            .enumerate()
            .find(|(i, e)| *i + 1 >= ROLLING_WINDOW && e.rolling100 >= target)
            .map(|(_, e)| e.step)
    }

    pub fn total_steps(&self) -> u64 {
        self.episodes.last().map_or(0, |e| e.step)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::with_capacity(64 * (self.episodes.len() + 1));
        s.push_str(CSV_HEADER);
        s.push('\n');
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for e in &self.episodes {
            let _ = writeln!(
                s,
                "{},{},{},{},{},{},{}",
                e.step,
                e.episode_reward,
                e.rolling100,
                e.wallclock_s,
                opt(e.buffer_min),
                opt(e.buffer_max),
                opt(e.loss)
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        atomic_write(path, self.to_csv().as_bytes())
    }
}

/// Reads the `step` and `rolling100` columns back from a metrics CSV.
pub fn read_rolling(csv: &str) -> Result<Vec<(u64, f64)>> {
    use crate::error::Error;
    let mut lines = csv.lines();
    if lines.next() != Some(CSV_HEADER) {
        return Err(Error::Parse("metrics CSV header mismatch".into()));
    }
    lines
        .filter(|l| !l.is_empty())
        .map(|l| {
            let cols: Vec<&str> = l.split(',').collect();
            if cols.len() != 7 {
                return Err(Error::Parse(format!("metrics row has {} columns", cols.len())));
            }
            let step = cols[0].parse().map_err(|_| Error::Parse(format!("bad step {:?}", cols[0])))?;
            let rolling = cols[2].parse().map_err(|_| Error::Parse(format!("bad rolling100 {:?}", cols[2])))?;
            Ok((step, rolling))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rolling_window_drops_old_episodes() {
        let mut m = TrainMetrics::new();
        for i in 0..150 {
            m.record_episode(i + 1, if i < 50 { 0.0 } else { 10.0 }, 0.0, None, None);
        }
        assert_eq!(m.rolling100(), 10.0);
        assert!(m.reached(10.0));
        assert_eq!(m.first_step_reaching(10.0), Some(150));
        assert_eq!(m.first_step_reaching(5.0), Some(100));
    }

    #[test]
    fn csv_header_and_empty_fields() {
        let mut m = TrainMetrics::new();
        m.record_episode(12, 12.0, 0.0, None, None);
        m.record_episode(30, 18.0, 0.5, Some((12.0, 18.0)), Some(0.25));
        let csv = m.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], "12,12,12,0,,,");
        assert_eq!(lines[2], "30,18,15,0.5,12,18,0.25");
        assert_eq!(read_rolling(&csv).unwrap(), vec![(12, 12.0), (30, 15.0)]);
    }
}
