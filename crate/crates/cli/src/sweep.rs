use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ssrl_core::trainer::{train, TrainConfig, TrainMetrics};

use crate::commands::{load_config, CmdResult, Context, Failure};
use crate::Overrides;

pub const PERCENTILES: [(&str, f64); 7] =
    [("min", 0.0), ("p10", 10.0), ("p25", 25.0), ("median", 50.0), ("p75", 75.0), ("p90", 90.0), ("max", 100.0)];

/// Parses `a..b` (inclusive) or a single seed.
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, Failure> {
    let bad = || Failure::Usage(format!("bad seed range {spec:?}; expected a..b or a single seed"));
    let seeds: Vec<u64> = match spec.split_once("..") {
        Some((a, b)) => {
            let a: u64 = a.trim().parse().map_err(|_| bad())?;
            let b: u64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            (a..=b).collect()
        }
        None => vec![spec.trim().parse().map_err(|_| bad())?],
    };
    if seeds.is_empty() {
        return Err(Failure::Usage(format!("seed range {spec:?} is empty")));
    }
    Ok(seeds)
}

/// Linear-interpolation percentile of sorted data.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Rolling-100 return at env step `step`: the value logged by the last
/// episode finishing at or before it. A run that stopped early keeps its
/// last value.
pub fn rolling_at(metrics: &TrainMetrics, step: u64) -> Option<f64> {
    let i = metrics.episodes.partition_point(|e| e.step <= step);
    (i > 0).then(|| metrics.episodes[i - 1].rolling100)
}

pub fn summary_csv(runs: &[(u64, TrainMetrics)], checkpoints: &[u64]) -> String {
    let mut s = String::from("step,seeds");
    for (name, _) in PERCENTILES {
        s.push(',');
        s.push_str(name);
    }
    s.push('\n');
    for &c in checkpoints {
        let mut values: Vec<f64> = runs.iter().filter_map(|(_, m)| rolling_at(m, c)).collect();
        if values.is_empty() {
            continue;
        }
        values.sort_by(f64::total_cmp);
        let _ = write!(s, "{c},{}", values.len());
        for (_, q) in PERCENTILES {
            let _ = write!(s, ",{}", percentile(&values, q));
        }
        s.push('\n');
    }
    s
}

pub fn run(
    ctx: &Context,
    overrides: &Overrides,
    seeds: &str,
    threads: usize,
    checkpoint_every: Option<u64>,
    solved: Option<f64>,
) -> CmdResult {
    let seeds = parse_seeds(seeds)?;
    if threads == 0 {
        return Err(Failure::Usage("--threads must be at least 1".into()));
    }
    let base = load_config(ctx, overrides)?;
    if base.distributed.is_some() {
        return Err(Failure::Usage("sweep runs single-threaded trainers; drop the distributed keys".into()));
    }
    let every = checkpoint_every.unwrap_or((base.total_steps / 20).max(1));
    if every == 0 {
        return Err(Failure::Usage("--checkpoint-every must be at least 1".into()));
    }
    std::fs::create_dir_all(&ctx.out_dir).map_err(|e| Failure::Runtime(e.into()))?;

    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<(u64, Result<TrainMetrics, String>)>> = Mutex::new(Vec::new());
    std::thread::scope(|scope| {
        for _ in 0..threads.min(seeds.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&seed) = seeds.get(i) else { break };
                let config = TrainConfig { seed, ..base.clone() };
                let outcome = match catch_unwind(AssertUnwindSafe(|| train(config))) {
                    Ok(Ok((_, metrics))) => Ok(metrics),
                    Ok(Err(e)) => Err(e.to_string()),
                    Err(_) => Err("trainer panicked".to_string()),
                };
                results.lock().unwrap_or_else(|p| p.into_inner()).push((seed, outcome));
            });
        }
    });
    let mut results = results.into_inner().unwrap_or_else(|p| p.into_inner());
    results.sort_by_key(|(seed, _)| *seed);

    let mut runs = Vec::new();
    for (seed, outcome) in results {
        match outcome {
            Ok(metrics) => {
                metrics.write_csv(&ctx.out_dir.join(format!("seed_{seed}.csv")))?;
                runs.push((seed, metrics));
            }
            Err(msg) => eprintln!("seed {seed} failed: {msg}"),
        }
    }
    let max_step = runs.iter().map(|(_, m)| m.total_steps()).max().unwrap_or(0).max(base.total_steps);
    let checkpoints: Vec<u64> = (1..).map(|k| k * every).take_while(|&c| c <= max_step).collect();
    let summary = summary_csv(&runs, &checkpoints);
    ssrl_core::io::atomic_write(&ctx.out_dir.join("summary.csv"), summary.as_bytes())?;

    println!("seeds_run={}", runs.len());
    println!("seeds_failed={}", seeds.len() - runs.len());
    if let Some(threshold) = solved.or(base.target_return) {
        let n_solved = runs.iter().filter(|(_, m)| m.first_step_reaching(threshold).is_some()).count();
        println!("solved_threshold={threshold}");
        println!("solved_seeds={n_solved}");
        println!("solved_fraction={}", n_solved as f64 / seeds.len() as f64);
    }
    if runs.is_empty() {
        return Err(Failure::Runtime(anyhow::anyhow!("every seed failed")));
    }
    Ok(())
}
