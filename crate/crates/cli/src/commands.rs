use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context as _;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssrl_core::envs::make_env;
use ssrl_core::oracle::{
    induction_identity_error, ranking_filter, sample_trajectory, verify_theorem_1, TabularMdp, TabularPolicy,
    TrajectorySet,
};
use ssrl_core::policy::checkpoint;
use ssrl_core::trainer::{evaluate, train_distributed, TrainConfig, TrainMetrics, Trainer};
use ssrl_core::Error;

use crate::Overrides;

pub struct Context {
    pub seed: Option<u64>,
    pub config: Option<PathBuf>,
    pub out_dir: PathBuf,
}

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Verification(String),
    Runtime(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::InvalidArgument(_) | Error::Parse(_) => Failure::Usage(e.to_string()),
            Error::Precondition { .. } => Failure::Verification(e.to_string()),
            other => Failure::Runtime(other.into()),
        }
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Runtime(e)
    }
}

pub type CmdResult = std::result::Result<(), Failure>;

/// Defaults, then the config file, then flag overrides, then `--seed`.
pub fn load_config(ctx: &Context, overrides: &Overrides) -> std::result::Result<TrainConfig, Failure> {
    let mut config = TrainConfig::default();
    if let Some(path) = &ctx.config {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("cannot read config {}: {e}", path.display())))?;
        config.apply(&text)?;
    }
    if let Some(env) = &overrides.env {
        config.env = env.clone();
    }
    if let Some(steps) = overrides.total_steps {
        config.total_steps = steps;
    }
    if let Some(head) = &overrides.head {
        config.set("head", head)?;
    }
    for entry in &overrides.set {
        let (k, v) =
            entry.split_once('=').ok_or_else(|| Failure::Usage(format!("--set expects KEY=VALUE, got {entry:?}")))?;
        config.set(k.trim(), v.trim())?;
    }
    if let Some(seed) = ctx.seed {
        config.seed = seed;
    }
    config.validate()?;
    Ok(config)
}

fn create_out_dir(dir: &Path) -> std::result::Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))
        .map_err(Failure::Runtime)
}

fn summarize(metrics: &TrainMetrics) {
    println!("episodes={}", metrics.episodes.len());
    println!("env_steps={}", metrics.total_steps());
    println!("final_rolling100={}", metrics.rolling100());
}

pub fn train(ctx: &Context, overrides: &Overrides, trace_every: Option<usize>) -> CmdResult {
    let mut config = load_config(ctx, overrides)?;
    if let Some(k) = trace_every {
        config.trace_every = k;
    }
    create_out_dir(&ctx.out_dir)?;
    let (params, metrics) = if config.distributed.is_some() {
        let run = train_distributed(&config)?;
        println!("applied_gradients={}", run.stats.applied);
        (run.params, run.metrics)
    } else {
        let trace_dir = (config.trace_every > 0).then(|| ctx.out_dir.join("trace"));
        Trainer::new(config.clone())?.run(trace_dir.as_deref())?
    };
    metrics.write_csv(&ctx.out_dir.join("metrics.csv"))?;
    checkpoint::save(&params, &ctx.out_dir.join("policy.bin"))?;
    ssrl_core::io::atomic_write(&ctx.out_dir.join("config.txt"), config.to_text().as_bytes())?;
    summarize(&metrics);
    Ok(())
}

pub fn trace(ctx: &Context, overrides: &Overrides, every: usize) -> CmdResult {
    if every == 0 {
        return Err(Failure::Usage("--every must be at least 1".into()));
    }
    let mut config = load_config(ctx, overrides)?;
    if config.distributed.is_some() {
        return Err(Failure::Usage("tracing runs the single-threaded trainer; drop the distributed keys".into()));
    }
    config.trace_every = every;
    create_out_dir(&ctx.out_dir)?;
    let (_, metrics) = Trainer::new(config)?.run(Some(&ctx.out_dir))?;
    let mut files: Vec<String> = fs::read_dir(&ctx.out_dir)
        .context("listing trace files")?
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with("iter") && n.ends_with(".txt"))
        .collect();
    files.sort();
    println!("trace_files={}", files.len());
    summarize(&metrics);
    Ok(())
}

pub fn eval(ctx: &Context, checkpoint_path: &Path, env_name: &str, episodes: usize) -> CmdResult {
    if episodes == 0 {
        return Err(Failure::Usage("--episodes must be at least 1".into()));
    }
    let params = checkpoint::load(checkpoint_path)
        .map_err(|e| Failure::Usage(format!("cannot load checkpoint {}: {e}", checkpoint_path.display())))?;
    let mut env = make_env(env_name, ctx.seed.unwrap_or(0))?;
    let spec = env.spec();
    let layout = params.layout();
    if layout.input_dim != spec.observation_dim || layout.output_dim != spec.action_count_or_dim {
        return Err(Failure::Usage(format!(
            "checkpoint maps {} inputs to {} outputs; {} has {} observations and {} actions",
            layout.input_dim, layout.output_dim, spec.name, spec.observation_dim, spec.action_count_or_dim
        )));
    }
    TrainConfig::default().resolve_head(spec).and_then(|natural| {
        if natural == params.head() {
            Ok(())
        } else {
            Err(Error::Config(format!("checkpoint head {} does not fit {}", params.head().as_str(), spec.name)))
        }
    })?;
    let rewards = evaluate(&params, env.as_mut(), episodes)?;
    let mean = rewards.iter().sum::<f64>() / rewards.len() as f64;
    let min = rewards.iter().copied().fold(f64::INFINITY, f64::min);
    let max = rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("episodes={episodes}");
    println!("mean={mean}");
    println!("min={min}");
    println!("max={max}");
    Ok(())
}

pub fn verify(
    ctx: &Context,
    mdp_path: &Path,
    policy_src: &str,
    rollouts: usize,
    filter_top: Option<f64>,
    tol: f64,
) -> CmdResult {
    if rollouts == 0 {
        return Err(Failure::Usage("--rollouts must be at least 1".into()));
    }
    let text = fs::read_to_string(mdp_path)
        .map_err(|e| Failure::Usage(format!("cannot read MDP file {}: {e}", mdp_path.display())))?;
    let mdp = TabularMdp::parse(&text)?;
    let policy = if policy_src == "uniform" {
        TabularPolicy::uniform(mdp.n_states(), mdp.n_actions())
    } else {
        let text = fs::read_to_string(policy_src)
            .map_err(|e| Failure::Usage(format!("cannot read policy file {policy_src}: {e}")))?;
        TabularPolicy::parse(&text, mdp.n_states(), mdp.n_actions())?
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed.unwrap_or(0));
    let trajs: Vec<_> = (0..rollouts).map(|_| sample_trajectory(&mdp, &policy, &mut rng)).collect();
    let kept = match filter_top {
        Some(f) => ranking_filter(&trajs, &mdp, f)?,
        None => trajs,
    };
    let set = TrajectorySet::for_mdp(kept, &mdp)?;
    println!("rollouts={rollouts}");
    println!("buffer_trajectories={}", set.len());
    let report = match verify_theorem_1(&set, &policy, &mdp, tol) {
        Ok(r) => r,
        Err(Error::Precondition { max_deviation }) => {
            println!("uniformly_distributed=false");
            println!("max_deviation={max_deviation}");
            return Err(Failure::Verification(format!(
                "trajectories are not uniformly distributed (max deviation {max_deviation})"
            )));
        }
        Err(e) => return Err(e.into()),
    };
    println!("{report}");
    println!("induction_identity_error={:e}", induction_identity_error(&set, &mdp));
    if report.holds {
        Ok(())
    } else {
        Err(Failure::Verification("theorem check failed".into()))
    }
}
