use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssrl_core::envs::{chain_mdp, make_env, TabularEnv};
use ssrl_core::mdp::{episodic_reward, ActionValue, Step, Trajectory};
use ssrl_core::oracle::TabularMdp;
use ssrl_core::replay::RankingBuffer;
use ssrl_core::trainer::{
    count_bonus, evaluate, shape, shaped_rollout, supervised_update, train, StateVisitCounts, TrainConfig, Trainer,
};

fn tabular_config(env: &str, total_steps: u64) -> TrainConfig {
    TrainConfig { env: env.into(), total_steps, batch_size: 32, wallclock: false, ..Default::default() }
}

/// Best first action from state 0 by finite-horizon value iteration.
fn value_iteration_first_action(mdp: &TabularMdp) -> usize {
    let ns = mdp.n_states();
    let q = |s: usize, a: usize, v: &[f64]| mdp.transition(s, a).iter().zip(v).map(|(p, x)| p * x).sum::<f64>();
    let mut v: Vec<f64> = mdp.rewards().to_vec();
    for _ in 1..mdp.horizon() {
        v = (0..ns)
            .map(|s| {
                let best = (0..mdp.n_actions()).map(|a| q(s, a, &v)).fold(f64::NEG_INFINITY, f64::max);
                mdp.rewards()[s] + mdp.gamma() * best
            })
            .collect();
    }
    (0..mdp.n_actions()).max_by(|&a, &b| q(0, a, &v).total_cmp(&q(0, b, &v)).then(b.cmp(&a))).unwrap()
}

#[test]
fn two_state_chain_learns_the_value_iteration_action() {
    let mdp = chain_mdp(2).unwrap();
    let optimal = value_iteration_first_action(&mdp);
    assert_eq!(optimal, 0);
    let (params, metrics) = train(tabular_config("chain:2", 5000)).unwrap();
    let out = params.forward(&[1.0, 0.0]).unwrap();
    let greedy = if out[0] >= out[1] { 0 } else { 1 };
    assert_eq!(greedy, optimal);
    assert_eq!(metrics.total_steps(), 5000);
    let mut env = make_env("chain:2", 0).unwrap();
    // horizon 2: start in s0, then two rewarded steps in s1
    assert_eq!(evaluate(&params, env.as_mut(), 3).unwrap(), vec![2.0; 3]);
}

fn tagged(states: &[usize]) -> Trajectory {
    Trajectory::new(
        states
            .iter()
            .map(|&s| Step {
                observation: vec![s as f64],
                state_id: Some(s),
                action: ActionValue::Discrete(0),
                reward: 0.0,
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn first_visits_to_three_states_add_three_bonuses() {
    let mut counts = StateVisitCounts::new();
    let shaped = shape(&tagged(&[4, 9, 2]), &mut counts, 0.001).unwrap();
    assert!((episodic_reward(&shaped) - 0.003).abs() < 1e-15);
    assert_eq!(counts.distinct(), 3);
    assert_eq!(counts.total(), 3);
}

#[test]
fn repeated_visits_follow_the_partial_sum() {
    let beta = 0.001;
    for k in 1..40usize {
        let mut counts = StateVisitCounts::new();
        let shaped = shape(&tagged(&vec![5; k]), &mut counts, beta).unwrap();
        let expected: f64 = (1..=k).map(|j| beta / (j as f64).sqrt()).sum();
        assert!((episodic_reward(&shaped) - expected).abs() < 1e-15, "k={k}");
        assert_eq!(counts.get(5), k as u64);
    }
    let mut counts = StateVisitCounts::new();
    assert_eq!(count_bonus(1, &mut counts, 0.001), 0.001);
    for _ in 0..2 {
        count_bonus(1, &mut counts, 0.001);
    }
    assert_eq!(count_bonus(1, &mut counts, 0.001), 0.0005);
    let raw = tagged(&[1, 2, 3]);
    assert_eq!(shape(&raw, &mut counts, 0.0).unwrap(), raw);
}

#[test]
fn shaped_rollout_needs_state_ids() {
    let mut env = make_env("pointreach", 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let result = shaped_rollout(
        &mut env,
        |_, _: &mut ChaCha8Rng| ActionValue::Continuous(vec![0.0, 0.0]),
        &mut StateVisitCounts::new(),
        0.001,
        10,
        &mut rng,
    );
    assert!(matches!(result, Err(ssrl_core::Error::Config(_))));
}

#[test]
fn metrics_never_include_the_bonus() {
    let silent = chain_mdp(4).unwrap().with_rewards(vec![0.0; 4]).unwrap();
    let env = Box::new(TabularEnv::new(silent, 0));
    let config = TrainConfig { exploration_beta: 1e6, ..tabular_config("silent", 3000) };
    let (_, metrics) = Trainer::with_env(config, env).unwrap().run(None).unwrap();
    assert!(!metrics.episodes.is_empty());
    for e in &metrics.episodes {
        assert_eq!(e.episode_reward, 0.0);
        assert_eq!(e.rolling100, 0.0);
        assert!(e.buffer_min.is_none_or(|v| v == 0.0));
        assert!(e.buffer_max.is_none_or(|v| v == 0.0));
    }
    assert!(metrics.iterations.iter().all(|i| i.buffer_min == 0.0 && i.buffer_max == 0.0));
}

#[test]
fn update_depends_only_on_buffer_and_state() {
    let config = TrainConfig { training_steps: 3, ..tabular_config("taxi", 2000) };
    let mut trainer = Trainer::new(config.clone()).unwrap();
    while trainer.steps() < 1000 {
        trainer.iterate().unwrap();
    }
    // rebuild the buffer from its retained pairs alone: no env, no metrics,
    // no history of evicted episodes
    let mut params = trainer.params().clone();
    let mut adam = trainer.adam().clone();
    let mut rng = trainer.learn_rng().clone();
    let buffer: RankingBuffer = trainer.buffer().clone();
    let mut losses = Vec::new();
    for _ in 0..config.training_steps {
        losses.push(
            supervised_update(&mut params, &mut adam, &buffer, config.batch_size, config.entropy_coef, &mut rng)
                .unwrap(),
        );
    }
    let mean = trainer.train_round().unwrap();
    assert_eq!(trainer.params(), &params);
    assert_eq!(trainer.adam(), &adam);
    assert_eq!(mean, losses.iter().sum::<f64>() / losses.len() as f64);
}

#[test]
fn same_seed_same_metrics() {
    let config = TrainConfig { seed: 3, ..tabular_config("taxi", 6000) };
    let a = train(config.clone()).unwrap().1.to_csv();
    let b = train(config.clone()).unwrap().1.to_csv();
    assert_eq!(a, b);
    let c = train(TrainConfig { seed: 4, ..config }).unwrap().1.to_csv();
    assert_ne!(a, c);
}

#[test]
fn env_steps_strictly_increase() {
    for env in ["taxi", "cartpole", "pointreach", "multiroom"] {
        let (_, metrics) = train(tabular_config(env, 3000)).unwrap();
        assert!(metrics.episodes.windows(2).all(|w| w[0].step < w[1].step), "{env}");
        assert_eq!(metrics.total_steps(), 3000, "{env}");
    }
}

#[test]
fn tracing_off_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let trainer = Trainer::new(tabular_config("taxi", 2000)).unwrap();
    trainer.run(Some(dir.path())).unwrap();
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
}

#[test]
fn traces_rank_best_above_worst() {
    let dir = tempfile::tempdir().unwrap();
    let config = TrainConfig { trace_every: 10, ..tabular_config("taxi", 3000) };
    let mut trainer = Trainer::new(config).unwrap();
    while !trainer.done() {
        trainer.iterate().unwrap();
    }
    let written = trainer.export_buffer_trace(dir.path()).unwrap();
    assert_eq!(written.len(), 2);
    let header = |p: &std::path::Path| -> f64 {
        let text = std::fs::read_to_string(p).unwrap();
        let first = text.lines().next().unwrap();
        let field = first.split_whitespace().find_map(|f| f.strip_prefix("episodic_reward=")).unwrap();
        field.parse().unwrap()
    };
    let (best, worst) = (header(&written[0]), header(&written[1]));
    assert!(best >= worst);
    assert_eq!(best, trainer.buffer().max_retained_reward().unwrap());
    assert_eq!(worst, trainer.buffer().min_retained_reward().unwrap());
}
