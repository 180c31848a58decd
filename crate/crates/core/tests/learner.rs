use specsynth::envs::{make_counterexample, make_gridworld, random_plmdp, GridCase, GridSpec};
use specsynth::learner::QEntry;
use specsynth::{
    assets, execute_policy, extract_policy, greedy_action, run_learning, Error, LearnConfig,
    LearningCurve, Policy, Product, ProductAction, QTable, Streams,
};

fn quick(seed: u64) -> LearnConfig {
    LearnConfig {
        max_episodes: 2000,
        tau: 50,
        seed,
        ..Default::default()
    }
}

#[test]
fn update_rule_by_hand() {
    let (m, a) = make_counterexample(0.0).unwrap();
    let p = Product::new(&m, &a).unwrap();
    let s0 = p.initial_distribution()[0].0;
    let s1 = p.successors(&s0, ProductAction::Model(0))[0].0;
    let mut q = QTable::new();

    assert_eq!(q.update(&p, &s1, 0, 1.0, 0.5, &s1), 1.0);
    assert_eq!(q.value(&s1, 0), 1.0);
    // Second visit: α = 1/2, target 1 + 0.5·1.
    let d = q.update(&p, &s1, 0, 1.0, 0.5, &s1);
    assert!((d - 0.25).abs() < 1e-15);
    assert!((q.value(&s1, 0) - 1.25).abs() < 1e-15);
    assert_eq!(q.visits(&s1, 0), 2);

    q.update(&p, &s0, 0, 0.0, 0.5, &s1);
    assert!((q.value(&s0, 0) - 0.625).abs() < 1e-15);
    assert_eq!(q.value(&s0, 1), 0.0);
    assert_eq!(greedy_action(&q, &s0), 0);
}

#[test]
fn ties_go_to_the_lowest_index() {
    let e = QEntry {
        actions: vec![ProductAction::Model(0); 4],
        q: vec![0.5, 1.0, 1.0, 0.2],
        visits: vec![0; 4],
    };
    assert_eq!(e.argmax(), 1);
    let z = QEntry {
        actions: vec![ProductAction::Model(0); 3],
        q: vec![0.0; 3],
        visits: vec![0; 3],
    };
    assert_eq!(z.argmax(), 0);
    let (m, a) = make_counterexample(0.5).unwrap();
    let p = Product::new(&m, &a).unwrap();
    assert_eq!(
        greedy_action(&QTable::new(), &p.initial_distribution()[0].0),
        0
    );
}

#[test]
fn exploration_schedule() {
    let cfg = LearnConfig {
        epsilon_floor: 0.05,
        ..Default::default()
    };
    assert_eq!(cfg.epsilon(1), 1.0);
    assert_eq!(cfg.epsilon(10), 0.1);
    assert_eq!(cfg.epsilon(1000), 0.05);
}

#[test]
fn invalid_configs() {
    let (m, a) = make_counterexample(0.5).unwrap();
    for cfg in [
        LearnConfig {
            gamma: 1.5,
            ..Default::default()
        },
        LearnConfig {
            reward: 0.0,
            ..Default::default()
        },
        LearnConfig {
            tau: 0,
            ..Default::default()
        },
        LearnConfig {
            epsilon_floor: -0.1,
            ..Default::default()
        },
        LearnConfig {
            window: 0,
            ..Default::default()
        },
    ] {
        assert!(
            matches!(run_learning(&m, &a, &cfg), Err(Error::InvalidArgument(_))),
            "{cfg:?}"
        );
    }
}

#[test]
fn values_bounded_and_visits_count_steps() {
    for seed in 0..8 {
        let m = random_plmdp(seed, 6, 3, 2).unwrap();
        let a = assets::automaton(if seed % 2 == 0 { "gfp" } else { "fgp" }).unwrap();
        let cfg = quick(seed);
        let out = run_learning(&m, &a, &cfg).unwrap();
        let bound = cfg.reward / (1.0 - cfg.gamma) + 1e-9;
        let mut visits = 0;
        for (_, e) in out.qtable.iter() {
            assert!(e.q.iter().all(|&v| (0.0..=bound).contains(&v)));
            visits += e.visits.iter().sum::<u64>();
        }
        assert_eq!(visits, out.steps);
        assert_eq!(
            out.sink_terminations + out.horizon_terminations,
            out.episodes
        );
        assert!(out.steps <= (out.episodes * cfg.tau) as u64);
    }
}

#[test]
fn sink_terminates_episodes() {
    // Walking off in grid5 eventually hits the user before target2 or an obstacle.
    let m = make_gridworld(GridCase::II, &GridSpec::shipped("grid5").unwrap()).unwrap();
    let a = assets::automaton("phi1").unwrap();
    let out = run_learning(
        &m,
        &a,
        &LearnConfig {
            max_episodes: 500,
            tau: 400,
            ..quick(2)
        },
    )
    .unwrap();
    assert!(out.sink_terminations > 0);
    assert_eq!(
        out.sink_terminations + out.horizon_terminations,
        out.episodes
    );
}

#[test]
fn seeded_runs_are_reproducible() {
    let (m, a) = make_counterexample(0.9).unwrap();
    let r1 = run_learning(&m, &a, &quick(17)).unwrap();
    let r2 = run_learning(&m, &a, &quick(17)).unwrap();
    assert_eq!(r1.qtable, r2.qtable);
    assert_eq!(r1.curve, r2.curve);
    assert_eq!(r1.steps, r2.steps);
    let r3 = run_learning(&m, &a, &quick(18)).unwrap();
    assert_ne!(r1.qtable, r3.qtable);
}

#[test]
fn curve_starts_and_ends_on_record() {
    let (m, a) = make_counterexample(0.9).unwrap();
    let cfg = LearnConfig {
        max_episodes: 1050,
        curve_stride: 100,
        window: usize::MAX,
        tolerance: 1e-12,
        ..quick(3)
    };
    let out = run_learning(&m, &a, &cfg).unwrap();
    assert_eq!(out.episodes, 1050);
    assert_eq!(out.curve.points.len(), 11);
    assert_eq!(out.curve.points.last().unwrap().0, 1050);
    assert!(out.curve.points.windows(2).all(|w| w[0].0 < w[1].0));
}

#[test]
fn converges_on_a_deterministic_loop() {
    let (m, a) = make_counterexample(0.0).unwrap();
    let cfg = LearnConfig {
        gamma: 0.5,
        window: 50,
        tolerance: 1e-6,
        max_episodes: 100_000,
        ..quick(1)
    };
    let out = run_learning(&m, &a, &cfg).unwrap();
    assert!(out.converged);
    assert!(out.episodes < cfg.max_episodes);
}

#[test]
fn curve_csv_roundtrip() {
    let curve = LearningCurve {
        points: vec![(100, 0.0), (200, 0.5), (300, 1.25)],
    };
    let mut buf = Vec::new();
    curve.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("episode,u_s0\n"));
    assert_eq!(LearningCurve::read_csv(&buf[..]).unwrap(), curve);
    assert_eq!(curve.smoothed(2), vec![0.0, 0.25, 0.875]);
}

#[test]
fn policy_json_roundtrip() {
    let (m, _) = make_counterexample(0.5).unwrap();
    let a = assets::automaton("fgp").unwrap();
    let out = run_learning(&m, &a, &quick(4)).unwrap();
    let p = Product::new(&m, &a).unwrap();
    let mut pol = extract_policy(&out.qtable);
    pol.automaton = "fgp".into();
    let back = Policy::from_json(&pol.to_json(&p).unwrap(), &p).unwrap();
    assert_eq!(back, pol);
    assert_eq!(pol.map.len(), out.qtable.len());
}

#[test]
fn executing_a_policy() {
    let (m, a) = make_counterexample(0.0).unwrap();
    let out = run_learning(
        &m,
        &a,
        &LearnConfig {
            gamma: 0.5,
            ..quick(5)
        },
    )
    .unwrap();
    let pol = extract_policy(&out.qtable);
    let trace = execute_policy(&pol, &m, &a, &mut Streams::new(5), 10).unwrap();
    assert_eq!(trace.steps.len(), 11);
    assert_eq!(trace.steps[0].action.as_deref(), Some("right"));
    assert!(trace.steps.last().unwrap().action.is_none());
    // Every step after the first lands on p under ν = 0.
    assert_eq!(trace.total_reward, 10.0);
    assert!(trace.steps[1..]
        .iter()
        .all(|s| s.reward == 1.0 && s.frontier == vec![1]));
    assert_eq!(trace.fallback_steps, 0);

    let strict = Policy {
        fallback_first_action: false,
        ..Policy::default()
    };
    assert!(matches!(
        execute_policy(&strict, &m, &a, &mut Streams::new(5), 3),
        Err(Error::PolicyGap(_))
    ));
    let lenient = Policy {
        fallback_first_action: true,
        ..Policy::default()
    };
    let t = execute_policy(&lenient, &m, &a, &mut Streams::new(5), 3).unwrap();
    assert_eq!(t.fallback_steps, 3);
}
