use std::collections::HashMap;

use specsynth::envs::{
    make_counterexample, make_gridworld, make_pacman, random_plmdp, GridCase, GridSpec, PacmanSpec,
};
use specsynth::product::DEFAULT_STATE_CAP;
use specsynth::{
    assets, reward_and_update, Alphabet, Error, Frontier, LabelSet, Ldba, Plmdp, Product,
    ProductAction, ProductState, Streams,
};

fn shipped_pairs() -> Vec<(String, Plmdp, Ldba)> {
    let mut out = Vec::new();
    for name in ["grid3", "grid5", "grid10"] {
        let spec = GridSpec::shipped(name).unwrap();
        for case in [GridCase::I, GridCase::II] {
            out.push((
                format!("{name}/{case:?}"),
                make_gridworld(case, &spec).unwrap(),
                assets::automaton("phi1").unwrap(),
            ));
        }
    }
    out.push((
        "pacman5".into(),
        make_pacman(&PacmanSpec::shipped("pacman5").unwrap()).unwrap(),
        assets::automaton("phi2").unwrap(),
    ));
    for nu in [0.1, 0.9] {
        let (m, a) = make_counterexample(nu).unwrap();
        out.push((format!("cx/{nu}"), m, a));
    }
    for seed in 0..10 {
        let auto = if seed % 2 == 0 { "gfp" } else { "fgp" };
        out.push((
            format!("rand/{seed}"),
            random_plmdp(seed, 8, 3, 2).unwrap(),
            assets::automaton(auto).unwrap(),
        ));
    }
    out
}

#[test]
fn product_rows_are_normalized() {
    for (name, m, a) in shipped_pairs() {
        let ex = Product::new(&m, &a)
            .unwrap()
            .enumerate(DEFAULT_STATE_CAP)
            .unwrap();
        assert!(
            ex.max_row_error() <= 1e-9,
            "{name}: row error {}",
            ex.max_row_error()
        );
        let init: f64 = ex.initial.iter().map(|(_, p)| p).sum();
        assert!((init - 1.0).abs() <= 1e-9, "{name}");
        for (s, acts) in ex.actions.iter().enumerate() {
            assert!(!acts.is_empty(), "{name}: state {s} has no action");
        }
    }
}

#[test]
fn sampled_successors_match_exact_distribution() {
    let m = make_gridworld(GridCase::II, &GridSpec::shipped("grid5").unwrap()).unwrap();
    let a = assets::automaton("phi1").unwrap();
    let p = Product::new(&m, &a).unwrap();
    let mut rng = Streams::new(21);
    let ex = p.enumerate(DEFAULT_STATE_CAP).unwrap();
    let n = 20_000;
    for &si in [0usize, 7, 40, ex.len() - 1]
        .iter()
        .filter(|&&i| i < ex.len())
    {
        let s = ex.states[si];
        for act in p.enabled_actions(&s).into_iter().step_by(3) {
            let exact = p.successors(&s, act);
            let mut hist: HashMap<ProductState, usize> = HashMap::new();
            for _ in 0..n {
                *hist.entry(p.step(&s, act, &mut rng).unwrap()).or_default() += 1;
            }
            let mut tv = 0.0;
            for (t, pr) in &exact {
                tv += (hist.remove(t).unwrap_or(0) as f64 / n as f64 - pr).abs();
            }
            assert!(hist.is_empty(), "sampled a successor outside the support");
            tv /= 2.0;
            assert!(tv <= 0.02, "TV {tv} at {s} under {act:?}");
        }
    }
}

#[test]
fn counterexample_product_is_small() {
    for nu in [0.1, 0.5, 0.9] {
        let (m, a) = make_counterexample(nu).unwrap();
        let ex = Product::new(&m, &a)
            .unwrap()
            .enumerate(DEFAULT_STATE_CAP)
            .unwrap();
        assert!(ex.len() <= 12, "{} states", ex.len());
    }
}

#[test]
fn alphabet_mismatch() {
    let m = Plmdp::new(
        Alphabet::new(["a"]).unwrap(),
        0,
        vec![vec!["s".into()]],
        vec![vec![vec![(0, 1.0)]]],
        vec![vec![(LabelSet(1), 1.0)]],
    )
    .unwrap();
    let a = assets::automaton("gfp").unwrap();
    assert!(matches!(
        Product::new(&m, &a),
        Err(Error::AlphabetMismatch(_))
    ));
}

#[test]
fn labels_are_projected_onto_the_automaton_alphabet() {
    let (m, a) = make_counterexample(0.5).unwrap();
    let p = Product::new(&m, &a).unwrap();
    // Model alphabet is [p, u]; the automaton only sees p.
    assert_eq!(p.project(LabelSet(0b11)), LabelSet(1));
    assert_eq!(p.project(LabelSet(0b10)), LabelSet(0));
}

#[test]
fn phi1_reward_examples() {
    let a = assets::automaton("phi1").unwrap();
    let acc = a.acceptance();
    let full = Frontier::full(acc);
    assert_eq!(full.mask(), 0b11);
    let (r, f) = reward_and_update(3, full, acc, 1.0);
    assert_eq!((r, f.mask()), (1.0, 0b10));
    let (r, f2) = reward_and_update(3, f, acc, 1.0);
    assert_eq!((r, f2), (0.0, f));
    let (r, f3) = reward_and_update(4, f, acc, 1.0);
    assert_eq!((r, f3.mask()), (1.0, 0b01));
    let (r, f4) = reward_and_update(0, f3, acc, 1.0);
    assert_eq!((r, f4), (0.0, f3));
    let (r, _) = reward_and_update(3, f3, acc, 2.5);
    assert_eq!(r, 2.5);
    assert_eq!(f3.to_string(), "{F1}");
}

#[test]
fn epsilon_actions() {
    let (m, _) = make_counterexample(0.5).unwrap();
    let a = assets::automaton("fgp").unwrap();
    let p = Product::new(&m, &a).unwrap();
    let s = p.initial_distribution()[0].0;
    assert_eq!(s.q, 0);
    let acts = p.enabled_actions(&s);
    assert_eq!(
        acts,
        vec![
            ProductAction::Model(0),
            ProductAction::Model(1),
            ProductAction::Epsilon(1)
        ]
    );
    assert_eq!(p.action_name(&s, ProductAction::Epsilon(1)), "eps:1");
    assert_eq!(
        p.parse_action(&s, "eps:1").unwrap(),
        ProductAction::Epsilon(1)
    );
    assert_eq!(p.parse_action(&s, "left").unwrap(), ProductAction::Model(1));
    assert!(matches!(
        p.parse_action(&s, "eps:0"),
        Err(Error::ActionNotEnabled { .. })
    ));
    assert!(matches!(
        p.parse_action(&s, "jump"),
        Err(Error::ActionNotEnabled { .. })
    ));

    let mut rng = Streams::new(0);
    let t = p.step(&s, ProductAction::Epsilon(1), &mut rng).unwrap();
    assert_eq!(t, ProductState { q: 1, ..s });
    assert_eq!(p.successors(&s, ProductAction::Epsilon(1)), vec![(t, 1.0)]);
    assert!(p
        .enabled_actions(&t)
        .iter()
        .all(|a| matches!(a, ProductAction::Model(_))));
    assert!(matches!(
        p.step(&t, ProductAction::Epsilon(1), &mut rng),
        Err(Error::ActionNotEnabled { .. })
    ));
}

#[test]
fn initial_label_preread() {
    let (m, a) = make_counterexample(0.5).unwrap();
    let p = Product::new(&m, &a).unwrap();
    let mut rng = Streams::new(0);
    assert_eq!(p.initial_state(&mut rng.labels).q, a.initial());

    // A model whose initial state always emits p: reading it moves gfp to its accepting state.
    let m2 = Plmdp::new(
        Alphabet::new(["p"]).unwrap(),
        0,
        vec![vec!["s".into()]],
        vec![vec![vec![(0, 1.0)]]],
        vec![vec![(LabelSet(1), 1.0)]],
    )
    .unwrap();
    let p2 = Product::new(&m2, &a).unwrap().with_preread(true);
    assert_eq!(
        p2.initial_state(&mut rng.labels).q,
        a.step(a.initial(), LabelSet(1))
    );
    assert_ne!(p2.initial_state(&mut rng.labels).q, a.initial());
}

#[test]
fn state_cap_enforced() {
    let m = make_gridworld(GridCase::II, &GridSpec::shipped("grid5").unwrap()).unwrap();
    let a = assets::automaton("phi1").unwrap();
    let p = Product::new(&m, &a).unwrap();
    assert!(matches!(p.enumerate(10), Err(Error::StateCapExceeded(10))));
}
