use std::path::Path;
use std::process::{Command, Output};

use specsynth::envs::{make_gridworld, GridCase, GridSpec};
use specsynth::{assets, LearningCurve, Policy, Product, VerifyReport};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_specsynth"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn learn_into(dir: &Path, seed: &str) -> Output {
    run(&[
        "learn",
        "--env",
        "grid5",
        "--case",
        "I",
        "--automaton",
        "phi1",
        "--episodes",
        "400",
        "--tau",
        "100",
        "--epsilon-floor",
        "0.3",
        "--seed",
        seed,
        "--out",
        dir.to_str().unwrap(),
    ])
}

#[test]
fn learn_writes_reloadable_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = learn_into(tmp.path(), "4");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let curve = LearningCurve::read_csv(std::fs::File::open(tmp.path().join("curve.csv")).unwrap())
        .unwrap();
    assert_eq!(curve.points.last().unwrap().0, 400);

    let model = make_gridworld(GridCase::I, &GridSpec::shipped("grid5").unwrap()).unwrap();
    let ldba = assets::automaton("phi1").unwrap();
    let p = Product::new(&model, &ldba).unwrap();
    let text = std::fs::read_to_string(tmp.path().join("policy.json")).unwrap();
    let pol = Policy::from_json(&text, &p).unwrap();
    assert_eq!(pol.automaton, "phi1");
    assert!(!pol.map.is_empty());

    let policy = tmp.path().join("policy.json");
    let report = tmp.path().join("report.json");
    let o = run(&[
        "verify",
        "--env",
        "grid5",
        "--automaton",
        "phi1",
        "--policy",
        policy.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let r: VerifyReport = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r.max_prob, 1.0);
    assert!(r.policy_prob.is_some());

    let o = run(&[
        "simulate",
        "--env",
        "grid5",
        "--automaton",
        "phi1",
        "--policy",
        policy.to_str().unwrap(),
        "--horizon",
        "20",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let trace: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("trace.json")).unwrap())
            .unwrap();
    assert_eq!(trace["steps"].as_array().unwrap().len(), 21);
}

#[test]
fn same_seed_same_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert!(learn_into(a.path(), "9").status.success());
    assert!(learn_into(b.path(), "9").status.success());
    for f in ["curve.csv", "policy.json"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn seeds_get_their_own_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "learn",
        "--env",
        "counterexample",
        "--formula",
        "G F p",
        "--episodes",
        "100",
        "--seeds",
        "1,2",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    for s in ["seed-1", "seed-2"] {
        assert!(tmp.path().join(s).join("curve.csv").is_file());
    }
}

#[test]
fn counterexample_prefers_left() {
    let o = run(&["counterexample", "--nu", "0.9", "--gamma", "0.99"]);
    assert!(o.status.success());
    let out = stdout(&o);
    assert!(out.contains("U_right = 10.000000"), "{out}");
    assert!(out.lines().any(|l| l == "greedy = left"), "{out}");
}

#[test]
fn xcheck_agreement() {
    let o = run(&[
        "xcheck",
        "--formula",
        "G F p",
        "--automaton",
        "gfp",
        "--n",
        "1000",
        "--seed",
        "1",
    ]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "1000/1000 agree");
    let o = run(&[
        "xcheck",
        "--formula",
        "F G p",
        "--automaton",
        "gfp",
        "--n",
        "100",
        "--seed",
        "1",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["learn", "--bogus"]).status.code(), Some(2));
    assert_eq!(
        run(&["learn", "--env", "grid5", "--automaton", "nope"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&["learn", "--env", "grid5", "--formula", "G F p"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        run(&[
            "learn",
            "--env",
            "grid5",
            "--automaton",
            "phi1",
            "--gamma",
            "2"
        ])
        .status
        .code(),
        Some(2)
    );
    let tmp = tempfile::tempdir().unwrap();
    let o = run(&[
        "learn",
        "--env",
        "counterexample",
        "--automaton",
        "gfp",
        "--episodes",
        "20",
        "--strict-convergence",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    assert!(tmp.path().join("curve.csv").is_file());
}
