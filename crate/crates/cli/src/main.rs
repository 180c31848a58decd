use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use specsynth::envs::{
    make_counterexample, make_gridworld, make_pacman, GridCase, GridSpec, PacmanSpec,
};
use specsynth::{
    assets, counterexample_returns, counterexample_threshold, execute_policy, extract_policy,
    holds_on_lasso, load_ldba, load_plmdp, parse_ltl, run_learning, verify, Error, LabelSet, Lasso,
    Ldba, LearnConfig, LearnOutcome, Plmdp, Policy, Product, Streams,
};

/// Q-learning synthesis and exact verification for LTL objectives on
/// probabilistically-labeled MDPs
#[derive(Parser)]
#[command(name = "specsynth", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Learn a policy; writes curve.csv and policy.json
    Learn(LearnArgs),
    /// Enumerate the product and report exact satisfaction probabilities
    Verify(VerifyArgs),
    /// Run a stored policy and write the trace
    Simulate(SimulateArgs),
    /// Cross-check an automaton against a formula on random lassos
    Xcheck(XcheckArgs),
    /// Closed-form and learned returns of the two-branch counterexample
    Counterexample(CounterexampleArgs),
}

#[derive(Args)]
struct Source {
    /// Shipped environment: grid3, grid5, grid10, pacman5, counterexample
    #[arg(long, conflicts_with = "model")]
    env: Option<String>,
    /// Environment spec file overriding the shipped layout
    #[arg(long, requires = "env")]
    spec: Option<PathBuf>,
    /// Gridworld case, I (deterministic) or II (noisy)
    #[arg(long, default_value = "I")]
    case: GridCase,
    /// ν for the counterexample environment
    #[arg(long, default_value_t = 0.9)]
    nu: f64,
    /// Model file
    #[arg(long)]
    model: Option<PathBuf>,
    /// Automaton file or shipped name (gfp, fgp, phi1, phi2)
    #[arg(long, conflicts_with = "formula")]
    automaton: Option<String>,
    /// Formula with a shipped automaton
    #[arg(long)]
    formula: Option<String>,
}

#[derive(Args)]
struct LearnArgs {
    #[command(flatten)]
    src: Source,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    reward: f64,
    #[arg(long, default_value_t = 100)]
    tau: usize,
    #[arg(long, default_value_t = 100_000)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Comma-separated seeds, run concurrently with per-seed outputs
    #[arg(long, value_delimiter = ',', conflicts_with = "seed")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 0.01)]
    epsilon_floor: f64,
    /// Convergence window in episodes
    #[arg(long, default_value_t = 1000)]
    window: usize,
    #[arg(long, default_value_t = 1e-3)]
    tolerance: f64,
    /// Curve recording stride in episodes
    #[arg(long, default_value_t = 100)]
    stride: usize,
    /// Keep the frontier across episodes
    #[arg(long)]
    keep_frontier: bool,
    #[arg(long)]
    preread_initial_label: bool,
    /// Exit with status 3 when the episode limit is reached first
    #[arg(long)]
    strict_convergence: bool,
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    src: Source,
    /// Policy file from `learn`
    #[arg(long)]
    policy: Option<PathBuf>,
    #[arg(long, default_value_t = specsynth::product::DEFAULT_STATE_CAP)]
    state_cap: usize,
    /// Report file, or a directory to hold report.json
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    src: Source,
    #[arg(long)]
    policy: PathBuf,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace file, or a directory to hold trace.json
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct XcheckArgs {
    #[arg(long)]
    formula: String,
    #[arg(long)]
    automaton: String,
    /// Number of lassos
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Longest prefix and period
    #[arg(long, default_value_t = 6)]
    max_len: usize,
}

#[derive(Args)]
struct CounterexampleArgs {
    #[arg(long, default_value_t = 0.9)]
    nu: f64,
    #[arg(long, default_value_t = 0.99)]
    gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    reward: f64,
    /// Reward periods for the finite-horizon returns
    #[arg(long)]
    n: Option<u64>,
    #[arg(long, default_value_t = 100)]
    tau: usize,
    #[arg(long, default_value_t = 20_000)]
    episodes: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Debug)]
enum Failure {
    Spec(Error),
    Usage(String),
    Io(String),
    NotConverged(Vec<u64>),
    Disagree(usize, usize),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(e) => Failure::Io(e.to_string()),
            e => Failure::Spec(e),
        }
    }
}

fn io_err(path: &Path, e: std::io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| io_err(path, e))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// `out` itself when it names a file, else `out/default`.
fn output_path(out: &Path, default: &str) -> PathBuf {
    if out.is_dir() || out.as_os_str().to_string_lossy().ends_with('/') || out.extension().is_none()
    {
        out.join(default)
    } else {
        out.to_path_buf()
    }
}

fn load_automaton(name: &str) -> Result<(String, Ldba), Failure> {
    let path = Path::new(name);
    if path.is_file() {
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        return Ok((stem, load_ldba(&read(path)?)?));
    }
    let stem = name.strip_suffix(".ldba").unwrap_or(name);
    match assets::automaton(stem) {
        Ok(a) => Ok((stem.to_string(), a)),
        Err(_) => Err(Failure::Usage(format!(
            "no automaton file or shipped automaton named `{name}`"
        ))),
    }
}

fn automaton_for_formula(text: &str) -> Result<(String, Ldba), Failure> {
    let f = parse_ltl(text)?;
    for (name, formula, _) in assets::AUTOMATA {
        if parse_ltl(formula)? == f {
            return Ok((name.to_string(), assets::automaton(name)?));
        }
    }
    Err(Failure::Usage(format!(
        "no shipped automaton for `{text}`; pass --automaton"
    )))
}

fn resolve(src: &Source) -> Result<(Plmdp, String, Ldba), Failure> {
    let (name, ldba) = match (&src.automaton, &src.formula) {
        (Some(a), _) => load_automaton(a)?,
        (None, Some(f)) => automaton_for_formula(f)?,
        (None, None) => {
            return Err(Failure::Usage(
                "one of --automaton or --formula is required".into(),
            ))
        }
    };
    let model = match (&src.env, &src.model) {
        (Some(env), None) => {
            let spec_text = src.spec.as_deref().map(read).transpose()?;
            if env.starts_with("grid") {
                let spec = match spec_text {
                    Some(t) => GridSpec::from_json(&t)?,
                    None => GridSpec::shipped(env)?,
                };
                make_gridworld(src.case, &spec)?
            } else if env.starts_with("pacman") {
                let spec = match spec_text {
                    Some(t) => PacmanSpec::from_json(&t)?,
                    None => PacmanSpec::shipped(env)?,
                };
                make_pacman(&spec)?
            } else if env == "counterexample" {
                make_counterexample(src.nu)?.0
            } else {
                return Err(Failure::Usage(format!("unknown environment `{env}`")));
            }
        }
        (None, Some(path)) => load_plmdp(&read(path)?)?,
        _ => {
            return Err(Failure::Usage(
                "exactly one of --env or --model is required".into(),
            ))
        }
    };
    Ok((model, name, ldba))
}

fn learn(args: &LearnArgs) -> Result<(), Failure> {
    let (model, name, ldba) = resolve(&args.src)?;
    let base = LearnConfig {
        gamma: args.gamma,
        reward: args.reward,
        tau: args.tau,
        max_episodes: args.episodes,
        window: args.window,
        tolerance: args.tolerance,
        seed: args.seed,
        reset_frontier_per_episode: !args.keep_frontier,
        epsilon_floor: args.epsilon_floor,
        preread_initial_label: args.preread_initial_label,
        curve_stride: args.stride,
    };
    base.validate()?;
    Product::new(&model, &ldba)?;
    let seeds = if args.seeds.is_empty() {
        vec![args.seed]
    } else {
        args.seeds.clone()
    };
    let results: Vec<(u64, specsynth::Result<LearnOutcome>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .iter()
            .map(|&seed| {
                let cfg = LearnConfig {
                    seed,
                    ..base.clone()
                };
                let (model, ldba) = (&model, &ldba);
                (seed, scope.spawn(move || run_learning(model, ldba, &cfg)))
            })
            .collect();
        handles
            .into_iter()
            .map(|(s, h)| (s, h.join().expect("learning thread panicked")))
            .collect()
    });
    let product = Product::new(&model, &ldba)?.with_preread(args.preread_initial_label);
    let mut unconverged = Vec::new();
    for (seed, res) in results {
        let out = res?;
        let dir = if args.seeds.is_empty() {
            args.out.clone()
        } else {
            args.out.join(format!("seed-{seed}"))
        };
        let mut csv = Vec::new();
        out.curve.write_csv(&mut csv)?;
        write(
            &dir.join("curve.csv"),
            &String::from_utf8(csv).expect("csv is utf-8"),
        )?;
        let mut policy = extract_policy(&out.qtable);
        policy.automaton = name.clone();
        write(&dir.join("policy.json"), &policy.to_json(&product)?)?;
        let last = out.curve.points.last().map(|p| p.1).unwrap_or(0.0);
        println!(
            "seed {seed}: {} episodes, {}, U(s0) = {last:.6}, {} product states visited -> {}",
            out.episodes,
            if out.converged {
                "converged"
            } else {
                "episode limit"
            },
            out.qtable.len(),
            dir.display()
        );
        if !out.converged {
            unconverged.push(seed);
        }
    }
    if args.strict_convergence && !unconverged.is_empty() {
        return Err(Failure::NotConverged(unconverged));
    }
    Ok(())
}

fn load_policy(path: &Path, product: &Product<'_>) -> Result<Policy, Failure> {
    Ok(Policy::from_json(&read(path)?, product)?)
}

fn verify_cmd(args: &VerifyArgs) -> Result<(), Failure> {
    let (model, _, ldba) = resolve(&args.src)?;
    let product = Product::new(&model, &ldba)?;
    let ex = product.enumerate(args.state_cap)?;
    let policy = args
        .policy
        .as_deref()
        .map(|p| load_policy(p, &product))
        .transpose()?;
    let report = verify(&ex, &product, policy.as_ref())?;
    let text = serde_json::to_string_pretty(&report).map_err(Error::from)?;
    match &args.out {
        Some(out) => write(&output_path(out, "report.json"), &text)?,
        None => println!("{text}"),
    }
    if args.out.is_some() {
        println!(
            "{} product states, {} AMEC(s), max probability {:.6}{}",
            report.product_states,
            report.amec_count,
            report.max_prob,
            report
                .policy_prob
                .map(|p| format!(", policy probability {p:.6}"))
                .unwrap_or_default()
        );
    }
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let (model, _, ldba) = resolve(&args.src)?;
    let product = Product::new(&model, &ldba)?;
    let policy = load_policy(&args.policy, &product)?;
    let trace = execute_policy(
        &policy,
        &model,
        &ldba,
        &mut Streams::new(args.seed),
        args.horizon,
    )?;
    let text = serde_json::to_string_pretty(&trace).map_err(Error::from)?;
    match &args.out {
        Some(out) => {
            write(&output_path(out, "trace.json"), &text)?;
            println!(
                "{} steps, total reward {}, {} fallback step(s)",
                trace.steps.len() - 1,
                trace.total_reward,
                trace.fallback_steps
            );
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn xcheck(args: &XcheckArgs) -> Result<(), Failure> {
    use rand::Rng;
    let (_, ldba) = load_automaton(&args.automaton)?;
    let f = parse_ltl(&args.formula)?;
    let ap = ldba.alphabet();
    if args.max_len == 0 {
        return Err(Failure::Usage("--max-len must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut agree = 0;
    for i in 0..args.n {
        let pre_len = rng.random_range(0..=args.max_len);
        let per_len = rng.random_range(1..=args.max_len);
        let prefix = (0..pre_len)
            .map(|_| LabelSet(rng.random_range(0..1u64 << ap.len())))
            .collect();
        let period = (0..per_len)
            .map(|_| LabelSet(rng.random_range(0..1u64 << ap.len())))
            .collect();
        let w = Lasso::new(ap.clone(), prefix, period)?;
        let want = holds_on_lasso(&f, &w)?;
        let got = ldba.accepts_lasso(&w)?;
        if want == got {
            agree += 1;
        } else {
            log::debug!("lasso {i} disagrees: formula {want}, automaton {got}");
        }
    }
    println!("{agree}/{} agree", args.n);
    if agree == args.n {
        Ok(())
    } else {
        Err(Failure::Disagree(agree, args.n))
    }
}

fn counterexample(args: &CounterexampleArgs) -> Result<(), Failure> {
    let (u_right, u_left) = counterexample_returns(args.gamma, args.nu, args.reward, args.n)?;
    println!("U_right = {u_right:.6}");
    println!("U_left  = {u_left:.6}");
    println!("gamma*  = {:.9}", counterexample_threshold(args.nu));
    let (model, ldba) = make_counterexample(args.nu)?;
    let cfg = LearnConfig {
        gamma: args.gamma,
        reward: args.reward,
        tau: args.tau,
        max_episodes: args.episodes,
        seed: args.seed,
        ..Default::default()
    };
    let out = run_learning(&model, &ldba, &cfg)?;
    let product = Product::new(&model, &ldba)?;
    let s0 = product.initial_distribution()[0].0;
    let Some(e) = out.qtable.get(&s0) else {
        return Err(Failure::Usage("the initial state was never visited".into()));
    };
    for (a, q) in e.actions.iter().zip(&e.q) {
        println!("Q(s0, {}) = {q:.6}", product.action_name(&s0, *a));
    }
    println!(
        "greedy = {}",
        product.action_name(&s0, e.actions[e.argmax()])
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPECSYNTH_LOG", "warn")).init();
    let cli = Cli::parse();
    let res = match &cli.cmd {
        Cmd::Learn(a) => learn(a),
        Cmd::Verify(a) => verify_cmd(a),
        Cmd::Simulate(a) => simulate(a),
        Cmd::Xcheck(a) => xcheck(a),
        Cmd::Counterexample(a) => counterexample(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Spec(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::NotConverged(seeds)) => {
            eprintln!("error: no convergence within the episode limit for seed(s) {seeds:?}");
            ExitCode::from(3)
        }
        Err(Failure::Disagree(a, n)) => {
            eprintln!(
                "error: automaton and formula disagree on {} of {n} lassos",
                n - a
            );
            ExitCode::from(1)
        }
    }
}
