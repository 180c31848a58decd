//! Episodic tabular Q-learning on the on-the-fly product, greedy policy
//! extraction and policy execution.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{Read, Write};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::automaton::{Frontier, Ldba};
use crate::error::{Error, Result};
use crate::plmdp::Plmdp;
use crate::product::{reward_and_update, Product, ProductAction, ProductState, RewardConfig};
use crate::rng::Streams;

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub gamma: f64,
    pub reward: f64,
    /// Episode horizon in steps.
    pub tau: usize,
    pub max_episodes: usize,
    /// Convergence window in episodes.
    pub window: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub reset_frontier_per_episode: bool,
    /// Exploration rate is `max(1/episode, epsilon_floor)`.
    pub epsilon_floor: f64,
    pub preread_initial_label: bool,
    pub curve_stride: usize,
}

impl Default for LearnConfig {
    fn default() -> Self {
        LearnConfig {
            gamma: 0.99,
            reward: 1.0,
            tau: 100,
            max_episodes: 100_000,
            window: 1000,
            tolerance: 1e-3,
            seed: 0,
            reset_frontier_per_episode: true,
            epsilon_floor: 0.01,
            preread_initial_label: false,
            curve_stride: 100,
        }
    }
}

impl LearnConfig {
    pub fn validate(&self) -> Result<()> {
        RewardConfig::new(self.reward, self.gamma)?;
        let bad = |m: &str| Err(Error::InvalidArgument(m.to_string()));
        if self.tau < 1 {
            return bad("tau must be at least 1");
        }
        if self.window < 1 {
            return bad("convergence window must be at least 1");
        }
        if !(self.tolerance > 0.0) {
            return bad("convergence tolerance must be positive");
        }
        if !(0.0..=1.0).contains(&self.epsilon_floor) {
            return bad("epsilon floor must lie in [0,1]");
        }
        if self.curve_stride < 1 {
            return bad("curve stride must be at least 1");
        }
        Ok(())
    }

    pub fn epsilon(&self, episode: usize) -> f64 {
        (1.0 / episode as f64).max(self.epsilon_floor)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QEntry {
    pub actions: Vec<ProductAction>,
    pub q: Vec<f64>,
    pub visits: Vec<u64>,
}

impl QEntry {
    fn new(actions: Vec<ProductAction>) -> QEntry {
        let n = actions.len();
        QEntry {
            actions,
            q: vec![0.0; n],
            visits: vec![0; n],
        }
    }

    pub fn max(&self) -> f64 {
        self.q.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Index of the largest value; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.q.iter().enumerate() {
            if v > self.q[best] {
                best = i;
            }
        }
        best
    }
}

/// Action values and visit counts, created lazily per product state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    entries: HashMap<ProductState, QEntry>,
}

impl QTable {
    pub fn new() -> QTable {
        QTable::default()
    }

    pub fn get(&self, s: &ProductState) -> Option<&QEntry> {
        self.entries.get(s)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ProductState, &QEntry)> {
        self.entries.iter()
    }

    /// `Q(s, a)`, zero when unseen.
    pub fn value(&self, s: &ProductState, a: usize) -> f64 {
        self.entries
            .get(s)
            .and_then(|e| e.q.get(a).copied())
            .unwrap_or(0.0)
    }

    pub fn visits(&self, s: &ProductState, a: usize) -> u64 {
        self.entries
            .get(s)
            .and_then(|e| e.visits.get(a).copied())
            .unwrap_or(0)
    }

    /// `max_a Q(s, a)`, zero when unseen.
    pub fn state_value(&self, s: &ProductState) -> f64 {
        self.entries.get(s).map(QEntry::max).unwrap_or(0.0)
    }

    fn entry(&mut self, p: &Product<'_>, s: &ProductState) -> &mut QEntry {
        self.entries
            .entry(*s)
            .or_insert_with(|| QEntry::new(p.enabled_actions(s)))
    }

    /// Applies `Q ← Q + (1/C)[R − Q + γ·max Q(s')]` and returns the change.
    pub fn update(
        &mut self,
        p: &Product<'_>,
        s: &ProductState,
        a: usize,
        reward: f64,
        gamma: f64,
        next: &ProductState,
    ) -> f64 {
        let bootstrap = self.state_value(next);
        let e = self.entry(p, s);
        e.visits[a] += 1;
        let alpha = 1.0 / e.visits[a] as f64;
        let delta = alpha * (reward - e.q[a] + gamma * bootstrap);
        e.q[a] += delta;
        delta
    }
}

/// Greedy action index at `s`; the first enabled action when unseen.
pub fn greedy_action(q: &QTable, s: &ProductState) -> usize {
    q.get(s).map(QEntry::argmax).unwrap_or(0)
}

/// `(episode, max_a Q(s0, a))` samples.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearningCurve {
    pub points: Vec<(usize, f64)>,
}

#[derive(Serialize, Deserialize)]
struct CurveRow {
    episode: usize,
    u_s0: f64,
}

impl LearningCurve {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        for &(episode, u_s0) in &self.points {
            out.serialize(CurveRow { episode, u_s0 })?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<LearningCurve> {
        let mut rd = csv::Reader::from_reader(r);
        let points = rd
            .deserialize::<CurveRow>()
            .map(|row| row.map(|r| (r.episode, r.u_s0)).map_err(Error::from))
            .collect::<Result<Vec<_>>>()?;
        Ok(LearningCurve { points })
    }

    /// Trailing moving average with the given window.
    pub fn smoothed(&self, window: usize) -> Vec<f64> {
        let w = window.max(1);
        let vals: Vec<f64> = self.points.iter().map(|p| p.1).collect();
        (0..vals.len())
            .map(|i| {
                let lo = (i + 1).saturating_sub(w);
                vals[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub qtable: QTable,
    pub curve: LearningCurve,
    pub episodes: usize,
    pub converged: bool,
    /// Revisits of an automaton state that saw a different frontier than
    /// the first visit within the same episode.
    pub frontier_violations: u64,
    /// Total learning steps over all episodes.
    pub steps: u64,
    /// Episodes that ended in a rejecting sink.
    pub sink_terminations: usize,
    /// Episodes that ran the full horizon.
    pub horizon_terminations: usize,
}

/// Tracks the frontier seen on arrival at each automaton state in a run.
#[derive(Debug, Clone, Default)]
pub struct FrontierMonitor {
    seen: HashMap<usize, Frontier>,
    pub violations: u64,
}

impl FrontierMonitor {
    pub fn reset(&mut self) {
        self.seen.clear();
    }

    pub fn observe(&mut self, q: usize, f: Frontier) {
        match self.seen.get(&q) {
            Some(&g) if g != f => {
                self.violations += 1;
                log::debug!("frontier at q={q} changed from {g} to {f}");
            }
            Some(_) => {}
            None => {
                self.seen.insert(q, f);
            }
        }
    }
}

/// Expected `max_a Q(s0, a)` over the initial label distribution.
pub fn initial_value(q: &QTable, p: &Product<'_>) -> f64 {
    p.initial_distribution()
        .iter()
        .map(|(s, pr)| pr * q.state_value(s))
        .sum()
}

pub fn run_learning(model: &Plmdp, ldba: &Ldba, cfg: &LearnConfig) -> Result<LearnOutcome> {
    cfg.validate()?;
    let p = Product::new(model, ldba)?.with_preread(cfg.preread_initial_label);
    let acc = ldba.acceptance();
    let sinks = ldba.detect_sinks();
    let mut is_sink = vec![false; ldba.num_states()];
    for &q in &sinks {
        is_sink[q] = true;
    }

    let mut rng = Streams::new(cfg.seed);
    let mut table = QTable::new();
    let mut curve = LearningCurve::default();
    let mut monitor = FrontierMonitor::default();
    let mut window: VecDeque<f64> = VecDeque::with_capacity(cfg.window.min(4096));
    let mut frontier = Frontier::full(acc);
    let mut converged = false;
    let mut rewarded = false;
    let mut episode = 0;
    let mut steps = 0u64;
    let (mut sink_ends, mut horizon_ends) = (0, 0);

    while episode < cfg.max_episodes {
        episode += 1;
        let eps = cfg.epsilon(episode);
        let mut s = p.initial_state(&mut rng.labels);
        if cfg.reset_frontier_per_episode {
            frontier = Frontier::full(acc);
        }
        monitor.reset();
        monitor.observe(s.q, frontier);

        let mut max_delta: f64 = 0.0;
        let mut t = 0;
        while !is_sink[s.q] && t < cfg.tau {
            let n = p.num_actions(&s);
            let a = if rng.learner.random::<f64>() < eps {
                rng.learner.random_range(0..n)
            } else {
                greedy_action(&table, &s)
            };
            let action = p.action(&s, a).expect("action index in range");
            let next = p.step(&s, action, &mut rng)?;
            let (reward, f_next) = reward_and_update(next.q, frontier, acc, cfg.reward);
            frontier = f_next;
            rewarded |= reward > 0.0;
            monitor.observe(next.q, frontier);
            let delta = table.update(&p, &s, a, reward, cfg.gamma, &next);
            max_delta = max_delta.max(delta.abs());
            s = next;
            t += 1;
        }
        steps += t as u64;
        if is_sink[s.q] {
            sink_ends += 1;
        } else if t == cfg.tau {
            horizon_ends += 1;
        }

        // A table that has never seen a reward is all zeros and trivially
        // stable; the window only starts once some reward has been paid.
        if rewarded {
            if window.len() == cfg.window {
                window.pop_front();
            }
            window.push_back(max_delta);
        }
        if episode % cfg.curve_stride == 0 {
            curve.points.push((episode, initial_value(&table, &p)));
        }
        if window.len() == cfg.window && window.iter().all(|&d| d < cfg.tolerance) {
            converged = true;
            break;
        }
    }
    if curve.points.last().map(|pt| pt.0) != Some(episode) {
        curve.points.push((episode, initial_value(&table, &p)));
    }
    if converged {
        log::info!("converged after {episode} episodes");
    } else {
        log::info!("stopped at the episode limit ({episode}) without converging");
    }
    Ok(LearnOutcome {
        qtable: table,
        curve,
        episodes: episode,
        converged,
        frontier_violations: monitor.violations,
        steps,
        sink_terminations: sink_ends,
        horizon_terminations: horizon_ends,
    })
}

/// Greedy memoryless policy on the product.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Policy {
    /// Name of the automaton the policy was learned against.
    pub automaton: String,
    /// Whether states absent from `map` fall back to their first action.
    pub fallback_first_action: bool,
    pub map: BTreeMap<ProductState, ProductAction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyEntryDoc {
    pub x: usize,
    pub label: Vec<String>,
    pub q: usize,
    pub action: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyDocument {
    pub automaton: String,
    pub fallback_first_action: bool,
    pub entries: Vec<PolicyEntryDoc>,
}

impl Policy {
    /// The action at `s`, using the fallback for unmapped states.
    pub fn choose(&self, p: &Product<'_>, s: &ProductState) -> Option<ProductAction> {
        match self.map.get(s) {
            Some(&a) => Some(a),
            None if self.fallback_first_action => p.action(s, 0),
            None => None,
        }
    }

    pub fn to_document(&self, p: &Product<'_>) -> PolicyDocument {
        let ap = p.model().alphabet();
        PolicyDocument {
            automaton: self.automaton.clone(),
            fallback_first_action: self.fallback_first_action,
            entries: self
                .map
                .iter()
                .map(|(s, &a)| PolicyEntryDoc {
                    x: s.x,
                    label: ap.names_of(s.label),
                    q: s.q,
                    action: p.action_name(s, a),
                })
                .collect(),
        }
    }

    pub fn from_document(doc: &PolicyDocument, p: &Product<'_>) -> Result<Policy> {
        let mut map = BTreeMap::new();
        for e in &doc.entries {
            if e.x >= p.model().num_states() || e.q >= p.ldba().num_states() {
                return Err(Error::InvalidArgument(format!(
                    "policy entry ({}, {:?}, {}) is outside the product",
                    e.x, e.label, e.q
                )));
            }
            let s = ProductState {
                x: e.x,
                label: p.model().alphabet().label(e.label.iter())?,
                q: e.q,
            };
            map.insert(s, p.parse_action(&s, &e.action)?);
        }
        Ok(Policy {
            automaton: doc.automaton.clone(),
            fallback_first_action: doc.fallback_first_action,
            map,
        })
    }

    pub fn to_json(&self, p: &Product<'_>) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document(p))?)
    }

    pub fn from_json(text: &str, p: &Product<'_>) -> Result<Policy> {
        Policy::from_document(&serde_json::from_str(text)?, p)
    }
}

/// Greedy policy over every visited state; unvisited states fall back to
/// their first enabled action.
pub fn extract_policy(q: &QTable) -> Policy {
    let map = q
        .entries
        .iter()
        .map(|(s, e)| (*s, e.actions[e.argmax()]))
        .collect();
    Policy {
        automaton: String::new(),
        fallback_first_action: true,
        map,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub x: usize,
    pub label: Vec<String>,
    pub q: usize,
    /// Action taken at this step; absent on the final state.
    pub action: Option<String>,
    pub reward: f64,
    /// Accepting sets still owed after arriving here, 1-based.
    pub frontier: Vec<usize>,
    pub fallback: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub steps: Vec<TraceStep>,
    pub fallback_steps: usize,
    pub total_reward: f64,
}

/// Drives the model with the policy for `horizon` steps.
pub fn execute_policy(
    policy: &Policy,
    model: &Plmdp,
    ldba: &Ldba,
    rng: &mut Streams,
    horizon: usize,
) -> Result<Trace> {
    let p = Product::new(model, ldba)?;
    let acc = ldba.acceptance();
    let ap = model.alphabet();
    let mut s = p.initial_state(&mut rng.labels);
    let mut frontier = Frontier::full(acc);
    let frontier_list = |f: Frontier| f.set_indices().map(|j| j + 1).collect::<Vec<_>>();
    let mut steps = Vec::with_capacity(horizon + 1);
    let mut reward = 0.0;
    let mut total = 0.0;
    let mut fallback_steps = 0;
    for t in 0..=horizon {
        let mut step = TraceStep {
            x: s.x,
            label: ap.names_of(s.label),
            q: s.q,
            action: None,
            reward,
            frontier: frontier_list(frontier),
            fallback: false,
        };
        if t == horizon {
            steps.push(step);
            break;
        }
        let fallback = !policy.map.contains_key(&s);
        let a = policy
            .choose(&p, &s)
            .ok_or_else(|| Error::PolicyGap(s.to_string()))?;
        if fallback {
            fallback_steps += 1;
            step.fallback = true;
        }
        step.action = Some(p.action_name(&s, a));
        steps.push(step);
        let next = p.step(&s, a, rng)?;
        let (r, f) = reward_and_update(next.q, frontier, acc, 1.0);
        frontier = f;
        reward = r;
        total += r;
        s = next;
    }
    if fallback_steps > 0 {
        log::warn!("policy fell back to the first action on {fallback_steps} steps");
    }
    Ok(Trace {
        steps,
        fallback_steps,
        total_reward: total,
    })
}
