//! Product of a PL-MDP with an LDBA, stepped on the fly or enumerated.
//!
//! Product states are `(x, ℓ, q)` with `ℓ` the label observed at `x`.
//! Actions are the model actions at `x` followed by one ε-action per
//! ε-successor of `q`.

use std::collections::HashMap;
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::LabelSet;
use crate::automaton::{accepting_frontier, Acceptance, Frontier, Ldba};
use crate::error::{Error, Result};
use crate::plmdp::Plmdp;
use crate::rng::Streams;

/// Default limit on explicitly enumerated product states.
pub const DEFAULT_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ProductState {
    pub x: usize,
    /// Label observed at `x`, over the model alphabet.
    pub label: LabelSet,
    pub q: usize,
}

impl fmt::Display for ProductState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(x={}, ℓ={:#x}, q={})", self.x, self.label.0, self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProductAction {
    /// Index into the model actions at `x`.
    Model(usize),
    /// ε-jump to the given automaton state.
    Epsilon(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub r: f64,
    pub gamma: f64,
}

impl RewardConfig {
    pub fn new(r: f64, gamma: f64) -> Result<RewardConfig> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "reward must be positive, got {r}"
            )));
        }
        if !(0.0..=1.0).contains(&gamma) {
            return Err(Error::InvalidArgument(format!(
                "discount must lie in [0,1], got {gamma}"
            )));
        }
        Ok(RewardConfig { r, gamma })
    }
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            r: 1.0,
            gamma: 0.99,
        }
    }
}

/// Reward for arriving at `q_next` and the frontier after the move. The
/// reward is judged against the frontier before the update, and the
/// frontier only moves when a reward is paid.
pub fn reward_and_update(
    q_next: usize,
    frontier: Frontier,
    acc: &Acceptance,
    r: f64,
) -> (f64, Frontier) {
    if frontier.covers(q_next, acc) {
        (r, accepting_frontier(q_next, frontier, acc))
    } else {
        (0.0, frontier)
    }
}

/// Binds a model to an automaton whose propositions the model declares.
#[derive(Debug, Clone, Copy)]
pub struct Product<'a> {
    model: &'a Plmdp,
    ldba: &'a Ldba,
    preread: bool,
}

impl<'a> Product<'a> {
    pub fn new(model: &'a Plmdp, ldba: &'a Ldba) -> Result<Product<'a>> {
        for name in ldba.alphabet().names() {
            if !model.alphabet().contains(name) {
                return Err(Error::AlphabetMismatch(name.clone()));
            }
        }
        Ok(Product {
            model,
            ldba,
            preread: false,
        })
    }

    /// When set, the initial automaton state consumes the initial label.
    pub fn with_preread(mut self, preread: bool) -> Self {
        self.preread = preread;
        self
    }

    pub fn model(&self) -> &'a Plmdp {
        self.model
    }

    pub fn ldba(&self) -> &'a Ldba {
        self.ldba
    }

    pub fn preread(&self) -> bool {
        self.preread
    }

    /// The automaton's view of a model label.
    pub fn project(&self, label: LabelSet) -> LabelSet {
        self.model.alphabet().project(label, self.ldba.alphabet())
    }

    fn q_initial(&self, label: LabelSet) -> usize {
        let q0 = self.ldba.initial();
        if self.preread {
            self.ldba.step(q0, self.project(label))
        } else {
            q0
        }
    }

    pub fn initial_state<R: Rng + ?Sized>(&self, labels: &mut R) -> ProductState {
        let x = self.model.initial();
        let label = self.model.sample_label(x, labels);
        ProductState {
            x,
            label,
            q: self.q_initial(label),
        }
    }

    /// Initial product states with their probabilities.
    pub fn initial_distribution(&self) -> Vec<(ProductState, f64)> {
        let x = self.model.initial();
        self.model
            .label_dist(x)
            .iter()
            .filter(|(_, p)| *p > 0.0)
            .map(|&(label, p)| {
                (
                    ProductState {
                        x,
                        label,
                        q: self.q_initial(label),
                    },
                    p,
                )
            })
            .collect()
    }

    pub fn num_actions(&self, s: &ProductState) -> usize {
        self.model.num_actions(s.x) + self.ldba.epsilon_successors(s.q).len()
    }

    pub fn action(&self, s: &ProductState, i: usize) -> Option<ProductAction> {
        let m = self.model.num_actions(s.x);
        if i < m {
            Some(ProductAction::Model(i))
        } else {
            self.ldba
                .epsilon_successors(s.q)
                .get(i - m)
                .map(|&q| ProductAction::Epsilon(q))
        }
    }

    pub fn enabled_actions(&self, s: &ProductState) -> Vec<ProductAction> {
        (0..self.model.num_actions(s.x))
            .map(ProductAction::Model)
            .chain(
                self.ldba
                    .epsilon_successors(s.q)
                    .iter()
                    .map(|&q| ProductAction::Epsilon(q)),
            )
            .collect()
    }

    pub fn action_name(&self, s: &ProductState, a: ProductAction) -> String {
        match a {
            ProductAction::Model(i) => self.model.actions(s.x)[i].clone(),
            ProductAction::Epsilon(q) => format!("eps:{q}"),
        }
    }

    pub fn parse_action(&self, s: &ProductState, name: &str) -> Result<ProductAction> {
        let not_enabled = || Error::ActionNotEnabled {
            state: s.to_string(),
            action: name.to_string(),
        };
        if let Some(q) = name.strip_prefix("eps:") {
            let q: usize = q.parse().map_err(|_| not_enabled())?;
            if self.ldba.epsilon_successors(s.q).contains(&q) {
                return Ok(ProductAction::Epsilon(q));
            }
            return Err(not_enabled());
        }
        self.model
            .action_index(s.x, name)
            .map(ProductAction::Model)
            .ok_or_else(not_enabled)
    }

    pub fn is_enabled(&self, s: &ProductState, a: ProductAction) -> bool {
        match a {
            ProductAction::Model(i) => i < self.model.num_actions(s.x),
            ProductAction::Epsilon(q) => self.ldba.epsilon_successors(s.q).contains(&q),
        }
    }

    /// Samples a successor. Model actions draw `x'` from the env stream and
    /// `ℓ'` from the label stream; ε-actions are deterministic.
    pub fn step(
        &self,
        s: &ProductState,
        a: ProductAction,
        rng: &mut Streams,
    ) -> Result<ProductState> {
        if !self.is_enabled(s, a) {
            return Err(Error::ActionNotEnabled {
                state: s.to_string(),
                action: format!("{a:?}"),
            });
        }
        Ok(match a {
            ProductAction::Epsilon(q) => ProductState { q, ..*s },
            ProductAction::Model(i) => {
                let x = self.model.sample_transition(s.x, i, &mut rng.env)?;
                let label = self.model.sample_label(x, &mut rng.labels);
                ProductState {
                    x,
                    label,
                    q: self.ldba.step(s.q, self.project(label)),
                }
            }
        })
    }

    /// Exact successor distribution of `(s, a)`.
    pub fn successors(&self, s: &ProductState, a: ProductAction) -> Vec<(ProductState, f64)> {
        match a {
            ProductAction::Epsilon(q) => vec![(ProductState { q, ..*s }, 1.0)],
            ProductAction::Model(i) => {
                let mut out: Vec<(ProductState, f64)> = Vec::new();
                for &(x, pc) in self.model.transition(s.x, i) {
                    for &(label, pl) in self.model.label_dist(x) {
                        let p = pc * pl;
                        if p <= 0.0 {
                            continue;
                        }
                        let t = ProductState {
                            x,
                            label,
                            q: self.ldba.step(s.q, self.project(label)),
                        };
                        match out.iter_mut().find(|(u, _)| *u == t) {
                            Some(e) => e.1 += p,
                            None => out.push((t, p)),
                        }
                    }
                }
                out
            }
        }
    }

    pub fn enumerate(&self, cap: usize) -> Result<ExplicitProduct> {
        ExplicitProduct::build(self, cap)
    }
}

/// Fully enumerated reachable product.
#[derive(Debug, Clone)]
pub struct ExplicitProduct {
    pub states: Vec<ProductState>,
    pub index: HashMap<ProductState, usize>,
    pub actions: Vec<Vec<ProductAction>>,
    /// `rows[s][a]` lists `(successor index, probability)`.
    pub rows: Vec<Vec<Vec<(usize, f64)>>>,
    pub initial: Vec<(usize, f64)>,
    /// Accepting-set membership of each state's automaton component.
    pub acc_mask: Vec<u64>,
    pub num_sets: usize,
}

impl ExplicitProduct {
    fn build(p: &Product<'_>, cap: usize) -> Result<ExplicitProduct> {
        let mut ex = ExplicitProduct {
            states: Vec::new(),
            index: HashMap::new(),
            actions: Vec::new(),
            rows: Vec::new(),
            initial: Vec::new(),
            acc_mask: Vec::new(),
            num_sets: p.ldba.acceptance().len(),
        };
        let intern = |ex: &mut ExplicitProduct, s: ProductState| -> Result<usize> {
            if let Some(&i) = ex.index.get(&s) {
                return Ok(i);
            }
            if ex.states.len() >= cap {
                return Err(Error::StateCapExceeded(cap));
            }
            let i = ex.states.len();
            ex.states.push(s);
            ex.index.insert(s, i);
            Ok(i)
        };
        for (s, pr) in p.initial_distribution() {
            let i = intern(&mut ex, s)?;
            ex.initial.push((i, pr));
        }
        let mut next = 0;
        while next < ex.states.len() {
            let s = ex.states[next];
            let acts = p.enabled_actions(&s);
            let mut rows = Vec::with_capacity(acts.len());
            for &a in &acts {
                let mut row = Vec::new();
                for (t, pr) in p.successors(&s, a) {
                    row.push((intern(&mut ex, t)?, pr));
                }
                rows.push(row);
            }
            ex.actions.push(acts);
            ex.rows.push(rows);
            next += 1;
        }
        ex.acc_mask = ex
            .states
            .iter()
            .map(|s| p.ldba.acceptance().membership(s.q))
            .collect();
        Ok(ex)
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn all_sets_mask(&self) -> u64 {
        if self.num_sets >= 64 {
            u64::MAX
        } else {
            (1u64 << self.num_sets) - 1
        }
    }

    /// Largest deviation of any row sum from one.
    pub fn max_row_error(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .map(|row| (row.iter().map(|(_, p)| p).sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    /// Successor graph over all actions.
    pub fn graph(&self) -> Vec<Vec<usize>> {
        self.rows
            .iter()
            .map(|acts| {
                let mut v: Vec<usize> = acts.iter().flatten().map(|&(t, _)| t).collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect()
    }
}

pub fn enumerate_product(model: &Plmdp, ldba: &Ldba) -> Result<ExplicitProduct> {
    Product::new(model, ldba)?.enumerate(DEFAULT_STATE_CAP)
}
