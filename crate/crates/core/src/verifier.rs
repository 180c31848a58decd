//! Exact analysis of an enumerated product: end components, optimal
//! satisfaction probability, evaluation of fixed policies and the
//! closed-form returns of the two-branch counterexample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph;
use crate::learner::Policy;
use crate::product::{ExplicitProduct, Product};

/// Sup-norm stopping threshold for value iteration.
pub const VI_TOLERANCE: f64 = 1e-10;
/// Sweep limit for value iteration.
pub const VI_MAX_SWEEPS: usize = 1_000_000;

/// An end component: states with the actions that keep play inside.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mec {
    pub states: Vec<usize>,
    /// Allowed action indices, parallel to `states`.
    pub actions: Vec<Vec<usize>>,
}

impl Mec {
    pub fn acc_mask(&self, p: &ExplicitProduct) -> u64 {
        self.states.iter().fold(0, |m, &s| m | p.acc_mask[s])
    }
}

/// Maximal end components by iterated SCC refinement.
pub fn mec_decomposition(p: &ExplicitProduct) -> Vec<Mec> {
    let n = p.len();
    let mut allowed: Vec<Vec<usize>> = (0..n).map(|s| (0..p.actions[s].len()).collect()).collect();
    let mut alive = vec![true; n];
    loop {
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|s| {
                if !alive[s] {
                    return Vec::new();
                }
                let mut v: Vec<usize> = allowed[s]
                    .iter()
                    .flat_map(|&a| p.rows[s][a].iter().map(|&(t, _)| t))
                    .filter(|&t| alive[t])
                    .collect();
                v.sort_unstable();
                v.dedup();
                v
            })
            .collect();
        let sccs = graph::tarjan_scc(&adj);
        let id = graph::component_ids(n, &sccs);
        let mut changed = false;
        for s in 0..n {
            if !alive[s] {
                continue;
            }
            let before = allowed[s].len();
            allowed[s].retain(|&a| {
                p.rows[s][a]
                    .iter()
                    .all(|&(t, _)| alive[t] && id[t] == id[s])
            });
            if allowed[s].len() != before {
                changed = true;
            }
            if allowed[s].is_empty() {
                alive[s] = false;
                changed = true;
            }
        }
        if !changed {
            let mut out: Vec<Mec> = sccs
                .into_iter()
                .filter(|c| alive[c[0]])
                .map(|states| {
                    let actions = states.iter().map(|&s| allowed[s].clone()).collect();
                    Mec { states, actions }
                })
                .collect();
            out.sort_by(|a, b| a.states.cmp(&b.states));
            return out;
        }
    }
}

/// End components meeting every accepting set.
pub fn accepting_mecs(mecs: &[Mec], p: &ExplicitProduct) -> Vec<Mec> {
    let all = p.all_sets_mask();
    mecs.iter()
        .filter(|m| m.acc_mask(p) & all == all)
        .cloned()
        .collect()
}

#[derive(Debug, Clone)]
pub struct MaxSatisfaction {
    /// Maximal probability of reaching an accepting end component.
    pub values: Vec<f64>,
    /// Optimal memoryless action index per state.
    pub policy: Vec<usize>,
    pub amecs: Vec<Mec>,
    /// Expected value over the initial distribution.
    pub initial: f64,
    pub sweeps: usize,
}

/// States from which some choice reaches `target` with probability one,
/// restricted to states in `alive` (those that can reach the target).
fn almost_sure(
    p: &ExplicitProduct,
    target: &[bool],
    alive: &[bool],
    acts: &[Vec<usize>],
) -> Vec<bool> {
    let n = p.len();
    let mut preds: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for s in 0..n {
        for &a in &acts[s] {
            for &(t, pr) in &p.rows[s][a] {
                if pr > 0.0 {
                    preds[t].push((s, a));
                }
            }
        }
    }
    let mut u = alive.to_vec();
    loop {
        let stays = |s: usize, a: usize| p.rows[s][a].iter().all(|&(t, pr)| pr <= 0.0 || u[t]);
        let mut r: Vec<bool> = (0..n).map(|s| target[s] && u[s]).collect();
        let mut queue: Vec<usize> = (0..n).filter(|&s| r[s]).collect();
        while let Some(t) = queue.pop() {
            for &(s, a) in &preds[t] {
                if u[s] && !r[s] && stays(s, a) {
                    r[s] = true;
                    queue.push(s);
                }
            }
        }
        if r == u {
            return u;
        }
        u = r;
    }
}

/// Jacobi value iteration for `V(s) ← max_a Σ P(s,a,s') V(s')`. States
/// that reach the target almost surely are pinned at 1 and states that
/// cannot reach it at 0; the rest start at 0 and rise monotonically.
fn reach_iteration(
    p: &ExplicitProduct,
    target: &[bool],
    choices: impl Fn(usize) -> Vec<usize>,
) -> (Vec<f64>, usize) {
    let n = p.len();
    let acts: Vec<Vec<usize>> = (0..n).map(&choices).collect();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            let mut v: Vec<usize> = acts[s]
                .iter()
                .flat_map(|&a| p.rows[s][a].iter().map(|&(t, _)| t))
                .collect();
            v.sort_unstable();
            v.dedup();
            v
        })
        .collect();
    let can_reach = graph::backward_reachable(&adj, target);
    let one = almost_sure(p, target, &can_reach, &acts);
    let free: Vec<usize> = (0..n).filter(|&s| can_reach[s] && !one[s]).collect();
    let mut v: Vec<f64> = one.iter().map(|&t| if t { 1.0 } else { 0.0 }).collect();
    let mut next = v.clone();
    let mut sweeps = 0;
    while !free.is_empty() && sweeps < VI_MAX_SWEEPS {
        sweeps += 1;
        let mut diff: f64 = 0.0;
        for &s in &free {
            let best = acts[s]
                .iter()
                .map(|&a| p.rows[s][a].iter().map(|&(t, pr)| pr * v[t]).sum::<f64>())
                .fold(0.0, f64::max);
            diff = diff.max((best - v[s]).abs());
            next[s] = best;
        }
        std::mem::swap(&mut v, &mut next);
        if diff < VI_TOLERANCE {
            break;
        }
    }
    if sweeps == VI_MAX_SWEEPS {
        log::warn!("value iteration hit the sweep limit");
    }
    (v, sweeps)
}

pub fn max_satisfaction_probability(p: &ExplicitProduct) -> MaxSatisfaction {
    let n = p.len();
    let amecs = accepting_mecs(&mec_decomposition(p), p);
    let mut target = vec![false; n];
    let mut policy = vec![0usize; n];
    for m in &amecs {
        for (i, &s) in m.states.iter().enumerate() {
            target[s] = true;
            policy[s] = m.actions[i][0];
        }
    }
    let (values, sweeps) = reach_iteration(p, &target, |s| (0..p.actions[s].len()).collect());

    // Among value-maximizing actions, pick ones that make progress toward
    // the target so the policy cannot idle forever on a value plateau.
    let q = |s: usize, a: usize| {
        p.rows[s][a]
            .iter()
            .map(|&(t, pr)| pr * values[t])
            .sum::<f64>()
    };
    let mut done = target.clone();
    let mut frontier_changed = true;
    while frontier_changed {
        frontier_changed = false;
        for s in 0..n {
            if done[s] || values[s] <= 0.0 {
                continue;
            }
            let best = (0..p.actions[s].len()).map(|a| q(s, a)).fold(0.0, f64::max);
            let pick = (0..p.actions[s].len()).find(|&a| {
                q(s, a) >= best - 1e-9 && p.rows[s][a].iter().any(|&(t, pr)| pr > 0.0 && done[t])
            });
            if let Some(a) = pick {
                policy[s] = a;
                done[s] = true;
                frontier_changed = true;
            }
        }
    }
    for s in 0..n {
        if !done[s] {
            policy[s] = (0..p.actions[s].len())
                .fold((0, f64::NEG_INFINITY), |(ba, bv), a| {
                    if q(s, a) > bv {
                        (a, q(s, a))
                    } else {
                        (ba, bv)
                    }
                })
                .0;
        }
    }
    let initial = p.initial.iter().map(|&(s, pr)| pr * values[s]).sum();
    MaxSatisfaction {
        values,
        policy,
        amecs,
        initial,
        sweeps,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentClass {
    pub states: Vec<usize>,
    /// Accepting sets met by the class, 1-based.
    pub sets: Vec<usize>,
    pub accepting: bool,
    /// Probability of ending up in this class from the initial distribution.
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainDecomposition {
    pub transient: Vec<usize>,
    pub classes: Vec<RecurrentClass>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEvaluation {
    pub probability: f64,
    pub chain: ChainDecomposition,
    /// Largest number of accepting sets met by one recurrent class.
    pub closeness: usize,
    /// Reachable states without an explicit policy entry.
    pub fallback_states: usize,
}

/// Evaluates the chain induced by a choice of action index per reachable
/// state.
pub fn evaluate_choices(
    p: &ExplicitProduct,
    choose: impl Fn(usize) -> Result<usize>,
) -> Result<PolicyEvaluation> {
    let n = p.len();
    let mut choice = vec![usize::MAX; n];
    let mut reach = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    for &(s, pr) in &p.initial {
        if pr > 0.0 && !reach[s] {
            reach[s] = true;
            stack.push(s);
        }
    }
    while let Some(s) = stack.pop() {
        let a = choose(s)?;
        if a >= p.actions[s].len() {
            return Err(Error::PolicyGap(p.states[s].to_string()));
        }
        choice[s] = a;
        for &(t, pr) in &p.rows[s][a] {
            if pr > 0.0 && !reach[t] {
                reach[t] = true;
                stack.push(t);
            }
        }
    }
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|s| {
            if !reach[s] {
                return Vec::new();
            }
            p.rows[s][choice[s]]
                .iter()
                .filter(|&&(_, pr)| pr > 0.0)
                .map(|&(t, _)| t)
                .collect()
        })
        .collect();
    let sccs = graph::tarjan_scc(&adj);
    let bottoms: Vec<Vec<usize>> = graph::bottom_components(&adj, &sccs)
        .into_iter()
        .filter(|c| reach[c[0]])
        .cloned()
        .collect();
    let all = p.all_sets_mask();
    let mut in_class = vec![false; n];
    let mut classes = Vec::new();
    for states in bottoms {
        for &s in &states {
            in_class[s] = true;
        }
        let mask = states.iter().fold(0u64, |m, &s| m | p.acc_mask[s]);
        let mut target = vec![false; n];
        for &s in &states {
            target[s] = true;
        }
        let (v, _) = reach_iteration(p, &target, |s| {
            if reach[s] {
                vec![choice[s]]
            } else {
                Vec::new()
            }
        });
        let probability = p.initial.iter().map(|&(s, pr)| pr * v[s]).sum();
        classes.push(RecurrentClass {
            sets: (0..p.num_sets)
                .filter(|j| mask >> j & 1 == 1)
                .map(|j| j + 1)
                .collect(),
            accepting: mask & all == all,
            probability,
            states,
        });
    }
    let mut accepting = vec![false; n];
    for c in classes.iter().filter(|c| c.accepting) {
        for &s in &c.states {
            accepting[s] = true;
        }
    }
    let probability = if classes.iter().any(|c| c.accepting) {
        let (v, _) = reach_iteration(p, &accepting, |s| {
            if reach[s] {
                vec![choice[s]]
            } else {
                Vec::new()
            }
        });
        p.initial.iter().map(|&(s, pr)| pr * v[s]).sum()
    } else {
        0.0
    };
    let closeness = classes.iter().map(|c| c.sets.len()).max().unwrap_or(0);
    let transient = (0..n).filter(|&s| reach[s] && !in_class[s]).collect();
    Ok(PolicyEvaluation {
        probability: probability.min(1.0),
        chain: ChainDecomposition { transient, classes },
        closeness,
        fallback_states: 0,
    })
}

/// Satisfaction probability of a learned policy, from the chain it induces.
pub fn policy_satisfaction_probability(
    p: &ExplicitProduct,
    prod: &Product<'_>,
    pol: &Policy,
) -> Result<PolicyEvaluation> {
    let fallbacks = std::cell::Cell::new(0usize);
    let mut ev = evaluate_choices(p, |s| {
        let st = &p.states[s];
        if !pol.map.contains_key(st) {
            fallbacks.set(fallbacks.get() + 1);
        }
        let a = pol
            .choose(prod, st)
            .ok_or_else(|| Error::PolicyGap(st.to_string()))?;
        p.actions[s]
            .iter()
            .position(|&b| b == a)
            .ok_or_else(|| Error::PolicyGap(st.to_string()))
    })?;
    ev.fallback_states = fallbacks.get();
    if ev.fallback_states > 0 {
        log::warn!(
            "{} reachable product states used the fallback action",
            ev.fallback_states
        );
    }
    Ok(ev)
}

pub fn closeness(p: &ExplicitProduct, prod: &Product<'_>, pol: &Policy) -> Result<usize> {
    Ok(policy_satisfaction_probability(p, prod, pol)?.closeness)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub size: usize,
    pub sets: Vec<usize>,
    pub accepting: bool,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub amec_count: usize,
    pub max_prob: f64,
    pub policy_prob: Option<f64>,
    pub closeness: Option<usize>,
    pub recurrent_class_summary: Vec<ClassSummary>,
    pub product_states: usize,
    pub fallback_states: usize,
}

pub fn verify(
    p: &ExplicitProduct,
    prod: &Product<'_>,
    pol: Option<&Policy>,
) -> Result<VerifyReport> {
    let max = max_satisfaction_probability(p);
    let ev = pol
        .map(|pol| policy_satisfaction_probability(p, prod, pol))
        .transpose()?;
    Ok(VerifyReport {
        amec_count: max.amecs.len(),
        max_prob: max.initial,
        policy_prob: ev.as_ref().map(|e| e.probability),
        closeness: ev.as_ref().map(|e| e.closeness),
        recurrent_class_summary: ev
            .as_ref()
            .map(|e| {
                e.chain
                    .classes
                    .iter()
                    .map(|c| ClassSummary {
                        size: c.states.len(),
                        sets: c.sets.clone(),
                        accepting: c.accepting,
                        probability: c.probability,
                    })
                    .collect()
            })
            .unwrap_or_default(),
        product_states: p.len(),
        fallback_states: ev.map(|e| e.fallback_states).unwrap_or(0),
    })
}

/// Discounted returns from `s0` of the counterexample under the two
/// actions, with `n` reward periods (`None` for an unbounded horizon).
///
/// `right` earns `r` every step with probability `1-ν`; `left` earns `r`
/// every third step starting at the second.
pub fn counterexample_returns(gamma: f64, nu: f64, r: f64, n: Option<u64>) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&gamma) || !(0.0..=1.0).contains(&nu) || !(r > 0.0) {
        return Err(Error::InvalidArgument(
            "need 0 ≤ γ ≤ 1, 0 ≤ ν ≤ 1 and r > 0".into(),
        ));
    }
    if n == Some(0) {
        return Err(Error::InvalidArgument("n must be at least 1".into()));
    }
    let right_per = (1.0 - nu) * r;
    match n {
        None if gamma >= 1.0 => Err(Error::InvalidArgument("γ = 1 needs a finite n".into())),
        None => Ok((
            right_per / (1.0 - gamma),
            gamma * gamma * r / (1.0 - gamma.powi(3)),
        )),
        Some(n) if gamma >= 1.0 => Ok((n as f64 * right_per, n as f64 * r)),
        Some(n) => {
            let g = |k: u64| gamma.powf(k as f64);
            Ok((
                right_per * (1.0 - g(n)) / (1.0 - gamma),
                gamma * gamma * r * (1.0 - g(3 * n)) / (1.0 - gamma.powi(3)),
            ))
        }
    }
}

/// Discount above which `left` beats `right` in the counterexample.
pub fn counterexample_threshold(nu: f64) -> f64 {
    (((1.0 / (nu * nu) + 2.0 / nu - 3.0).sqrt() - 1.0) * nu + 1.0) / (2.0 * nu)
}
