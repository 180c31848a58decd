#![allow(dead_code)]

use std::collections::HashMap;

use proptest::prelude::*;
use rand::Rng;
use specsynth::{Alphabet, Formula, LabelSet, Lasso};

/// Direct LTL semantics on a lasso: every subformula is evaluated at
/// unrolled positions with the loop unrolled three times, memoised on the
/// position's class in the lasso.
pub fn ltl_oracle(f: &Formula, w: &Lasso) -> bool {
    let mut memo = HashMap::new();
    eval(f, 0, w, &mut memo)
}

fn class(w: &Lasso, i: usize) -> usize {
    let pre = w.prefix().len();
    if i < pre {
        i
    } else {
        pre + (i - pre) % w.period().len()
    }
}

fn eval(f: &Formula, i: usize, w: &Lasso, memo: &mut HashMap<(usize, usize), bool>) -> bool {
    let key = (f as *const Formula as usize, class(w, i));
    if let Some(&v) = memo.get(&key) {
        return v;
    }
    let horizon = i + 3 * w.len();
    let v = match f {
        Formula::True => true,
        Formula::Atom(a) => w
            .letter(class(w, i))
            .contains(w.alphabet().index_of(a).unwrap()),
        Formula::Not(g) => !eval(g, i, w, memo),
        Formula::And(a, b) => eval(a, i, w, memo) && eval(b, i, w, memo),
        Formula::Or(a, b) => eval(a, i, w, memo) || eval(b, i, w, memo),
        Formula::Next(g) => eval(g, i + 1, w, memo),
        Formula::Until(a, b) => {
            let mut out = false;
            for j in i..horizon {
                if eval(b, j, w, memo) {
                    out = true;
                    break;
                }
                if !eval(a, j, w, memo) {
                    break;
                }
            }
            out
        }
        Formula::Eventually(g) => (i..horizon).any(|j| eval(g, j, w, memo)),
        Formula::Always(g) => (i..horizon).all(|j| eval(g, j, w, memo)),
    };
    memo.insert(key, v);
    v
}

/// Kosaraju's algorithm.
pub fn kosaraju(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut order = Vec::with_capacity(n);
    let mut seen = vec![false; n];
    for r in 0..n {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        let mut stack = vec![(r, 0usize)];
        while let Some((v, i)) = stack.pop() {
            if i < adj[v].len() {
                stack.push((v, i + 1));
                let w = adj[v][i];
                if !seen[w] {
                    seen[w] = true;
                    stack.push((w, 0));
                }
            } else {
                order.push(v);
            }
        }
    }
    let mut rev = vec![Vec::new(); n];
    for (v, succ) in adj.iter().enumerate() {
        for &w in succ {
            rev[w].push(v);
        }
    }
    let mut comp = vec![usize::MAX; n];
    let mut out = Vec::new();
    for &r in order.iter().rev() {
        if comp[r] != usize::MAX {
            continue;
        }
        let c = out.len();
        let mut members = vec![r];
        comp[r] = c;
        let mut stack = vec![r];
        while let Some(v) = stack.pop() {
            for &w in &rev[v] {
                if comp[w] == usize::MAX {
                    comp[w] = c;
                    members.push(w);
                    stack.push(w);
                }
            }
        }
        members.sort_unstable();
        out.push(members);
    }
    out
}

/// Components of `adj` with no edge leaving them.
pub fn bottom_sccs(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let sccs = kosaraju(adj);
    let mut id = vec![0; adj.len()];
    for (c, m) in sccs.iter().enumerate() {
        for &v in m {
            id[v] = c;
        }
    }
    sccs.iter()
        .enumerate()
        .filter(|(c, m)| m.iter().all(|&v| adj[v].iter().all(|&w| id[w] == *c)))
        .map(|(_, m)| m.clone())
        .collect()
}

pub fn random_lasso<R: Rng>(rng: &mut R, ap: &Alphabet, max_len: usize) -> Lasso {
    let letter = |rng: &mut R| LabelSet(rng.random_range(0..1u64 << ap.len()));
    let pre = rng.random_range(0..=max_len);
    let per = rng.random_range(1..=max_len);
    let prefix = (0..pre).map(|_| letter(rng)).collect();
    let period = (0..per).map(|_| letter(rng)).collect();
    Lasso::new(ap.clone(), prefix, period).unwrap()
}

pub fn arb_formula(atoms: &'static [&'static str]) -> impl Strategy<Value = Formula> {
    let leaf = prop_oneof![
        Just(Formula::True),
        proptest::sample::select(atoms).prop_map(Formula::atom),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(Formula::not),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::and(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::or(a, b)),
            inner.clone().prop_map(Formula::next),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Formula::until(a, b)),
            inner.clone().prop_map(Formula::eventually),
            inner.prop_map(Formula::always),
        ]
    })
}

pub fn arb_lasso(n_props: usize, max_len: usize) -> impl Strategy<Value = (Vec<u64>, Vec<u64>)> {
    let letter = 0..(1u64 << n_props);
    (
        proptest::collection::vec(letter.clone(), 0..=max_len),
        proptest::collection::vec(letter, 1..=max_len),
    )
}

pub fn lasso_of(ap: &Alphabet, prefix: &[u64], period: &[u64]) -> Lasso {
    Lasso::new(
        ap.clone(),
        prefix.iter().map(|&l| LabelSet(l)).collect(),
        period.iter().map(|&l| LabelSet(l)).collect(),
    )
    .unwrap()
}

/// Absorption into accepting bottom components of the chain whose row at
/// state `s` is `row(s)`, by exact elimination. Returns the probability
/// from the initial distribution and the largest number of accepting sets
/// met by a reachable bottom component.
pub fn chain_oracle(
    p: &specsynth::ExplicitProduct,
    row: impl Fn(usize) -> Vec<(usize, f64)>,
) -> (f64, usize) {
    let n = p.len();
    let mut reach = vec![false; n];
    let mut stack: Vec<usize> = p.initial.iter().map(|&(s, _)| s).collect();
    for &s in &stack {
        reach[s] = true;
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    while let Some(s) = stack.pop() {
        rows[s] = row(s).into_iter().filter(|&(_, w)| w > 0.0).collect();
        for &(t, _) in &rows[s] {
            if !reach[t] {
                reach[t] = true;
                stack.push(t);
            }
        }
    }
    let adj: Vec<Vec<usize>> = rows
        .iter()
        .map(|r| r.iter().map(|&(t, _)| t).collect())
        .collect();
    let all = p.all_sets_mask();
    let mut good = vec![false; n];
    let mut in_bottom = vec![false; n];
    let mut close = 0;
    for c in bottom_sccs(&adj).into_iter().filter(|c| reach[c[0]]) {
        let mask = c.iter().fold(0, |m, &s| m | p.acc_mask[s]);
        close = close.max(mask.count_ones() as usize);
        for &s in &c {
            in_bottom[s] = true;
            good[s] = mask == all;
        }
    }
    let transient: Vec<usize> = (0..n).filter(|&s| reach[s] && !in_bottom[s]).collect();
    let pos: HashMap<usize, usize> = transient.iter().enumerate().map(|(i, &s)| (s, i)).collect();
    let m = transient.len();
    let mut a = vec![vec![0.0; m + 1]; m];
    for (i, &s) in transient.iter().enumerate() {
        a[i][i] = 1.0;
        for &(t, w) in &rows[s] {
            if let Some(&j) = pos.get(&t) {
                a[i][j] -= w;
            } else if good[t] {
                a[i][m] += w;
            }
        }
    }
    for c in 0..m {
        let piv = (c..m)
            .max_by(|&x, &y| a[x][c].abs().total_cmp(&a[y][c].abs()))
            .unwrap();
        a.swap(c, piv);
        let d = a[c][c];
        for k in c..=m {
            a[c][k] /= d;
        }
        for r in 0..m {
            if r != c && a[r][c] != 0.0 {
                let f = a[r][c];
                for k in c..=m {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    let value = |s: usize| {
        if good[s] {
            1.0
        } else {
            pos.get(&s).map(|&i| a[i][m]).unwrap_or(0.0)
        }
    };
    (p.initial.iter().map(|&(s, w)| w * value(s)).sum(), close)
}

/// Maximal end components as `(states, allowed actions)` by enumerating
/// every subset of states.
pub fn mecs_by_subsets(p: &specsynth::ExplicitProduct) -> Vec<(Vec<usize>, Vec<Vec<usize>>)> {
    let n = p.len();
    assert!(n <= 16);
    let mut ecs: Vec<u32> = Vec::new();
    for set in 1u32..(1 << n) {
        let inside = |t: usize| set >> t & 1 == 1;
        let members: Vec<usize> = (0..n).filter(|&s| inside(s)).collect();
        let acts: Vec<Vec<usize>> = members
            .iter()
            .map(|&s| {
                (0..p.rows[s].len())
                    .filter(|&a| p.rows[s][a].iter().all(|&(t, _)| inside(t)))
                    .collect()
            })
            .collect();
        if acts.iter().any(|a| a.is_empty()) {
            continue;
        }
        let local: HashMap<usize, usize> =
            members.iter().enumerate().map(|(i, &s)| (s, i)).collect();
        let adj: Vec<Vec<usize>> = members
            .iter()
            .zip(&acts)
            .map(|(&s, a)| {
                a.iter()
                    .flat_map(|&a| p.rows[s][a].iter().map(|&(t, _)| local[&t]))
                    .collect()
            })
            .collect();
        if kosaraju(&adj).len() == 1 {
            ecs.push(set);
        }
    }
    let maximal: Vec<u32> = ecs
        .iter()
        .copied()
        .filter(|&s| !ecs.iter().any(|&t| t != s && t & s == s))
        .collect();
    maximal
        .into_iter()
        .map(|set| {
            let members: Vec<usize> = (0..n).filter(|&s| set >> s & 1 == 1).collect();
            let acts = members
                .iter()
                .map(|&s| {
                    (0..p.rows[s].len())
                        .filter(|&a| p.rows[s][a].iter().all(|&(t, _)| set >> t & 1 == 1))
                        .collect()
                })
                .collect();
            (members, acts)
        })
        .collect()
}

/// Lasso whose letters are drawn from `letters`.
pub fn lasso_over<R: Rng>(
    rng: &mut R,
    ap: &Alphabet,
    letters: &[LabelSet],
    max_len: usize,
) -> Lasso {
    let pre = rng.random_range(0..=max_len);
    let per = rng.random_range(1..=max_len);
    let mut pick = |k: usize| {
        (0..k)
            .map(|_| letters[rng.random_range(0..letters.len())])
            .collect()
    };
    let prefix = pick(pre);
    let period = pick(per);
    Lasso::new(ap.clone(), prefix, period).unwrap()
}
