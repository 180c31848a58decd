//! Limit-deterministic generalized Büchi automata with ε-moves.
//!
//! States are split into an initial part (`N`) and an accepting part (`D`).
//! Edge guards are propositional formulas over the automaton alphabet. A
//! state with no enabled guard for some label moves to an implicit rejecting
//! sink, which is materialized on load as an extra `D` state.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, LabelSet};
use crate::error::{Error, Result};
use crate::graph;
use crate::ltl::{self, Formula, Lasso};

/// Largest alphabet for which transition tables are tabulated.
pub const MAX_AUTOMATON_PROPS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    #[serde(rename = "N")]
    Initial,
    #[serde(rename = "D")]
    Accepting,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub from: usize,
    pub guard: String,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsDoc {
    pub from: usize,
    pub to: usize,
}

/// On-disk automaton format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdbaDocument {
    pub ap: Vec<String>,
    pub states: usize,
    pub initial: usize,
    pub part: Vec<Part>,
    pub edges: Vec<EdgeDoc>,
    #[serde(default)]
    pub eps: Vec<EpsDoc>,
    pub acc: Vec<Vec<usize>>,
}

/// Compiled propositional guard.
#[derive(Debug, Clone)]
enum Guard {
    True,
    Atom(usize),
    Not(Box<Guard>),
    And(Box<Guard>, Box<Guard>),
    Or(Box<Guard>, Box<Guard>),
}

impl Guard {
    fn compile(f: &Formula, ap: &Alphabet) -> Result<Guard> {
        Ok(match f {
            Formula::True => Guard::True,
            Formula::Atom(a) => Guard::Atom(ap.index_of(a).ok_or_else(|| {
                Error::InvalidAutomaton(format!("guard uses undeclared atom `{a}`"))
            })?),
            Formula::Not(g) => Guard::Not(Box::new(Guard::compile(g, ap)?)),
            Formula::And(a, b) => Guard::And(
                Box::new(Guard::compile(a, ap)?),
                Box::new(Guard::compile(b, ap)?),
            ),
            Formula::Or(a, b) => Guard::Or(
                Box::new(Guard::compile(a, ap)?),
                Box::new(Guard::compile(b, ap)?),
            ),
            other => {
                return Err(Error::InvalidAutomaton(format!(
                    "guard `{other}` is not propositional"
                )))
            }
        })
    }

    fn eval(&self, l: LabelSet) -> bool {
        match self {
            Guard::True => true,
            Guard::Atom(i) => l.contains(*i),
            Guard::Not(g) => !g.eval(l),
            Guard::And(a, b) => a.eval(l) && b.eval(l),
            Guard::Or(a, b) => a.eval(l) || b.eval(l),
        }
    }
}

/// Generalized Büchi acceptance `F_1 … F_f` with per-state membership masks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Acceptance {
    sets: Vec<Vec<usize>>,
    membership: Vec<u64>,
}

impl Acceptance {
    pub fn new(sets: Vec<Vec<usize>>, n_states: usize) -> Result<Self> {
        if sets.is_empty() || sets.len() > 64 {
            return Err(Error::InvalidAutomaton(format!(
                "need between 1 and 64 accepting sets, got {}",
                sets.len()
            )));
        }
        let mut membership = vec![0u64; n_states];
        for (j, set) in sets.iter().enumerate() {
            if set.is_empty() {
                return Err(Error::InvalidAutomaton(format!(
                    "accepting set {j} is empty"
                )));
            }
            for &q in set {
                if q >= n_states {
                    return Err(Error::InvalidAutomaton(format!(
                        "accepting set {j} names unknown state {q}"
                    )));
                }
                membership[q] |= 1 << j;
            }
        }
        Ok(Acceptance { sets, membership })
    }

    pub fn len(&self) -> usize {
        self.sets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    pub fn sets(&self) -> &[Vec<usize>] {
        &self.sets
    }

    /// Bitmask of the accepting sets containing `q`.
    pub fn membership(&self, q: usize) -> u64 {
        self.membership.get(q).copied().unwrap_or(0)
    }

    pub fn all_mask(&self) -> u64 {
        full_mask(self.sets.len())
    }
}

fn full_mask(f: usize) -> u64 {
    if f >= 64 {
        u64::MAX
    } else {
        (1u64 << f) - 1
    }
}

/// The accepting frontier: the accepting sets still owed a visit, as a
/// bitmask over set indices. Always a non-empty union of whole sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Frontier(u64);

impl Frontier {
    /// The full family `{F_1, …, F_f}`.
    pub fn full(acc: &Acceptance) -> Frontier {
        Frontier(acc.all_mask())
    }

    pub fn from_mask(mask: u64) -> Frontier {
        assert!(mask != 0, "frontier must be non-empty");
        Frontier(mask)
    }

    pub fn mask(self) -> u64 {
        self.0
    }

    pub fn contains_set(self, j: usize) -> bool {
        j < 64 && self.0 >> j & 1 == 1
    }

    pub fn set_indices(self) -> impl Iterator<Item = usize> {
        (0..64).filter(move |&j| self.contains_set(j))
    }

    /// Whether `q` belongs to some accepting set currently in the frontier.
    pub fn covers(self, q: usize, acc: &Acceptance) -> bool {
        acc.membership(q) & self.0 != 0
    }
}

impl fmt::Display for Frontier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<String> = self.set_indices().map(|j| format!("F{}", j + 1)).collect();
        write!(f, "{{{}}}", names.join(","))
    }
}

/// Accepting frontier update on reaching `q`.
///
/// With `J` the sets containing `q`: if `q` is in no set the frontier is
/// unchanged; otherwise the sets in `J` are removed, and when that would
/// empty the frontier it restarts from the full family minus `J`. If the
/// restart is itself empty (every set contains `q`, e.g. `f = 1`) the full
/// family is returned so the frontier never becomes empty.
pub fn accepting_frontier(q: usize, frontier: Frontier, acc: &Acceptance) -> Frontier {
    let hit = acc.membership(q);
    if hit == 0 {
        return frontier;
    }
    let rest = frontier.0 & !hit;
    if rest != 0 {
        return Frontier(rest);
    }
    let restart = acc.all_mask() & !hit;
    if restart != 0 {
        Frontier(restart)
    } else {
        Frontier(acc.all_mask())
    }
}

#[derive(Debug, Clone)]
pub struct Ldba {
    ap: Alphabet,
    declared: usize,
    initial: usize,
    part: Vec<Part>,
    /// `table[q][label]` is the unique successor of `q` on `label`.
    table: Vec<Vec<usize>>,
    eps: Vec<Vec<usize>>,
    acc: Acceptance,
    sink: Option<usize>,
    document: LdbaDocument,
}

impl Ldba {
    pub fn from_document(doc: LdbaDocument) -> Result<Ldba> {
        let bad = |m: String| Err(Error::InvalidAutomaton(m));
        let ap = Alphabet::new(doc.ap.iter().cloned())
            .map_err(|e| Error::InvalidAutomaton(e.to_string()))?;
        if ap.len() > MAX_AUTOMATON_PROPS {
            return bad(format!(
                "at most {MAX_AUTOMATON_PROPS} propositions supported"
            ));
        }
        let n = doc.states;
        if n == 0 {
            return bad("automaton has no states".into());
        }
        if doc.initial >= n {
            return bad(format!("initial state {} out of range", doc.initial));
        }
        if doc.part.len() != n {
            return bad(format!(
                "`part` has {} entries for {n} states",
                doc.part.len()
            ));
        }
        let acc = Acceptance::new(doc.acc.clone(), n)?;
        for (j, set) in acc.sets().iter().enumerate() {
            if let Some(&q) = set.iter().find(|&&q| doc.part[q] == Part::Initial) {
                return bad(format!(
                    "accepting set {j} contains state {q} of the initial part"
                ));
            }
        }

        let mut guards: Vec<Vec<(Guard, usize)>> = vec![Vec::new(); n];
        for e in &doc.edges {
            if e.from >= n || e.to >= n {
                return bad(format!(
                    "edge {} -> {} references an unknown state",
                    e.from, e.to
                ));
            }
            let f = ltl::parse_ltl(&e.guard)
                .map_err(|err| Error::InvalidAutomaton(format!("guard `{}`: {err}", e.guard)))?;
            let g = Guard::compile(&f, &ap)?;
            if doc.part[e.from] == Part::Accepting && doc.part[e.to] == Part::Initial {
                return bad(format!(
                    "edge {} -> {} leaves the accepting part",
                    e.from, e.to
                ));
            }
            guards[e.from].push((g, e.to));
        }

        let mut eps = vec![Vec::new(); n];
        for e in &doc.eps {
            if e.from >= n || e.to >= n {
                return bad(format!(
                    "ε-edge {} -> {} references an unknown state",
                    e.from, e.to
                ));
            }
            if doc.part[e.from] != Part::Initial {
                return bad(format!("ε-edge leaves accepting-part state {}", e.from));
            }
            if doc.part[e.to] != Part::Accepting {
                return bad(format!(
                    "ε-edge {} -> {} must enter the accepting part",
                    e.from, e.to
                ));
            }
            if !eps[e.from].contains(&e.to) {
                eps[e.from].push(e.to);
            }
        }

        let labels: Vec<LabelSet> = ap.all_labels().collect();
        let mut table = vec![vec![usize::MAX; labels.len()]; n];
        let mut incomplete = false;
        for q in 0..n {
            for &l in &labels {
                let mut hits = guards[q].iter().filter(|(g, _)| g.eval(l)).map(|&(_, t)| t);
                match (hits.next(), hits.next()) {
                    (Some(t), None) => table[q][l.0 as usize] = t,
                    (None, _) => incomplete = true,
                    (Some(_), Some(_)) => {
                        return bad(format!(
                            "overlapping guards at state {q} for label {}",
                            ap.display(l)
                        ))
                    }
                }
            }
        }

        let mut part = doc.part.clone();
        let sink = incomplete.then_some(n);
        if let Some(s) = sink {
            for row in &mut table {
                for t in row.iter_mut().filter(|t| **t == usize::MAX) {
                    *t = s;
                }
            }
            table.push(vec![s; labels.len()]);
            part.push(Part::Accepting);
            eps.push(Vec::new());
        }
        let acc = Acceptance::new(doc.acc.clone(), part.len())?;

        Ok(Ldba {
            ap,
            declared: n,
            initial: doc.initial,
            part,
            table,
            eps,
            acc,
            sink,
            document: doc,
        })
    }

    pub fn from_json(text: &str) -> Result<Ldba> {
        Ldba::from_document(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.document)?)
    }

    pub fn document(&self) -> &LdbaDocument {
        &self.document
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.ap
    }

    /// States declared by the document, excluding a materialized sink.
    pub fn declared_states(&self) -> usize {
        self.declared
    }

    /// All states including the implicit sink, if one was needed.
    pub fn num_states(&self) -> usize {
        self.part.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn part(&self, q: usize) -> Part {
        self.part[q]
    }

    pub fn implicit_sink(&self) -> Option<usize> {
        self.sink
    }

    pub fn acceptance(&self) -> &Acceptance {
        &self.acc
    }

    /// Successor of `q` on a label over this automaton's alphabet.
    pub fn step(&self, q: usize, label: LabelSet) -> usize {
        self.table[q][label.0 as usize & (self.table[q].len() - 1)]
    }

    pub fn epsilon_successors(&self, q: usize) -> &[usize] {
        &self.eps[q]
    }

    fn successor_graph(&self) -> Vec<Vec<usize>> {
        (0..self.num_states())
            .map(|q| {
                let mut succ: BTreeSet<usize> = self.table[q].iter().copied().collect();
                succ.extend(self.eps[q].iter().copied());
                succ.into_iter().collect()
            })
            .collect()
    }

    /// Union of the non-accepting trap components: bottom SCCs of the
    /// transition graph (label and ε-edges) that miss some accepting set.
    pub fn detect_sinks(&self) -> BTreeSet<usize> {
        let adj = self.successor_graph();
        let sccs = graph::tarjan_scc(&adj);
        let all = self.acc.all_mask();
        let mut out = BTreeSet::new();
        for comp in graph::bottom_components(&adj, &sccs) {
            let covered = comp.iter().fold(0u64, |m, &q| m | self.acc.membership(q));
            if covered & all != all {
                out.extend(comp.iter().copied());
            }
        }
        out
    }

    /// Decides acceptance of `prefix · period^ω` over the product of word
    /// positions and automaton states: label edges advance the position,
    /// ε-edges keep it. The word is accepted iff a non-trivial SCC reachable
    /// from `(0, q0)` meets every accepting set.
    pub fn accepts_lasso(&self, w: &Lasso) -> Result<bool> {
        for name in self.ap.names() {
            if !w.alphabet().contains(name) {
                return Err(Error::UnknownAtom(name.clone()));
            }
        }
        let nq = self.num_states();
        let npos = w.len();
        let letters: Vec<LabelSet> = (0..npos)
            .map(|i| w.alphabet().project(w.letter(i), &self.ap))
            .collect();
        let node = |pos: usize, q: usize| pos * nq + q;

        let mut adj = vec![Vec::new(); npos * nq];
        let mut seen = vec![false; npos * nq];
        let start = node(0, self.initial);
        seen[start] = true;
        let mut stack = vec![start];
        while let Some(v) = stack.pop() {
            let (pos, q) = (v / nq, v % nq);
            let mut succ = vec![node(w.succ(pos), self.step(q, letters[pos]))];
            succ.extend(self.eps[q].iter().map(|&q2| node(pos, q2)));
            for &s in &succ {
                if !seen[s] {
                    seen[s] = true;
                    stack.push(s);
                }
            }
            adj[v] = succ;
        }

        let all = self.acc.all_mask();
        let sccs = graph::tarjan_scc(&adj);
        Ok(sccs.iter().any(|comp| {
            let v0 = comp[0];
            let nontrivial = comp.len() > 1 || adj[v0].contains(&v0);
            seen[v0]
                && nontrivial
                && comp
                    .iter()
                    .fold(0u64, |m, &v| m | self.acc.membership(v % nq))
                    & all
                    == all
        }))
    }
}

pub fn load_ldba(text: &str) -> Result<Ldba> {
    Ldba::from_json(text)
}
