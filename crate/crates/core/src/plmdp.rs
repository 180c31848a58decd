//! Probabilistically-labeled MDPs: a transition kernel over states and a
//! labeling kernel emitting label-sets at each state.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, LabelSet};
use crate::error::{Error, Result};
use crate::rng::pick;

/// Tolerance on probability sums.
pub const NORMALIZATION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessorDoc {
    pub to: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransDoc {
    pub x: usize,
    pub a: String,
    pub dist: Vec<SuccessorDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelEntryDoc {
    pub set: Vec<String>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDoc {
    pub x: usize,
    pub dist: Vec<LabelEntryDoc>,
}

/// On-disk model format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlmdpDocument {
    pub states: usize,
    pub initial: usize,
    pub ap: Vec<String>,
    pub actions: Vec<Vec<String>>,
    pub trans: Vec<TransDoc>,
    pub labels: Vec<LabelDoc>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Plmdp {
    ap: Alphabet,
    initial: usize,
    actions: Vec<Vec<String>>,
    /// `trans[x][a]` lists `(successor, probability)` in file order.
    trans: Vec<Vec<Vec<(usize, f64)>>>,
    labels: Vec<Vec<(LabelSet, f64)>>,
}

fn check_dist<T>(what: impl Fn() -> String, entries: &[(T, f64)]) -> Result<()> {
    if entries.is_empty() {
        return Err(Error::InvalidModel(format!("{} is empty", what())));
    }
    let mut sum = 0.0;
    for (_, p) in entries {
        if !(0.0..=1.0).contains(p) {
            return Err(Error::InvalidModel(format!(
                "{} has probability {p} outside [0,1]",
                what()
            )));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(Error::InvalidModel(format!("{} sums to {sum}", what())));
    }
    Ok(())
}

impl Plmdp {
    /// Builds and validates a model from kernels indexed by state and action.
    pub fn new(
        ap: Alphabet,
        initial: usize,
        actions: Vec<Vec<String>>,
        trans: Vec<Vec<Vec<(usize, f64)>>>,
        labels: Vec<Vec<(LabelSet, f64)>>,
    ) -> Result<Plmdp> {
        let n = actions.len();
        if n == 0 {
            return Err(Error::InvalidModel("model has no states".into()));
        }
        if initial >= n {
            return Err(Error::InvalidModel(format!(
                "initial state {initial} out of range"
            )));
        }
        if trans.len() != n || labels.len() != n {
            return Err(Error::InvalidModel(
                "kernel sizes disagree with state count".into(),
            ));
        }
        let full = if ap.len() >= 64 {
            u64::MAX
        } else {
            (1u64 << ap.len()) - 1
        };
        for x in 0..n {
            if actions[x].is_empty() {
                return Err(Error::InvalidModel(format!(
                    "state {x} has no enabled action"
                )));
            }
            for (i, a) in actions[x].iter().enumerate() {
                if actions[x][..i].contains(a) {
                    return Err(Error::InvalidModel(format!(
                        "state {x} repeats action `{a}`"
                    )));
                }
            }
            if trans[x].len() != actions[x].len() {
                return Err(Error::InvalidModel(format!(
                    "state {x}: every action needs a transition row"
                )));
            }
            for (a, row) in trans[x].iter().enumerate() {
                check_dist(|| format!("P_C({x},{})", actions[x][a]), row)?;
                if let Some(&(to, _)) = row.iter().find(|(to, _)| *to >= n) {
                    return Err(Error::InvalidModel(format!(
                        "action `{}` at state {x} leads to unknown state {to}",
                        actions[x][a]
                    )));
                }
            }
            check_dist(|| format!("P_L({x})"), &labels[x])?;
            for (i, (l, _)) in labels[x].iter().enumerate() {
                if l.0 & !full != 0 {
                    return Err(Error::InvalidModel(format!(
                        "state {x} emits an undeclared proposition"
                    )));
                }
                if labels[x][..i].iter().any(|(m, _)| m == l) {
                    return Err(Error::InvalidModel(format!(
                        "state {x} lists a label-set twice"
                    )));
                }
            }
        }
        let m = Plmdp {
            ap,
            initial,
            actions,
            trans,
            labels,
        };
        let unreachable = m.reachable().iter().filter(|r| !**r).count();
        if unreachable > 0 {
            log::info!("{unreachable} model states are unreachable from the initial state");
        }
        Ok(m)
    }

    pub fn from_document(doc: PlmdpDocument) -> Result<Plmdp> {
        let ap = Alphabet::new(doc.ap.iter().cloned())
            .map_err(|e| Error::InvalidModel(e.to_string()))?;
        let n = doc.states;
        if doc.actions.len() != n {
            return Err(Error::InvalidModel(format!(
                "`actions` has {} rows for {n} states",
                doc.actions.len()
            )));
        }
        let mut trans: Vec<Vec<Option<Vec<(usize, f64)>>>> = doc
            .actions
            .iter()
            .map(|acts| vec![None; acts.len()])
            .collect();
        for t in &doc.trans {
            if t.x >= n {
                return Err(Error::InvalidModel(format!(
                    "transition from unknown state {}",
                    t.x
                )));
            }
            let a = doc.actions[t.x]
                .iter()
                .position(|a| *a == t.a)
                .ok_or_else(|| {
                    Error::InvalidModel(format!(
                        "action `{}` is not declared at state {}",
                        t.a, t.x
                    ))
                })?;
            if trans[t.x][a].is_some() {
                return Err(Error::InvalidModel(format!(
                    "duplicate row for ({}, {})",
                    t.x, t.a
                )));
            }
            trans[t.x][a] = Some(t.dist.iter().map(|s| (s.to, s.p)).collect());
        }
        let trans = trans
            .into_iter()
            .enumerate()
            .map(|(x, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(a, d)| {
                        d.ok_or_else(|| {
                            Error::InvalidModel(format!(
                                "no transition row for ({x}, {})",
                                doc.actions[x][a]
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;

        let mut labels: Vec<Option<Vec<(LabelSet, f64)>>> = vec![None; n];
        for l in &doc.labels {
            if l.x >= n {
                return Err(Error::InvalidModel(format!(
                    "labels for unknown state {}",
                    l.x
                )));
            }
            if labels[l.x].is_some() {
                return Err(Error::InvalidModel(format!(
                    "duplicate label row for state {}",
                    l.x
                )));
            }
            let dist = l
                .dist
                .iter()
                .map(|e| Ok((ap.label(e.set.iter())?, e.p)))
                .collect::<Result<Vec<_>>>()?;
            labels[l.x] = Some(dist);
        }
        let labels = labels
            .into_iter()
            .enumerate()
            .map(|(x, d)| {
                d.ok_or_else(|| Error::InvalidModel(format!("no label row for state {x}")))
            })
            .collect::<Result<Vec<_>>>()?;

        Plmdp::new(ap, doc.initial, doc.actions, trans, labels)
    }

    pub fn to_document(&self) -> PlmdpDocument {
        let mut trans = Vec::new();
        for x in 0..self.num_states() {
            for (a, row) in self.trans[x].iter().enumerate() {
                trans.push(TransDoc {
                    x,
                    a: self.actions[x][a].clone(),
                    dist: row.iter().map(|&(to, p)| SuccessorDoc { to, p }).collect(),
                });
            }
        }
        let labels = self
            .labels
            .iter()
            .enumerate()
            .map(|(x, d)| LabelDoc {
                x,
                dist: d
                    .iter()
                    .map(|&(l, p)| LabelEntryDoc {
                        set: self.ap.names_of(l),
                        p,
                    })
                    .collect(),
            })
            .collect();
        PlmdpDocument {
            states: self.num_states(),
            initial: self.initial,
            ap: self.ap.names().to_vec(),
            actions: self.actions.clone(),
            trans,
            labels,
        }
    }

    pub fn from_json(text: &str) -> Result<Plmdp> {
        Plmdp::from_document(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.ap
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn actions(&self, x: usize) -> &[String] {
        &self.actions[x]
    }

    pub fn num_actions(&self, x: usize) -> usize {
        self.actions[x].len()
    }

    pub fn action_index(&self, x: usize, name: &str) -> Option<usize> {
        self.actions[x].iter().position(|a| a == name)
    }

    pub fn transition(&self, x: usize, a: usize) -> &[(usize, f64)] {
        &self.trans[x][a]
    }

    pub fn label_dist(&self, x: usize) -> &[(LabelSet, f64)] {
        &self.labels[x]
    }

    /// Draws `x' ~ P_C(x, a, ·)`.
    pub fn sample_transition<R: Rng + ?Sized>(
        &self,
        x: usize,
        a: usize,
        rng: &mut R,
    ) -> Result<usize> {
        let row =
            self.trans
                .get(x)
                .and_then(|r| r.get(a))
                .ok_or_else(|| Error::ActionNotEnabled {
                    state: x.to_string(),
                    action: a.to_string(),
                })?;
        Ok(pick(row, rng.random::<f64>()))
    }

    /// Draws `ℓ ~ P_L(x, ·)`.
    pub fn sample_label<R: Rng + ?Sized>(&self, x: usize, rng: &mut R) -> LabelSet {
        pick(&self.labels[x], rng.random::<f64>())
    }

    /// States reachable from the initial state under some action sequence.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.num_states()];
        seen[self.initial] = true;
        let mut stack = vec![self.initial];
        while let Some(x) = stack.pop() {
            for row in &self.trans[x] {
                for &(to, p) in row {
                    if p > 0.0 && !seen[to] {
                        seen[to] = true;
                        stack.push(to);
                    }
                }
            }
        }
        seen
    }

    /// Order-independent view of the kernels, for semantic comparison.
    pub fn canonical(&self) -> CanonicalModel {
        let trans = (0..self.num_states())
            .flat_map(|x| {
                self.trans[x].iter().enumerate().map(move |(a, row)| {
                    let mut m = BTreeMap::new();
                    for &(to, p) in row {
                        *m.entry(to).or_insert(0.0) += p;
                    }
                    ((x, self.actions[x][a].clone()), m.into_iter().collect())
                })
            })
            .collect();
        let labels = self
            .labels
            .iter()
            .map(|d| {
                let mut names: Vec<(Vec<String>, f64)> =
                    d.iter().map(|&(l, p)| (self.ap.names_of(l), p)).collect();
                names.sort_by(|a, b| a.0.cmp(&b.0));
                names
            })
            .collect();
        CanonicalModel {
            initial: self.initial,
            ap: self.ap.names().to_vec(),
            trans,
            labels,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalModel {
    pub initial: usize,
    pub ap: Vec<String>,
    pub trans: BTreeMap<(usize, String), Vec<(usize, f64)>>,
    pub labels: Vec<Vec<(Vec<String>, f64)>>,
}

pub fn load_plmdp(text: &str) -> Result<Plmdp> {
    Plmdp::from_json(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Stream};

    fn chain() -> serde_json::Value {
        serde_json::json!({
            "states": 2, "initial": 0, "ap": ["a"],
            "actions": [["go"], ["go"]],
            "trans": [
                {"x": 0, "a": "go", "dist": [{"to": 1, "p": 1.0}]},
                {"x": 1, "a": "go", "dist": [{"to": 0, "p": 1.0}]}
            ],
            "labels": [
                {"x": 0, "dist": [{"set": [], "p": 1.0}]},
                {"x": 1, "dist": [{"set": ["a"], "p": 1.0}]}
            ]
        })
    }

    fn load(v: serde_json::Value) -> Result<Plmdp> {
        Plmdp::from_document(serde_json::from_value(v).unwrap())
    }

    #[test]
    fn loads_deterministic_chain() {
        let m = load(chain()).unwrap();
        assert_eq!(m.num_states(), 2);
        let mut rng = stream(1, Stream::Env);
        for _ in 0..10 {
            assert_eq!(m.sample_transition(0, 0, &mut rng).unwrap(), 1);
        }
        assert_eq!(m.sample_label(1, &mut rng), LabelSet(1));
        assert_eq!(m.sample_label(0, &mut rng), LabelSet::EMPTY);
    }

    #[test]
    fn rejects_short_row() {
        let mut v = chain();
        v["trans"][0]["dist"][0]["p"] = serde_json::json!(0.9);
        assert!(matches!(load(v), Err(Error::InvalidModel(m)) if m.contains("sums to")));
    }

    #[test]
    fn rejects_short_label_row() {
        let mut v = chain();
        v["labels"][1]["dist"][0]["p"] = serde_json::json!(0.5);
        assert!(load(v).is_err());
    }

    #[test]
    fn rejects_unknown_successor() {
        let mut v = chain();
        v["trans"][0]["dist"][0]["to"] = serde_json::json!(5);
        assert!(matches!(load(v), Err(Error::InvalidModel(m)) if m.contains("unknown state")));
    }

    #[test]
    fn rejects_missing_row_and_unknown_atom() {
        let mut v = chain();
        v["trans"].as_array_mut().unwrap().pop();
        assert!(load(v).is_err());
        let mut v = chain();
        v["labels"][1]["dist"][0]["set"] = serde_json::json!(["b"]);
        assert!(matches!(load(v), Err(Error::UnknownAtom(_))));
    }

    #[test]
    fn disabled_action_errors() {
        let m = load(chain()).unwrap();
        let mut rng = stream(1, Stream::Env);
        assert!(matches!(
            m.sample_transition(0, 3, &mut rng),
            Err(Error::ActionNotEnabled { .. })
        ));
    }

    #[test]
    fn json_roundtrip() {
        let m = load(chain()).unwrap();
        let back = Plmdp::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m.canonical(), back.canonical());
    }
}
