//! Atomic propositions and label-sets.
//!
//! A label-set is a subset of the alphabet stored as a bitmask, bit `i` set
//! when the `i`-th declared proposition holds.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Upper bound on the alphabet size; label-sets are 64-bit masks.
pub const MAX_PROPS: usize = 64;

#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct LabelSet(pub u64);

impl LabelSet {
    pub const EMPTY: LabelSet = LabelSet(0);

    pub fn contains(self, prop: usize) -> bool {
        prop < MAX_PROPS && self.0 >> prop & 1 == 1
    }

    pub fn with(self, prop: usize) -> LabelSet {
        LabelSet(self.0 | 1 << prop)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn props(self) -> impl Iterator<Item = usize> {
        (0..MAX_PROPS).filter(move |&i| self.contains(i))
    }
}

/// Ordered set of proposition names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Alphabet {
    names: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let names: Vec<String> = names.into_iter().map(Into::into).collect();
        if names.len() > MAX_PROPS {
            return Err(Error::InvalidArgument(format!(
                "at most {MAX_PROPS} atomic propositions are supported, got {}",
                names.len()
            )));
        }
        for (i, n) in names.iter().enumerate() {
            if !is_identifier(n) {
                return Err(Error::InvalidArgument(format!(
                    "`{n}` is not a valid proposition name"
                )));
            }
            if names[..i].contains(n) {
                return Err(Error::InvalidArgument(format!(
                    "duplicate proposition `{n}`"
                )));
            }
        }
        Ok(Alphabet { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index_of(name).is_some()
    }

    /// Builds a label-set from proposition names.
    pub fn label<I, S>(&self, names: I) -> Result<LabelSet>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        names.into_iter().try_fold(LabelSet::EMPTY, |acc, n| {
            let n = n.as_ref();
            self.index_of(n)
                .map(|i| acc.with(i))
                .ok_or_else(|| Error::UnknownAtom(n.to_string()))
        })
    }

    pub fn names_of(&self, label: LabelSet) -> Vec<String> {
        label
            .props()
            .filter_map(|i| self.names.get(i).cloned())
            .collect()
    }

    /// Every label-set over this alphabet, in mask order.
    pub fn all_labels(&self) -> impl Iterator<Item = LabelSet> {
        let n = self.names.len();
        assert!(n < 32, "enumerating 2^{n} label-sets");
        (0u64..1 << n).map(LabelSet)
    }

    /// Re-encodes a label-set of `self` over `target`, dropping propositions
    /// that `target` does not declare.
    pub fn project(&self, label: LabelSet, target: &Alphabet) -> LabelSet {
        label
            .props()
            .filter_map(|i| self.names.get(i).and_then(|n| target.index_of(n)))
            .fold(LabelSet::EMPTY, LabelSet::with)
    }

    pub fn display(&self, label: LabelSet) -> LabelDisplay<'_> {
        LabelDisplay { ap: self, label }
    }
}

pub struct LabelDisplay<'a> {
    ap: &'a Alphabet,
    label: LabelSet,
}

impl fmt::Display for LabelDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.ap.names_of(self.label).join(","))
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
        && !matches!(s, "X" | "U" | "F" | "G" | "true" | "false")
}
