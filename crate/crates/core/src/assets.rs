//! Automata and environment layouts bundled with the crate.

use crate::automaton::Ldba;
use crate::error::{Error, Result};

pub const GFP_LDBA: &str = include_str!("../assets/gfp.ldba");
pub const FGP_LDBA: &str = include_str!("../assets/fgp.ldba");
pub const PHI1_LDBA: &str = include_str!("../assets/phi1.ldba");
pub const PHI2_LDBA: &str = include_str!("../assets/phi2.ldba");

pub const GRID10_SPEC: &str = include_str!("../assets/grid10.spec");
pub const GRID5_SPEC: &str = include_str!("../assets/grid5.spec");
pub const GRID3_SPEC: &str = include_str!("../assets/grid3.spec");
pub const PACMAN5_SPEC: &str = include_str!("../assets/pacman5.spec");

pub const PHI1_FORMULA: &str = "F target1 & G F target2 & G F user & (!user U target2) & G !obs";
pub const PHI2_FORMULA: &str = "F ((food1 & F food2) | (food2 & F food1)) & G !ghost";
pub const GFP_FORMULA: &str = "G F p";
pub const FGP_FORMULA: &str = "F G p";

/// Shipped automata as `(name, formula, document)`.
pub const AUTOMATA: [(&str, &str, &str); 4] = [
    ("gfp", GFP_FORMULA, GFP_LDBA),
    ("fgp", FGP_FORMULA, FGP_LDBA),
    ("phi1", PHI1_FORMULA, PHI1_LDBA),
    ("phi2", PHI2_FORMULA, PHI2_LDBA),
];

fn stem(name: &str) -> &str {
    name.strip_suffix(".ldba")
        .or_else(|| name.strip_suffix(".spec"))
        .unwrap_or(name)
}

/// Document of a shipped automaton, by name with or without `.ldba`.
pub fn automaton_text(name: &str) -> Option<&'static str> {
    let n = stem(name);
    AUTOMATA.iter().find(|a| a.0 == n).map(|a| a.2)
}

pub fn automaton(name: &str) -> Result<Ldba> {
    let text = automaton_text(name)
        .ok_or_else(|| Error::InvalidArgument(format!("no shipped automaton named `{name}`")))?;
    Ldba::from_json(text)
}

/// Formula a shipped automaton was built for.
pub fn formula_of(name: &str) -> Option<&'static str> {
    let n = stem(name);
    AUTOMATA.iter().find(|a| a.0 == n).map(|a| a.1)
}

/// Shipped environment spec, by name with or without `.spec`.
pub fn env_spec_text(name: &str) -> Option<&'static str> {
    match stem(name) {
        "grid10" => Some(GRID10_SPEC),
        "grid5" => Some(GRID5_SPEC),
        "grid3" => Some(GRID3_SPEC),
        "pacman5" => Some(PACMAN5_SPEC),
        _ => None,
    }
}
