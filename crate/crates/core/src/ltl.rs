//! LTL formulas over atomic propositions and their evaluation on
//! ultimately-periodic (lasso) words.
//!
//! Concrete syntax: `true`, identifiers, `!`, `X`, `F`, `G` (prefix), `U`
//! (right-associative), `&`, `|`, and parentheses. Binding strength from
//! tightest to loosest is unary, `U`, `&`, `|`. `false` is accepted as `!true`.

use std::collections::BTreeSet;
use std::fmt;

use crate::alphabet::{is_identifier, Alphabet, LabelSet};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Formula {
    True,
    Atom(String),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Next(Box<Formula>),
    Until(Box<Formula>, Box<Formula>),
    Eventually(Box<Formula>),
    Always(Box<Formula>),
}

impl Formula {
    pub fn atom(name: impl Into<String>) -> Formula {
        Formula::Atom(name.into())
    }

    pub fn not(f: Formula) -> Formula {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Formula {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Formula {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn next(f: Formula) -> Formula {
        Formula::Next(Box::new(f))
    }

    pub fn until(a: Formula, b: Formula) -> Formula {
        Formula::Until(Box::new(a), Box::new(b))
    }

    pub fn eventually(f: Formula) -> Formula {
        Formula::Eventually(Box::new(f))
    }

    pub fn always(f: Formula) -> Formula {
        Formula::Always(Box::new(f))
    }

    /// Names of all atoms occurring in the formula.
    pub fn atoms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_atoms(&mut out);
        out
    }

    fn collect_atoms(&self, out: &mut BTreeSet<String>) {
        match self {
            Formula::True => {}
            Formula::Atom(a) => {
                out.insert(a.clone());
            }
            Formula::Not(f) | Formula::Next(f) | Formula::Eventually(f) | Formula::Always(f) => {
                f.collect_atoms(out)
            }
            Formula::And(a, b) | Formula::Or(a, b) | Formula::Until(a, b) => {
                a.collect_atoms(out);
                b.collect_atoms(out);
            }
        }
    }

    /// Rewrites `F`, `G` and `|` into the core grammar (`true`, atoms, `!`,
    /// `&`, `X`, `U`).
    pub fn desugar(&self) -> Formula {
        match self {
            Formula::True => Formula::True,
            Formula::Atom(a) => Formula::Atom(a.clone()),
            Formula::Not(f) => Formula::not(f.desugar()),
            Formula::Next(f) => Formula::next(f.desugar()),
            Formula::And(a, b) => Formula::and(a.desugar(), b.desugar()),
            Formula::Until(a, b) => Formula::until(a.desugar(), b.desugar()),
            Formula::Or(a, b) => Formula::not(Formula::and(
                Formula::not(a.desugar()),
                Formula::not(b.desugar()),
            )),
            Formula::Eventually(f) => Formula::until(Formula::True, f.desugar()),
            Formula::Always(f) => {
                Formula::not(Formula::until(Formula::True, Formula::not(f.desugar())))
            }
        }
    }

    /// Top-level conjuncts, left to right.
    pub fn conjuncts(&self) -> Vec<&Formula> {
        match self {
            Formula::And(a, b) => {
                let mut v = a.conjuncts();
                v.extend(b.conjuncts());
                v
            }
            f => vec![f],
        }
    }

    pub fn is_propositional(&self) -> bool {
        match self {
            Formula::True | Formula::Atom(_) => true,
            Formula::Not(f) => f.is_propositional(),
            Formula::And(a, b) | Formula::Or(a, b) => a.is_propositional() && b.is_propositional(),
            Formula::Next(_) | Formula::Until(..) | Formula::Eventually(_) | Formula::Always(_) => {
                false
            }
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Formula::Or(..) => 1,
            Formula::And(..) => 2,
            Formula::Until(..) => 3,
            Formula::Not(_) | Formula::Next(_) | Formula::Eventually(_) | Formula::Always(_) => 4,
            Formula::True | Formula::Atom(_) => 5,
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn child(out: &mut fmt::Formatter<'_>, c: &Formula, parens: bool) -> fmt::Result {
            if parens {
                write!(out, "({c})")
            } else {
                write!(out, "{c}")
            }
        }
        let p = self.precedence();
        match self {
            Formula::True => write!(f, "true"),
            Formula::Atom(a) => write!(f, "{a}"),
            Formula::Not(c) | Formula::Next(c) | Formula::Eventually(c) | Formula::Always(c) => {
                let op = match self {
                    Formula::Not(_) => "!",
                    Formula::Next(_) => "X ",
                    Formula::Eventually(_) => "F ",
                    _ => "G ",
                };
                write!(f, "{op}")?;
                child(f, c, c.precedence() < p)
            }
            // `&` and `|` associate to the left, `U` to the right.
            Formula::And(a, b) | Formula::Or(a, b) => {
                child(f, a, a.precedence() < p)?;
                write!(f, " {} ", if p == 1 { "|" } else { "&" })?;
                child(f, b, b.precedence() <= p)
            }
            Formula::Until(a, b) => {
                child(f, a, a.precedence() <= p)?;
                write!(f, " U ")?;
                child(f, b, b.precedence() < p)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    True,
    False,
    Ident(String),
    Not,
    And,
    Or,
    Next,
    Until,
    Eventually,
    Always,
    LParen,
    RParen,
}

fn tokenize(text: &str) -> Result<Vec<(usize, Token)>> {
    let mut out = Vec::new();
    let bytes = text.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            b'!' => Some(Token::Not),
            b'&' => Some(Token::And),
            b'|' => Some(Token::Or),
            b'(' => Some(Token::LParen),
            b')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(t) = single {
            out.push((i, t));
            i += 1;
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let tok = match &text[start..i] {
                "true" => Token::True,
                "false" => Token::False,
                "X" => Token::Next,
                "U" => Token::Until,
                "F" => Token::Eventually,
                "G" => Token::Always,
                id => Token::Ident(id.to_string()),
            };
            out.push((start, tok));
            continue;
        }
        let ch = text[i..].chars().next().unwrap_or('?');
        return Err(Error::Parse {
            pos: i,
            msg: format!("unknown token `{ch}`"),
        });
    }
    Ok(out)
}

struct Parser {
    tokens: Vec<(usize, Token)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.tokens.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse {
            pos: self.offset(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, t: &Token) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn or(&mut self) -> Result<Formula> {
        let mut lhs = self.and()?;
        while self.eat(&Token::Or) {
            lhs = Formula::or(lhs, self.and()?);
        }
        Ok(lhs)
    }

    fn and(&mut self) -> Result<Formula> {
        let mut lhs = self.until()?;
        while self.eat(&Token::And) {
            lhs = Formula::and(lhs, self.until()?);
        }
        Ok(lhs)
    }

    fn until(&mut self) -> Result<Formula> {
        let lhs = self.unary()?;
        if self.eat(&Token::Until) {
            return Ok(Formula::until(lhs, self.until()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Formula> {
        let Some(tok) = self.peek().cloned() else {
            return self.error("unexpected end of input");
        };
        self.pos += 1;
        match tok {
            Token::Not => Ok(Formula::not(self.unary()?)),
            Token::Next => Ok(Formula::next(self.unary()?)),
            Token::Eventually => Ok(Formula::eventually(self.unary()?)),
            Token::Always => Ok(Formula::always(self.unary()?)),
            Token::True => Ok(Formula::True),
            Token::False => Ok(Formula::not(Formula::True)),
            Token::Ident(id) => Ok(Formula::Atom(id)),
            Token::LParen => {
                let inner = self.or()?;
                if !self.eat(&Token::RParen) {
                    return self.error("expected `)`");
                }
                Ok(inner)
            }
            other => {
                self.pos -= 1;
                self.error(format!("unexpected `{}`", token_text(&other)))
            }
        }
    }
}

fn token_text(t: &Token) -> &str {
    match t {
        Token::True => "true",
        Token::False => "false",
        Token::Ident(s) => s,
        Token::Not => "!",
        Token::And => "&",
        Token::Or => "|",
        Token::Next => "X",
        Token::Until => "U",
        Token::Eventually => "F",
        Token::Always => "G",
        Token::LParen => "(",
        Token::RParen => ")",
    }
}

pub fn parse_ltl(text: &str) -> Result<Formula> {
    let tokens = tokenize(text)?;
    let mut p = Parser {
        tokens,
        pos: 0,
        end: text.len(),
    };
    let f = p.or()?;
    if p.pos != p.tokens.len() {
        return p.error(format!("unexpected `{}`", token_text(p.peek().unwrap())));
    }
    Ok(f)
}

impl std::str::FromStr for Formula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        parse_ltl(s)
    }
}

/// The infinite word `prefix · period^ω` over label-sets of `ap`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lasso {
    ap: Alphabet,
    prefix: Vec<LabelSet>,
    period: Vec<LabelSet>,
}

impl Lasso {
    pub fn new(ap: Alphabet, prefix: Vec<LabelSet>, period: Vec<LabelSet>) -> Result<Self> {
        if period.is_empty() {
            return Err(Error::InvalidArgument(
                "lasso period must be non-empty".into(),
            ));
        }
        Ok(Lasso { ap, prefix, period })
    }

    /// Builds a lasso from label-sets given as proposition names.
    pub fn from_names(ap: &Alphabet, prefix: &[&[&str]], period: &[&[&str]]) -> Result<Self> {
        let conv = |xs: &[&[&str]]| -> Result<Vec<LabelSet>> {
            xs.iter().map(|l| ap.label(l.iter().copied())).collect()
        };
        Lasso::new(ap.clone(), conv(prefix)?, conv(period)?)
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.ap
    }

    pub fn prefix(&self) -> &[LabelSet] {
        &self.prefix
    }

    pub fn period(&self) -> &[LabelSet] {
        &self.period
    }

    /// Number of distinct positions: `|prefix| + |period|`.
    pub fn len(&self) -> usize {
        self.prefix.len() + self.period.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn letter(&self, pos: usize) -> LabelSet {
        if pos < self.prefix.len() {
            self.prefix[pos]
        } else {
            self.period[(pos - self.prefix.len()) % self.period.len()]
        }
    }

    /// Successor position; the last position wraps to the loop start.
    pub fn succ(&self, pos: usize) -> usize {
        if pos + 1 < self.len() {
            pos + 1
        } else {
            self.prefix.len()
        }
    }
}

/// Decides `prefix · period^ω ⊨ f`.
pub fn holds_on_lasso(f: &Formula, w: &Lasso) -> Result<bool> {
    for a in f.atoms() {
        if !w.ap.contains(&a) {
            return Err(Error::UnknownAtom(a));
        }
    }
    Ok(eval(f, w)[0])
}

fn eval(f: &Formula, w: &Lasso) -> Vec<bool> {
    let n = w.len();
    let succ: Vec<usize> = (0..n).map(|i| w.succ(i)).collect();
    match f {
        Formula::True => vec![true; n],
        Formula::Atom(a) => {
            let idx = w.ap.index_of(a).expect("atoms checked by caller");
            (0..n).map(|i| w.letter(i).contains(idx)).collect()
        }
        Formula::Not(g) => eval(g, w).into_iter().map(|b| !b).collect(),
        Formula::And(a, b) => zip(eval(a, w), eval(b, w), |x, y| x && y),
        Formula::Or(a, b) => zip(eval(a, w), eval(b, w), |x, y| x || y),
        Formula::Next(g) => {
            let v = eval(g, w);
            succ.iter().map(|&s| v[s]).collect()
        }
        Formula::Until(a, b) => {
            let (va, vb) = (eval(a, w), eval(b, w));
            fixpoint(false, &succ, |i, next| vb[i] || (va[i] && next))
        }
        Formula::Eventually(g) => {
            let v = eval(g, w);
            fixpoint(false, &succ, |i, next| v[i] || next)
        }
        Formula::Always(g) => {
            let v = eval(g, w);
            fixpoint(true, &succ, |i, next| v[i] && next)
        }
    }
}

fn zip(a: Vec<bool>, b: Vec<bool>, op: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    a.into_iter().zip(b).map(|(x, y)| op(x, y)).collect()
}

/// Iterates `v[i] = step(i, v[succ(i)])` from a constant start until stable.
/// Least fixpoint from `false`, greatest from `true`; the lattice has
/// `n + 1` levels so at most `n + 1` rounds are needed.
fn fixpoint(init: bool, succ: &[usize], step: impl Fn(usize, bool) -> bool) -> Vec<bool> {
    let n = succ.len();
    let mut v = vec![init; n];
    for _ in 0..=n {
        let next: Vec<bool> = (0..n).map(|i| step(i, v[succ[i]])).collect();
        if next == v {
            break;
        }
        v = next;
    }
    v
}

/// Checks that `name` could be used as an atom.
pub fn valid_atom_name(name: &str) -> bool {
    is_identifier(name)
}
