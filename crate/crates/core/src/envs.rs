//! Model constructors: noisy gridworlds, a ghost-chase Pacman board, the
//! two-branch counterexample and seeded random models.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::alphabet::{Alphabet, LabelSet};
use crate::assets;
use crate::automaton::Ldba;
use crate::error::{Error, Result};
use crate::plmdp::Plmdp;

/// Unit moves in tie-break order, then staying put.
const MOVES: [(&str, i64, i64); 5] = [
    ("up", 0, 1),
    ("right", 1, 0),
    ("down", 0, -1),
    ("left", -1, 0),
    ("none", 0, 0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelWeight {
    pub set: Vec<String>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellLabels {
    pub at: [usize; 2],
    pub labels: Vec<LabelWeight>,
}

fn default_noise() -> f64 {
    0.8
}

/// Gridworld layout. Cells not listed emit the empty label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    pub start: [usize; 2],
    /// Probability that a move goes where it was aimed.
    #[serde(default = "default_noise")]
    pub noise: f64,
    pub ap: Vec<String>,
    #[serde(default)]
    pub cells: Vec<CellLabels>,
}

impl GridSpec {
    pub fn from_json(text: &str) -> Result<GridSpec> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn shipped(name: &str) -> Result<GridSpec> {
        match assets::env_spec_text(name) {
            Some(t) if name.starts_with("grid") => GridSpec::from_json(t),
            _ => Err(Error::InvalidSpec(format!(
                "no shipped gridworld named `{name}`"
            ))),
        }
    }

    pub fn cell_index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn cell_of(&self, state: usize) -> (usize, usize) {
        (state % self.width, state / self.width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridCase {
    /// Deterministic moves.
    I,
    /// Moves slip with the layout's noise.
    II,
}

impl FromStr for GridCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "i" | "1" => Ok(GridCase::I),
            "II" | "ii" | "2" => Ok(GridCase::II),
            other => Err(Error::InvalidArgument(format!(
                "invalid case tag `{other}`"
            ))),
        }
    }
}

/// Grid action names: each move with and without taking a picture.
pub fn grid_actions() -> Vec<String> {
    MOVES
        .iter()
        .flat_map(|(m, _, _)| [m.to_string(), format!("{m}+photo")])
        .collect()
}

fn step_cell(w: usize, h: usize, x: usize, y: usize, dx: i64, dy: i64) -> (usize, usize) {
    let nx = x as i64 + dx;
    let ny = y as i64 + dy;
    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
        (x, y)
    } else {
        (nx as usize, ny as usize)
    }
}

fn push_mass(row: &mut Vec<(usize, f64)>, to: usize, p: f64) {
    if p <= 0.0 {
        return;
    }
    match row.iter_mut().find(|(t, _)| *t == to) {
        Some(e) => e.1 += p,
        None => row.push((to, p)),
    }
}

pub fn make_gridworld(case: GridCase, spec: &GridSpec) -> Result<Plmdp> {
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return Err(Error::InvalidSpec(
            "grid must have at least one cell".into(),
        ));
    }
    if !(spec.noise > 0.0 && spec.noise <= 1.0) {
        return Err(Error::InvalidSpec(format!(
            "noise {} outside (0,1]",
            spec.noise
        )));
    }
    if spec.start[0] >= w || spec.start[1] >= h {
        return Err(Error::InvalidSpec("start cell outside the grid".into()));
    }
    let ap =
        Alphabet::new(spec.ap.iter().cloned()).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    let n = w * h;
    let mut labels: Vec<Option<Vec<(LabelSet, f64)>>> = vec![None; n];
    for c in &spec.cells {
        let [x, y] = c.at;
        if x >= w || y >= h {
            return Err(Error::InvalidSpec(format!(
                "cell ({x},{y}) outside the grid"
            )));
        }
        let i = spec.cell_index(x, y);
        if labels[i].is_some() {
            return Err(Error::InvalidSpec(format!("cell ({x},{y}) listed twice")));
        }
        labels[i] = Some(
            c.labels
                .iter()
                .map(|lw| Ok((ap.label(lw.set.iter())?, lw.p)))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let labels: Vec<Vec<(LabelSet, f64)>> = labels
        .into_iter()
        .map(|l| l.unwrap_or_else(|| vec![(LabelSet::EMPTY, 1.0)]))
        .collect();

    let noise = match case {
        GridCase::I => 1.0,
        GridCase::II => spec.noise,
    };
    let actions = grid_actions();
    let mut trans = Vec::with_capacity(n);
    for s in 0..n {
        let (x, y) = spec.cell_of(s);
        let mut rows = Vec::with_capacity(actions.len());
        for (mi, &(_, dx, dy)) in MOVES.iter().enumerate() {
            let mut row = Vec::new();
            let (tx, ty) = step_cell(w, h, x, y, dx, dy);
            push_mass(&mut row, spec.cell_index(tx, ty), noise);
            // Slips spread evenly over the unit moves other than the intended one.
            let others: Vec<usize> = (0..4).filter(|&k| k != mi).collect();
            for &k in &others {
                let (_, ox, oy) = MOVES[k];
                let (sx, sy) = step_cell(w, h, x, y, ox, oy);
                push_mass(
                    &mut row,
                    spec.cell_index(sx, sy),
                    (1.0 - noise) / others.len() as f64,
                );
            }
            rows.push(row.clone());
            rows.push(row);
        }
        trans.push(rows);
    }
    let initial = spec.cell_index(spec.start[0], spec.start[1]);
    Plmdp::new(ap, initial, vec![actions; n], trans, labels)
        .map_err(|e| Error::InvalidSpec(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Food {
    pub at: [usize; 2],
    /// Probability the food is observed when Pacman stands on it.
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacmanSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub walls: Vec<[usize; 2]>,
    pub pacman: [usize; 2],
    pub ghosts: Vec<[usize; 2]>,
    pub food1: Food,
    pub food2: Food,
    /// Probability a ghost chases rather than wanders.
    pub p_g: f64,
}

impl PacmanSpec {
    pub fn from_json(text: &str) -> Result<PacmanSpec> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn shipped(name: &str) -> Result<PacmanSpec> {
        match assets::env_spec_text(name) {
            Some(t) if name.starts_with("pacman") => PacmanSpec::from_json(t),
            _ => Err(Error::InvalidSpec(format!(
                "no shipped Pacman layout named `{name}`"
            ))),
        }
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn cell_index_of(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    /// State index of Pacman at `pac` with ghosts at `ghosts` (cell indices).
    pub fn state_index(&self, pac: usize, ghosts: &[usize]) -> usize {
        let c = self.cells();
        ghosts.iter().rev().fold(0, |acc, &g| acc * c + g) * c + pac
    }

    /// Inverse of [`PacmanSpec::state_index`].
    pub fn decode(&self, mut s: usize) -> (usize, Vec<usize>) {
        let c = self.cells();
        let pac = s % c;
        s /= c;
        let ghosts = (0..self.ghosts.len())
            .map(|_| {
                let g = s % c;
                s /= c;
                g
            })
            .collect();
        (pac, ghosts)
    }

    fn is_wall(&self, cell: usize) -> bool {
        self.walls.iter().any(|&[x, y]| y * self.width + x == cell)
    }

    fn neighbour(&self, cell: usize, k: usize) -> Option<usize> {
        let (x, y) = (cell % self.width, cell / self.width);
        let (_, dx, dy) = MOVES[k];
        let nx = x as i64 + dx;
        let ny = y as i64 + dy;
        if nx < 0 || ny < 0 || nx >= self.width as i64 || ny >= self.height as i64 {
            return None;
        }
        let t = ny as usize * self.width + nx as usize;
        (!self.is_wall(t)).then_some(t)
    }

    fn manhattan(&self, a: usize, b: usize) -> usize {
        let (ax, ay) = (a % self.width, a / self.width);
        let (bx, by) = (b % self.width, b / self.width);
        ax.abs_diff(bx) + ay.abs_diff(by)
    }

    /// Chase move of a ghost toward `target`: the first unit move, in
    /// up/right/down/left order, that strictly shortens the Manhattan
    /// distance; `None` when no such move is legal.
    pub fn chase_move(&self, ghost: usize, target: usize) -> Option<usize> {
        let d = self.manhattan(ghost, target);
        (0..4)
            .filter_map(|k| self.neighbour(ghost, k))
            .find(|&t| self.manhattan(t, target) < d)
    }

    /// Distribution of one ghost's next cell.
    pub fn ghost_moves(&self, ghost: usize, target: usize) -> Vec<(usize, f64)> {
        let legal: Vec<usize> = (0..4).filter_map(|k| self.neighbour(ghost, k)).collect();
        let mut out = Vec::new();
        push_mass(
            &mut out,
            self.chase_move(ghost, target).unwrap_or(ghost),
            self.p_g,
        );
        if legal.is_empty() {
            push_mass(&mut out, ghost, 1.0 - self.p_g);
        } else {
            for &t in &legal {
                push_mass(&mut out, t, (1.0 - self.p_g) / legal.len() as f64);
            }
        }
        out
    }
}

pub const PACMAN_AP: [&str; 4] = ["food1", "food2", "ghost", "neutral"];

pub fn make_pacman(spec: &PacmanSpec) -> Result<Plmdp> {
    let bad = |m: String| Err(Error::InvalidSpec(m));
    let (w, h) = (spec.width, spec.height);
    if w == 0 || h == 0 {
        return bad("board must have at least one cell".into());
    }
    if !(0.0..=1.0).contains(&spec.p_g) {
        return bad(format!("p_g = {} outside [0,1]", spec.p_g));
    }
    if spec.ghosts.is_empty() {
        return bad("at least one ghost is required".into());
    }
    let cell = |[x, y]: [usize; 2], what: &str| -> Result<usize> {
        if x >= w || y >= h {
            return Err(Error::InvalidSpec(format!(
                "{what} at ({x},{y}) is outside the board"
            )));
        }
        let c = y * w + x;
        if spec.is_wall(c) {
            return Err(Error::InvalidSpec(format!(
                "{what} at ({x},{y}) is on a wall"
            )));
        }
        Ok(c)
    };
    for &[x, y] in &spec.walls {
        if x >= w || y >= h {
            return bad(format!("wall at ({x},{y}) is outside the board"));
        }
    }
    let pac0 = cell(spec.pacman, "pacman")?;
    let ghosts0 = spec
        .ghosts
        .iter()
        .map(|&g| cell(g, "ghost"))
        .collect::<Result<Vec<_>>>()?;
    let food1 = cell(spec.food1.at, "food1")?;
    let food2 = cell(spec.food2.at, "food2")?;
    if food1 == food2 {
        return bad("food1 and food2 share a cell".into());
    }
    for f in [&spec.food1, &spec.food2] {
        if !(0.0..=1.0).contains(&f.p) {
            return bad(format!(
                "food observation probability {} outside [0,1]",
                f.p
            ));
        }
    }

    let ap = Alphabet::new(PACMAN_AP).expect("static alphabet");
    let lbl = |name: &str| ap.label([name]).expect("static label");
    let c = spec.cells();
    let k = spec.ghosts.len();
    let n = c.pow(k as u32 + 1);
    let actions: Vec<String> = MOVES.iter().map(|m| m.0.to_string()).collect();

    let mut trans = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for s in 0..n {
        let (pac, ghosts) = spec.decode(s);
        let ghost_dists: Vec<Vec<(usize, f64)>> =
            ghosts.iter().map(|&g| spec.ghost_moves(g, pac)).collect();
        let mut rows = Vec::with_capacity(MOVES.len());
        for k_move in 0..MOVES.len() {
            let next_pac = if k_move == 4 {
                pac
            } else {
                spec.neighbour(pac, k_move).unwrap_or(pac)
            };
            let mut combos: Vec<(Vec<usize>, f64)> = vec![(Vec::new(), 1.0)];
            for dist in &ghost_dists {
                combos = combos
                    .iter()
                    .flat_map(|(gs, p)| {
                        dist.iter().map(move |&(g, q)| {
                            let mut v = gs.clone();
                            v.push(g);
                            (v, p * q)
                        })
                    })
                    .collect();
            }
            let mut row = Vec::new();
            for (gs, p) in combos {
                push_mass(&mut row, spec.state_index(next_pac, &gs), p);
            }
            rows.push(row);
        }
        trans.push(rows);

        let dist = if ghosts.contains(&pac) {
            vec![(lbl("ghost"), 1.0)]
        } else if pac == food1 || pac == food2 {
            let (name, f) = if pac == food1 {
                ("food1", &spec.food1)
            } else {
                ("food2", &spec.food2)
            };
            let mut d = vec![(lbl(name), f.p)];
            if f.p < 1.0 {
                d.push((LabelSet::EMPTY, 1.0 - f.p));
            }
            d
        } else {
            vec![(lbl("neutral"), 1.0)]
        };
        labels.push(dist);
    }
    let initial = spec.state_index(pac0, &ghosts0);
    Plmdp::new(ap, initial, vec![actions; n], trans, labels)
        .map_err(|e| Error::InvalidSpec(e.to_string()))
}

/// Six-state model where `right` gambles on a state that emits `p` forever
/// and `left` enters a three-cycle emitting `p` once per lap, paired with
/// the `G F p` automaton.
pub fn make_counterexample(nu: f64) -> Result<(Plmdp, Ldba)> {
    if !(0.0..=1.0).contains(&nu) {
        return Err(Error::InvalidArgument(format!("ν = {nu} outside [0,1]")));
    }
    let ap = Alphabet::new(["p", "u"])?;
    let p = LabelSet(1);
    let u = LabelSet(2);
    let one = |to: usize| vec![vec![(to, 1.0)]];
    let mut right: Vec<(usize, f64)> = Vec::new();
    push_mass(&mut right, 1, 1.0 - nu);
    push_mass(&mut right, 2, nu);
    let trans = vec![
        vec![right, vec![(3, 1.0)]],
        one(1),
        one(2),
        one(4),
        one(5),
        one(3),
    ];
    let actions = vec![
        vec!["right".to_string(), "left".to_string()],
        vec!["a".to_string()],
        vec!["a".to_string()],
        vec!["a".to_string()],
        vec!["a".to_string()],
        vec!["a".to_string()],
    ];
    let labels = [u, p, u, u, u, p].iter().map(|&l| vec![(l, 1.0)]).collect();
    let model = Plmdp::new(ap, 0, actions, trans, labels)?;
    Ok((model, assets::automaton("gfp")?))
}

/// Seeded random model. Proposition 0 is named `p`, the rest `a1`, `a2`, ….
/// Every state has between one and `n_actions` actions, each with two or
/// three successors, and emits one or two label-sets, about a third of
/// which contain `p`. About a third of the non-initial states are absorbing.
pub fn random_plmdp(seed: u64, n_states: usize, n_actions: usize, n_props: usize) -> Result<Plmdp> {
    if n_states == 0 || n_actions == 0 || n_props == 0 || n_props > 16 {
        return Err(Error::InvalidArgument(
            "need n_states, n_actions ≥ 1 and 1 ≤ n_props ≤ 16".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names: Vec<String> = (0..n_props)
        .map(|i| {
            if i == 0 {
                "p".to_string()
            } else {
                format!("a{i}")
            }
        })
        .collect();
    let ap = Alphabet::new(names)?;
    let weights = |rng: &mut ChaCha8Rng, k: usize| -> Vec<f64> {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut w: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let head: f64 = w[..k - 1].iter().sum();
        w[k - 1] = 1.0 - head;
        w
    };
    let mut actions = Vec::with_capacity(n_states);
    let mut trans = Vec::with_capacity(n_states);
    let mut labels = Vec::with_capacity(n_states);
    for _ in 0..n_states {
        let na = rng.random_range(1..=n_actions);
        actions.push((0..na).map(|a| format!("a{a}")).collect());
        let mut rows = Vec::with_capacity(na);
        let x = trans.len();
        if x > 0 && rng.random_bool(0.35) {
            rows = vec![vec![(x, 1.0)]; na];
        }
        for _ in rows.len()..na {
            let k = rng.random_range(2.min(n_states)..=3.min(n_states));
            let mut succ: Vec<usize> = Vec::with_capacity(k);
            while succ.len() < k {
                let t = rng.random_range(0..n_states);
                if !succ.contains(&t) {
                    succ.push(t);
                }
            }
            rows.push(succ.into_iter().zip(weights(&mut rng, k)).collect());
        }
        trans.push(rows);
        let k = rng.random_range(1..=2.min(1 << n_props));
        let mut sets: Vec<LabelSet> = Vec::with_capacity(k);
        while sets.len() < k {
            let mut l = LabelSet(rng.random_range(0..1u64 << n_props) & !1);
            if rng.random_bool(0.35) {
                l = l.with(0);
            }
            if !sets.contains(&l) {
                sets.push(l);
            }
        }
        labels.push(sets.into_iter().zip(weights(&mut rng, k)).collect());
    }
    Plmdp::new(ap, 0, actions, trans, labels)
}
