//! Deterministic, epoch-type gridworld mazes.
//!
//! The agent walks on a grid with four moves. Bumping into a wall or the
//! boundary keeps it in place. The goal is absorbing, and an epoch yields a
//! single reward on first arrival. Every epoch lasts exactly `M` steps and
//! then the environment is reset to the start cell.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interaction::{Action, Alphabets, Percept};

/// Largest sequence space [`enumerate_rewarding`] will walk.
pub const ENUMERATION_GUARD: u128 = 1 << 24;

pub const ACTION_NAMES: [&str; 4] = ["R", "U", "L", "D"];
pub const RIGHT: Action = Action(0);
pub const UP: Action = Action(1);
pub const LEFT: Action = Action(2);
pub const DOWN: Action = Action(3);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub x: u32,
    pub y: u32,
}

impl Cell {
    pub const fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridMaze {
    pub width: u32,
    pub height: u32,
    walls: BTreeSet<(Cell, Cell)>,
    pub start: Cell,
    pub goal: Cell,
    pub episode_length: usize,
}

impl GridMaze {
    pub fn new(
        width: u32,
        height: u32,
        walls: impl IntoIterator<Item = (Cell, Cell)>,
        start: Cell,
        goal: Cell,
        episode_length: usize,
    ) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidMaze("width and height must be positive".into()));
        }
        if episode_length == 0 {
            return Err(Error::InvalidMaze("episode length must be positive".into()));
        }
        let in_bounds = |c: Cell| c.x < width && c.y < height;
        if !in_bounds(start) || !in_bounds(goal) {
            return Err(Error::InvalidMaze("start and goal must be in bounds".into()));
        }
        if start == goal {
            return Err(Error::InvalidMaze("start and goal must differ".into()));
        }
        let mut set = BTreeSet::new();
        for (a, b) in walls {
            if !in_bounds(a) || !in_bounds(b) {
                return Err(Error::InvalidMaze(format!("wall {a}-{b} is out of bounds")));
            }
            if a.x.abs_diff(b.x) + a.y.abs_diff(b.y) != 1 {
                return Err(Error::InvalidMaze(format!("wall {a}-{b} joins non-adjacent cells")));
            }
            set.insert(if a <= b { (a, b) } else { (b, a) });
        }
        Ok(Self { width, height, walls: set, start, goal, episode_length })
    }

    pub fn is_blocked(&self, a: Cell, b: Cell) -> bool {
        let key = if a <= b { (a, b) } else { (b, a) };
        self.walls.contains(&key)
    }

    pub fn walls(&self) -> impl Iterator<Item = &(Cell, Cell)> {
        self.walls.iter()
    }

    pub fn n_cells(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// A maze together with its alphabets, transition and percept rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvSpec {
    pub name: String,
    maze: GridMaze,
    alphabets: Alphabets,
}

impl EnvSpec {
    pub fn new(name: impl Into<String>, maze: GridMaze) -> Result<Self> {
        let percepts = (0..maze.n_cells() as u32).map(Percept).collect();
        let alphabets = Alphabets::new(percepts, ACTION_NAMES.iter().map(|s| s.to_string()).collect())?;
        Ok(Self { name: name.into(), maze, alphabets })
    }

    pub fn maze(&self) -> &GridMaze {
        &self.maze
    }

    pub fn alphabets(&self) -> &Alphabets {
        &self.alphabets
    }

    pub fn n_actions(&self) -> usize {
        self.alphabets.n_actions()
    }

    pub fn episode_length(&self) -> usize {
        self.maze.episode_length
    }

    /// N = |A|^M, or `None` if it does not fit in a `u128`.
    pub fn sequence_space(&self) -> Option<u128> {
        (self.n_actions() as u128).checked_pow(self.episode_length() as u32)
    }

    /// Total, deterministic move rule.
    pub fn transition(&self, cell: Cell, action: Action) -> Cell {
        let m = &self.maze;
        let target = match action {
            RIGHT if cell.x + 1 < m.width => Cell::new(cell.x + 1, cell.y),
            UP if cell.y + 1 < m.height => Cell::new(cell.x, cell.y + 1),
            LEFT if cell.x > 0 => Cell::new(cell.x - 1, cell.y),
            DOWN if cell.y > 0 => Cell::new(cell.x, cell.y - 1),
            _ => return cell,
        };
        if m.is_blocked(cell, target) {
            cell
        } else {
            target
        }
    }

    /// Cell-identity percepts.
    pub fn percept_of(&self, cell: Cell) -> Percept {
        Percept(cell.y * self.maze.width + cell.x)
    }

    pub fn start_percept(&self) -> Percept {
        self.percept_of(self.maze.start)
    }

    pub fn initial_state(&self) -> EnvState {
        EnvState {
            cell: self.maze.start,
            step: 0,
            actions: Vec::with_capacity(self.episode_length()),
            rewarded: false,
        }
    }

    /// One interaction step. The action is appended to the environment's
    /// own action store.
    pub fn step(&self, state: &mut EnvState, action: Action) -> Result<StepOutcome> {
        if state.step >= self.episode_length() {
            return Err(Error::EpochOverflow { episode_length: self.episode_length() });
        }
        if action.index() >= self.n_actions() {
            return Err(Error::UnknownAction(action.index()));
        }
        if state.cell != self.maze.goal {
            state.cell = self.transition(state.cell, action);
        }
        let reward = u8::from(state.cell == self.maze.goal && !state.rewarded);
        state.rewarded |= reward == 1;
        state.step += 1;
        state.actions.push(action);
        Ok(StepOutcome { percept: self.percept_of(state.cell), reward })
    }

    /// Epoch reset: back to the start cell with an empty action store.
    pub fn reset(&self, state: &mut EnvState) {
        state.cell = self.maze.start;
        state.step = 0;
        state.actions.clear();
        state.rewarded = false;
    }

    /// Replays `seq` from reset; percepts s_2..s_{M+1} and per-step rewards.
    pub fn replay(&self, seq: &[Action]) -> Result<Vec<StepOutcome>> {
        if seq.len() != self.episode_length() {
            return Err(Error::SequenceLength { expected: self.episode_length(), got: seq.len() });
        }
        let mut state = self.initial_state();
        seq.iter().map(|&a| self.step(&mut state, a)).collect()
    }

    /// Reward predicate: true iff `seq` reaches the goal at or before step M.
    pub fn lambda(&self, seq: &[Action]) -> Result<bool> {
        Ok(self.replay(seq)?.iter().any(|o| o.reward == 1))
    }

    /// Reward predicate over sequence ranks (base-|A|, first action most
    /// significant).
    pub fn lambda_of_rank(&self, rank: usize) -> Result<bool> {
        self.lambda(&decode_sequence(rank, self.n_actions(), self.episode_length()))
    }

    /// Λ for every rank, subject to the enumeration guard.
    pub fn reward_table(&self) -> Result<Vec<bool>> {
        let n = self.guarded_size()?;
        (0..n).map(|rank| self.lambda_of_rank(rank)).collect()
    }

    pub(crate) fn guarded_size(&self) -> Result<usize> {
        let size = self.sequence_space().unwrap_or(u128::MAX);
        if size > ENUMERATION_GUARD {
            return Err(Error::EnumerationGuard { size, guard: ENUMERATION_GUARD });
        }
        Ok(size as usize)
    }

    pub fn format_sequence(&self, seq: &[Action]) -> String {
        seq.iter().map(|&a| self.alphabets.action_name(a)).collect::<Vec<_>>().join("")
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let file: MazeFile = toml::from_str(&text)?;
        let fallback = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        file.into_spec(fallback)
    }

    pub fn to_file(&self) -> MazeFile {
        let m = &self.maze;
        MazeFile {
            name: Some(self.name.clone()),
            width: m.width,
            height: m.height,
            start: [m.start.x, m.start.y],
            goal: [m.goal.x, m.goal.y],
            episode_length: m.episode_length,
            walls: m.walls().map(|(a, b)| [[a.x, a.y], [b.x, b.y]]).collect(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(&self.to_file())?)
    }
}

/// On-disk maze description.
///
/// ```toml
/// name = "reference-2x2"
/// width = 2
/// height = 2
/// start = [0, 0]
/// goal = [1, 1]
/// episode_length = 2
/// walls = [[[0, 0], [0, 1]]]
/// ```
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MazeFile {
    pub name: Option<String>,
    pub width: u32,
    pub height: u32,
    pub start: [u32; 2],
    pub goal: [u32; 2],
    pub episode_length: usize,
    #[serde(default)]
    pub walls: Vec<[[u32; 2]; 2]>,
}

impl MazeFile {
    pub fn into_spec(self, fallback_name: String) -> Result<EnvSpec> {
        let cell = |c: [u32; 2]| Cell::new(c[0], c[1]);
        let maze = GridMaze::new(
            self.width,
            self.height,
            self.walls.iter().map(|w| (cell(w[0]), cell(w[1]))),
            cell(self.start),
            cell(self.goal),
            self.episode_length,
        )?;
        EnvSpec::new(self.name.unwrap_or(fallback_name), maze)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvState {
    pub cell: Cell,
    pub step: usize,
    pub actions: Vec<Action>,
    pub rewarded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StepOutcome {
    pub percept: Percept,
    pub reward: u8,
}

pub fn decode_sequence(rank: usize, n_actions: usize, len: usize) -> Vec<Action> {
    let mut seq = vec![Action(0); len];
    let mut r = rank;
    for slot in seq.iter_mut().rev() {
        *slot = Action((r % n_actions) as u8);
        r /= n_actions;
    }
    seq
}

pub fn encode_sequence(seq: &[Action], n_actions: usize) -> usize {
    seq.iter().fold(0, |acc, a| acc * n_actions + a.index())
}

/// Brute-force set of rewarding sequences (k = its size, N = |A|^M).
pub fn enumerate_rewarding(spec: &EnvSpec) -> Result<Vec<Vec<Action>>> {
    let n = spec.guarded_size()?;
    let mut out = Vec::new();
    for rank in 0..n {
        let seq = decode_sequence(rank, spec.n_actions(), spec.episode_length());
        if spec.lambda(&seq)? {
            out.push(seq);
        }
    }
    Ok(out)
}

/// The 2×2 maze: start (0,0), goal (1,1), no walls, M = 2.
pub fn reference_maze() -> EnvSpec {
    let maze = GridMaze::new(2, 2, [], Cell::new(0, 0), Cell::new(1, 1), 2).expect("valid maze");
    EnvSpec::new("reference-2x2", maze).expect("valid spec")
}

/// Corridor of `m + 1` cells with M = m: only `R^m` is rewarded, so the
/// reward density is |A|^-m.
pub fn make_low_connectivity_maze(m: usize) -> EnvSpec {
    assert!(m >= 1, "corridor length must be positive");
    let maze = GridMaze::new(m as u32 + 1, 1, [], Cell::new(0, 0), Cell::new(m as u32, 0), m)
        .expect("valid corridor");
    EnvSpec::new(format!("corridor-{m}"), maze).expect("valid spec")
}
