use std::collections::{HashSet, VecDeque};
use std::path::Path;

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::envs::{Environment, StepOutcome};
use crate::error::{Error, Result};

/// Actions are indexed up, down, left, right.
pub const MAZE_ACTIONS: usize = 4;
const DELTAS: [(isize, isize); 4] = [(-1, 0), (1, 0), (0, -1), (0, 1)];

/// The Dyna maze: a 6x9 gridworld with walls, a start and a goal.
///
/// State ids are `cols * row + col` with row 0 at the top. Moves off the
/// grid or into a wall leave the state unchanged. Entering the goal ends
/// the episode with a reward drawn from Normal(1, 0.1); every other
/// transition pays 0.
#[derive(Debug, Clone)]
pub struct DynaMaze {
    rows: usize,
    cols: usize,
    walls: HashSet<(usize, usize)>,
    start: (usize, usize),
    goal: (usize, usize),
    current: usize,
}

impl DynaMaze {
    /// The canonical board: walls at (1,2), (2,2), (3,2), (4,5), (0,7),
    /// (1,7), (2,7); start (2,0); goal (0,8). Start id is 18.
    pub fn standard() -> Self {
        let walls = [(1, 2), (2, 2), (3, 2), (4, 5), (0, 7), (1, 7), (2, 7)]
            .into_iter()
            .collect();
        DynaMaze::with_layout(6, 9, walls, (2, 0), (0, 8))
    }

    pub fn with_layout(
        rows: usize,
        cols: usize,
        walls: HashSet<(usize, usize)>,
        start: (usize, usize),
        goal: (usize, usize),
    ) -> Self {
        assert!(start.0 < rows && start.1 < cols, "start outside grid");
        assert!(goal.0 < rows && goal.1 < cols, "goal outside grid");
        assert!(!walls.contains(&start), "start inside a wall");
        assert!(!walls.contains(&goal), "goal inside a wall");
        let mut maze = DynaMaze {
            rows,
            cols,
            walls,
            start,
            goal,
            current: 0,
        };
        maze.current = maze.state_id(start);
        maze
    }

    /// Parse a plain-text grid: `.` open, `#` wall, `S` start, `G` goal,
    /// one row per line.
    pub fn from_grid(text: &str) -> Result<Self> {
        let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
        let rows = lines.len();
        if rows == 0 {
            return Err(Error::config("grid", "empty grid"));
        }
        let cols = lines[0].chars().count();
        let mut walls = HashSet::new();
        let mut start = None;
        let mut goal = None;
        for (r, line) in lines.iter().enumerate() {
            if line.chars().count() != cols {
                return Err(Error::config("grid", format!("ragged row {r}")));
            }
            for (c, ch) in line.chars().enumerate() {
                match ch {
                    '.' => {}
                    '#' => {
                        walls.insert((r, c));
                    }
                    'S' => start = Some((r, c)),
                    'G' => goal = Some((r, c)),
                    other => {
                        return Err(Error::config("grid", format!("unknown cell '{other}'")))
                    }
                }
            }
        }
        let start = start.ok_or_else(|| Error::config("grid", "missing start cell 'S'"))?;
        let goal = goal.ok_or_else(|| Error::config("grid", "missing goal cell 'G'"))?;
        Ok(DynaMaze::with_layout(rows, cols, walls, start, goal))
    }

    pub fn from_grid_file(path: &Path) -> Result<Self> {
        DynaMaze::from_grid(&std::fs::read_to_string(path)?)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn state_id(&self, (row, col): (usize, usize)) -> usize {
        self.cols * row + col
    }

    pub fn cell_of(&self, state: usize) -> (usize, usize) {
        (state / self.cols, state % self.cols)
    }

    pub fn goal_state(&self) -> usize {
        self.state_id(self.goal)
    }

    pub fn is_wall(&self, state: usize) -> bool {
        self.walls.contains(&self.cell_of(state))
    }

    /// Open (non-wall) cells, goal included.
    pub fn open_states(&self) -> Vec<usize> {
        (0..self.state_count())
            .filter(|&s| !self.is_wall(s))
            .collect()
    }

    /// The open neighbour reached by `action` from `state`, if the move
    /// changes cell; walls and board edges yield `None`.
    fn neighbour(&self, state: usize, action: usize) -> Option<usize> {
        let (row, col) = self.cell_of(state);
        let (dr, dc) = DELTAS[action];
        let nr = row as isize + dr;
        let nc = col as isize + dc;
        if nr < 0 || nr >= self.rows as isize || nc < 0 || nc >= self.cols as isize {
            return None;
        }
        let cell = (nr as usize, nc as usize);
        if self.walls.contains(&cell) {
            return None;
        }
        Some(self.state_id(cell))
    }

    /// For each open cell, an action that moves one BFS step closer to
    /// the goal. Moves are symmetric, so distances come from a BFS rooted
    /// at the goal over grid adjacency. Cells that cannot reach the goal
    /// keep action 0.
    pub fn optimal_actions(&self) -> Vec<usize> {
        let goal = self.goal_state();
        let mut dist = vec![usize::MAX; self.state_count()];
        dist[goal] = 0;
        let mut queue = VecDeque::from([goal]);
        while let Some(s) = queue.pop_front() {
            for a in 0..MAZE_ACTIONS {
                if let Some(next) = self.neighbour(s, a) {
                    if dist[next] == usize::MAX {
                        dist[next] = dist[s] + 1;
                        queue.push_back(next);
                    }
                }
            }
        }
        (0..self.state_count())
            .map(|s| {
                let mut best = 0;
                let mut best_dist = usize::MAX;
                for a in 0..MAZE_ACTIONS {
                    if let Some(next) = self.neighbour(s, a) {
                        if dist[next] < best_dist {
                            best_dist = dist[next];
                            best = a;
                        }
                    }
                }
                best
            })
            .collect()
    }

    /// BFS shortest step count from start to goal.
    pub fn shortest_path_length(&self) -> Result<usize> {
        let start = self.state_id(self.start);
        let goal = self.goal_state();
        let mut dist = vec![usize::MAX; self.state_count()];
        dist[start] = 0;
        let mut queue = VecDeque::from([start]);
        while let Some(s) = queue.pop_front() {
            if s == goal {
                return Ok(dist[s]);
            }
            for a in 0..MAZE_ACTIONS {
                let (next, _) = self.transition(s, a);
                if next != s && dist[next] == usize::MAX {
                    dist[next] = dist[s] + 1;
                    queue.push_back(next);
                }
            }
        }
        Err(Error::Unreachable)
    }
}

impl Environment for DynaMaze {
    fn state_count(&self) -> usize {
        self.rows * self.cols
    }

    fn action_count(&self) -> usize {
        MAZE_ACTIONS
    }

    fn start_state(&self) -> usize {
        self.state_id(self.start)
    }

    fn current_state(&self) -> usize {
        self.current
    }

    fn reset(&mut self) -> usize {
        self.current = self.start_state();
        self.current
    }

    fn step(&mut self, action: usize, rng: &mut ChaCha8Rng) -> Result<StepOutcome> {
        if action >= MAZE_ACTIONS {
            return Err(Error::InvalidAction {
                action,
                count: MAZE_ACTIONS,
            });
        }
        let (next, terminal) = self.transition(self.current, action);
        let reward = if terminal {
            Normal::new(1.0, 0.1).unwrap().sample(rng)
        } else {
            0.0
        };
        self.current = next;
        Ok(StepOutcome {
            next_state: next,
            reward,
            terminal,
        })
    }

    fn transition(&self, state: usize, action: usize) -> (usize, bool) {
        if self.is_wall(state) {
            return (state, false); // walls self-loop; never occupied in episodes
        }
        if state == self.goal_state() {
            return (state, true); // absorbing
        }
        match self.neighbour(state, action) {
            Some(next) => (next, next == self.goal_state()),
            None => (state, false),
        }
    }
}
