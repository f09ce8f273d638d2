//! Sparse-reward multi-room gridworld.
//!
//! Rooms are laid out left to right, neighbours sharing one wall with a
//! single closed door in it. The agent starts in the first room and must
//! open each door in turn to reach the goal in the last room. The layout is
//! drawn from the seed passed to `reset(Some(seed))` and stays fixed across
//! `reset(None)` calls.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::mdp::{ActionKind, ActionValue, EnvSpec, Environment, Observation, StepOutcome};

pub const ROOM_COUNT: usize = 4;
/// Largest room side, walls included.
pub const ROOM_SIZE: usize = 5;
const MIN_ROOM_SIZE: usize = 4;
pub const STEP_PENALTY_COEF: f64 = 0.9;
pub const N_ACTIONS: usize = 8;
const CELL_KINDS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiRoomAction {
    TurnLeft,
    TurnRight,
    Forward,
    PickUp,
    Drop,
    /// Opens or closes the door directly ahead.
    Toggle,
    Done,
    Wait,
}

impl MultiRoomAction {
    pub const ALL: [MultiRoomAction; N_ACTIONS] = [
        MultiRoomAction::TurnLeft,
        MultiRoomAction::TurnRight,
        MultiRoomAction::Forward,
        MultiRoomAction::PickUp,
        MultiRoomAction::Drop,
        MultiRoomAction::Toggle,
        MultiRoomAction::Done,
        MultiRoomAction::Wait,
    ];

    pub fn from_index(i: usize) -> Result<Self> {
        Self::ALL
            .get(i)
            .copied()
            .ok_or_else(|| Error::InvalidAction(format!("multiroom action {i} out of range (< {N_ACTIONS})")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cell {
    Wall,
    Empty,
    Door(usize),
    Goal,
}

/// Outer rectangle of a room, walls included.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Room {
    pub left: usize,
    pub top: usize,
    pub width: usize,
    pub height: usize,
}

impl Room {
    fn interior_contains(&self, (x, y): (usize, usize)) -> bool {
        x > self.left && x < self.left + self.width - 1 && y > self.top && y < self.top + self.height - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiRoomLayout {
    pub width: usize,
    pub height: usize,
    pub cells: Vec<Cell>,
    pub rooms: Vec<Room>,
    pub doors: Vec<(usize, usize)>,
    pub start: (usize, usize),
    pub start_dir: usize,
    pub goal: (usize, usize),
    pub room_size: usize,
}

impl MultiRoomLayout {
    pub fn generate<R: Rng + ?Sized>(rng: &mut R, room_count: usize, room_size: usize) -> Result<Self> {
        if room_count == 0 || room_size < MIN_ROOM_SIZE {
            return Err(Error::InvalidArgument(format!(
                "need at least one room of side >= {MIN_ROOM_SIZE}, got {room_count} rooms of side {room_size}"
            )));
        }
        let mut rooms = Vec::with_capacity(room_count);
        let mut left = 0;
        for _ in 0..room_count {
            let room = Room {
                left,
                top: rng.random_range(0..=1),
                width: rng.random_range(MIN_ROOM_SIZE..=room_size),
                height: rng.random_range(MIN_ROOM_SIZE..=room_size),
            };
            left += room.width - 1;
            rooms.push(room);
        }
        let width = left + 1;
        let height = rooms.iter().map(|r| r.top + r.height).max().unwrap_or(0);
        let mut cells = vec![Cell::Wall; width * height];
        for r in &rooms {
            for y in r.top + 1..r.top + r.height - 1 {
                for x in r.left + 1..r.left + r.width - 1 {
                    cells[y * width + x] = Cell::Empty;
                }
            }
        }
        let mut doors = Vec::with_capacity(room_count.saturating_sub(1));
        for pair in rooms.windows(2) {
            let (a, b) = (pair[0], pair[1]);
            let lo = (a.top + 1).max(b.top + 1);
            let hi = (a.top + a.height - 2).min(b.top + b.height - 2);
            let y = rng.random_range(lo..=hi);
            let x = b.left;
            cells[y * width + x] = Cell::Door(doors.len());
            doors.push((x, y));
        }
        let interior_cell = |rng: &mut R, r: &Room| {
            (rng.random_range(r.left + 1..r.left + r.width - 1), rng.random_range(r.top + 1..r.top + r.height - 1))
        };
        let start = interior_cell(rng, &rooms[0]);
        let start_dir = rng.random_range(0..4);
        let mut goal = interior_cell(rng, &rooms[room_count - 1]);
        while goal == start {
            goal = interior_cell(rng, &rooms[room_count - 1]);
        }
        cells[goal.1 * width + goal.0] = Cell::Goal;
        Ok(Self { width, height, cells, rooms, doors, start, start_dir, goal, room_size })
    }

    pub fn cell(&self, x: usize, y: usize) -> Cell {
        if x >= self.width || y >= self.height {
            Cell::Wall
        } else {
            self.cells[y * self.width + x]
        }
    }

    pub fn max_episode_steps(&self) -> usize {
        20 * self.rooms.len() * self.room_size
    }

    pub fn n_state_ids(&self) -> usize {
        self.rooms.len() * self.room_size * self.room_size * 4
    }

    pub fn observation_dim(&self) -> usize {
        let window = self.room_size * self.room_size;
        window * CELL_KINDS + window + 4 + self.rooms.len()
    }
}

/// Dynamic state of one episode over a shared layout.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiRoomGrid {
    pub layout: Arc<MultiRoomLayout>,
    pub doors_open: Vec<bool>,
    pub position: (usize, usize),
    /// 0 = +x, 1 = +y, 2 = −x, 3 = −y.
    pub direction: usize,
    pub room: usize,
    pub steps: usize,
}

const DIRS: [(isize, isize); 4] = [(1, 0), (0, 1), (-1, 0), (0, -1)];

impl MultiRoomGrid {
    pub fn start(layout: Arc<MultiRoomLayout>) -> Self {
        let n_doors = layout.doors.len();
        Self {
            position: layout.start,
            direction: layout.start_dir,
            doors_open: vec![false; n_doors],
            room: 0,
            steps: 0,
            layout,
        }
    }

    fn ahead(&self) -> Option<(usize, usize)> {
        let (dx, dy) = DIRS[self.direction];
        let x = self.position.0.checked_add_signed(dx)?;
        let y = self.position.1.checked_add_signed(dy)?;
        Some((x, y))
    }

    fn passable(&self, (x, y): (usize, usize)) -> bool {
        match self.layout.cell(x, y) {
            Cell::Wall => false,
            Cell::Door(i) => self.doors_open[i],
            Cell::Empty | Cell::Goal => true,
        }
    }

    pub fn max_episode_steps(&self) -> usize {
        self.layout.max_episode_steps()
    }

    /// `(room, cell within the room window, direction)` packed into one id.
    pub fn state_id(&self) -> usize {
        let size = self.layout.room_size;
        let r = self.layout.rooms[self.room];
        let lx = self.position.0 - r.left;
        let ly = self.position.1 - r.top;
        ((self.room * size * size) + ly * size + lx) * 4 + self.direction
    }

    /// One-hot cell kinds of the current room window, the agent's cell in
    /// that window, its facing direction and the room index.
    pub fn observation(&self) -> Observation {
        let layout = &self.layout;
        let size = layout.room_size;
        let window = size * size;
        let mut obs = vec![0.0; layout.observation_dim()];
        let r = layout.rooms[self.room];
        for ly in 0..size {
            for lx in 0..size {
                let (x, y) = (r.left + lx, r.top + ly);
                let inside = lx < r.width && ly < r.height;
                let kind = if !inside {
                    0
                } else {
                    match layout.cell(x, y) {
                        Cell::Wall => 0,
                        Cell::Empty => 1,
                        Cell::Door(i) if self.doors_open[i] => 3,
                        Cell::Door(_) => 2,
                        Cell::Goal => 4,
                    }
                };
                obs[(ly * size + lx) * CELL_KINDS + kind] = 1.0;
            }
        }
        let lx = self.position.0 - r.left;
        let ly = self.position.1 - r.top;
        obs[window * CELL_KINDS + ly * size + lx] = 1.0;
        obs[window * CELL_KINDS + window + self.direction] = 1.0;
        obs[window * CELL_KINDS + window + 4 + self.room] = 1.0;
        obs
    }
}

/// Goal reward after `steps_taken` steps (this step included).
pub fn goal_reward(steps_taken: usize, max_steps: usize) -> f64 {
    1.0 - STEP_PENALTY_COEF * steps_taken as f64 / max_steps as f64
}

/// One step of the gridworld. Reaching the goal pays [`goal_reward`] and
/// ends the episode; every other step pays 0. The episode also ends once
/// `max_episode_steps` steps have been taken.
pub fn multiroom_step(state: &MultiRoomGrid, action: MultiRoomAction) -> (MultiRoomGrid, f64, bool) {
    let mut next = state.clone();
    next.steps += 1;
    let mut reward = 0.0;
    let mut done = false;
    match action {
        MultiRoomAction::TurnLeft => next.direction = (state.direction + 3) % 4,
        MultiRoomAction::TurnRight => next.direction = (state.direction + 1) % 4,
        MultiRoomAction::Forward => {
            if let Some(target) = state.ahead().filter(|&t| state.passable(t)) {
                next.position = target;
                if let Some(i) = state.layout.rooms.iter().position(|r| r.interior_contains(target)) {
                    next.room = i;
                }
                if state.layout.cell(target.0, target.1) == Cell::Goal {
                    reward = goal_reward(next.steps, state.max_episode_steps());
                    done = true;
                }
            }
        }
        MultiRoomAction::Toggle => {
            if let Some((x, y)) = state.ahead() {
                if let Cell::Door(i) = state.layout.cell(x, y) {
                    next.doors_open[i] = !next.doors_open[i];
                }
            }
        }
        MultiRoomAction::PickUp | MultiRoomAction::Drop | MultiRoomAction::Done | MultiRoomAction::Wait => {}
    }
    if next.steps >= state.max_episode_steps() {
        done = true;
    }
    (next, reward, done)
}

#[derive(Debug, Clone)]
pub struct MultiRoom {
    spec: EnvSpec,
    state: MultiRoomGrid,
    done: bool,
}

impl MultiRoom {
    pub fn new(seed: u64) -> Self {
        Self::with_rooms(seed, ROOM_COUNT, ROOM_SIZE).expect("default multiroom parameters are valid")
    }

    pub fn with_rooms(seed: u64, room_count: usize, room_size: usize) -> Result<Self> {
        let layout = MultiRoomLayout::generate(&mut ChaCha8Rng::seed_from_u64(seed), room_count, room_size)?;
        let spec = EnvSpec {
            name: "multiroom".into(),
            observation_dim: layout.observation_dim(),
            action_kind: ActionKind::Discrete,
            action_count_or_dim: N_ACTIONS,
            max_episode_steps: layout.max_episode_steps(),
            deterministic: true,
            action_bound: 1.0,
        };
        Ok(Self { spec, state: MultiRoomGrid::start(Arc::new(layout)), done: true })
    }

    pub fn layout(&self) -> &MultiRoomLayout {
        &self.state.layout
    }

    pub fn grid(&self) -> &MultiRoomGrid {
        &self.state
    }

    pub fn n_state_ids(&self) -> usize {
        self.state.layout.n_state_ids()
    }
}

impl Environment for MultiRoom {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: Option<u64>) -> Observation {
        let layout = match seed {
            Some(seed) => {
                let (rooms, size) = (self.state.layout.rooms.len(), self.state.layout.room_size);
                Arc::new(
                    MultiRoomLayout::generate(&mut ChaCha8Rng::seed_from_u64(seed), rooms, size)
                        .expect("room parameters were validated at construction"),
                )
            }
            None => Arc::clone(&self.state.layout),
        };
        self.state = MultiRoomGrid::start(layout);
        self.done = false;
        self.state.observation()
    }

    fn step(&mut self, action: &ActionValue) -> Result<StepOutcome> {
        if self.done {
            return Err(Error::InvalidArgument("step called after episode end".into()));
        }
        let index =
            action.as_discrete().ok_or_else(|| Error::InvalidAction("multiroom takes discrete actions".into()))?;
        let (next, reward, done) = multiroom_step(&self.state, MultiRoomAction::from_index(index)?);
        self.state = next;
        self.done = done;
        Ok(StepOutcome { observation: self.state.observation(), reward, done })
    }

    fn state_id(&self) -> Option<usize> {
        Some(self.state.state_id())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fresh(seed: u64) -> MultiRoom {
        let mut env = MultiRoom::new(seed);
        env.reset(None);
        env
    }

    #[test]
    fn goal_reward_formula() {
        assert!((goal_reward(10, 400) - 0.9775).abs() < 1e-12);
        for t in 1..400 {
            assert!(goal_reward(t, 400) > goal_reward(t + 1, 400));
            assert!(goal_reward(t + 1, 400) > 0.0);
        }
    }

    #[test]
    fn layout_invariants() {
        for seed in 0..50 {
            let env = MultiRoom::new(seed);
            let l = env.layout();
            assert_eq!(l.rooms.len(), ROOM_COUNT);
            assert_eq!(l.doors.len(), ROOM_COUNT - 1);
            assert!(l.rooms.iter().all(|r| r.width <= ROOM_SIZE && r.height <= ROOM_SIZE));
            assert!(l.rooms[ROOM_COUNT - 1].interior_contains(l.goal));
            assert!(l.rooms[0].interior_contains(l.start));
            // each door sits on the wall shared by consecutive rooms
            for (i, &(x, _)) in l.doors.iter().enumerate() {
                assert_eq!(x, l.rooms[i].left + l.rooms[i].width - 1);
                assert_eq!(x, l.rooms[i + 1].left);
            }
            assert_eq!(env.spec().max_episode_steps, 400);
        }
    }

    #[test]
    fn forward_into_wall_is_blocked() {
        let mut env = fresh(3);
        // spin until facing a wall, then walk into it
        for _ in 0..10 {
            let before = env.grid().position;
            let out = env.step(&ActionValue::Discrete(2)).unwrap();
            if env.grid().position == before {
                assert_eq!(out.reward, 0.0);
                return;
            }
        }
        panic!("never hit a wall walking straight");
    }

    #[test]
    fn closed_door_blocks_until_toggled() {
        let layout = Arc::new(MultiRoomLayout::generate(&mut ChaCha8Rng::seed_from_u64(7), 2, 5).unwrap());
        let (dx, dy) = layout.doors[0];
        let mut g = MultiRoomGrid::start(Arc::clone(&layout));
        g.position = (dx - 1, dy);
        g.direction = 0;
        let (blocked, _, _) = multiroom_step(&g, MultiRoomAction::Forward);
        assert_eq!(blocked.position, g.position);
        let (opened, _, _) = multiroom_step(&g, MultiRoomAction::Toggle);
        let (through, _, _) = multiroom_step(&opened, MultiRoomAction::Forward);
        assert_eq!(through.position, (dx, dy));
        let (inside, _, _) = multiroom_step(&through, MultiRoomAction::Forward);
        assert_eq!(inside.room, 1);
    }

    #[test]
    fn timeout_without_goal_pays_nothing() {
        let mut env = fresh(0);
        let mut total = 0.0;
        let mut steps = 0;
        loop {
            let out = env.step(&ActionValue::Discrete(7)).unwrap();
            total += out.reward;
            steps += 1;
            if out.done {
                break;
            }
        }
        assert_eq!(steps, 400);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn same_seed_same_layout() {
        assert_eq!(MultiRoom::new(11).layout(), MultiRoom::new(11).layout());
        let mut env = MultiRoom::new(11);
        env.reset(Some(12));
        assert_eq!(env.layout(), MultiRoom::new(12).layout());
    }
}
