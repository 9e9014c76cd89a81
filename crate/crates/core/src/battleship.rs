//! 10x10 Battleship boards with five ships (2x4, 1x5, 1x3, 1x3, 1x3),
//! the hit/miss observation mapping, and the `rand` / `sink` query baselines.
//!
//! Cell `(x, y)` is observation index `y * 10 + x`; One means "hit".

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::collector::QueryOracle;
use crate::error::{Error, Result};
use crate::model::ObservationDataset;
use crate::rng::{self, Rng};
use crate::types::{ObservationLog, ObservationValue, ObservationVector};

pub const BOARD_SIZE: usize = 10;
pub const N_CELLS: usize = BOARD_SIZE * BOARD_SIZE;
pub const OCCUPIED_CELLS: usize = 22;

const MAX_TRIES_PER_SHIP: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ShipSpec {
    pub width: usize,
    pub height: usize,
}

impl ShipSpec {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    /// Footprint `(dx, dy)` with the long side along x when horizontal.
    pub fn footprint(&self, orientation: Orientation) -> (usize, usize) {
        let long = self.width.max(self.height);
        let short = self.width.min(self.height);
        match orientation {
            Orientation::Horizontal => (long, short),
            Orientation::Vertical => (short, long),
        }
    }
}

/// The fleet in placement order.
pub const FLEET: [ShipSpec; 5] = [
    ShipSpec::new(2, 4),
    ShipSpec::new(1, 5),
    ShipSpec::new(1, 3),
    ShipSpec::new(1, 3),
    ShipSpec::new(1, 3),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Orientation {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Placement {
    pub ship: ShipSpec,
    pub x: usize,
    pub y: usize,
    pub orientation: Orientation,
}

impl Placement {
    pub fn new(ship: ShipSpec, x: usize, y: usize, orientation: Orientation) -> Self {
        Self {
            ship,
            x,
            y,
            orientation,
        }
    }

    pub fn in_bounds(&self) -> bool {
        let (dx, dy) = self.ship.footprint(self.orientation);
        self.x + dx <= BOARD_SIZE && self.y + dy <= BOARD_SIZE
    }

    /// Row-major cell indices covered. Assumes the placement is in bounds.
    pub fn cells(&self) -> impl Iterator<Item = usize> + '_ {
        let (dx, dy) = self.ship.footprint(self.orientation);
        (self.y..self.y + dy).flat_map(move |y| (self.x..self.x + dx).map(move |x| y * BOARD_SIZE + x))
    }
}

/// A set of non-overlapping, in-bounds ship placements.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Board {
    placements: Vec<Placement>,
    occupied: Vec<bool>,
}

impl Board {
    pub fn new(placements: Vec<Placement>) -> Result<Self> {
        let mut occupied = vec![false; N_CELLS];
        for (k, p) in placements.iter().enumerate() {
            if !p.in_bounds() {
                return Err(Error::Config(format!("ship {k} at ({}, {}) is out of bounds", p.x, p.y)));
            }
            for c in p.cells() {
                if occupied[c] {
                    return Err(Error::Config(format!("ship {k} overlaps cell {c}")));
                }
                occupied[c] = true;
            }
        }
        Ok(Self { placements, occupied })
    }

    pub fn empty() -> Self {
        Self {
            placements: Vec::new(),
            occupied: vec![false; N_CELLS],
        }
    }

    pub fn placements(&self) -> &[Placement] {
        &self.placements
    }

    pub fn occupied(&self) -> &[bool] {
        &self.occupied
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    /// Full fleet, in bounds, no overlaps, 22 cells.
    pub fn is_valid_fleet(&self) -> bool {
        let mut specs: Vec<ShipSpec> = self.placements.iter().map(|p| p.ship).collect();
        let mut fleet = FLEET.to_vec();
        let key = |s: &ShipSpec| (s.width, s.height);
        specs.sort_by_key(key);
        fleet.sort_by_key(key);
        specs == fleet
            && Board::new(self.placements.clone()).is_ok()
            && self.occupied_count() == OCCUPIED_CELLS
    }
}

fn random_placement(ship: ShipSpec, rng: &mut Rng) -> Placement {
    let orientation = if rng.gen::<bool>() {
        Orientation::Horizontal
    } else {
        Orientation::Vertical
    };
    let (dx, dy) = ship.footprint(orientation);
    let x = rng.gen_range(0..=BOARD_SIZE - dx);
    let y = rng.gen_range(0..=BOARD_SIZE - dy);
    Placement::new(ship, x, y, orientation)
}

/// Places the fleet one ship at a time by rejection sampling.
pub fn generate_board(rng: &mut Rng) -> Board {
    'board: loop {
        let mut occupied = vec![false; N_CELLS];
        let mut placements = Vec::with_capacity(FLEET.len());
        for ship in FLEET {
            let mut placed = false;
            for _ in 0..MAX_TRIES_PER_SHIP {
                let p = random_placement(ship, rng);
                if p.cells().all(|c| !occupied[c]) {
                    p.cells().for_each(|c| occupied[c] = true);
                    placements.push(p);
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'board;
            }
        }
        return Board { placements, occupied };
    }
}

pub fn board_observations(board: &Board) -> ObservationVector {
    ObservationVector::from_bits(board.occupied())
}

/// `count` boards from `seed` as an observation dataset.
pub fn board_dataset(count: usize, seed: u64) -> ObservationDataset {
    let mut rng = rng::seeded(seed);
    let rows = (0..count).map(|_| board_observations(&generate_board(&mut rng))).collect();
    ObservationDataset::new(N_CELLS, rows).expect("boards always produce full vectors")
}

fn check_budget(oracle: &impl QueryOracle, budget: usize, available: usize) -> Result<()> {
    if budget > available {
        return Err(Error::Config(format!(
            "budget {budget} exceeds the {available} available observations"
        )));
    }
    if oracle.n_obs() < available {
        return Err(Error::LengthMismatch {
            expected: available,
            got: oracle.n_obs(),
        });
    }
    Ok(())
}

/// Queries `budget` of `candidates` uniformly without replacement.
pub fn random_baseline<O: QueryOracle>(
    mut oracle: O,
    candidates: &[usize],
    budget: usize,
    rng: &mut Rng,
) -> Result<ObservationLog> {
    check_budget(&oracle, budget, candidates.len())?;
    let mut order = candidates.to_vec();
    order.shuffle(rng);
    let mut log = ObservationLog::new();
    for &i in &order[..budget] {
        log.push(i, oracle.query(i)?);
    }
    Ok(log)
}

/// `rand`: uniform unseen coordinates.
pub fn rand_baseline<O: QueryOracle>(oracle: O, budget: usize, rng: &mut Rng) -> Result<ObservationLog> {
    let all: Vec<usize> = (0..N_CELLS).collect();
    random_baseline(oracle, &all, budget, rng)
}

fn neighbors(cell: usize) -> impl Iterator<Item = usize> {
    let (x, y) = (cell % BOARD_SIZE, cell / BOARD_SIZE);
    // ascending index order: up, left, right, down
    [
        (y > 0).then(|| cell - BOARD_SIZE),
        (x > 0).then(|| cell - 1),
        (x + 1 < BOARD_SIZE).then(|| cell + 1),
        (y + 1 < BOARD_SIZE).then(|| cell + BOARD_SIZE),
    ]
    .into_iter()
    .flatten()
}

/// `sink`: random sampling, switching to breadth-first expansion over the
/// 4-neighbours of every hit until the expansion frontier is exhausted.
pub fn sink_baseline<O: QueryOracle>(mut oracle: O, budget: usize, rng: &mut Rng) -> Result<ObservationLog> {
    check_budget(&oracle, budget, N_CELLS)?;
    let mut seen = [false; N_CELLS];
    let mut queued = [false; N_CELLS];
    let mut frontier: VecDeque<usize> = VecDeque::new();
    let mut log = ObservationLog::new();
    while log.len() < budget {
        let cell = match frontier.pop_front() {
            Some(c) => c,
            None => {
                let unseen: Vec<usize> = (0..N_CELLS).filter(|&c| !seen[c]).collect();
                unseen[rng.gen_range(0..unseen.len())]
            }
        };
        seen[cell] = true;
        let v = oracle.query(cell)?;
        log.push(cell, v);
        if v == ObservationValue::One {
            for nb in neighbors(cell) {
                if !seen[nb] && !queued[nb] {
                    queued[nb] = true;
                    frontier.push_back(nb);
                }
            }
        }
    }
    Ok(log)
}
