use std::fmt;

use crate::{Error, Result};

/// Direction of the last signal move.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Down,
    Up,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Down, Direction::Up];

    pub fn sign(self) -> i32 {
        match self {
            Direction::Down => -1,
            Direction::Up => 1,
        }
    }

    pub fn from_sign(d: i64) -> Result<Self> {
        match d {
            -1 => Ok(Direction::Down),
            1 => Ok(Direction::Up),
            _ => Err(Error::Domain(format!("direction must be +1 or -1, got {d}"))),
        }
    }

    /// Position in the canonical (D, y, i) ordering.
    pub fn index(self) -> usize {
        match self {
            Direction::Down => 0,
            Direction::Up => 1,
        }
    }
}

/// `(i, y, D)`: active count, signal level index (`y = k * delta_y`) and
/// signal direction.
#[derive(Copy, Clone, Debug, PartialEq, Eq, Hash)]
pub struct State {
    pub i: u32,
    pub k: i32,
    pub dir: Direction,
}

impl State {
    pub fn new(i: u32, k: i32, dir: Direction) -> Self {
        State { i, k, dir }
    }
}

impl fmt::Display for State {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(i={}, k={}, D={:+})", self.i, self.k, self.dir.sign())
    }
}

/// Shape of the dense state grid. States are laid out in (D, y, i) order
/// with `i` fastest, which is also the row order of every table artifact.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    pub n1: u32,
    pub n2: u32,
    pub k_max: i32,
}

impl Grid {
    pub fn ni(&self) -> usize {
        (self.n2 - self.n1 + 1) as usize
    }

    pub fn ny(&self) -> usize {
        (2 * self.k_max + 1) as usize
    }

    pub fn len(&self) -> usize {
        2 * self.ni() * self.ny()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, s: &State) -> bool {
        s.i >= self.n1 && s.i <= self.n2 && s.k.abs() <= self.k_max
    }

    /// Index of a state known to be on the grid.
    pub fn index(&self, s: &State) -> usize {
        debug_assert!(self.contains(s));
        (s.dir.index() * self.ny() + (s.k + self.k_max) as usize) * self.ni() + (s.i - self.n1) as usize
    }

    pub fn try_index(&self, s: &State) -> Result<usize> {
        if self.contains(s) {
            Ok(self.index(s))
        } else {
            Err(Error::Domain(format!("state {s} is outside the grid")))
        }
    }

    pub fn state(&self, idx: usize) -> State {
        let ni = self.ni();
        let ny = self.ny();
        let i = (idx % ni) as u32 + self.n1;
        let rest = idx / ni;
        let k = (rest % ny) as i32 - self.k_max;
        let dir = if rest / ny == 0 {
            Direction::Down
        } else {
            Direction::Up
        };
        State { i, k, dir }
    }

    pub fn states(&self) -> impl Iterator<Item = State> + '_ {
        (0..self.len()).map(move |idx| self.state(idx))
    }
}
