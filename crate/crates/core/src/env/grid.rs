use rand::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Pos {
    pub row: usize,
    pub col: usize,
}

impl Pos {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn index(self, width: usize) -> usize {
        self.row * width + self.col
    }

    pub fn from_index(i: usize, width: usize) -> Self {
        Self::new(i / width, i % width)
    }

    pub fn manhattan(self, other: Pos) -> usize {
        self.row.abs_diff(other.row) + self.col.abs_diff(other.col)
    }

    /// Neighbour in direction `m`, if it stays inside a `size`×`size` grid.
    pub fn offset(self, m: Move, size: usize) -> Option<Pos> {
        let (dr, dc) = m.delta();
        let r = self.row as isize + dr;
        let c = self.col as isize + dc;
        (r >= 0 && c >= 0 && (r as usize) < size && (c as usize) < size)
            .then(|| Pos::new(r as usize, c as usize))
    }

    pub fn random<R: Rng + ?Sized>(size: usize, rng: &mut R) -> Self {
        Pos::new(rng.random_range(0..size), rng.random_range(0..size))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Move {
    Up,
    Down,
    Left,
    Right,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::Up, Move::Down, Move::Left, Move::Right];

    pub fn from_index(i: usize) -> Move {
        Move::ALL[i % 4]
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn delta(self) -> (isize, isize) {
        match self {
            Move::Up => (-1, 0),
            Move::Down => (1, 0),
            Move::Left => (0, -1),
            Move::Right => (0, 1),
        }
    }

    pub fn opposite(self) -> Move {
        match self {
            Move::Up => Move::Down,
            Move::Down => Move::Up,
            Move::Left => Move::Right,
            Move::Right => Move::Left,
        }
    }
}

/// Push one binary plane (row-major) onto `out`.
pub(crate) fn push_plane(out: &mut Vec<f64>, cells: usize, set: impl Fn(usize) -> bool) {
    out.extend((0..cells).map(|i| if set(i) { 1.0 } else { 0.0 }));
}
