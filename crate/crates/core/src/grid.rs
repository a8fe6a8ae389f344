//! Lattice geometry. Spacing is one lattice unit; 2D grids are stored
//! flattened row-major (`index = i0 * n1 + i1`).

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Periodic,
    Absorbing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GridRepr", into = "GridRepr")]
pub struct Grid {
    extents: [usize; 2],
    dim: usize,
    boundary: Boundary,
}

#[derive(Serialize, Deserialize)]
struct GridRepr {
    extents: Vec<usize>,
    #[serde(default)]
    boundary: Boundary,
}

impl TryFrom<GridRepr> for Grid {
    type Error = Error;

    fn try_from(r: GridRepr) -> Result<Self> {
        match r.extents.as_slice() {
            [n] => Grid::new_1d(*n, r.boundary),
            [n0, n1] => Grid::new_2d(*n0, *n1, r.boundary),
            _ => Err(Error::invalid(format!(
                "grid must have 1 or 2 extents, got {}",
                r.extents.len()
            ))),
        }
    }
}

impl From<Grid> for GridRepr {
    fn from(g: Grid) -> Self {
        GridRepr {
            extents: g.extents[..g.dim].to_vec(),
            boundary: g.boundary,
        }
    }
}

impl Grid {
    pub const MIN_EXTENT: usize = 3;

    pub fn new_1d(n: usize, boundary: Boundary) -> Result<Self> {
        check_extent(n)?;
        Ok(Grid {
            extents: [n, 1],
            dim: 1,
            boundary,
        })
    }

    pub fn new_2d(n0: usize, n1: usize, boundary: Boundary) -> Result<Self> {
        check_extent(n0)?;
        check_extent(n1)?;
        Ok(Grid {
            extents: [n0, n1],
            dim: 2,
            boundary,
        })
    }

    /// Periodic 1D grid; panics on `n < 3`. Convenience for tests and examples.
    pub fn periodic(n: usize) -> Self {
        Self::new_1d(n, Boundary::Periodic).expect("grid extent must be >= 3")
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn extent(&self, axis: usize) -> usize {
        self.extents[axis]
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents[..self.dim]
    }

    pub fn sites(&self) -> usize {
        self.extents[0] * self.extents[1]
    }

    pub fn flat_index(&self, coords: [usize; 2]) -> usize {
        coords[0] * self.extents[1] + coords[1]
    }

    pub fn coords(&self, index: usize) -> [usize; 2] {
        [index / self.extents[1], index % self.extents[1]]
    }

    /// Site reached from `coords` by `offset`, or `None` when it leaves an
    /// absorbing grid.
    pub fn shift(&self, coords: [usize; 2], offset: [i64; 2]) -> Option<usize> {
        let mut out = [0usize; 2];
        for axis in 0..2 {
            let n = self.extents[axis] as i64;
            let x = coords[axis] as i64 + offset[axis];
            out[axis] = match self.boundary {
                Boundary::Periodic => x.rem_euclid(n) as usize,
                Boundary::Absorbing if (0..n).contains(&x) => x as usize,
                Boundary::Absorbing => return None,
            };
        }
        Some(self.flat_index(out))
    }
}

fn check_extent(n: usize) -> Result<()> {
    if n < Grid::MIN_EXTENT {
        return Err(Error::invalid(format!(
            "grid extent must be >= {}, got {n}",
            Grid::MIN_EXTENT
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_tiny_grids() {
        assert!(Grid::new_1d(2, Boundary::Periodic).is_err());
        assert!(Grid::new_2d(3, 2, Boundary::Periodic).is_err());
        assert!(Grid::new_1d(3, Boundary::Absorbing).is_ok());
    }

    #[test]
    fn periodic_wrap_and_absorbing_exit() {
        let g = Grid::periodic(5);
        assert_eq!(g.shift([0, 0], [-1, 0]), Some(4));
        assert_eq!(g.shift([4, 0], [3, 0]), Some(2));

        let a = Grid::new_1d(5, Boundary::Absorbing).unwrap();
        assert_eq!(a.shift([0, 0], [-1, 0]), None);
        assert_eq!(a.shift([3, 0], [1, 0]), Some(4));
    }

    #[test]
    fn row_major_flattening() {
        let g = Grid::new_2d(3, 4, Boundary::Periodic).unwrap();
        assert_eq!(g.sites(), 12);
        assert_eq!(g.flat_index([1, 2]), 6);
        assert_eq!(g.coords(6), [1, 2]);
        assert_eq!(g.shift([0, 0], [-1, -1]), Some(11));
    }
}
