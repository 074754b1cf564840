use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest admissible number of nodes per axis.
pub const MIN_NODES: usize = 8;

/// Periodic lattice on the torus `[0, 2π)^d` with `n` nodes per axis.
///
/// Nodes are flattened row-major: axis 0 varies slowest. Because `n` is a power
/// of two, `h = 2π / n` is exact and `h * n == 2π` holds bit for bit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Lattice {
    dim: usize,
    n: usize,
}

impl Lattice {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidLattice(format!(
                "dimension must be 1, 2 or 3 (got {dim})"
            )));
        }
        if n < MIN_NODES || !n.is_power_of_two() {
            return Err(Error::InvalidLattice(format!(
                "nodes per axis must be a power of two >= {MIN_NODES} (got {n})"
            )));
        }
        Ok(Self { dim, n })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn h(&self) -> f64 {
        TAU / self.n as f64
    }

    /// Lattice with `factor` times as many nodes per axis.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(self.dim, self.n * factor)
    }

    /// Per-axis integer coordinates of flat node `idx`.
    pub fn multi_index(&self, mut idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for axis in (0..self.dim).rev() {
            out[axis] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi[..self.dim].iter().fold(0, |acc, &i| acc * self.n + (i % self.n))
    }

    /// Physical coordinates of node `idx` (components beyond `dim` are zero).
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let h = self.h();
        let mut x = [0.0; 3];
        for axis in 0..self.dim {
            x[axis] = m[axis] as f64 * h;
        }
        x
    }

    /// Largest admissible stencil component for this lattice.
    pub fn max_offset(&self) -> usize {
        self.n / 4
    }

    pub fn check_offset(&self, offset: &[i32]) -> Result<()> {
        let limit = self.max_offset();
        if offset.len() != self.dim {
            return Err(Error::InvalidStencil(format!(
                "vector {offset:?} has {} components, lattice has dimension {}",
                offset.len(),
                self.dim
            )));
        }
        if offset.iter().any(|c| c.unsigned_abs() as usize > limit) {
            return Err(Error::StencilTooLarge {
                vector: offset.to_vec(),
                nodes: self.n,
                limit,
            });
        }
        Ok(())
    }

    /// `table[i]` is the flat index of node `i + offset` (periodic).
    pub fn neighbor_table(&self, offset: &[i32]) -> Result<Vec<usize>> {
        self.check_offset(offset)?;
        let n = self.n as i64;
        Ok((0..self.len())
            .map(|idx| {
                let m = self.multi_index(idx);
                let mut shifted = [0usize; 3];
                for axis in 0..self.dim {
                    shifted[axis] = (m[axis] as i64 + offset[axis] as i64).rem_euclid(n) as usize;
                }
                self.flat_index(&shifted)
            })
            .collect())
    }

    /// Whether `fine` has this lattice's nodes as a subset (same period, dyadic refinement).
    pub fn ratio_to(&self, fine: &Lattice) -> Option<usize> {
        if fine.dim != self.dim || fine.n < self.n || fine.n % self.n != 0 {
            return None;
        }
        Some(fine.n / self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spacing_times_nodes_is_exactly_the_period() {
        for n in [8, 16, 64, 512, 4096] {
            let l = Lattice::new(1, n).unwrap();
            assert_eq!(l.h() * n as f64, TAU);
        }
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(Lattice::new(1, 12).is_err());
        assert!(Lattice::new(1, 2).is_err());
        assert!(Lattice::new(1, 4).is_err());
        assert!(Lattice::new(0, 8).is_err());
        assert!(Lattice::new(4, 8).is_err());
    }

    #[test]
    fn index_round_trip() {
        let l = Lattice::new(3, 8).unwrap();
        for idx in 0..l.len() {
            assert_eq!(l.flat_index(&l.multi_index(idx)), idx);
        }
    }

    #[test]
    fn neighbor_table_wraps() {
        let l = Lattice::new(2, 8).unwrap();
        let t = l.neighbor_table(&[1, -2]).unwrap();
        // node (7, 1) -> (0, 7)
        assert_eq!(t[l.flat_index(&[7, 1])], l.flat_index(&[0, 7]));
        assert!(l.neighbor_table(&[3, 0]).is_err());
    }
}
