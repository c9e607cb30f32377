//! Lock-free shared parameter vector.

use crate::scalar::{AtomicCell, Scalar};

/// `n` independently atomic scalar cells.
///
/// Reads and writes are per cell; there is no vector-level consistency.
/// A copy taken while other threads write may mix old and new values of
/// a block (an inconsistent read), which the solver tolerates.
pub struct SharedVector<T: Scalar> {
    cells: Box<[T::Atomic]>,
}

impl<T: Scalar> SharedVector<T> {
    pub fn new(x: &[T]) -> Self {
        SharedVector {
            cells: x.iter().map(|&v| T::Atomic::new(v)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    #[inline]
    pub fn load(&self, c: usize) -> T {
        self.cells[c].load()
    }

    #[inline]
    pub fn store(&self, c: usize, v: T) {
        self.cells[c].store(v)
    }

    /// Copies every cell without any lock.
    pub fn inconsistent_read(&self) -> Vec<T> {
        self.cells.iter().map(AtomicCell::load).collect()
    }

    /// Copies only `cells` into `out` (indexed by coordinate).
    #[inline]
    pub fn read_into(&self, cells: &[usize], out: &mut [T]) {
        for &c in cells {
            out[c] = self.cells[c].load();
        }
    }

    /// Overwrites every cell. Only meaningful between epochs.
    pub fn assign(&self, x: &[T]) {
        for (cell, &v) in self.cells.iter().zip(x) {
            cell.store(v);
        }
    }
}

impl<T: Scalar> std::fmt::Debug for SharedVector<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.inconsistent_read()).finish()
    }
}
