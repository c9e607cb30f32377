//! Coordinate partitions `G_1..G_k` of `{0..n-1}`.

use crate::error::{Error, Result};

/// A partition of `n` coordinates into `k` nonempty disjoint groups.
///
/// Each group is stored as a sorted index array. A reverse lookup
/// (coordinate to group and offset inside the group) is kept alongside so
/// the inner loop can slice sparse rows by block in `O(nnz)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    n: usize,
    groups: Vec<Vec<usize>>,
    block_of: Vec<u32>,
    offset_in_block: Vec<u32>,
}

impl BlockPartition {
    /// Builds a partition from explicit groups. Indices inside a group may
    /// be given in any order; they are sorted.
    pub fn new(n: usize, groups: Vec<Vec<usize>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidPartition("zero coordinates".into()));
        }
        if groups.is_empty() {
            return Err(Error::InvalidPartition("no groups".into()));
        }
        let mut block_of = vec![u32::MAX; n];
        let mut offset_in_block = vec![0u32; n];
        let mut groups = groups;
        for (j, g) in groups.iter_mut().enumerate() {
            if g.is_empty() {
                return Err(Error::InvalidPartition(format!("group {j} is empty")));
            }
            g.sort_unstable();
            for (pos, &c) in g.iter().enumerate() {
                if c >= n {
                    return Err(Error::InvalidPartition(format!(
                        "group {j} holds coordinate {c} >= n = {n}"
                    )));
                }
                if block_of[c] != u32::MAX {
                    return Err(Error::InvalidPartition(format!(
                        "coordinate {c} appears in groups {} and {j}",
                        block_of[c]
                    )));
                }
                block_of[c] = j as u32;
                offset_in_block[c] = pos as u32;
            }
        }
        if let Some(c) = block_of.iter().position(|&b| b == u32::MAX) {
            return Err(Error::InvalidPartition(format!(
                "coordinate {c} is not covered by any group"
            )));
        }
        Ok(BlockPartition {
            n,
            groups,
            block_of,
            offset_in_block,
        })
    }

    /// `k` contiguous groups of size `n / k`; the last group absorbs the
    /// remainder.
    pub fn contiguous(n: usize, k: usize) -> Result<Self> {
        if k == 0 || k > n {
            return Err(Error::InvalidPartition(format!(
                "cannot split {n} coordinates into {k} nonempty groups"
            )));
        }
        let size = n / k;
        let groups = (0..k)
            .map(|j| {
                let end = if j + 1 == k { n } else { (j + 1) * size };
                (j * size..end).collect()
            })
            .collect();
        Self::new(n, groups)
    }

    /// Every coordinate in its own group.
    pub fn singletons(n: usize) -> Result<Self> {
        Self::contiguous(n, n)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn num_blocks(&self) -> usize {
        self.groups.len()
    }

    pub fn block(&self, j: usize) -> &[usize] {
        &self.groups[j]
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn block_len(&self, j: usize) -> usize {
        self.groups[j].len()
    }

    pub fn max_block_len(&self) -> usize {
        self.groups.iter().map(Vec::len).max().unwrap_or(0)
    }

    #[inline]
    pub fn block_of(&self, coord: usize) -> usize {
        self.block_of[coord] as usize
    }

    #[inline]
    pub fn offset_in_block(&self, coord: usize) -> usize {
        self.offset_in_block[coord] as usize
    }

    /// Copies `x_{G_j}` out of a full vector.
    pub fn gather<T: Copy>(&self, j: usize, x: &[T]) -> Vec<T> {
        self.groups[j].iter().map(|&c| x[c]).collect()
    }

    /// Writes a block sub-vector back into a full vector.
    pub fn scatter<T: Copy>(&self, j: usize, sub: &[T], x: &mut [T]) {
        for (&c, &v) in self.groups[j].iter().zip(sub) {
            x[c] = v;
        }
    }
}
