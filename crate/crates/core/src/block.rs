//! Storage for the blocks of the Gram matrix and its Cholesky factor.

use alloc::vec;
use alloc::vec::Vec;
use core::mem::size_of;

/// Structure of one block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockTag {
    Diagonal,
    Sparse,
    Dense,
    BlockDiagonal,
}

impl BlockTag {
    pub fn name(self) -> &'static str {
        match self {
            BlockTag::Diagonal => "Diagonal",
            BlockTag::Sparse => "Sparse",
            BlockTag::Dense => "Dense",
            BlockTag::BlockDiagonal => "BlkDiag",
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            BlockTag::Diagonal => "Diag",
            other => other.name(),
        }
    }
}

/// Column-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl Dense {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Dense {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_col_major(nrows: usize, ncols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), nrows * ncols);
        Dense { nrows, ncols, data }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.nrows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.nrows] = v;
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.nrows] += v;
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn fill(&mut self, v: f64) {
        self.data.fill(v);
    }

    /// Copies the strict lower triangle onto the upper one.
    pub fn symmetrize_from_lower(&mut self) {
        for j in 0..self.ncols {
            for i in (j + 1)..self.nrows {
                let v = self.get(i, j);
                self.set(j, i, v);
            }
        }
    }
}

/// Compressed sparse column matrix with sorted row indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Csc {
    nrows: usize,
    ncols: usize,
    colptr: Vec<usize>,
    rowval: Vec<u32>,
    nzval: Vec<f64>,
}

impl Csc {
    /// Builds from `(col, row, value)` triplets; duplicates are summed and
    /// stay structurally present even when the sum is zero.
    pub fn from_triplets(nrows: usize, ncols: usize, mut triplets: Vec<(u32, u32, f64)>) -> Self {
        triplets.sort_unstable_by_key(|&(c, r, _)| (c, r));
        let mut colptr = vec![0usize; ncols + 1];
        let mut rowval: Vec<u32> = Vec::with_capacity(triplets.len());
        let mut nzval: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(u32, u32)> = None;
        for (c, r, v) in triplets {
            debug_assert!((c as usize) < ncols && (r as usize) < nrows);
            if last == Some((c, r)) {
                *nzval.last_mut().expect("previous entry") += v;
            } else {
                rowval.push(r);
                nzval.push(v);
                colptr[c as usize + 1] += 1;
                last = Some((c, r));
            }
        }
        for j in 0..ncols {
            colptr[j + 1] += colptr[j];
        }
        Csc {
            nrows,
            ncols,
            colptr,
            rowval,
            nzval,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.nzval.len()
    }

    #[inline]
    pub fn col_range(&self, j: usize) -> core::ops::Range<usize> {
        self.colptr[j]..self.colptr[j + 1]
    }

    pub fn colptr(&self) -> &[usize] {
        &self.colptr
    }

    pub fn rowval(&self) -> &[u32] {
        &self.rowval
    }

    pub fn nzval(&self) -> &[f64] {
        &self.nzval
    }

    pub fn nzval_mut(&mut self) -> &mut [f64] {
        &mut self.nzval
    }

    pub fn same_pattern(&self, other: &Csc) -> bool {
        self.nrows == other.nrows
            && self.ncols == other.ncols
            && self.colptr == other.colptr
            && self.rowval == other.rowval
    }

    pub fn to_dense(&self) -> Dense {
        let mut d = Dense::zeros(self.nrows, self.ncols);
        for j in 0..self.ncols {
            for e in self.col_range(j) {
                d.set(self.rowval[e] as usize, j, self.nzval[e]);
            }
        }
        d
    }
}

/// Square block-diagonal matrix of `nblocks` dense `p × p` tiles.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockDiag {
    p: usize,
    nblocks: usize,
    data: Vec<f64>,
}

impl BlockDiag {
    pub fn zeros(p: usize, nblocks: usize) -> Self {
        BlockDiag {
            p,
            nblocks,
            data: vec![0.0; p * p * nblocks],
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn nblocks(&self) -> usize {
        self.nblocks
    }

    /// Column-major `p × p` tile.
    pub fn tile(&self, b: usize) -> &[f64] {
        let s = self.p * self.p;
        &self.data[b * s..(b + 1) * s]
    }

    pub fn tile_mut(&mut self, b: usize) -> &mut [f64] {
        let s = self.p * self.p;
        &mut self.data[b * s..(b + 1) * s]
    }

    pub fn tiles_mut(&mut self) -> core::slice::ChunksExactMut<'_, f64> {
        let s = self.p * self.p;
        self.data.chunks_exact_mut(s)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// One block of a blocked symmetric matrix or of its lower factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Block {
    Diagonal(Vec<f64>),
    BlockDiagonal(BlockDiag),
    Sparse(Csc),
    Dense(Dense),
}

impl Block {
    pub fn tag(&self) -> BlockTag {
        match self {
            Block::Diagonal(_) => BlockTag::Diagonal,
            Block::BlockDiagonal(_) => BlockTag::BlockDiagonal,
            Block::Sparse(_) => BlockTag::Sparse,
            Block::Dense(_) => BlockTag::Dense,
        }
    }

    pub fn nrows(&self) -> usize {
        match self {
            Block::Diagonal(d) => d.len(),
            Block::BlockDiagonal(b) => b.p * b.nblocks,
            Block::Sparse(s) => s.nrows,
            Block::Dense(d) => d.nrows,
        }
    }

    pub fn ncols(&self) -> usize {
        match self {
            Block::Sparse(s) => s.ncols,
            Block::Dense(d) => d.ncols,
            _ => self.nrows(),
        }
    }

    /// Structural entries. On a diagonal block (`on_diagonal`) only the lower
    /// triangle counts, since the upper one is implied by symmetry or zero.
    pub fn nnz(&self, on_diagonal: bool) -> usize {
        match self {
            Block::Diagonal(d) => d.len(),
            Block::BlockDiagonal(b) => {
                let per = if on_diagonal { b.p * (b.p + 1) / 2 } else { b.p * b.p };
                per * b.nblocks
            }
            Block::Sparse(s) => {
                if on_diagonal {
                    (0..s.ncols)
                        .map(|j| s.col_range(j).filter(|&e| s.rowval[e] as usize >= j).count())
                        .sum()
                } else {
                    s.nnz()
                }
            }
            Block::Dense(d) => {
                if on_diagonal {
                    d.nrows * (d.nrows + 1) / 2
                } else {
                    d.nrows * d.ncols
                }
            }
        }
    }

    /// Bytes held by the block's value and index arrays.
    pub fn bytes(&self) -> usize {
        let f = size_of::<f64>();
        match self {
            Block::Diagonal(d) => d.len() * f,
            Block::BlockDiagonal(b) => b.data.len() * f,
            Block::Sparse(s) => {
                s.nzval.len() * f + s.rowval.len() * size_of::<u32>() + s.colptr.len() * size_of::<usize>()
            }
            Block::Dense(d) => d.data.len() * f,
        }
    }

    pub fn to_dense(&self) -> Dense {
        match self {
            Block::Diagonal(d) => {
                let mut m = Dense::zeros(d.len(), d.len());
                for (i, &v) in d.iter().enumerate() {
                    m.set(i, i, v);
                }
                m
            }
            Block::BlockDiagonal(b) => {
                let n = b.p * b.nblocks;
                let mut m = Dense::zeros(n, n);
                for k in 0..b.nblocks {
                    let t = b.tile(k);
                    for j in 0..b.p {
                        for i in 0..b.p {
                            m.set(k * b.p + i, k * b.p + j, t[i + j * b.p]);
                        }
                    }
                }
                m
            }
            Block::Sparse(s) => s.to_dense(),
            Block::Dense(d) => d.clone(),
        }
    }

    /// Overwrites `self` with the values of `src`. Blocks with the same tag
    /// must share their pattern; a dense destination accepts any source.
    pub fn copy_from(&mut self, src: &Block) {
        match (self, src) {
            (Block::Diagonal(d), Block::Diagonal(s)) => d.copy_from_slice(s),
            (Block::BlockDiagonal(d), Block::BlockDiagonal(s)) => d.data.copy_from_slice(&s.data),
            (Block::Sparse(d), Block::Sparse(s)) => {
                debug_assert!(d.same_pattern(s));
                d.nzval.copy_from_slice(&s.nzval);
            }
            (Block::Dense(d), Block::Dense(s)) => d.data.copy_from_slice(&s.data),
            (Block::Dense(d), src) => {
                debug_assert_eq!((d.nrows, d.ncols), (src.nrows(), src.ncols()));
                d.fill(0.0);
                match src {
                    Block::Diagonal(s) => {
                        for (i, &v) in s.iter().enumerate() {
                            d.set(i, i, v);
                        }
                    }
                    Block::BlockDiagonal(b) => {
                        for k in 0..b.nblocks {
                            let t = b.tile(k);
                            for j in 0..b.p {
                                for i in 0..b.p {
                                    d.set(k * b.p + i, k * b.p + j, t[i + j * b.p]);
                                }
                            }
                        }
                    }
                    Block::Sparse(s) => {
                        for j in 0..s.ncols {
                            for e in s.col_range(j) {
                                d.set(s.rowval[e] as usize, j, s.nzval[e]);
                            }
                        }
                    }
                    Block::Dense(_) => unreachable!(),
                }
            }
            (d, s) => panic!("cannot copy a {:?} block into a {:?} block", s.tag(), d.tag()),
        }
    }

    /// Adds `v` to every diagonal element of a square block.
    pub fn add_to_diagonal(&mut self, v: f64) {
        match self {
            Block::Diagonal(d) => d.iter_mut().for_each(|x| *x += v),
            Block::BlockDiagonal(b) => {
                let p = b.p;
                for t in b.tiles_mut() {
                    for i in 0..p {
                        t[i + i * p] += v;
                    }
                }
            }
            Block::Dense(d) => {
                for i in 0..d.nrows.min(d.ncols) {
                    d.add(i, i, v);
                }
            }
            Block::Sparse(s) => {
                for j in 0..s.ncols {
                    for e in s.colptr[j]..s.colptr[j + 1] {
                        if s.rowval[e] as usize == j {
                            s.nzval[e] += v;
                        }
                    }
                }
            }
        }
    }

    /// Multiplies every stored value by `s`.
    pub fn scale(&mut self, s: f64) {
        let vals: &mut [f64] = match self {
            Block::Diagonal(d) => d,
            Block::BlockDiagonal(b) => &mut b.data,
            Block::Sparse(c) => &mut c.nzval,
            Block::Dense(d) => &mut d.data,
        };
        vals.iter_mut().for_each(|x| *x *= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn triplets_accumulate_and_sort() {
        let s = Csc::from_triplets(3, 2, vec![(1, 2, 1.0), (0, 1, 2.0), (1, 0, 3.0), (1, 2, 4.0), (0, 1, -2.0)]);
        assert_eq!(s.colptr(), &[0, 1, 3]);
        assert_eq!(s.rowval(), &[1, 0, 2]);
        assert_eq!(s.nzval(), &[0.0, 3.0, 5.0]);
        assert_eq!(s.nnz(), 3);
    }

    #[test]
    fn structural_counts() {
        assert_eq!(Block::Dense(Dense::zeros(4, 4)).nnz(true), 10);
        assert_eq!(Block::Dense(Dense::zeros(3, 4)).nnz(false), 12);
        assert_eq!(Block::BlockDiagonal(BlockDiag::zeros(2, 5)).nnz(true), 15);
        assert_eq!(Block::Diagonal(vec![1.0; 7]).nnz(true), 7);
    }

    #[test]
    fn dense_copy_scatters_any_source() {
        let src = Block::Sparse(Csc::from_triplets(2, 3, vec![(0, 1, 1.5), (2, 0, -1.0)]));
        let mut dst = Block::Dense(Dense::from_col_major(2, 3, vec![9.0; 6]));
        dst.copy_from(&src);
        assert_eq!(dst.to_dense(), src.to_dense());

        let mut bd = BlockDiag::zeros(2, 2);
        bd.tile_mut(1).copy_from_slice(&[1.0, 2.0, 2.0, 5.0]);
        let src = Block::BlockDiagonal(bd);
        let mut dst = Block::Dense(Dense::zeros(4, 4));
        dst.copy_from(&src);
        assert_eq!(dst.to_dense().get(3, 2), 2.0);
        assert_eq!(dst.to_dense().get(3, 3), 5.0);
    }
}
