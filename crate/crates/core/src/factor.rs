//! Blocked lower Cholesky factor of `Ωθ`, updated in place for each `θ`.
//!
//! `Ωθ` is `A` with its random-effects rows scaled by `Λθᵀ`, its
//! random-effects columns scaled by `Λθ`, and the identity added to the
//! random-effects diagonal. The profiled objectives need only the diagonal of
//! the factor.

use alloc::vec::Vec;
use core::mem;

use crate::block::{Block, BlockTag, Dense};
use crate::error::{Error, Result};
use crate::gram::{offsets, tri, GramBlocks};
use crate::lambda::Template;
use crate::linalg::{
    cholesky_blockdiag, cholesky_lower_with, rdiv_blockdiag_dense, rdiv_blockdiag_sparse, rdiv_diagonal_dense,
    rdiv_diagonal_sparse, rdiv_lower_t, sub_dense_dense_t, sub_dense_sparse_t, sub_sparse_dense_t,
    sub_sparse_sparse_t, PivotFailure,
};

/// Pivots at or below this fraction of the block's largest diagonal entry
/// count as a breakdown.
pub const PIVOT_FLOOR: f64 = 1e-13;

/// Blocks of `L`, congruent with the blocks of `A`.
///
/// The first block column keeps `A`'s structure; every other block is dense.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorBlocks {
    sizes: Vec<usize>,
    blocks: Vec<Block>,
    /// Packing space for the dense Cholesky kernel, kept between updates.
    work: Vec<f64>,
}

impl FactorBlocks {
    pub fn new(a: &GramBlocks) -> Self {
        let sizes = a.sizes().to_vec();
        let m = sizes.len();
        let mut blocks = Vec::with_capacity(m * (m + 1) / 2);
        for i in 0..m {
            for j in 0..=i {
                blocks.push(if j == 0 {
                    a.block(i, 0).clone()
                } else {
                    Block::Dense(Dense::zeros(sizes[i], sizes[j]))
                });
            }
        }
        FactorBlocks {
            sizes,
            blocks,
            work: Vec::new(),
        }
    }

    pub fn nblocks(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn block(&self, i: usize, j: usize) -> &Block {
        &self.blocks[tri(i, j)]
    }

    pub fn tags(&self) -> Vec<BlockTag> {
        self.blocks.iter().map(Block::tag).collect()
    }

    /// Structural entries, counting only the lower triangle of diagonal blocks.
    pub fn nnz(&self) -> usize {
        let m = self.nblocks();
        (0..m)
            .flat_map(|i| (0..=i).map(move |j| (i, j)))
            .map(|(i, j)| self.block(i, j).nnz(i == j))
            .sum()
    }

    pub fn bytes(&self) -> usize {
        self.blocks.iter().map(Block::bytes).sum()
    }

    /// The final `(p+1) × (p+1)` block: `R_XX`, `r_Xy` and `r_yy` transposed.
    pub fn xy_block(&self) -> &Dense {
        let m = self.nblocks();
        match self.block(m - 1, m - 1) {
            Block::Dense(d) => d,
            _ => unreachable!("the fixed-effects block is dense"),
        }
    }

    /// `r_yy`, the last diagonal entry.
    pub fn ryy(&self) -> f64 {
        let d = self.xy_block();
        d.get(d.nrows() - 1, d.ncols() - 1)
    }

    /// `log|R_ZZ|`, the sum of the logs of the random-effects pivots.
    pub fn logdet_re(&self) -> f64 {
        let mut s = 0.0;
        for j in 0..self.nblocks() - 1 {
            s += diag_log_sum(self.block(j, j));
        }
        s
    }

    /// `log|R_XX|`.
    pub fn logdet_x(&self) -> f64 {
        let d = self.xy_block();
        (0..d.nrows() - 1).map(|i| libm::log(d.get(i, i))).sum()
    }

    /// Dense lower-triangular `L`, including the `[X y]` rows.
    pub fn to_dense(&self) -> Dense {
        let off = offsets(&self.sizes);
        let total = off[self.nblocks()];
        let mut out = Dense::zeros(total, total);
        for i in 0..self.nblocks() {
            for j in 0..=i {
                let b = self.block(i, j).to_dense();
                for c in 0..b.ncols() {
                    for r in 0..b.nrows() {
                        if i == j && r < c {
                            continue;
                        }
                        out.set(off[i] + r, off[j] + c, b.get(r, c));
                    }
                }
            }
        }
        out
    }

    /// Recomputes every block from `A` and the templates.
    pub fn update(&mut self, a: &GramBlocks, templates: &[Template]) -> Result<()> {
        let m = self.nblocks();
        let k = m - 1;
        if a.nblocks() != m || templates.len() != k {
            return Err(Error::Dimension("factor, Gram matrix and templates disagree"));
        }
        for j in 0..m {
            for i in j..m {
                let l = &mut self.blocks[tri(i, j)];
                l.copy_from(a.block(i, j));
                if i < k {
                    templates[i].lmul_transpose(l)?;
                }
                if j < k {
                    templates[j].rmul(l)?;
                }
                if i == j && i < k {
                    l.add_to_diagonal(1.0);
                }
            }
            for c in 0..j {
                for i in j..m {
                    let idx = tri(i, j);
                    let mut target = mem::replace(&mut self.blocks[idx], Block::Diagonal(Vec::new()));
                    if let Block::Dense(t) = &mut target {
                        downdate(t, &self.blocks[tri(i, c)], &self.blocks[tri(j, c)], i == j);
                    }
                    self.blocks[idx] = target;
                }
            }
            let djj = tri(j, j);
            let mut diag = mem::replace(&mut self.blocks[djj], Block::Diagonal(Vec::new()));
            let factored = factor_diagonal(&mut diag, j == k, &mut self.work).map_err(|f| {
                if j == k {
                    Error::RankDeficient(f.row)
                } else {
                    Error::Breakdown {
                        block: j,
                        row: f.row,
                        value: f.value,
                    }
                }
            });
            if factored.is_ok() {
                for i in (j + 1)..m {
                    rdiv(&mut self.blocks[tri(i, j)], &diag);
                }
            }
            self.blocks[djj] = diag;
            factored?;
        }
        Ok(())
    }
}

fn diag_log_sum(b: &Block) -> f64 {
    match b {
        Block::Diagonal(d) => d.iter().map(|&v| libm::log(v)).sum(),
        Block::BlockDiagonal(bd) => {
            let p = bd.p();
            (0..bd.nblocks())
                .map(|t| (0..p).map(|i| libm::log(bd.tile(t)[i + i * p])).sum::<f64>())
                .sum()
        }
        Block::Dense(d) => (0..d.nrows()).map(|i| libm::log(d.get(i, i))).sum(),
        Block::Sparse(_) => unreachable!("diagonal blocks of the factor are never sparse"),
    }
}

fn downdate(t: &mut Dense, a: &Block, b: &Block, lower: bool) {
    match (a, b) {
        (Block::Dense(a), Block::Dense(b)) => sub_dense_dense_t(t, a, b, lower),
        (Block::Dense(a), Block::Sparse(b)) => sub_dense_sparse_t(t, a, b),
        (Block::Sparse(a), Block::Dense(b)) => sub_sparse_dense_t(t, a, b),
        (Block::Sparse(a), Block::Sparse(b)) => sub_sparse_sparse_t(t, a, b, lower),
        _ => unreachable!("off-diagonal factor blocks are sparse or dense"),
    }
}

fn factor_diagonal(b: &mut Block, last: bool, work: &mut Vec<f64>) -> core::result::Result<(), PivotFailure> {
    match b {
        Block::Diagonal(d) => {
            let maxdiag = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for (row, v) in d.iter_mut().enumerate() {
                if !(*v > PIVOT_FLOOR * maxdiag) {
                    return Err(PivotFailure { row, value: *v });
                }
                *v = libm::sqrt(*v);
            }
            Ok(())
        }
        Block::BlockDiagonal(bd) => cholesky_blockdiag(bd, PIVOT_FLOOR),
        Block::Dense(d) => cholesky_lower_with(d, PIVOT_FLOOR, last, work),
        Block::Sparse(_) => unreachable!("diagonal blocks of the factor are never sparse"),
    }
}

fn rdiv(x: &mut Block, l: &Block) {
    match (x, l) {
        (Block::Dense(x), Block::Diagonal(d)) => rdiv_diagonal_dense(x, d),
        (Block::Sparse(x), Block::Diagonal(d)) => rdiv_diagonal_sparse(x, d),
        (Block::Dense(x), Block::BlockDiagonal(b)) => rdiv_blockdiag_dense(x, b),
        (Block::Sparse(x), Block::BlockDiagonal(b)) => rdiv_blockdiag_sparse(x, b),
        (Block::Dense(x), Block::Dense(l)) => rdiv_lower_t(x, l),
        _ => unreachable!("unsupported block pairing in triangular solve"),
    }
}
