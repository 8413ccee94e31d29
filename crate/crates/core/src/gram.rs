//! The augmented Gram matrix `A = [Z X y]ᵀ[Z X y]`, lower triangle only,
//! partitioned by random-effects term with `[X y]` as the last block row.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Write;

use crate::block::{Block, BlockDiag, BlockTag, Csc, Dense};
use crate::data::{ReMat, XyMat};
use crate::error::{Error, Result};

/// Off-diagonal random-effects blocks denser than this are stored dense.
pub const DENSIFY_THRESHOLD: f64 = 0.10;

/// Position of block `(i, j)`, `j ≤ i`, in packed lower-triangular order.
#[inline]
pub fn tri(i: usize, j: usize) -> usize {
    debug_assert!(j <= i);
    i * (i + 1) / 2 + j
}

/// Stable sort by number of random effects, largest first.
pub fn sort_terms(mut rems: Vec<ReMat>) -> Vec<ReMat> {
    rems.sort_by_key(|r| core::cmp::Reverse(r.q()));
    rems
}

/// Lower triangle of `A` in blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct GramBlocks {
    names: Vec<String>,
    sizes: Vec<usize>,
    blocks: Vec<Block>,
}

impl GramBlocks {
    /// Number of block rows: the terms plus the `[X y]` row.
    pub fn nblocks(&self) -> usize {
        self.sizes.len()
    }

    /// Grouping-factor names, then `"fixed"`.
    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Rows in each block row.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn block(&self, i: usize, j: usize) -> &Block {
        &self.blocks[tri(i, j)]
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn nnz(&self) -> usize {
        self.lower_cells().map(|(i, j)| self.block(i, j).nnz(i == j)).sum()
    }

    pub fn bytes(&self) -> usize {
        self.blocks.iter().map(Block::bytes).sum()
    }

    /// `(i, j)` for every stored block, row by row.
    pub fn lower_cells(&self) -> impl Iterator<Item = (usize, usize)> {
        let m = self.nblocks();
        (0..m).flat_map(|i| (0..=i).map(move |j| (i, j)))
    }

    /// The full symmetric matrix.
    pub fn to_dense(&self) -> Dense {
        let offsets = offsets(&self.sizes);
        let total = *offsets.last().unwrap_or(&0);
        let mut out = Dense::zeros(total, total);
        for (i, j) in self.lower_cells() {
            let b = self.block(i, j).to_dense();
            for c in 0..b.ncols() {
                for r in 0..b.nrows() {
                    if i == j && r < c {
                        continue;
                    }
                    let v = b.get(r, c);
                    out.set(offsets[i] + r, offsets[j] + c, v);
                    out.set(offsets[j] + c, offsets[i] + r, v);
                }
            }
        }
        out
    }
}

/// Cumulative block offsets, starting at zero.
pub fn offsets(sizes: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(sizes.len() + 1);
    let mut acc = 0;
    out.push(0);
    for &s in sizes {
        acc += s;
        out.push(acc);
    }
    out
}

fn check_refs(re: &ReMat) -> Result<()> {
    if re.refs.iter().any(|&r| r as usize >= re.nlevels()) {
        return Err(Error::RefOutOfRange(re.grouping.clone()));
    }
    Ok(())
}

fn diagonal_block(re: &ReMat) -> Block {
    let p = re.p();
    if p == 1 {
        let mut d = vec![0.0; re.nlevels()];
        for (o, &r) in re.refs.iter().enumerate() {
            let z = re.wide[o];
            d[r as usize] += z * z;
        }
        Block::Diagonal(d)
    } else {
        let mut b = BlockDiag::zeros(p, re.nlevels());
        for (o, &r) in re.refs.iter().enumerate() {
            let z = re.row(o);
            let t = b.tile_mut(r as usize);
            for j in 0..p {
                for i in 0..p {
                    t[i + j * p] += z[i] * z[j];
                }
            }
        }
        Block::BlockDiagonal(b)
    }
}

/// `Zᵢᵀ Zⱼ`. Every observed pair of levels contributes a full `pᵢ × pⱼ`
/// tile to the pattern, even where a product happens to be zero.
fn cross_block(ri: &ReMat, rj: &ReMat) -> Block {
    let (pi, pj) = (ri.p(), rj.p());
    let mut trip = Vec::with_capacity(ri.n() * pi * pj);
    for o in 0..ri.n() {
        let (a, b) = (ri.refs[o] as usize, rj.refs[o] as usize);
        let (zi, zj) = (ri.row(o), rj.row(o));
        for c in 0..pj {
            for r in 0..pi {
                trip.push(((b * pj + c) as u32, (a * pi + r) as u32, zi[r] * zj[c]));
            }
        }
    }
    let s = Csc::from_triplets(ri.q(), rj.q(), trip);
    let density = s.nnz() as f64 / (ri.q() as f64 * rj.q() as f64);
    if density > DENSIFY_THRESHOLD {
        Block::Dense(s.to_dense())
    } else {
        Block::Sparse(s)
    }
}

/// `[X y]ᵀ Zⱼ`.
fn xy_block(xy: &XyMat, re: &ReMat) -> Block {
    let m = xy.p() + 1;
    let pj = re.p();
    let mut d = Dense::zeros(m, re.q());
    for o in 0..xy.n() {
        let base = re.refs[o] as usize * pj;
        let z = re.row(o);
        for (c, &zc) in z.iter().enumerate() {
            if zc == 0.0 {
                continue;
            }
            let col = d.col_mut(base + c);
            for (r, v) in col.iter_mut().enumerate() {
                *v += xy.get(o, r) * zc;
            }
        }
    }
    Block::Dense(d)
}

fn xy_gram(xy: &XyMat) -> Block {
    let m = xy.p() + 1;
    let mut d = Dense::zeros(m, m);
    for j in 0..m {
        for i in j..m {
            let v: f64 = xy.col(i).iter().zip(xy.col(j)).map(|(a, b)| a * b).sum();
            d.set(i, j, v);
            d.set(j, i, v);
        }
    }
    Block::Dense(d)
}

/// Assembles every block of `A` for terms already in model order.
pub fn assemble(rems: &[ReMat], xy: &XyMat) -> Result<GramBlocks> {
    for re in rems {
        check_refs(re)?;
        if re.n() != xy.n() {
            return Err(Error::Dimension("terms and fixed effects differ in observations"));
        }
    }
    let k = rems.len();
    let mut blocks = Vec::with_capacity((k + 1) * (k + 2) / 2);
    for i in 0..k {
        for j in 0..i {
            blocks.push(cross_block(&rems[i], &rems[j]));
        }
        blocks.push(diagonal_block(&rems[i]));
    }
    for re in rems {
        blocks.push(xy_block(xy, re));
    }
    blocks.push(xy_gram(xy));

    let mut names: Vec<String> = rems.iter().map(|r| r.grouping.clone()).collect();
    names.push(String::from("fixed"));
    let mut sizes: Vec<usize> = rems.iter().map(ReMat::q).collect();
    sizes.push(xy.p() + 1);
    Ok(GramBlocks { names, sizes, blocks })
}

fn cell(a: BlockTag, l: BlockTag) -> String {
    if a == l {
        String::from(a.name())
    } else {
        let mut s = String::from(a.short_name());
        s.push('/');
        s.push_str(l.short_name());
        s
    }
}

/// Text table of block tags: the tag of `A`'s block, or `A/L` where the
/// factor's block has a different structure.
pub fn block_description(a: &GramBlocks, l_tags: &[BlockTag]) -> String {
    let m = a.nblocks();
    let mut rows: Vec<Vec<String>> = Vec::with_capacity(m + 1);
    let mut header = vec![String::from("rows")];
    header.extend(a.names.iter().cloned());
    rows.push(header);
    for i in 0..m {
        let mut row = vec![alloc::format!("{}", a.sizes[i])];
        for j in 0..=i {
            row.push(cell(a.block(i, j).tag(), l_tags[tri(i, j)]));
        }
        rows.push(row);
    }
    let mut widths = vec![0usize; m + 1];
    for row in &rows {
        for (c, s) in row.iter().enumerate() {
            widths[c] = widths[c].max(s.chars().count());
        }
    }
    let mut out = String::new();
    for row in &rows {
        let mut line = String::new();
        for (c, s) in row.iter().enumerate() {
            if c > 0 {
                line.push_str("  ");
            }
            let _ = write!(line, "{:<w$}", s, w = widths[c]);
        }
        out.push_str(line.trim_end());
        out.push('\n');
    }
    out
}
