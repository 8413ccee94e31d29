//! The relative covariance factor `Λθ`, held implicitly.
//!
//! `Λθ` is block diagonal. For grouping factor `i` the block repeats a
//! `pᵢ × pᵢ` lower-triangular template `Tᵢ` once per level, so only the
//! templates are stored. Products with `Λθ` work on the blocks of the Gram
//! matrix directly, treating their rows or columns as runs of `pᵢ` per level.

use alloc::vec;
use alloc::vec::Vec;

use crate::block::{Block, Csc, Dense};
use crate::error::{Error, Result};
use crate::formula::CorrMask;

/// Lower-triangular `p × p` template, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Template {
    p: usize,
    values: Vec<f64>,
    mask: CorrMask,
}

impl Template {
    /// A template with unit diagonal and zero off-diagonal.
    pub fn new(mask: CorrMask) -> Self {
        let p = mask.dim();
        let mut values = vec![0.0; p * p];
        for i in 0..p {
            values[i + i * p] = 1.0;
        }
        Template { p, values, mask }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn mask(&self) -> &CorrMask {
        &self.mask
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i + j * self.p]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `T·Tᵀ`, column-major.
    pub fn outer(&self) -> Vec<f64> {
        let p = self.p;
        let mut out = vec![0.0; p * p];
        for i in 0..p {
            for j in 0..p {
                out[i + j * p] = (0..=i.min(j)).map(|k| self.get(i, k) * self.get(j, k)).sum();
            }
        }
        out
    }

    #[inline]
    fn tmul_in_place(&self, x: &mut [f64]) {
        // x ← Tᵀ x
        let p = self.p;
        for r in 0..p {
            let mut v = 0.0;
            for s in r..p {
                v += self.values[s + r * p] * x[s];
            }
            x[r] = v;
        }
    }

    /// `B ← Tᵢᵀ-blocked · B`: rows of `block` are grouped in runs of `p`.
    pub fn lmul_transpose(&self, block: &mut Block) -> Result<()> {
        let p = self.p;
        if !block.nrows().is_multiple_of(p) {
            return Err(Error::Dimension("block rows are not a multiple of the template size"));
        }
        if p == 1 {
            block.scale(self.values[0]);
            return Ok(());
        }
        let mut stack = [0.0f64; SEG_STACK];
        let mut heap = Vec::new();
        let seg = segment(p, &mut stack, &mut heap);
        match block {
            Block::Diagonal(_) => {
                return Err(Error::Dimension("a diagonal block cannot carry a vector-valued term"))
            }
            Block::BlockDiagonal(b) => {
                if b.p() != p {
                    return Err(Error::Dimension("tile size differs from template size"));
                }
                for t in b.tiles_mut() {
                    for col in t.chunks_exact_mut(p) {
                        self.tmul_in_place(col);
                    }
                }
            }
            Block::Dense(d) => {
                for j in 0..d.ncols() {
                    for g in d.col_mut(j).chunks_exact_mut(p) {
                        self.tmul_in_place(g);
                    }
                }
            }
            Block::Sparse(s) => {
                for j in 0..s.ncols() {
                    let range = s.col_range(j);
                    let mut e = range.start;
                    while e < range.end {
                        let base = s.rowval()[e] as usize;
                        let complete = base.is_multiple_of(p)
                            && e + p <= range.end
                            && (0..p).all(|k| s.rowval()[e + k] as usize == base + k);
                        if !complete {
                            return Err(Error::Dimension("sparse block rows are not whole level groups"));
                        }
                        seg.copy_from_slice(&s.nzval()[e..e + p]);
                        self.tmul_in_place(seg);
                        s.nzval_mut()[e..e + p].copy_from_slice(seg);
                        e += p;
                    }
                }
            }
        }
        Ok(())
    }

    #[inline]
    fn rmul_in_place(&self, x: &mut [f64]) {
        // xᵀ ← xᵀ T
        let p = self.p;
        for c in 0..p {
            let mut v = 0.0;
            for s in c..p {
                v += x[s] * self.values[s + c * p];
            }
            x[c] = v;
        }
    }

    /// `B ← B · Tⱼ-blocked`: columns of `block` are grouped in runs of `p`.
    pub fn rmul(&self, block: &mut Block) -> Result<()> {
        let p = self.p;
        if !block.ncols().is_multiple_of(p) {
            return Err(Error::Dimension("block columns are not a multiple of the template size"));
        }
        if p == 1 {
            block.scale(self.values[0]);
            return Ok(());
        }
        let mut stack = [0.0f64; SEG_STACK];
        let mut heap = Vec::new();
        let seg = segment(p, &mut stack, &mut heap);
        match block {
            Block::Diagonal(_) => {
                return Err(Error::Dimension("a diagonal block cannot carry a vector-valued term"))
            }
            Block::BlockDiagonal(b) => {
                if b.p() != p {
                    return Err(Error::Dimension("tile size differs from template size"));
                }
                for t in b.tiles_mut() {
                    for i in 0..p {
                        for c in 0..p {
                            seg[c] = t[i + c * p];
                        }
                        self.rmul_in_place(seg);
                        for c in 0..p {
                            t[i + c * p] = seg[c];
                        }
                    }
                }
            }
            Block::Dense(d) => rmul_dense(self, d, seg),
            Block::Sparse(s) => rmul_sparse(self, s, seg)?,
        }
        Ok(())
    }
}

/// Templates up to this size scale through a stack buffer.
const SEG_STACK: usize = 16;

fn segment<'a>(p: usize, stack: &'a mut [f64; SEG_STACK], heap: &'a mut Vec<f64>) -> &'a mut [f64] {
    if p <= SEG_STACK {
        &mut stack[..p]
    } else {
        heap.resize(p, 0.0);
        heap
    }
}

fn rmul_dense(t: &Template, d: &mut Dense, seg: &mut [f64]) {
    let p = t.p;
    for g in 0..d.ncols() / p {
        for i in 0..d.nrows() {
            for c in 0..p {
                seg[c] = d.get(i, g * p + c);
            }
            t.rmul_in_place(seg);
            for c in 0..p {
                d.set(i, g * p + c, seg[c]);
            }
        }
    }
}

fn rmul_sparse(t: &Template, s: &mut Csc, seg: &mut [f64]) -> Result<()> {
    let p = t.p;
    for g in 0..s.ncols() / p {
        let first = s.col_range(g * p);
        for c in 1..p {
            let other = s.col_range(g * p + c);
            if other.len() != first.len()
                || s.rowval()[other.clone()] != s.rowval()[first.clone()]
            {
                return Err(Error::Dimension("sparse block columns are not whole level groups"));
            }
        }
        for e in 0..first.len() {
            for c in 0..p {
                seg[c] = s.nzval()[s.col_range(g * p + c).start + e];
            }
            t.rmul_in_place(seg);
            for c in 0..p {
                let idx = s.col_range(g * p + c).start + e;
                s.nzval_mut()[idx] = seg[c];
            }
        }
    }
    Ok(())
}

/// Position of every element of `θ` within the templates.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaMap {
    ranges: Vec<(usize, usize)>,
    positions: Vec<(usize, usize, usize)>,
    lower: Vec<f64>,
}

impl ThetaMap {
    /// Terms in model order; within a term, column-major over the free
    /// entries of the lower triangle.
    pub fn new(templates: &[Template]) -> Self {
        let mut ranges = Vec::with_capacity(templates.len());
        let mut positions = Vec::new();
        let mut lower = Vec::new();
        for (k, t) in templates.iter().enumerate() {
            let offset = positions.len();
            for (i, j) in t.mask.free_positions() {
                positions.push((k, i, j));
                lower.push(if i == j { 0.0 } else { f64::NEG_INFINITY });
            }
            ranges.push((offset, positions.len() - offset));
        }
        ThetaMap {
            ranges,
            positions,
            lower,
        }
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// `(offset, count)` of term `k`'s slice of `θ`.
    pub fn term_range(&self, k: usize) -> (usize, usize) {
        self.ranges[k]
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower
    }

    /// `(term, row, col)` of each element.
    pub fn positions(&self) -> &[(usize, usize, usize)] {
        &self.positions
    }

    pub fn validate(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.len() {
            return Err(Error::ThetaLength {
                got: theta.len(),
                expected: self.len(),
            });
        }
        for (index, (&value, &bound)) in theta.iter().zip(&self.lower).enumerate() {
            if !(value >= bound) || value.is_infinite() {
                return Err(Error::ThetaBound { index, value, bound });
            }
        }
        Ok(())
    }
}

/// Writes `θ` into the free entries of the templates; masked-out entries are
/// left untouched (zero).
pub fn set_theta(templates: &mut [Template], map: &ThetaMap, theta: &[f64]) -> Result<()> {
    map.validate(theta)?;
    for (&(k, i, j), &v) in map.positions.iter().zip(theta) {
        let t = &mut templates[k];
        t.values[i + j * t.p] = v;
    }
    Ok(())
}

/// One for each diagonal entry, zero for each free off-diagonal entry.
pub fn initial_theta(map: &ThetaMap) -> Vec<f64> {
    map.positions
        .iter()
        .map(|&(_, i, j)| if i == j { 1.0 } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::block::BlockDiag;

    fn templates(masks: &[CorrMask]) -> (Vec<Template>, ThetaMap) {
        let t: Vec<Template> = masks.iter().cloned().map(Template::new).collect();
        let m = ThetaMap::new(&t);
        (t, m)
    }

    #[test]
    fn installs_insteval_estimates() {
        let (mut t, map) = templates(&[CorrMask::diagonal(1), CorrMask::diagonal(1), CorrMask::diagonal(2)]);
        let theta = [0.2757269709081104, 0.4352906455775487, 0.04315999320792337, 0.12997785126273184];
        set_theta(&mut t, &map, &theta).unwrap();
        assert_eq!(t[0].values(), &[0.2757269709081104]);
        assert_eq!(t[1].values(), &[0.4352906455775487]);
        assert_eq!(t[2].values(), &[0.04315999320792337, 0.0, 0.0, 0.12997785126273184]);
        assert_eq!(map.term_range(2), (2, 2));
    }

    #[test]
    fn all_ones_and_all_zeros() {
        let (mut t, map) = templates(&[CorrMask::full(2), CorrMask::diagonal(2)]);
        set_theta(&mut t, &map, &[1.0; 5]).unwrap();
        assert_eq!(t[0].values(), &[1.0, 1.0, 0.0, 1.0]);
        assert_eq!(t[1].values(), &[1.0, 0.0, 0.0, 1.0]);
        set_theta(&mut t, &map, &[0.0; 5]).unwrap();
        assert!(t.iter().all(|t| t.values().iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn initial_values() {
        let (_, map) = templates(&vec![CorrMask::diagonal(1); 4]);
        assert_eq!(initial_theta(&map), vec![1.0; 4]);
        let (_, map) = templates(&[CorrMask::full(2)]);
        assert_eq!(initial_theta(&map), vec![1.0, 0.0, 1.0]);
        assert_eq!(map.lower_bounds(), &[0.0, f64::NEG_INFINITY, 0.0]);
        let (_, map) = templates(&[]);
        assert!(initial_theta(&map).is_empty());
    }

    #[test]
    fn rejects_bad_theta() {
        let (mut t, map) = templates(&[CorrMask::full(2)]);
        assert_eq!(
            set_theta(&mut t, &map, &[1.0]),
            Err(Error::ThetaLength { got: 1, expected: 3 })
        );
        assert!(matches!(
            set_theta(&mut t, &map, &[1.0, -5.0, -0.1]),
            Err(Error::ThetaBound { index: 2, .. })
        ));
        assert!(set_theta(&mut t, &map, &[1.0, -5.0, 0.0]).is_ok());
        assert!(set_theta(&mut t, &map, &[f64::NAN, 0.0, 0.0]).is_err());
    }

    #[test]
    fn scalar_scaling_of_diagonal() {
        let (mut t, map) = templates(&[CorrMask::diagonal(1)]);
        set_theta(&mut t, &map, &[2.0]).unwrap();
        let mut b = Block::Diagonal(vec![3.0, 5.0]);
        t[0].lmul_transpose(&mut b).unwrap();
        assert_eq!(b, Block::Diagonal(vec![6.0, 10.0]));
    }

    #[test]
    fn vector_left_scaling_uses_transpose() {
        let mask = CorrMask::full(2);
        let (mut t, map) = templates(&[mask]);
        let (a, b, c) = (2.0, 3.0, 5.0);
        set_theta(&mut t, &map, &[a, b, c]).unwrap();
        let (x, y) = (7.0, 11.0);
        let mut blk = Block::Dense(Dense::from_col_major(2, 1, vec![x, y]));
        t[0].lmul_transpose(&mut blk).unwrap();
        // Tᵀ = [[a, b], [0, c]]
        assert_eq!(blk.to_dense().as_slice(), &[a * x + b * y, c * y]);

        let mut row = Block::Dense(Dense::from_col_major(1, 2, vec![x, y]));
        t[0].rmul(&mut row).unwrap();
        // [x y]·T = [a x + b y, c y]
        assert_eq!(row.to_dense().as_slice(), &[a * x + b * y, c * y]);
    }

    #[test]
    fn sparse_scalar_scaling_keeps_pattern() {
        let (mut t, map) = templates(&[CorrMask::diagonal(1), CorrMask::diagonal(1)]);
        set_theta(&mut t, &map, &[0.5, 3.0]).unwrap();
        let s = Csc::from_triplets(3, 2, vec![(0, 0, 1.0), (0, 2, 2.0), (1, 1, 4.0)]);
        let mut b = Block::Sparse(s.clone());
        t[0].lmul_transpose(&mut b).unwrap();
        t[1].rmul(&mut b).unwrap();
        match b {
            Block::Sparse(out) => {
                assert!(out.same_pattern(&s));
                assert_eq!(out.nzval(), &[1.5, 3.0, 6.0]);
            }
            _ => panic!("tag changed"),
        }
    }

    #[test]
    fn sparse_vector_scaling_requires_whole_groups() {
        let (mut t, map) = templates(&[CorrMask::full(2)]);
        set_theta(&mut t, &map, &[1.0, 2.0, 3.0]).unwrap();
        let mut b = Block::Sparse(Csc::from_triplets(4, 1, vec![(0, 1, 1.0)]));
        assert!(t[0].lmul_transpose(&mut b).is_err());
        let mut b = Block::Sparse(Csc::from_triplets(1, 2, vec![(0, 0, 1.0)]));
        assert!(t[0].rmul(&mut b).is_err());
    }

    #[test]
    fn blockdiag_congruence() {
        let (mut t, map) = templates(&[CorrMask::full(2)]);
        set_theta(&mut t, &map, &[1.5, -0.5, 2.0]).unwrap();
        let mut bd = BlockDiag::zeros(2, 1);
        bd.tile_mut(0).copy_from_slice(&[4.0, 1.0, 1.0, 3.0]);
        let mut b = Block::BlockDiagonal(bd);
        t[0].lmul_transpose(&mut b).unwrap();
        t[0].rmul(&mut b).unwrap();
        // Tᵀ A T with T = [[1.5, 0], [-0.5, 2]]
        let tm = [[1.5, 0.0], [-0.5, 2.0]];
        let am = [[4.0, 1.0], [1.0, 3.0]];
        let d = b.to_dense();
        for i in 0..2 {
            for j in 0..2 {
                let mut s = 0.0;
                for k in 0..2 {
                    for l in 0..2 {
                        s += tm[k][i] * am[k][l] * tm[l][j];
                    }
                }
                assert!((d.get(i, j) - s).abs() < 1e-14);
            }
        }
    }
}
