//! Kernels for the blocked factorization: dense Cholesky, right triangular
//! solves, and rank-k downdates for every pairing of sparse and dense factors.

use alloc::vec::Vec;

use crate::block::{BlockDiag, Csc, Dense};

const PANEL: usize = 256;
const INNER: usize = 32;

#[inline]
fn axpy_neg(y: &mut [f64], a: f64, x: &[f64]) {
    for (y, &x) in y.iter_mut().zip(x) {
        *y -= a * x;
    }
}

#[inline]
fn axpy4_neg(y: &mut [f64], s: [f64; 4], x0: &[f64], x1: &[f64], x2: &[f64], x3: &[f64]) {
    let n = y.len();
    let (x0, x1, x2, x3) = (&x0[..n], &x1[..n], &x2[..n], &x3[..n]);
    for i in 0..n {
        y[i] -= s[0] * x0[i] + s[1] * x1[i] + s[2] * x2[i] + s[3] * x3[i];
    }
}

/// Why a Cholesky factorization stopped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PivotFailure {
    pub row: usize,
    pub value: f64,
}

#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
const MR: usize = 16;
#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
const NR: usize = 12;
#[cfg(not(all(target_arch = "x86_64", target_feature = "avx512f")))]
const MR: usize = 8;
#[cfg(not(all(target_arch = "x86_64", target_feature = "avx512f")))]
const NR: usize = 6;

/// `out[i + j·MR] = Σₜ a[t·MR + i] · b[t·NR + j]` over packed strips.
#[cfg(all(target_arch = "x86_64", target_feature = "avx512f"))]
#[inline]
fn tile_dot(a: &[f64], b: &[f64], k: usize, out: &mut [f64; MR * NR]) {
    use core::arch::x86_64::*;
    assert!(a.len() >= k * MR && b.len() >= k * NR);
    // SAFETY: the assertion bounds every load; AVX-512F is enabled at
    // compile time.
    unsafe {
        let mut acc = [_mm512_setzero_pd(); 2 * NR];
        let (pa, pb) = (a.as_ptr(), b.as_ptr());
        for t in 0..k {
            let a0 = _mm512_loadu_pd(pa.add(t * MR));
            let a1 = _mm512_loadu_pd(pa.add(t * MR + 8));
            for j in 0..NR {
                let bj = _mm512_set1_pd(*pb.add(t * NR + j));
                acc[2 * j] = _mm512_fmadd_pd(a0, bj, acc[2 * j]);
                acc[2 * j + 1] = _mm512_fmadd_pd(a1, bj, acc[2 * j + 1]);
            }
        }
        for j in 0..NR {
            _mm512_storeu_pd(out.as_mut_ptr().add(j * MR), acc[2 * j]);
            _mm512_storeu_pd(out.as_mut_ptr().add(j * MR + 8), acc[2 * j + 1]);
        }
    }
}

/// `out[i + j·MR] = Σₜ a[t·MR + i] · b[t·NR + j]` over packed strips.
#[cfg(all(
    target_arch = "x86_64",
    target_feature = "avx2",
    target_feature = "fma",
    not(target_feature = "avx512f")
))]
#[inline]
fn tile_dot(a: &[f64], b: &[f64], k: usize, out: &mut [f64; MR * NR]) {
    use core::arch::x86_64::*;
    assert!(a.len() >= k * MR && b.len() >= k * NR);
    // SAFETY: the assertion bounds every load; AVX2 and FMA are enabled at
    // compile time.
    unsafe {
        let mut acc = [_mm256_setzero_pd(); 2 * NR];
        let (pa, pb) = (a.as_ptr(), b.as_ptr());
        for t in 0..k {
            let a0 = _mm256_loadu_pd(pa.add(t * MR));
            let a1 = _mm256_loadu_pd(pa.add(t * MR + 4));
            for j in 0..NR {
                let bj = _mm256_broadcast_sd(&*pb.add(t * NR + j));
                acc[2 * j] = _mm256_fmadd_pd(a0, bj, acc[2 * j]);
                acc[2 * j + 1] = _mm256_fmadd_pd(a1, bj, acc[2 * j + 1]);
            }
        }
        for j in 0..NR {
            _mm256_storeu_pd(out.as_mut_ptr().add(j * MR), acc[2 * j]);
            _mm256_storeu_pd(out.as_mut_ptr().add(j * MR + 4), acc[2 * j + 1]);
        }
    }
}

#[cfg(not(all(target_arch = "x86_64", any(target_feature = "avx512f", all(target_feature = "avx2", target_feature = "fma")))))]
#[inline]
fn tile_dot(a: &[f64], b: &[f64], k: usize, out: &mut [f64; MR * NR]) {
    out.fill(0.0);
    for t in 0..k {
        let at = &a[t * MR..(t + 1) * MR];
        let bt = &b[t * NR..(t + 1) * NR];
        for j in 0..NR {
            for i in 0..MR {
                out[i + j * MR] += at[i] * bt[j];
            }
        }
    }
}

/// Downdates columns `c0..c1` of an `n × n` column-major array, rows from
/// the diagonal down, by the already factored columns `p0..p1`:
/// `C[i, j] −= Σₜ L[i, t] L[j, t]`.
fn syrk_columns(data: &mut [f64], n: usize, (c0, c1): (usize, usize), (p0, p1): (usize, usize), work: &mut Vec<f64>) {
    let k = p1 - p0;
    let strips = (n - c0).div_ceil(MR);
    if work.len() < strips * k * MR {
        work.resize(strips * k * MR, 0.0);
    }
    for s in 0..strips {
        let dst = &mut work[s * k * MR..(s + 1) * k * MR];
        let r0 = c0 + s * MR;
        let nr = MR.min(n - r0);
        for t in 0..k {
            let src = &data[(p0 + t) * n + r0..(p0 + t) * n + r0 + nr];
            dst[t * MR..t * MR + nr].copy_from_slice(src);
            dst[t * MR + nr..(t + 1) * MR].fill(0.0);
        }
    }
    let mut bp = [0.0; PANEL * NR];
    let mut tile = [0.0; MR * NR];
    let mut j0 = c0;
    while j0 < c1 {
        let nc = NR.min(c1 - j0);
        for t in 0..k {
            for j in 0..NR {
                bp[t * NR + j] = if j < nc { data[(p0 + t) * n + j0 + j] } else { 0.0 };
            }
        }
        let mut s = (j0 - c0) / MR;
        while s < strips {
            tile_dot(&work[s * k * MR..(s + 1) * k * MR], &bp, k, &mut tile);
            let r0 = c0 + s * MR;
            let nr = MR.min(n - r0);
            for j in 0..nc {
                let col = &mut data[(j0 + j) * n..(j0 + j + 1) * n];
                for i in 0..nr {
                    if r0 + i >= j0 + j {
                        col[r0 + i] -= tile[i + j * MR];
                    }
                }
            }
            s += 1;
        }
        j0 += NR;
    }
}

/// In-place lower Cholesky factor of a symmetric matrix whose lower triangle
/// is stored in `a`. The upper triangle is neither read nor written.
///
/// A pivot at or below `floor_rel` times the largest diagonal entry is a
/// failure. With `last_free`, the final pivot is instead clamped at zero; it
/// has no entries below it.
pub fn cholesky_lower(a: &mut Dense, floor_rel: f64, last_free: bool) -> Result<(), PivotFailure> {
    cholesky_lower_with(a, floor_rel, last_free, &mut Vec::new())
}

/// As [`cholesky_lower`], packing into a caller-owned workspace that grows
/// as needed.
pub fn cholesky_lower_with(
    a: &mut Dense,
    floor_rel: f64,
    last_free: bool,
    work: &mut Vec<f64>,
) -> Result<(), PivotFailure> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    let maxdiag = (0..n).map(|i| a.get(i, i).abs()).fold(0.0, f64::max);
    let floor = floor_rel * maxdiag;
    let data = a.as_mut_slice();

    let mut kb = 0;
    while kb < n {
        let ke = (kb + PANEL).min(n);
        let mut ib = kb;
        while ib < ke {
            let ie = (ib + INNER).min(ke);
            for j in ib..ie {
                let (left, right) = data.split_at_mut(j * n);
                let colj = &mut right[j..n];
                for c in ib..j {
                    let s = left[j + c * n];
                    if s != 0.0 {
                        axpy_neg(colj, s, &left[c * n + j..c * n + n]);
                    }
                }
                let d = colj[0];
                if !(d > floor) {
                    if last_free && j + 1 == n && d.is_finite() {
                        colj[0] = libm::sqrt(d.max(0.0));
                        continue;
                    }
                    return Err(PivotFailure { row: j, value: d });
                }
                let r = libm::sqrt(d);
                colj[0] = r;
                let inv = 1.0 / r;
                colj[1..].iter_mut().for_each(|x| *x *= inv);
            }
            if ie < ke {
                syrk_columns(data, n, (ie, ke), (ib, ie), work);
            }
            ib = ie;
        }
        if ke < n {
            syrk_columns(data, n, (ke, n), (kb, ke), work);
        }
        kb = ke;
    }
    Ok(())
}

/// `x ← x · L⁻ᵀ` for lower-triangular `l`.
pub fn rdiv_lower_t(x: &mut Dense, l: &Dense) {
    let m = x.nrows();
    let n = l.nrows();
    assert_eq!(x.ncols(), n);
    let data = x.as_mut_slice();
    for c in 0..n {
        let (done, rest) = data.split_at_mut(c * m);
        let xc = &mut rest[..m];
        let mut k = 0;
        while k + 4 <= c {
            let s = [l.get(c, k), l.get(c, k + 1), l.get(c, k + 2), l.get(c, k + 3)];
            axpy4_neg(
                xc,
                s,
                &done[k * m..(k + 1) * m],
                &done[(k + 1) * m..(k + 2) * m],
                &done[(k + 2) * m..(k + 3) * m],
                &done[(k + 3) * m..(k + 4) * m],
            );
            k += 4;
        }
        while k < c {
            let s = l.get(c, k);
            if s != 0.0 {
                axpy_neg(xc, s, &done[k * m..(k + 1) * m]);
            }
            k += 1;
        }
        let inv = 1.0 / l.get(c, c);
        xc.iter_mut().for_each(|v| *v *= inv);
    }
}

/// Divides column `j` by `d[j]`.
pub fn rdiv_diagonal_dense(x: &mut Dense, d: &[f64]) {
    for (j, &dj) in d.iter().enumerate() {
        let inv = 1.0 / dj;
        x.col_mut(j).iter_mut().for_each(|v| *v *= inv);
    }
}

pub fn rdiv_diagonal_sparse(x: &mut Csc, d: &[f64]) {
    for (j, &dj) in d.iter().enumerate() {
        let inv = 1.0 / dj;
        let r = x.col_range(j);
        x.nzval_mut()[r].iter_mut().for_each(|v| *v *= inv);
    }
}

/// `x ← x · L⁻ᵀ` for a block-diagonal lower factor.
pub fn rdiv_blockdiag_dense(x: &mut Dense, l: &BlockDiag) {
    let p = l.p();
    for b in 0..l.nblocks() {
        let t = l.tile(b);
        for i in 0..x.nrows() {
            for c in 0..p {
                let mut v = x.get(i, b * p + c);
                for m in 0..c {
                    v -= x.get(i, b * p + m) * t[c + m * p];
                }
                x.set(i, b * p + c, v / t[c + c * p]);
            }
        }
    }
}

/// Sparse version. Columns of one level group must share their row pattern,
/// which holds for blocks assembled from whole `pᵢ × pⱼ` tiles.
pub fn rdiv_blockdiag_sparse(x: &mut Csc, l: &BlockDiag) {
    let p = l.p();
    for b in 0..l.nblocks() {
        let t = l.tile(b);
        let len = x.col_range(b * p).len();
        for e in 0..len {
            for c in 0..p {
                let idx_c = x.col_range(b * p + c).start + e;
                let mut v = x.nzval()[idx_c];
                for m in 0..c {
                    v -= x.nzval()[x.col_range(b * p + m).start + e] * t[c + m * p];
                }
                x.nzval_mut()[idx_c] = v / t[c + c * p];
            }
        }
    }
}

/// In-place lower Cholesky factor of every tile.
pub fn cholesky_blockdiag(b: &mut BlockDiag, floor_rel: f64) -> Result<(), PivotFailure> {
    let p = b.p();
    for (k, t) in b.tiles_mut().enumerate() {
        let maxdiag = (0..p).map(|i| t[i + i * p].abs()).fold(0.0, f64::max);
        for j in 0..p {
            let mut d = t[j + j * p];
            for c in 0..j {
                d -= t[j + c * p] * t[j + c * p];
            }
            if !(d > floor_rel * maxdiag) {
                return Err(PivotFailure { row: k * p + j, value: d });
            }
            let r = libm::sqrt(d);
            t[j + j * p] = r;
            for i in (j + 1)..p {
                let mut v = t[i + j * p];
                for c in 0..j {
                    v -= t[i + c * p] * t[j + c * p];
                }
                t[i + j * p] = v / r;
            }
        }
    }
    Ok(())
}

/// `c ← c − a·bᵀ`. With `lower`, only entries on or below the diagonal of
/// `c` are touched.
pub fn sub_dense_dense_t(c: &mut Dense, a: &Dense, b: &Dense, lower: bool) {
    let m = c.nrows();
    let r = a.ncols();
    debug_assert_eq!(a.nrows(), m);
    debug_assert_eq!(b.nrows(), c.ncols());
    debug_assert_eq!(b.ncols(), r);
    let ad = a.as_slice();
    for jc in 0..c.ncols() {
        let start = if lower { jc } else { 0 };
        let target = &mut c.col_mut(jc)[start..];
        let mut t = 0;
        while t + 4 <= r {
            let s = [b.get(jc, t), b.get(jc, t + 1), b.get(jc, t + 2), b.get(jc, t + 3)];
            if s != [0.0; 4] {
                axpy4_neg(
                    target,
                    s,
                    &ad[t * m + start..(t + 1) * m],
                    &ad[(t + 1) * m + start..(t + 2) * m],
                    &ad[(t + 2) * m + start..(t + 3) * m],
                    &ad[(t + 3) * m + start..(t + 4) * m],
                );
            }
            t += 4;
        }
        while t < r {
            let s = b.get(jc, t);
            if s != 0.0 {
                axpy_neg(target, s, &ad[t * m + start..(t + 1) * m]);
            }
            t += 1;
        }
    }
}

/// `c ← c − a·bᵀ` with dense `a` and sparse `b`.
pub fn sub_dense_sparse_t(c: &mut Dense, a: &Dense, b: &Csc) {
    let m = c.nrows();
    debug_assert_eq!(a.ncols(), b.ncols());
    for t in 0..b.ncols() {
        let acol = a.col(t);
        for e in b.col_range(t) {
            let row = b.rowval()[e] as usize;
            axpy_neg(&mut c.col_mut(row)[..m], b.nzval()[e], acol);
        }
    }
}

/// `c ← c − a·bᵀ` with sparse `a` and dense `b`.
pub fn sub_sparse_dense_t(c: &mut Dense, a: &Csc, b: &Dense) {
    debug_assert_eq!(a.ncols(), b.ncols());
    for t in 0..a.ncols() {
        let range = a.col_range(t);
        if range.is_empty() {
            continue;
        }
        for jc in 0..c.ncols() {
            let s = b.get(jc, t);
            if s == 0.0 {
                continue;
            }
            let col = c.col_mut(jc);
            for e in range.clone() {
                col[a.rowval()[e] as usize] -= a.nzval()[e] * s;
            }
        }
    }
}

/// `c ← c − a·bᵀ` with both factors sparse. Each column pairs every nonzero
/// of `a` with every nonzero of `b`. With `lower` (and `a`, `b` the same
/// matrix) only pairs on or below the diagonal are formed.
pub fn sub_sparse_sparse_t(c: &mut Dense, a: &Csc, b: &Csc, lower: bool) {
    debug_assert_eq!(a.ncols(), b.ncols());
    let ld = c.nrows();
    let cd = c.as_mut_slice();
    let (arow, aval, brow, bval) = (a.rowval(), a.nzval(), b.rowval(), b.nzval());
    for t in 0..a.ncols() {
        let ar = a.col_range(t);
        for eb in b.col_range(t) {
            let rb = brow[eb] as usize;
            let vb = bval[eb];
            let col = &mut cd[rb * ld..(rb + 1) * ld];
            for ea in ar.clone() {
                let ra = arow[ea] as usize;
                if lower && ra < rb {
                    continue;
                }
                col[ra] -= aval[ea] * vb;
            }
        }
    }
}

/// Solves `L x = b` in place for lower-triangular `l`.
pub fn forward_solve(l: &Dense, x: &mut [f64]) {
    let n = l.nrows();
    for j in 0..n {
        x[j] /= l.get(j, j);
        let v = x[j];
        for i in (j + 1)..n {
            x[i] -= l.get(i, j) * v;
        }
    }
}

/// Solves `Lᵀ x = b` in place for lower-triangular `l`.
pub fn backward_solve_t(l: &Dense, x: &mut [f64]) {
    let n = l.nrows();
    for j in (0..n).rev() {
        let mut v = x[j];
        for i in (j + 1)..n {
            v -= l.get(i, j) * x[i];
        }
        x[j] = v / l.get(j, j);
    }
}
