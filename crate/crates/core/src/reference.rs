//! Brute-force dense computations used to check the blocked engine.
//!
//! Everything here uses plain triple loops and unblocked factorizations,
//! shares no code with the kernels in [`crate::linalg`], and is only
//! practical for a few hundred observations.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::block::Dense;

pub fn transpose(a: &Dense) -> Dense {
    let mut t = Dense::zeros(a.ncols(), a.nrows());
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            t.set(j, i, a.get(i, j));
        }
    }
    t
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    assert_eq!(a.ncols(), b.nrows());
    let mut c = Dense::zeros(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for j in 0..b.ncols() {
            let mut s = 0.0;
            for k in 0..a.ncols() {
                s += a.get(i, k) * b.get(k, j);
            }
            c.set(i, j, s);
        }
    }
    c
}

fn matvec(a: &Dense, x: &[f64]) -> Vec<f64> {
    (0..a.nrows()).map(|i| (0..a.ncols()).map(|j| a.get(i, j) * x[j]).sum()).collect()
}

fn column(v: &[f64]) -> Dense {
    Dense::from_col_major(v.len(), 1, v.to_vec())
}

/// Columns of `parts`, side by side.
pub fn hcat(parts: &[&Dense]) -> Dense {
    let n = parts[0].nrows();
    let mut data = Vec::new();
    let mut ncols = 0;
    for p in parts {
        assert_eq!(p.nrows(), n);
        data.extend_from_slice(p.as_slice());
        ncols += p.ncols();
    }
    Dense::from_col_major(n, ncols, data)
}

/// Unblocked lower Cholesky factor; `None` unless every pivot is positive.
pub fn cholesky(a: &Dense) -> Option<Dense> {
    let n = a.nrows();
    let mut l = Dense::zeros(n, n);
    for j in 0..n {
        let mut d = a.get(j, j);
        for k in 0..j {
            d -= l.get(j, k) * l.get(j, k);
        }
        if !(d > 0.0) {
            return None;
        }
        let r = libm::sqrt(d);
        l.set(j, j, r);
        for i in (j + 1)..n {
            let mut s = a.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            l.set(i, j, s / r);
        }
    }
    Some(l)
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Dense, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut x = b.to_vec();
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| m.get(i, c).abs().total_cmp(&m.get(j, c).abs()))?;
        if m.get(piv, c) == 0.0 {
            return None;
        }
        if piv != c {
            for j in 0..n {
                let t = m.get(c, j);
                m.set(c, j, m.get(piv, j));
                m.set(piv, j, t);
            }
            x.swap(c, piv);
        }
        for i in (c + 1)..n {
            let f = m.get(i, c) / m.get(c, c);
            if f != 0.0 {
                for j in c..n {
                    m.set(i, j, m.get(i, j) - f * m.get(c, j));
                }
                x[i] -= f * x[c];
            }
        }
    }
    for c in (0..n).rev() {
        let mut s = x[c];
        for j in (c + 1)..n {
            s -= m.get(c, j) * x[j];
        }
        x[c] = s / m.get(c, c);
    }
    Some(x)
}

fn logdet_pd(a: &Dense) -> Option<f64> {
    let l = cholesky(a)?;
    Some(2.0 * (0..l.nrows()).map(|i| libm::log(l.get(i, i))).sum::<f64>())
}

/// `V = Z Λ Λᵀ Zᵀ + I`.
pub fn marginal_covariance(z: &Dense, lambda: &Dense) -> Dense {
    let zl = matmul(z, lambda);
    let mut v = matmul(&zl, &transpose(&zl));
    for i in 0..v.nrows() {
        v.add(i, i, 1.0);
    }
    v
}

/// Generalized least squares under covariance `V` (up to `σ²`):
/// `(β̂, (y − Xβ̂)ᵀ V⁻¹ (y − Xβ̂), log det V, log det XᵀV⁻¹X)`.
pub fn gls(x: &Dense, y: &[f64], v: &Dense) -> Option<(Vec<f64>, f64, f64, f64)> {
    let n = x.nrows();
    let p = x.ncols();
    let mut vinv_x = Dense::zeros(n, p);
    for j in 0..p {
        let col = solve(v, x.col(j))?;
        vinv_x.col_mut(j).copy_from_slice(&col);
    }
    let vinv_y = solve(v, y)?;
    let xtvx = matmul(&transpose(x), &vinv_x);
    let xtvy = matvec(&transpose(x), &vinv_y);
    let beta = if p == 0 { Vec::new() } else { solve(&xtvx, &xtvy)? };
    let fitted = matvec(x, &beta);
    let resid: Vec<f64> = y.iter().zip(&fitted).map(|(a, b)| a - b).collect();
    let vinv_r = solve(v, &resid)?;
    let q: f64 = resid.iter().zip(&vinv_r).map(|(a, b)| a * b).sum();
    let ldx = if p == 0 { 0.0 } else { logdet_pd(&xtvx)? };
    Some((beta, q, logdet_pd(v)?, ldx))
}

/// Negative twice the profiled log-likelihood from the `n × n` marginal
/// covariance.
pub fn dense_objective(x: &Dense, y: &[f64], z: &Dense, lambda: &Dense) -> f64 {
    let n = y.len() as f64;
    let v = marginal_covariance(z, lambda);
    let (_, q, ldv, _) = gls(x, y, &v).expect("V is positive definite");
    ldv + n * (1.0 + libm::log(2.0 * PI * q / n))
}

/// Profiled REML criterion from the marginal covariance.
pub fn dense_reml(x: &Dense, y: &[f64], z: &Dense, lambda: &Dense) -> f64 {
    let nmp = (y.len() - x.ncols()) as f64;
    let v = marginal_covariance(z, lambda);
    let (_, q, ldv, ldx) = gls(x, y, &v).expect("V is positive definite");
    ldv + ldx + nmp * (1.0 + libm::log(2.0 * PI * q / nmp))
}

/// `[Z X y]ᵀ [Z X y]`.
pub fn dense_gram(z: &Dense, x: &Dense, y: &[f64]) -> Dense {
    let m = hcat(&[z, x, &column(y)]);
    matmul(&transpose(&m), &m)
}

/// `Ωθ` from dense `A` and `Λ`: the leading `q` rows and columns of `A`
/// are scaled by `Λ` and the identity is added to the leading block.
pub fn dense_omega(a: &Dense, lambda: &Dense) -> Dense {
    let q = lambda.nrows();
    let m = a.nrows();
    let mut big = Dense::identity(m);
    for j in 0..q {
        for i in 0..q {
            big.set(i, j, lambda.get(i, j));
        }
    }
    let mut omega = matmul(&matmul(&transpose(&big), a), &big);
    for i in 0..q {
        omega.add(i, i, 1.0);
    }
    omega
}

/// Lower Cholesky factor of `Ωθ`.
pub fn dense_omega_chol(a: &Dense, lambda: &Dense) -> Option<Dense> {
    cholesky(&dense_omega(a, lambda))
}

/// Minimizer of the penalized residual sum of squares
/// `‖y − Xβ − ZΛu‖² + ‖u‖²` over `u`, and over `β` too when `beta` is
/// `None`. Returns `(ũ, β, minimum)`.
pub fn dense_pls(x: &Dense, y: &[f64], z: &Dense, lambda: &Dense, beta: Option<&[f64]>) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let zl = matmul(z, lambda);
    let q = zl.ncols();
    let p = x.ncols();
    let (u, beta) = match beta {
        Some(b) => {
            let xb = matvec(x, b);
            let r: Vec<f64> = y.iter().zip(&xb).map(|(a, b)| a - b).collect();
            let mut lhs = matmul(&transpose(&zl), &zl);
            for i in 0..q {
                lhs.add(i, i, 1.0);
            }
            let rhs = matvec(&transpose(&zl), &r);
            (solve(&lhs, &rhs)?, b.to_vec())
        }
        None => {
            let w = hcat(&[&zl, x]);
            let mut lhs = matmul(&transpose(&w), &w);
            for i in 0..q {
                lhs.add(i, i, 1.0);
            }
            let rhs = matvec(&transpose(&w), y);
            let sol = solve(&lhs, &rhs)?;
            (sol[..q].to_vec(), sol[q..q + p].to_vec())
        }
    };
    let xb = matvec(x, &beta);
    let zu = matvec(&zl, &u);
    let rss: f64 = (0..y.len()).map(|i| { let e = y[i] - xb[i] - zu[i]; e * e }).sum();
    let pen: f64 = u.iter().map(|v| v * v).sum();
    Some((u, beta, rss + pen))
}

/// Ordinary least squares: `(β̂, RSS)`.
pub fn ols(x: &Dense, y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let xtx = matmul(&transpose(x), x);
    let xty = matvec(&transpose(x), y);
    let beta = solve(&xtx, &xty)?;
    let fitted = matvec(x, &beta);
    let rss = y.iter().zip(&fitted).map(|(a, b)| (a - b) * (a - b)).sum();
    Some((beta, rss))
}

/// Dense `Λθ` for per-term lower-triangular templates (column-major
/// `p × p`) repeated over `levels[i]` levels.
pub fn lambda_from_templates(templates: &[(usize, Vec<f64>)], levels: &[usize]) -> Dense {
    let q: usize = templates.iter().zip(levels).map(|((p, _), l)| p * l).sum();
    let mut lam = Dense::zeros(q, q);
    let mut base = 0;
    for ((p, t), &l) in templates.iter().zip(levels) {
        for _ in 0..l {
            for j in 0..*p {
                for i in j..*p {
                    lam.set(base + i, base + j, t[i + j * p]);
                }
            }
            base += p;
        }
    }
    lam
}
