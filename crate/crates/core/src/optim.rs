//! Derivative-free minimization over a box.
//!
//! [`TrustRegion`] fits a full quadratic model to `(n+1)(n+2)/2`
//! interpolation points and minimizes it inside a box-shaped trust region
//! intersected with the bounds. [`NelderMead`] projects simplex trial points
//! onto the box and restarts from the best vertex after each collapse.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMead {
    /// Spread of function values across the simplex at convergence.
    pub ftol_abs: f64,
    /// Largest distance of any vertex from the best one at convergence.
    pub xtol_abs: f64,
    pub max_evals: usize,
    /// Edge length of the initial simplex.
    pub initial_step: f64,
    /// Restarts allowed after the first convergence.
    pub max_restarts: usize,
}

impl Default for NelderMead {
    fn default() -> Self {
        NelderMead {
            ftol_abs: 1e-8,
            xtol_abs: 1e-6,
            max_evals: 2000,
            initial_step: 0.25,
            max_restarts: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

struct Counted<'a, F> {
    f: F,
    lower: &'a [f64],
    upper: &'a [f64],
    evals: usize,
    max_evals: usize,
}

impl<F: FnMut(&[f64]) -> Result<f64>> Counted<'_, F> {
    fn project(&self, x: &mut [f64]) {
        for ((x, &lo), &hi) in x.iter_mut().zip(self.lower).zip(self.upper) {
            *x = x.max(lo).min(hi);
        }
    }

    fn exhausted(&self) -> bool {
        self.evals >= self.max_evals
    }

    fn eval(&mut self, x: &mut [f64]) -> Result<f64> {
        self.project(x);
        self.evals += 1;
        let v = (self.f)(x)?;
        Ok(if v.is_nan() { f64::INFINITY } else { v })
    }
}

impl NelderMead {
    fn validate(&self) -> Result<()> {
        if !(self.ftol_abs > 0.0) || !(self.xtol_abs > 0.0) {
            return Err(Error::InvalidOption("tolerances must be positive"));
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidOption("max_evals must be at least one"));
        }
        if !(self.initial_step > 0.0) {
            return Err(Error::InvalidOption("initial step must be positive"));
        }
        Ok(())
    }

    /// Minimizes `f` over the box `[lower, upper]`, starting from `x0`.
    pub fn minimize<F>(&self, f: F, x0: &[f64], lower: &[f64], upper: &[f64]) -> Result<Minimum>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        self.validate()?;
        let n = x0.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::Dimension("bounds and starting point differ in length"));
        }
        let mut cf = Counted {
            f,
            lower,
            upper,
            evals: 0,
            max_evals: self.max_evals,
        };
        let mut best = x0.to_vec();
        let mut fbest = cf.eval(&mut best)?;
        if n == 0 {
            return Ok(Minimum {
                x: best,
                f: fbest,
                evals: cf.evals,
                converged: true,
            });
        }
        let mut restarts = 0;
        loop {
            let (x, fx, collapsed) = self.run(&mut cf, &best, fbest)?;
            let improvement = fbest - fx;
            if fx <= fbest {
                best = x;
                fbest = fx;
            }
            if !collapsed {
                return Ok(Minimum {
                    x: best,
                    f: fbest,
                    evals: cf.evals,
                    converged: false,
                });
            }
            if restarts == self.max_restarts || (restarts > 0 && improvement <= self.ftol_abs) {
                return Ok(Minimum {
                    x: best,
                    f: fbest,
                    evals: cf.evals,
                    converged: true,
                });
            }
            restarts += 1;
        }
    }

    /// One simplex search. Returns the best vertex, its value and whether
    /// the tolerances were met before the evaluation budget ran out.
    fn run<F>(&self, cf: &mut Counted<'_, F>, x0: &[f64], f0: f64) -> Result<(Vec<f64>, f64, bool)>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let n = x0.len();
        let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
        let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
        pts.push(x0.to_vec());
        vals.push(f0);
        for i in 0..n {
            if cf.exhausted() {
                break;
            }
            let mut x = x0.to_vec();
            // step away from an active upper bound
            let step = if x[i] + self.initial_step > cf.upper[i] { -self.initial_step } else { self.initial_step };
            x[i] += step;
            let v = cf.eval(&mut x)?;
            pts.push(x);
            vals.push(v);
        }
        if pts.len() < n + 1 {
            let b = argmin(&vals);
            return Ok((pts.swap_remove(b), vals[b], false));
        }

        let mut order: Vec<usize> = (0..=n).collect();
        let mut centroid = vec![0.0; n];
        let mut xr = vec![0.0; n];
        let mut xe = vec![0.0; n];
        let mut xc = vec![0.0; n];
        loop {
            order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
            let (ib, iw, is) = (order[0], order[n], order[n - 1]);
            let spread = vals[iw] - vals[ib];
            let size = pts
                .iter()
                .map(|p| p.iter().zip(&pts[ib]).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
                .fold(0.0f64, f64::max);
            if spread <= self.ftol_abs && size <= self.xtol_abs {
                return Ok((pts[ib].clone(), vals[ib], true));
            }
            if cf.exhausted() {
                return Ok((pts[ib].clone(), vals[ib], false));
            }

            centroid.iter_mut().for_each(|c| *c = 0.0);
            for &i in &order[..n] {
                for (c, v) in centroid.iter_mut().zip(&pts[i]) {
                    *c += v;
                }
            }
            centroid.iter_mut().for_each(|c| *c /= n as f64);

            for d in 0..n {
                xr[d] = 2.0 * centroid[d] - pts[iw][d];
            }
            let fr = cf.eval(&mut xr)?;
            if fr < vals[ib] {
                if cf.exhausted() {
                    pts[iw].copy_from_slice(&xr);
                    vals[iw] = fr;
                    continue;
                }
                for d in 0..n {
                    xe[d] = centroid[d] + 2.0 * (xr[d] - centroid[d]);
                }
                let fe = cf.eval(&mut xe)?;
                if fe < fr {
                    pts[iw].copy_from_slice(&xe);
                    vals[iw] = fe;
                } else {
                    pts[iw].copy_from_slice(&xr);
                    vals[iw] = fr;
                }
                continue;
            }
            if fr < vals[is] {
                pts[iw].copy_from_slice(&xr);
                vals[iw] = fr;
                continue;
            }
            if cf.exhausted() {
                continue;
            }
            let outside = fr < vals[iw];
            for d in 0..n {
                xc[d] = if outside {
                    centroid[d] + 0.5 * (xr[d] - centroid[d])
                } else {
                    centroid[d] + 0.5 * (pts[iw][d] - centroid[d])
                };
            }
            let fc = cf.eval(&mut xc)?;
            if fc < fr.min(vals[iw]) {
                pts[iw].copy_from_slice(&xc);
                vals[iw] = fc;
                continue;
            }
            // shrink toward the best vertex
            let xb = pts[ib].clone();
            for &i in &order[1..] {
                if cf.exhausted() {
                    break;
                }
                for d in 0..n {
                    pts[i][d] = xb[d] + 0.5 * (pts[i][d] - xb[d]);
                }
                vals[i] = cf.eval(&mut pts[i])?;
            }
        }
    }
}

/// Trust-region minimization on a quadratic interpolation model.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegion {
    /// Initial spacing of the interpolation points and trust-region radius.
    pub rho_begin: f64,
    /// Final spacing; the search ends when the spacing reaches it.
    pub rho_end: f64,
    /// The search also ends after two consecutive spacing levels that each
    /// lower the minimum by no more than this.
    pub ftol_abs: f64,
    pub max_evals: usize,
}

impl Default for TrustRegion {
    fn default() -> Self {
        TrustRegion {
            rho_begin: 0.25,
            rho_end: 1e-6,
            ftol_abs: 1e-8,
            max_evals: 2000,
        }
    }
}

/// Number of coefficients of a full quadratic in `n` variables.
fn n_coef(n: usize) -> usize {
    (n + 1) * (n + 2) / 2
}

/// Quadratic basis at `s`: `1, s₁…sₙ, sᵢsⱼ (i ≤ j)`, with squares halved.
fn basis(s: &[f64], out: &mut [f64]) {
    let n = s.len();
    out[0] = 1.0;
    out[1..=n].copy_from_slice(s);
    let mut k = n + 1;
    for i in 0..n {
        for j in i..n {
            out[k] = if i == j { 0.5 * s[i] * s[i] } else { s[i] * s[j] };
            k += 1;
        }
    }
}

/// LU factorization with partial pivoting of a row-major square matrix.
struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    /// `None` when a pivot is negligible against the largest one.
    fn new(n: usize, mut a: Vec<f64>) -> Option<Lu> {
        let mut perm: Vec<usize> = (0..n).collect();
        let mut big = 0.0f64;
        let mut small = f64::INFINITY;
        for c in 0..n {
            let p = (c..n).max_by(|&i, &j| a[i * n + c].abs().total_cmp(&a[j * n + c].abs()))?;
            if p != c {
                for j in 0..n {
                    a.swap(c * n + j, p * n + j);
                }
                perm.swap(c, p);
            }
            let piv = a[c * n + c];
            big = big.max(piv.abs());
            small = small.min(piv.abs());
            if piv == 0.0 {
                return None;
            }
            for i in (c + 1)..n {
                let f = a[i * n + c] / piv;
                a[i * n + c] = f;
                if f != 0.0 {
                    for j in (c + 1)..n {
                        a[i * n + j] -= f * a[c * n + j];
                    }
                }
            }
        }
        if !(small > 1e-12 * big) {
            return None;
        }
        Some(Lu { n, lu: a, perm })
    }

    /// Solves `A x = b`.
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                x[i] -= self.lu[i * n + j] * x[j];
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                x[i] -= self.lu[i * n + j] * x[j];
            }
            x[i] /= self.lu[i * n + i];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut z = b.to_vec();
        for i in 0..n {
            for j in 0..i {
                z[i] -= self.lu[j * n + i] * z[j];
            }
            z[i] /= self.lu[i * n + i];
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                z[i] -= self.lu[j * n + i] * z[j];
            }
        }
        let mut x = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            x[p] = z[k];
        }
        x
    }
}

/// `q(s) = gᵀs + ½ sᵀHs`, `H` dense row-major.
struct Quadratic {
    g: Vec<f64>,
    h: Vec<f64>,
}

impl Quadratic {
    fn value(&self, s: &[f64]) -> f64 {
        let n = s.len();
        let mut v = 0.0;
        for i in 0..n {
            let hs: f64 = (0..n).map(|j| self.h[i * n + j] * s[j]).sum();
            v += s[i] * (self.g[i] + 0.5 * hs);
        }
        v
    }

    /// Coordinate descent on the box `[lo, hi]` from `s`.
    fn descend(&self, s: &mut [f64], lo: &[f64], hi: &[f64]) {
        let n = s.len();
        let scale = lo.iter().zip(hi).fold(0.0f64, |m, (l, h)| m.max(h - l));
        for _ in 0..200 {
            let mut moved = 0.0f64;
            for i in 0..n {
                let grad = self.g[i] + (0..n).map(|j| self.h[i * n + j] * s[j]).sum::<f64>();
                let hii = self.h[i * n + i];
                let old = s[i];
                let new = if hii > 0.0 {
                    (old - grad / hii).max(lo[i]).min(hi[i])
                } else {
                    // concave or flat along i: best end of the interval
                    let at = |x: f64| (grad - hii * old) * x + 0.5 * hii * x * x;
                    if at(lo[i]) <= at(hi[i]) {
                        lo[i]
                    } else {
                        hi[i]
                    }
                };
                s[i] = new;
                moved = moved.max((new - old).abs());
            }
            if moved <= 1e-12 * scale {
                break;
            }
        }
    }

    /// Approximate minimizer over the box, from several starting points.
    fn minimize(&self, lo: &[f64], hi: &[f64]) -> Vec<f64> {
        let n = lo.len();
        let clamp = |s: &mut Vec<f64>| {
            for i in 0..n {
                s[i] = s[i].max(lo[i]).min(hi[i]);
            }
        };
        let gmax = self.g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut starts: Vec<Vec<f64>> = vec![vec![0.0; n]];
        if gmax > 0.0 {
            let width = lo.iter().zip(hi).fold(f64::INFINITY, |m, (l, h)| m.min(h.max(-l)));
            let mut sd: Vec<f64> = self.g.iter().map(|g| -g / gmax * width).collect();
            clamp(&mut sd);
            starts.push(sd);
        }
        if let Some(lu) = Lu::new(n, self.h.clone()) {
            let mut newton: Vec<f64> = lu.solve(&self.g).iter().map(|v| -v).collect();
            if newton.iter().all(|v| v.is_finite()) {
                clamp(&mut newton);
                starts.push(newton);
            }
        }
        let mut best: Option<(f64, Vec<f64>)> = None;
        for mut s in starts {
            self.descend(&mut s, lo, hi);
            let v = self.value(&s);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, s));
            }
        }
        best.map(|(_, s)| s).unwrap_or_else(|| vec![0.0; n])
    }
}

struct Sample {
    pts: Vec<Vec<f64>>,
    vals: Vec<f64>,
}

impl Sample {
    fn best(&self) -> usize {
        argmin(&self.vals)
    }
}

fn dist_inf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

impl TrustRegion {
    fn validate(&self) -> Result<()> {
        if !(self.rho_end > 0.0) || !(self.ftol_abs > 0.0) {
            return Err(Error::InvalidOption("tolerances must be positive"));
        }
        if !(self.rho_begin >= self.rho_end) {
            return Err(Error::InvalidOption("initial spacing must not be below the final one"));
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidOption("max_evals must be at least one"));
        }
        Ok(())
    }

    /// Interpolation points around `x0` with spacing `rho`: the centre,
    /// two points along each axis and one per pair of axes. Steps turn
    /// around at bounds.
    fn design<F>(&self, cf: &mut Counted<'_, F>, x0: &[f64], f0: f64, rho: f64) -> Result<Option<Sample>>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        let n = x0.len();
        let dir: Vec<f64> = (0..n)
            .map(|i| if x0[i] + rho <= cf.upper[i] { 1.0 } else { -1.0 })
            .collect();
        let second: Vec<f64> = (0..n)
            .map(|i| {
                let back = x0[i] - dir[i] * rho;
                if back >= cf.lower[i] && back <= cf.upper[i] {
                    -dir[i]
                } else {
                    2.0 * dir[i]
                }
            })
            .collect();
        let mut moves: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n_coef(n) - 1);
        for i in 0..n {
            moves.push(vec![(i, dir[i])]);
            moves.push(vec![(i, second[i])]);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                moves.push(vec![(i, dir[i]), (j, dir[j])]);
            }
        }
        let mut sample = Sample {
            pts: vec![x0.to_vec()],
            vals: vec![f0],
        };
        for mv in moves {
            if cf.exhausted() {
                return Ok(None);
            }
            let mut x = x0.to_vec();
            for (i, d) in mv {
                x[i] += d * rho;
            }
            let v = cf.eval(&mut x)?;
            sample.pts.push(x);
            sample.vals.push(v);
        }
        Ok(Some(sample))
    }

    /// The next axis step of length `rho` from `xb`, cycling through axes
    /// and signs, that stays in the box and does not repeat a sampled point.
    fn geometry_point(
        &self,
        sample: &Sample,
        xb: &[f64],
        rho: f64,
        turn: &mut usize,
        lower: &[f64],
        upper: &[f64],
    ) -> Option<Vec<f64>> {
        let n = xb.len();
        for _ in 0..2 * n {
            let i = *turn % n;
            let sign = if (*turn / n).is_multiple_of(2) { 1.0 } else { -1.0 };
            *turn += 1;
            let mut x = xb.to_vec();
            x[i] += sign * rho;
            if x[i] > upper[i] || x[i] < lower[i] {
                continue;
            }
            if sample.pts.iter().all(|p| dist_inf(p, &x) > 1e-3 * rho) {
                return Some(x);
            }
        }
        None
    }

    /// Interpolating quadratic about the best point, in unscaled
    /// coordinates, with the factorization used for Lagrange values.
    fn model(sample: &Sample, h: f64) -> Option<(Quadratic, Lu)> {
        let b = sample.best();
        let xb = &sample.pts[b];
        let n = xb.len();
        let m = n_coef(n);
        let mut mat = vec![0.0; m * m];
        let mut s = vec![0.0; n];
        for (k, p) in sample.pts.iter().enumerate() {
            for i in 0..n {
                s[i] = (p[i] - xb[i]) / h;
            }
            basis(&s, &mut mat[k * m..(k + 1) * m]);
        }
        let lu = Lu::new(m, mat)?;
        let rhs: Vec<f64> = sample.vals.iter().map(|v| v - sample.vals[b]).collect();
        if rhs.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let c = lu.solve(&rhs);
        let g: Vec<f64> = (0..n).map(|i| c[1 + i] / h).collect();
        let mut hm = vec![0.0; n * n];
        let mut k = n + 1;
        for i in 0..n {
            for j in i..n {
                let v = c[k] / (h * h);
                hm[i * n + j] = v;
                hm[j * n + i] = v;
                k += 1;
            }
        }
        Some((Quadratic { g, h: hm }, lu))
    }

    /// Minimizes `f` over the box `[lower, upper]`, starting from `x0`.
    pub fn minimize<F>(&self, f: F, x0: &[f64], lower: &[f64], upper: &[f64]) -> Result<Minimum>
    where
        F: FnMut(&[f64]) -> Result<f64>,
    {
        self.validate()?;
        let n = x0.len();
        if lower.len() != n || upper.len() != n {
            return Err(Error::Dimension("bounds and starting point differ in length"));
        }
        let mut cf = Counted {
            f,
            lower,
            upper,
            evals: 0,
            max_evals: self.max_evals,
        };
        let mut start = x0.to_vec();
        let f0 = cf.eval(&mut start)?;
        let done = |sample: &Sample, evals: usize, converged: bool| {
            let b = sample.best();
            Ok(Minimum {
                x: sample.pts[b].clone(),
                f: sample.vals[b],
                evals,
                converged,
            })
        };
        if n == 0 {
            return done(
                &Sample {
                    pts: vec![start],
                    vals: vec![f0],
                },
                cf.evals,
                true,
            );
        }

        let mut rho = self.rho_begin;
        let mut delta = rho;
        let mut sample = match self.design(&mut cf, &start, f0, rho)? {
            Some(s) => s,
            None => return Ok(Minimum { x: start, f: f0, evals: cf.evals, converged: false }),
        };
        let mut stage_start = sample.vals[sample.best()];
        let mut flat_stages = 0;
        let mut geometry_turn = 0usize;
        let mut phi = vec![0.0; n_coef(n)];
        let mut s_scaled = vec![0.0; n];

        loop {
            if cf.exhausted() {
                return done(&sample, cf.evals, false);
            }
            let b = sample.best();
            let xb = sample.pts[b].clone();
            let fb = sample.vals[b];
            let Some((q, lu)) = Self::model(&sample, delta) else {
                // degenerate interpolation set: rebuild it around the best point
                match self.design(&mut cf, &xb, fb, rho)? {
                    Some(s) => sample = s,
                    None => return done(&sample, cf.evals, false),
                }
                continue;
            };
            let lo: Vec<f64> = (0..n).map(|i| (lower[i] - xb[i]).max(-delta)).collect();
            let hi: Vec<f64> = (0..n).map(|i| (upper[i] - xb[i]).min(delta)).collect();
            let step = q.minimize(&lo, &hi);
            let pred = -q.value(&step);
            let snorm = step.iter().fold(0.0f64, |m, v| m.max(v.abs()));

            let h = delta;
            let mut progressed = false;
            let mut xn: Vec<f64> = xb.iter().zip(&step).map(|(a, b)| a + b).collect();
            // a step onto a point already sampled, as happens at corners of
            // the box, carries no new information
            let repeat = sample.pts.iter().position(|p| dist_inf(p, &xn) <= 1e-3 * rho);
            if let (Some(t), true) = (repeat, snorm >= 0.5 * rho) {
                if sample.vals[t] >= fb {
                    delta = rho;
                }
            } else if snorm >= 0.5 * rho && pred > 0.0 {
                let fnew = cf.eval(&mut xn)?;
                let ratio = (fb - fnew) / pred;
                delta = if ratio <= 0.1 {
                    0.5 * snorm
                } else if ratio <= 0.7 {
                    (0.5 * delta).max(snorm)
                } else {
                    (0.5 * delta).max(2.0 * snorm)
                };
                if delta <= 1.5 * rho {
                    delta = rho;
                }
                // replace the point whose Lagrange function is largest at
                // the new point, weighted by its distance from the best
                let centre = if fnew < fb { &xn } else { &xb };
                for i in 0..n {
                    s_scaled[i] = (xn[i] - xb[i]) / h;
                }
                basis(&s_scaled, &mut phi);
                let lag = lu.solve_transpose(&phi);
                let mut worst = usize::MAX;
                let mut score = -1.0;
                for (t, p) in sample.pts.iter().enumerate() {
                    if t == b && fnew >= fb {
                        continue;
                    }
                    let d = dist_inf(p, centre) / delta;
                    let w = lag[t].abs() * (d * d).max(1.0);
                    if w > score {
                        score = w;
                        worst = t;
                    }
                }
                sample.pts[worst] = xn;
                sample.vals[worst] = fnew;
                progressed = ratio > 0.1;
            }
            if progressed {
                continue;
            }
            // the model step failed or was too short: improve far points
            // before refining the spacing
            let b = sample.best();
            let xb = sample.pts[b].clone();
            let far = (0..sample.pts.len())
                .filter(|&t| t != b)
                .max_by(|&s, &t| dist_inf(&sample.pts[s], &xb).total_cmp(&dist_inf(&sample.pts[t], &xb)));
            if let Some(t) = far {
                // design points may sit at twice the spacing near bounds
                if dist_inf(&sample.pts[t], &xb) > 2.0 * delta.max(rho) * (1.0 + 1e-9) {
                    if let Some(mut x) = self.geometry_point(&sample, &xb, rho, &mut geometry_turn, lower, upper) {
                        let v = cf.eval(&mut x)?;
                        sample.pts[t] = x;
                        sample.vals[t] = v;
                        continue;
                    }
                }
            }
            if delta > rho {
                delta = (0.5 * delta).max(rho);
                continue;
            }
            let fbest = sample.vals[b];
            if stage_start - fbest <= self.ftol_abs {
                flat_stages += 1;
            } else {
                flat_stages = 0;
            }
            if rho <= self.rho_end || flat_stages >= 2 {
                return done(&sample, cf.evals, true);
            }
            stage_start = fbest;
            let ratio = rho / self.rho_end;
            let new_rho = if ratio <= 16.0 {
                self.rho_end
            } else if ratio <= 250.0 {
                libm::sqrt(rho * self.rho_end)
            } else {
                0.1 * rho
            };
            delta = (0.5 * rho).max(new_rho);
            rho = new_rho;
        }
    }
}

fn argmin(v: &[f64]) -> usize {
    let mut b = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[b] {
            b = i;
        }
    }
    b
}
