//! A linear mixed-effects model: data, Gram matrix, factor and `θ`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::block::{Block, Dense};
use crate::data::{build_matrices, DataTable, ModelDims, ReMat, XyMat};
use crate::error::{Error, Result};
use crate::factor::FactorBlocks;
use crate::formula::{amalgamate, Formula};
use crate::gram::{assemble, block_description, offsets, sort_terms, tri, GramBlocks};
use crate::lambda::{initial_theta, set_theta, Template, ThetaMap};
use crate::linalg::{backward_solve_t, forward_solve};

/// Which profiled criterion to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Criterion {
    #[default]
    Ml,
    Reml,
}

#[derive(Debug, Clone)]
pub struct LinearMixedModel {
    formula: Formula,
    xy: XyMat,
    reterms: Vec<ReMat>,
    dims: ModelDims,
    gram: GramBlocks,
    factor: FactorBlocks,
    templates: Vec<Template>,
    map: ThetaMap,
    theta: Vec<f64>,
    current: bool,
}

impl LinearMixedModel {
    /// Builds the model with terms sorted by number of random effects.
    pub fn new(formula: &Formula, table: &DataTable) -> Result<Self> {
        Self::with_order(formula, table, true)
    }

    /// With `sort` false the terms keep their order of first appearance in
    /// the formula.
    pub fn with_order(formula: &Formula, table: &DataTable, sort: bool) -> Result<Self> {
        let specs = amalgamate(formula);
        if specs.is_empty() {
            return Err(Error::NoRandomEffects);
        }
        let (xy, rems, _) = build_matrices(formula, &specs, table)?;
        Self::from_parts(formula.clone(), xy, rems, sort)
    }

    /// From already evaluated model matrices.
    pub fn from_parts(formula: Formula, xy: XyMat, reterms: Vec<ReMat>, sort: bool) -> Result<Self> {
        if reterms.is_empty() {
            return Err(Error::NoRandomEffects);
        }
        let reterms = if sort { sort_terms(reterms) } else { reterms };
        let dims = ModelDims::new(&xy, &reterms);
        let gram = assemble(&reterms, &xy)?;
        let factor = FactorBlocks::new(&gram);
        let templates: Vec<Template> = reterms.iter().map(|r| Template::new(r.corr_mask.clone())).collect();
        let map = ThetaMap::new(&templates);
        let theta = initial_theta(&map);
        let mut m = LinearMixedModel {
            formula,
            xy,
            reterms,
            dims,
            gram,
            factor,
            templates,
            map,
            theta,
            current: false,
        };
        let theta = m.theta.clone();
        m.set_theta(&theta)?;
        Ok(m)
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn dims(&self) -> &ModelDims {
        &self.dims
    }

    pub fn xy(&self) -> &XyMat {
        &self.xy
    }

    /// Random-effects terms in model order.
    pub fn reterms(&self) -> &[ReMat] {
        &self.reterms
    }

    pub fn gram(&self) -> &GramBlocks {
        &self.gram
    }

    pub fn factor(&self) -> &FactorBlocks {
        &self.factor
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn theta_map(&self) -> &ThetaMap {
        &self.map
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn initial_theta(&self) -> Vec<f64> {
        initial_theta(&self.map)
    }

    pub fn lower_bounds(&self) -> &[f64] {
        self.map.lower_bounds()
    }

    /// Installs `θ`; the factor is stale until `update_l`.
    pub fn set_theta(&mut self, theta: &[f64]) -> Result<()> {
        set_theta(&mut self.templates, &self.map, theta)?;
        self.theta.clear();
        self.theta.extend_from_slice(theta);
        self.current = false;
        Ok(())
    }

    pub fn update_l(&mut self) -> Result<()> {
        self.current = false;
        self.factor.update(&self.gram, &self.templates)?;
        self.current = true;
        Ok(())
    }

    /// `set_theta`, `update_l` and the chosen objective.
    pub fn evaluate(&mut self, theta: &[f64], criterion: Criterion) -> Result<f64> {
        self.set_theta(theta)?;
        self.update_l()?;
        self.objective_for(criterion)
    }

    fn check_current(&self) -> Result<()> {
        if self.current {
            Ok(())
        } else {
            Err(Error::StaleFactor)
        }
    }

    /// Residual sum of squares is zero: the data are fit exactly.
    pub fn perfect_fit(&self) -> Result<bool> {
        self.check_current()?;
        Ok(self.factor.ryy() == 0.0)
    }

    /// Negative twice the profiled log-likelihood. A perfect fit gives `+∞`.
    pub fn objective(&self) -> Result<f64> {
        self.check_current()?;
        let n = self.dims.n as f64;
        let r2 = self.factor.ryy() * self.factor.ryy();
        if r2 == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(2.0 * self.factor.logdet_re() + n * (1.0 + libm::log(2.0 * PI * r2 / n)))
    }

    /// Profiled REML criterion.
    pub fn objective_reml(&self) -> Result<f64> {
        self.check_current()?;
        let (n, p) = (self.dims.n, self.dims.p);
        if p >= n {
            return Err(Error::TooFewObservations { n, p });
        }
        let nmp = (n - p) as f64;
        let r2 = self.factor.ryy() * self.factor.ryy();
        if r2 == 0.0 {
            return Ok(f64::INFINITY);
        }
        Ok(2.0 * self.factor.logdet_re() + 2.0 * self.factor.logdet_x() + nmp * (1.0 + libm::log(2.0 * PI * r2 / nmp)))
    }

    pub fn objective_for(&self, criterion: Criterion) -> Result<f64> {
        match criterion {
            Criterion::Ml => self.objective(),
            Criterion::Reml => self.objective_reml(),
        }
    }

    /// Penalized residual sum of squares at the conditional estimates, `r_yy²`.
    pub fn pwrss(&self) -> Result<f64> {
        self.check_current()?;
        Ok(self.factor.ryy() * self.factor.ryy())
    }

    /// `σ̂²`: `r_yy²/n` for ML, `r_yy²/(n−p)` for REML.
    pub fn sigma2(&self, criterion: Criterion) -> Result<f64> {
        let r2 = self.pwrss()?;
        let (n, p) = (self.dims.n, self.dims.p);
        Ok(match criterion {
            Criterion::Ml => r2 / n as f64,
            Criterion::Reml => {
                if p >= n {
                    return Err(Error::TooFewObservations { n, p });
                }
                r2 / (n - p) as f64
            }
        })
    }

    /// `L_XX`, the lower factor whose transpose is `R_XX`.
    fn lxx(&self) -> Dense {
        let p = self.dims.p;
        let d = self.factor.xy_block();
        let mut out = Dense::zeros(p, p);
        for j in 0..p {
            for i in j..p {
                out.set(i, j, d.get(i, j));
            }
        }
        out
    }

    /// `β̂`, solving `R_XX β̂ = r_Xy`.
    pub fn beta(&self) -> Result<Vec<f64>> {
        self.check_current()?;
        let p = self.dims.p;
        let d = self.factor.xy_block();
        let mut beta: Vec<f64> = (0..p).map(|j| d.get(p, j)).collect();
        backward_solve_t(&self.lxx(), &mut beta);
        Ok(beta)
    }

    /// `β̂` and its standard errors, `σ̂` times the row norms of `R_XX⁻¹`.
    pub fn fixed_effects(&self, criterion: Criterion) -> Result<(Vec<f64>, Vec<f64>)> {
        let beta = self.beta()?;
        let sigma = libm::sqrt(self.sigma2(criterion)?);
        let p = self.dims.p;
        let lxx = self.lxx();
        let mut ss = vec![0.0; p];
        let mut e = vec![0.0; p];
        for j in 0..p {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            forward_solve(&lxx, &mut e);
            // e is column j of L_XX⁻¹, i.e. row j of R_XX⁻¹
            ss[j] = e.iter().map(|v| v * v).sum();
        }
        let se = ss.iter().map(|s| sigma * libm::sqrt(*s)).collect();
        Ok((beta, se))
    }

    /// Conditional modes of the spherical random effects, `ũ`, per term.
    pub fn spherical_modes(&self) -> Result<Vec<Vec<f64>>> {
        let beta = self.beta()?;
        let k = self.dims.k;
        let p = self.dims.p;
        let f = &self.factor;
        let mut u: Vec<Vec<f64>> = (0..k)
            .map(|j| {
                let b = match f.block(k, j) {
                    Block::Dense(d) => d,
                    _ => unreachable!("the fixed-effects row is dense"),
                };
                (0..b.ncols())
                    .map(|c| b.get(p, c) - (0..p).map(|r| b.get(r, c) * beta[r]).sum::<f64>())
                    .collect()
            })
            .collect();
        for j in (0..k).rev() {
            let (head, tail) = u.split_at_mut(j + 1);
            let uj = &mut head[j];
            for (off, ui) in tail.iter().enumerate() {
                sub_transpose_mul(f.block(j + 1 + off, j), ui, uj);
            }
            solve_transpose(f.block(j, j), uj);
        }
        Ok(u)
    }

    /// Conditional modes of the random effects, `b̃ = Λθ ũ`, one
    /// `levels × p` matrix per term.
    pub fn conditional_modes(&self) -> Result<Vec<Dense>> {
        let u = self.spherical_modes()?;
        Ok(u
            .iter()
            .zip(&self.templates)
            .map(|(u, t)| {
                let p = t.p();
                let nl = u.len() / p;
                let mut out = Dense::zeros(nl, p);
                for l in 0..nl {
                    for r in 0..p {
                        let v: f64 = (0..=r).map(|c| t.get(r, c) * u[l * p + c]).sum();
                        out.set(l, r, v);
                    }
                }
                out
            })
            .collect())
    }

    /// Per-term relative covariance `TᵢTᵢᵀ`; multiply by `σ̂²` for `Σᵢ`.
    pub fn relative_covariances(&self) -> Vec<Vec<f64>> {
        self.templates.iter().map(Template::outer).collect()
    }

    pub fn nnz_a(&self) -> usize {
        self.gram.nnz()
    }

    pub fn nnz_l(&self) -> usize {
        self.factor.nnz()
    }

    /// Bytes held by the blocks of `A` and `L`.
    pub fn footprint_bytes(&self) -> usize {
        self.gram.bytes() + self.factor.bytes()
    }

    /// `(row, col, bytes of A's block, bytes of L's block)` per stored block.
    pub fn block_bytes(&self) -> Vec<(usize, usize, usize, usize)> {
        self.gram
            .lower_cells()
            .map(|(i, j)| (i, j, self.gram.block(i, j).bytes(), self.factor.block(i, j).bytes()))
            .collect()
    }

    pub fn block_description(&self) -> String {
        block_description(&self.gram, &self.factor.tags())
    }

    /// Dense `Z`, `n × q`, columns in model order.
    pub fn z_dense(&self) -> Dense {
        let off = offsets(&self.reterms.iter().map(ReMat::q).collect::<Vec<_>>());
        let mut z = Dense::zeros(self.dims.n, self.dims.q);
        for (t, re) in self.reterms.iter().enumerate() {
            let p = re.p();
            for o in 0..re.n() {
                let base = off[t] + re.refs[o] as usize * p;
                for (c, &v) in re.row(o).iter().enumerate() {
                    z.set(o, base + c, v);
                }
            }
        }
        z
    }

    /// Dense `Λθ`, `q × q`.
    pub fn lambda_dense(&self) -> Dense {
        let mut lam = Dense::zeros(self.dims.q, self.dims.q);
        let mut base = 0;
        for (t, re) in self.templates.iter().zip(&self.reterms) {
            let p = t.p();
            for _ in 0..re.nlevels() {
                for j in 0..p {
                    for i in j..p {
                        lam.set(base + i, base + j, t.get(i, j));
                    }
                }
                base += p;
            }
        }
        lam
    }

    /// Dense `X`, `n × p`.
    pub fn x_dense(&self) -> Dense {
        let (n, p) = (self.dims.n, self.dims.p);
        let mut data = Vec::with_capacity(n * p);
        for j in 0..p {
            data.extend_from_slice(self.xy.col(j));
        }
        Dense::from_col_major(n, p, data)
    }

    pub fn y(&self) -> &[f64] {
        self.xy.response()
    }

    /// Index of block `(i, j)` in packed order.
    pub fn block_index(i: usize, j: usize) -> usize {
        tri(i, j)
    }
}

/// `y ← y − bᵀ x`.
fn sub_transpose_mul(b: &Block, x: &[f64], y: &mut [f64]) {
    match b {
        Block::Dense(d) => {
            for (c, yc) in y.iter_mut().enumerate() {
                *yc -= d.col(c).iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
            }
        }
        Block::Sparse(s) => {
            for (c, yc) in y.iter_mut().enumerate() {
                for e in s.col_range(c) {
                    *yc -= s.nzval()[e] * x[s.rowval()[e] as usize];
                }
            }
        }
        _ => unreachable!("off-diagonal factor blocks are sparse or dense"),
    }
}

/// Solves `Lⱼⱼᵀ x = b` in place.
fn solve_transpose(b: &Block, x: &mut [f64]) {
    match b {
        Block::Diagonal(d) => x.iter_mut().zip(d).for_each(|(x, d)| *x /= d),
        Block::BlockDiagonal(bd) => {
            let p = bd.p();
            for (t, seg) in x.chunks_exact_mut(p).enumerate() {
                let tile = bd.tile(t);
                for j in (0..p).rev() {
                    let mut v = seg[j];
                    for i in (j + 1)..p {
                        v -= tile[i + j * p] * seg[i];
                    }
                    seg[j] = v / tile[j + j * p];
                }
            }
        }
        Block::Dense(d) => backward_solve_t(d, x),
        Block::Sparse(_) => unreachable!("diagonal blocks of the factor are never sparse"),
    }
}
