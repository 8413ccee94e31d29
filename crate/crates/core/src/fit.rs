//! Optimization of the profiled objective and post-fit summaries.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::block::Dense;
pub use crate::model::Criterion;
use crate::error::{Error, Result};
use crate::model::LinearMixedModel;
use crate::optim::{NelderMead, TrustRegion};

/// Derivative-free method used by [`fit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Optimizer {
    /// Quadratic interpolation models in a shrinking trust region.
    #[default]
    TrustRegion,
    /// Nelder–Mead with projection onto the bounds.
    NelderMead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub criterion: Criterion,
    pub optimizer: Optimizer,
    pub max_evals: usize,
    pub ftol_abs: f64,
    pub xtol_abs: f64,
    /// Starting `θ`; the model's default when absent.
    pub initial_theta: Option<Vec<f64>>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            criterion: Criterion::Ml,
            optimizer: Optimizer::TrustRegion,
            max_evals: 2000,
            ftol_abs: 1e-8,
            xtol_abs: 1e-6,
            initial_theta: None,
        }
    }
}

impl FitOptions {
    pub fn reml() -> Self {
        FitOptions {
            criterion: Criterion::Reml,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.ftol_abs > 0.0) || !(self.xtol_abs > 0.0) {
            return Err(Error::InvalidOption("tolerances must be positive"));
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidOption("max_evals must be at least one"));
        }
        Ok(())
    }
}

/// Variance components of one random-effects term.
#[derive(Debug, Clone, PartialEq)]
pub struct VarCorr {
    pub grouping: String,
    pub columns: Vec<String>,
    pub levels: usize,
    /// `σ̂² TᵢTᵢᵀ`, column-major.
    pub covariance: Vec<f64>,
    pub variance: Vec<f64>,
    pub std_dev: Vec<f64>,
    /// Strict lower triangle, row by row: `(1,0), (2,0), (2,1), …`. `None`
    /// where the correlation is structurally zero or undefined.
    pub corr: Vec<Option<f64>>,
}

impl VarCorr {
    /// Correlation between columns `i` and `j`, `j < i`.
    pub fn corr_at(&self, i: usize, j: usize) -> Option<f64> {
        self.corr[i * (i - 1) / 2 + j]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub criterion: Criterion,
    pub objective: f64,
    pub theta: Vec<f64>,
    pub beta: Vec<f64>,
    pub se: Vec<f64>,
    pub coef_names: Vec<String>,
    pub sigma2: f64,
    pub varcorr: Vec<VarCorr>,
    pub n: usize,
    /// Parameters counted by the information criteria: `len(θ) + p + 1`.
    pub dof: usize,
    pub aic: f64,
    pub aicc: f64,
    pub bic: f64,
    pub n_evals: usize,
    pub converged: bool,
    /// The residual sum of squares vanished.
    pub perfect_fit: bool,
}

impl FitResult {
    pub fn sigma(&self) -> f64 {
        libm::sqrt(self.sigma2)
    }

    pub fn log_likelihood(&self) -> f64 {
        -self.objective / 2.0
    }
}

/// `(dof, AIC, AICc, BIC)` for an objective on the −2 log-likelihood scale.
pub fn information_criteria(objective: f64, n_theta: usize, p: usize, n: usize) -> (usize, f64, f64, f64) {
    let dof = n_theta + p + 1;
    let df = dof as f64;
    let aic = objective + 2.0 * df;
    let aicc = aic + 2.0 * df * (df + 1.0) / (n as f64 - df - 1.0);
    let bic = objective + df * libm::log(n as f64);
    (dof, aic, aicc, bic)
}

/// Fits the model and leaves the estimates installed in it.
pub fn fit(model: &mut LinearMixedModel, opts: &FitOptions) -> Result<FitResult> {
    fit_with_progress(model, opts, |_, _, _| {})
}

/// As [`fit`], calling `progress(eval, θ, objective)` after each evaluation.
pub fn fit_with_progress<P>(model: &mut LinearMixedModel, opts: &FitOptions, mut progress: P) -> Result<FitResult>
where
    P: FnMut(usize, &[f64], f64),
{
    opts.validate()?;
    let x0 = match &opts.initial_theta {
        Some(t) => {
            model.theta_map().validate(t)?;
            t.clone()
        }
        None => model.initial_theta(),
    };
    let lower = model.lower_bounds().to_vec();
    let upper = vec![f64::INFINITY; lower.len()];
    let criterion = opts.criterion;
    let mut count = 0;
    let objective = |theta: &[f64]| {
        let v = model.evaluate(theta, criterion)?;
        count += 1;
        progress(count, theta, v);
        Ok(v)
    };
    let min = match opts.optimizer {
        Optimizer::TrustRegion => TrustRegion {
            rho_end: opts.xtol_abs,
            ftol_abs: opts.ftol_abs,
            max_evals: opts.max_evals,
            ..TrustRegion::default()
        }
        .minimize(objective, &x0, &lower, &upper)?,
        Optimizer::NelderMead => NelderMead {
            ftol_abs: opts.ftol_abs,
            xtol_abs: opts.xtol_abs,
            max_evals: opts.max_evals,
            ..NelderMead::default()
        }
        .minimize(objective, &x0, &lower, &upper)?,
    };
    let objective = model.evaluate(&min.x, criterion)?;
    summarize(model, criterion, min.evals, min.converged, objective)
}

/// Post-fit quantities for the `θ` currently installed in `model`.
pub fn summarize(
    model: &LinearMixedModel,
    criterion: Criterion,
    n_evals: usize,
    converged: bool,
    objective: f64,
) -> Result<FitResult> {
    let dims = model.dims();
    let (beta, se) = model.fixed_effects(criterion)?;
    let sigma2 = model.sigma2(criterion)?;
    let (dof, aic, aicc, bic) = information_criteria(objective, model.theta().len(), dims.p, dims.n);
    let varcorr = model
        .reterms()
        .iter()
        .zip(model.relative_covariances())
        .zip(model.templates())
        .map(|((re, rel), t)| {
            let p = re.p();
            let covariance: Vec<f64> = rel.iter().map(|v| v * sigma2).collect();
            let variance: Vec<f64> = (0..p).map(|i| covariance[i + i * p]).collect();
            let std_dev: Vec<f64> = variance.iter().map(|v| libm::sqrt(*v)).collect();
            let mut corr = Vec::new();
            for i in 1..p {
                for j in 0..i {
                    let denom = std_dev[i] * std_dev[j];
                    corr.push(if t.mask().is_free(i, j) && denom > 0.0 {
                        Some(covariance[i + j * p] / denom)
                    } else {
                        None
                    });
                }
            }
            VarCorr {
                grouping: re.grouping.clone(),
                columns: re.columns.iter().map(|c| c.name().to_string()).collect(),
                levels: re.nlevels(),
                covariance,
                variance,
                std_dev,
                corr,
            }
        })
        .collect();
    Ok(FitResult {
        criterion,
        objective,
        theta: model.theta().to_vec(),
        beta,
        se,
        coef_names: model.xy().names()[..dims.p].to_vec(),
        sigma2,
        varcorr,
        n: dims.n,
        dof,
        aic,
        aicc,
        bic,
        n_evals,
        converged,
        perfect_fit: model.perfect_fit()?,
    })
}

/// Conditional modes `b̃` at the installed `θ`, one `levels × p` matrix
/// per term.
pub fn conditional_modes(model: &LinearMixedModel) -> Result<Vec<Dense>> {
    model.conditional_modes()
}
