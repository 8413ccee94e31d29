//! Acceptance criteria, one PASS/FAIL line each.
//!
//! Runs with `cargo test -p blmm --test acceptance`. Every criterion is
//! evaluated even when an earlier one fails; the process exits non-zero if
//! any failed.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use blmm::cli::run;
use blmm::io::load_csv;
use blmm::synth::{save_csv, CrossedDesign};
use blmm_core::block::{Block, BlockTag, Dense};
use blmm_core::reference::{cholesky, dense_gram, dense_objective, dense_omega, dense_omega_chol, dense_pls, ols};
use blmm_core::{fit, parse_formula, Criterion, DataTable, FitOptions, FitResult, LinearMixedModel};
use common::{max_abs_diff, random_instance, random_theta, rel_diff, rng};

const INSTEVAL: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/insteval.csv");
const FORMULA: &str = "y ~ 1 + service + (1|d) + (1|s) + (1|dept) + (0 + service|dept)";

/// Collects failures of one criterion.
struct Check {
    failures: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Check { failures: Vec::new() }
    }

    fn close(&mut self, what: &str, got: f64, want: f64, tol: f64) {
        let ok = (got - want).abs() <= tol;
        if !ok {
            self.failures.push(format!("{what}: {got} vs {want} (tol {tol:e})"));
        }
    }

    fn holds(&mut self, what: &str, ok: bool) {
        if !ok {
            self.failures.push(what.to_string());
        }
    }
}

struct Outcome {
    id: usize,
    title: &'static str,
    detail: String,
    failures: Vec<String>,
}

fn insteval() -> DataTable {
    load_csv(INSTEVAL).expect("data/insteval.csv")
}

fn model(table: &DataTable, sort: bool) -> LinearMixedModel {
    LinearMixedModel::with_order(&parse_formula(FORMULA).unwrap(), table, sort).unwrap()
}

/// Variance of column `col` of the term for `grouping`.
fn variance(res: &FitResult, grouping: &str, col: usize) -> f64 {
    res.varcorr.iter().find(|v| v.grouping == grouping).unwrap().variance[col]
}

fn criterion_1(ml: &FitResult, secs: f64) -> Outcome {
    let mut c = Check::new();
    c.close("-2 logLik", ml.objective, 237648.6016, 0.01);
    c.close("AIC", ml.aic, 237662.6016, 0.01);
    c.close("AICc", ml.aicc, 237662.6032, 0.01);
    c.close("BIC", ml.bic, 237727.0294, 0.01);
    c.close("β(Intercept)", ml.beta[0], 3.27765, 1e-3);
    c.close("β service", ml.beta[1], -0.0507433, 1e-3);
    c.close("SE(Intercept)", ml.se[0], 0.0235032, 1e-3);
    c.close("SE service", ml.se[1], 0.0439878, 1e-3);
    c.close("var s", variance(ml, "s", 0), 0.1052958, 1e-3);
    c.close("var d", variance(ml, "d", 0), 0.2624286, 1e-3);
    c.close("var dept", variance(ml, "dept", 0), 0.0025800, 1e-3);
    c.close("var dept service", variance(ml, "dept", 1), 0.0233987, 1e-3);
    c.close("residual", ml.sigma2, 1.3850086, 1e-3);
    c.holds("converged", ml.converged);
    Outcome {
        id: 1,
        title: "InstEval ML golden fit",
        detail: format!("-2 logLik {:.4}, {} evaluations, {:.1} s", ml.objective, ml.n_evals, secs),
        failures: c.failures,
    }
}

fn criterion_2(ml: &FitResult, reml: &FitResult) -> Outcome {
    let mut c = Check::new();
    c.close("REML criterion", reml.objective, 237658.60945, 0.01);
    c.close("var s", variance(reml, "s", 0), 0.1053198, 1e-3);
    c.close("var d", variance(reml, "d", 0), 0.2624398, 1e-3);
    c.close("var dept", variance(reml, "dept", 0), 0.0030492, 1e-3);
    c.close("var dept service", variance(reml, "dept", 1), 0.0256136, 1e-3);
    c.close("residual", reml.sigma2, 1.3850023, 1e-3);
    for k in 0..2 {
        c.holds(&format!("SE_REML[{k}] {} >= SE_ML[{k}] {}", reml.se[k], ml.se[k]), reml.se[k] >= ml.se[k]);
    }
    c.holds("converged", reml.converged);
    Outcome {
        id: 2,
        title: "InstEval REML golden fit",
        detail: format!("criterion {:.5}, SE ({:.7}, {:.7})", reml.objective, reml.se[0], reml.se[1]),
        failures: c.failures,
    }
}

fn criterion_3(table: &DataTable, sorted_nnz: usize, ml: &FitResult) -> Outcome {
    let mut c = Check::new();
    let mut swapped = model(table, false);
    c.holds("formula order puts d first", swapped.reterms()[0].grouping == "d");
    let swapped_nnz = swapped.nnz_l();
    c.holds(&format!("sorted nnz(L) {sorted_nnz} within 10% of 775000"), (sorted_nnz as f64 - 775_000.0).abs() <= 77_500.0);
    c.holds(&format!("swapped nnz(L) {swapped_nnz} within 10% of 4.5e6"), (swapped_nnz as f64 - 4.5e6).abs() <= 4.5e5);
    let start = Instant::now();
    let res = fit(&mut swapped, &FitOptions::default()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let rel = (res.objective - ml.objective).abs() / ml.objective.abs();
    c.holds(&format!("objectives differ by {rel:e} relative"), rel <= 1e-6);
    c.holds("swapped fit converged", res.converged);
    Outcome {
        id: 3,
        title: "fill-in of the two orderings",
        detail: format!(
            "nnz(L) {sorted_nnz} vs {swapped_nnz}; objectives {:.6} vs {:.6} ({:.1} s swapped)",
            ml.objective, res.objective, secs
        ),
        failures: c.failures,
    }
}

fn criterion_4() -> Outcome {
    let mut c = Check::new();
    let start = Instant::now();
    let count = 120;
    let mut worst = (0.0f64, 0.0f64, 0.0f64);
    for seed in 0..count {
        let mut r = rng(10_000 + seed);
        let inst = random_instance(&mut r);
        let mut m = inst.model(true);
        let dims = m.dims().clone();
        c.holds("instance bounds", dims.n <= 200 && dims.k <= 3 && dims.terms.iter().all(|t| t.p <= 2));
        let theta = random_theta(&m, &mut r);
        let got = m.evaluate(&theta, Criterion::Ml).unwrap();
        let (x, z, lam) = (m.x_dense(), m.z_dense(), m.lambda_dense());
        let want = dense_objective(&x, m.y(), &z, &lam);
        let e_obj = (got - want).abs() / want.abs();
        let chol = dense_omega_chol(&dense_gram(&z, &x, m.y()), &lam).unwrap();
        let e_l = max_abs_diff(&m.factor().to_dense(), &chol);
        let (_, _, r2) = dense_pls(&x, m.y(), &z, &lam, None).unwrap();
        let e_r2 = (m.pwrss().unwrap() - r2).abs();
        if e_obj > 1e-8 || e_l > 1e-10 || e_r2 > 1e-10 {
            c.failures.push(format!("seed {seed}: objective {e_obj:e}, L {e_l:e}, r² {e_r2:e}"));
        }
        worst = (worst.0.max(e_obj), worst.1.max(e_l), worst.2.max(e_r2));
    }
    let secs = start.elapsed().as_secs_f64();
    c.holds(&format!("runtime {secs:.1} s under a minute"), secs < 60.0);
    Outcome {
        id: 4,
        title: "oracle equivalence on random instances",
        detail: format!(
            "{count} instances, worst: objective {:.1e} rel, L {:.1e}, r² {:.1e}; {secs:.2} s",
            worst.0, worst.1, worst.2
        ),
        failures: c.failures,
    }
}

fn same_structure(a: &Block, b: &Block) -> bool {
    match (a, b) {
        (Block::Diagonal(x), Block::Diagonal(y)) => x.len() == y.len(),
        (Block::BlockDiagonal(x), Block::BlockDiagonal(y)) => x.p() == y.p() && x.nblocks() == y.nblocks(),
        (Block::Sparse(x), Block::Sparse(y)) => x.same_pattern(y),
        (Block::Dense(x), Block::Dense(y)) => x.nrows() == y.nrows() && x.ncols() == y.ncols(),
        _ => false,
    }
}

fn criterion_5() -> Outcome {
    let mut c = Check::new();
    let mut scalar_first = 0;
    for seed in 0..120 {
        let mut r = rng(20_000 + seed);
        let inst = random_instance(&mut r);
        let mut m = inst.model(true);
        if m.reterms()[0].p() != 1 {
            continue;
        }
        scalar_first += 1;
        let theta = random_theta(&m, &mut r);
        m.evaluate(&theta, Criterion::Ml).unwrap();
        let (a, l) = (m.gram(), m.factor());
        c.holds(&format!("seed {seed}: L[1,1] Diagonal"), l.block(0, 0).tag() == BlockTag::Diagonal);
        for i in 1..a.nblocks() {
            c.holds(&format!("seed {seed}: pattern of L[{},1]", i + 1), same_structure(a.block(i, 0), l.block(i, 0)));
        }
    }
    let mut r = rng(29_999);
    let inst = random_instance(&mut r);
    let mut m = inst.model(true);
    let a = dense_gram(&m.z_dense(), &m.x_dense(), m.y());
    let q = m.dims().q;
    let mut pd = 0;
    for trial in 0..20 {
        let theta = if trial == 0 { vec![0.0; m.theta().len()] } else { random_theta(&m, &mut r) };
        m.set_theta(&theta).unwrap();
        let omega = dense_omega(&a, &m.lambda_dense());
        let lead = Dense::from_col_major(q, q, (0..q * q).map(|k| omega.get(k % q, k / q)).collect());
        if cholesky(&lead).is_some() {
            pd += 1;
        } else {
            c.failures.push(format!("trial {trial}: leading block of Ω not positive definite"));
        }
    }
    Outcome {
        id: 5,
        title: "structural invariants",
        detail: format!("{scalar_first} instances with a scalar first term; Ω positive definite at {pd}/20 θ"),
        failures: c.failures,
    }
}

fn criterion_6() -> Outcome {
    let mut c = Check::new();
    let count = 100;
    for seed in 0..count {
        let mut r = rng(30_000 + seed);
        let inst = random_instance(&mut r);
        let mut m = inst.model(true);
        let obj = m.evaluate(&vec![0.0; m.theta().len()], Criterion::Ml).unwrap();
        let (beta_ols, rss) = ols(&m.x_dense(), m.y()).unwrap();
        let n = m.dims().n as f64;
        let want = n * (1.0 + (2.0 * PI * rss / n).ln());
        c.holds(&format!("seed {seed}: objective {obj} vs {want}"), rel_diff(obj, want) <= 1e-10);
        for (b, w) in m.beta().unwrap().iter().zip(&beta_ols) {
            c.holds(&format!("seed {seed}: β {b} vs OLS {w}"), (b - w).abs() <= 1e-10);
        }
        c.holds(&format!("seed {seed}: ũ = 0"), m.spherical_modes().unwrap().concat().iter().all(|u| u.abs() <= 1e-10));
    }
    Outcome {
        id: 6,
        title: "θ = 0 reduces to least squares",
        detail: format!("{count} instances"),
        failures: c.failures,
    }
}

fn footprint(path: &std::path::Path) -> Result<usize, String> {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run(
        ["blmm", "blocks", "--formula", CrossedDesign::FORMULA, "--data", path.to_str().unwrap()],
        &mut out,
        &mut err,
    );
    if code != 0 {
        return Err(String::from_utf8_lossy(&err).into_owned());
    }
    let text = String::from_utf8(out).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix("total bytes: "))
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| "no total in blocks output".to_string())
}

fn criterion_7() -> Outcome {
    let mut c = Check::new();
    let dir = std::env::temp_dir().join(format!("blmm-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let write = |n: usize, la: usize, lb: usize| -> PathBuf {
        let path = dir.join(format!("crossed_{n}_{la}_{lb}.csv"));
        save_csv(&CrossedDesign::new(n, la, lb, 7).generate(), &path).unwrap();
        path
    };
    let base = footprint(&write(20_000, 4_000, 1_000));
    let doubled = footprint(&write(20_000, 4_000, 2_000));
    let more_obs = footprint(&write(40_000, 4_000, 1_000));
    let _ = std::fs::remove_dir_all(&dir);
    let detail = match (base, doubled, more_obs) {
        (Ok(b), Ok(d), Ok(m)) => {
            let level_ratio = d as f64 / b as f64;
            let n_ratio = m as f64 / b as f64;
            c.holds(&format!("footprint ratio {level_ratio:.2} >= 3.5"), level_ratio >= 3.5);
            c.holds(&format!("doubling n changes the footprint by {n_ratio:.2}x"), n_ratio < 1.5);
            format!("{b} -> {d} bytes when levels of b double ({level_ratio:.2}x); {n_ratio:.3}x when n doubles")
        }
        (b, d, m) => {
            for e in [b, d, m].into_iter().filter_map(Result::err) {
                c.failures.push(e);
            }
            "blocks command failed".into()
        }
    };
    Outcome {
        id: 7,
        title: "synthetic footprint growth",
        detail,
        failures: c.failures,
    }
}

fn main() {
    let table = insteval();
    let mut sorted = model(&table, true);
    let sorted_nnz = sorted.nnz_l();
    let start = Instant::now();
    let ml = fit(&mut sorted, &FitOptions::default()).unwrap();
    let ml_secs = start.elapsed().as_secs_f64();
    let reml = fit(&mut sorted, &FitOptions::reml()).unwrap();

    let outcomes = vec![
        criterion_1(&ml, ml_secs),
        criterion_2(&ml, &reml),
        criterion_3(&table, sorted_nnz, &ml),
        criterion_4(),
        criterion_5(),
        criterion_6(),
        criterion_7(),
    ];
    let mut failed = 0;
    for o in &outcomes {
        let tag = if o.failures.is_empty() { "PASS" } else { "FAIL" };
        println!("{tag} [{}] {}: {}", o.id, o.title, o.detail);
        for f in &o.failures {
            println!("       {f}");
        }
        failed += !o.failures.is_empty() as usize;
    }
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
