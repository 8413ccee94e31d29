//! Blocked evaluation against the naive dense oracles.

mod common;

use blmm_core::block::Dense;
use blmm_core::reference::{cholesky, dense_gram, dense_objective, dense_omega, dense_omega_chol, dense_pls, dense_reml};
use blmm_core::Criterion;
use rand::Rng;
use common::{max_abs_diff, random_instance, random_theta, rel_diff, rng};

const INSTANCES: u64 = 120;

fn logdet(a: &Dense) -> f64 {
    let l = cholesky(a).expect("positive definite");
    2.0 * (0..l.nrows()).map(|i| l.get(i, i).ln()).sum::<f64>()
}

#[test]
fn blocked_evaluation_matches_dense_oracles() {
    let mut worst = [0.0f64; 5];
    for seed in 0..INSTANCES {
        let mut r = rng(seed);
        let inst = random_instance(&mut r);
        let mut m = inst.model(r.gen_bool(0.7));
        let theta = random_theta(&m, &mut r);
        let ml = m.evaluate(&theta, Criterion::Ml).unwrap();
        let (x, z, lam) = (m.x_dense(), m.z_dense(), m.lambda_dense());
        let y = m.y().to_vec();
        let a = dense_gram(&z, &x, &y);

        let dense = dense_objective(&x, &y, &z, &lam);
        let e = rel_diff(ml, dense);
        assert!(e <= 1e-8, "seed {seed} `{}`: objective {ml} vs {dense}", inst.formula);
        worst[0] = worst[0].max(e);

        let chol = dense_omega_chol(&a, &lam).unwrap();
        let e = max_abs_diff(&m.factor().to_dense(), &chol);
        assert!(e <= 1e-10, "seed {seed}: factor differs by {e}");
        worst[1] = worst[1].max(e);

        let (_, _, r2) = dense_pls(&x, &y, &z, &lam, None).unwrap();
        let e = (m.pwrss().unwrap() - r2).abs();
        assert!(e <= 1e-10, "seed {seed}: r_yy² {} vs {r2}", m.pwrss().unwrap());
        worst[2] = worst[2].max(e);

        let reml = m.objective_reml().unwrap();
        let dense = dense_reml(&x, &y, &z, &lam);
        let e = rel_diff(reml, dense);
        assert!(e <= 1e-8, "seed {seed}: REML {reml} vs {dense}");
        worst[3] = worst[3].max(e);

        let q = m.dims().q;
        let omega = dense_omega(&a, &lam);
        let re = Dense::from_col_major(q, q, (0..q).flat_map(|j| (0..q).map(move |i| (i, j))).map(|(i, j)| omega.get(i, j)).collect());
        let e = (2.0 * m.factor().logdet_re() - logdet(&re)).abs();
        assert!(e <= 1e-10, "seed {seed}: log determinant differs by {e}");
        worst[4] = worst[4].max(e);
    }
    eprintln!("worst: objective {:.1e}, L {:.1e}, r² {:.1e}, REML {:.1e}, logdet {:.1e}", worst[0], worst[1], worst[2], worst[3], worst[4]);
}

#[test]
fn modes_and_coefficients_match_penalized_least_squares() {
    for seed in 1000..1060 {
        let mut r = rng(seed);
        let inst = random_instance(&mut r);
        let mut m = inst.model(true);
        let theta = random_theta(&m, &mut r);
        m.evaluate(&theta, Criterion::Ml).unwrap();
        let (x, z, lam) = (m.x_dense(), m.z_dense(), m.lambda_dense());
        let (u, beta, _) = dense_pls(&x, m.y(), &z, &lam, None).unwrap();
        let got_beta = m.beta().unwrap();
        for (g, w) in got_beta.iter().zip(&beta) {
            assert!((g - w).abs() <= 1e-8, "seed {seed}: β {got_beta:?} vs {beta:?}");
        }
        let got_u: Vec<f64> = m.spherical_modes().unwrap().concat();
        for (g, w) in got_u.iter().zip(&u) {
            assert!((g - w).abs() <= 1e-8, "seed {seed}: ũ differs");
        }
        // b̃ = Λũ, level by level.
        let modes = m.conditional_modes().unwrap();
        let mut flat = Vec::new();
        for b in &modes {
            for l in 0..b.nrows() {
                flat.extend((0..b.ncols()).map(|c| b.get(l, c)));
            }
        }
        for (i, got) in flat.iter().enumerate() {
            let want: f64 = (0..u.len()).map(|j| lam.get(i, j) * u[j]).sum();
            assert!((got - want).abs() <= 1e-8, "seed {seed}: b̃[{i}]");
        }
    }
}

#[test]
fn fixed_order_and_sorted_order_agree() {
    for seed in 2000..2040 {
        let mut r = rng(seed);
        let inst = random_instance(&mut r);
        let mut sorted = inst.model(true);
        let mut plain = inst.model(false);
        let theta = random_theta(&plain, &mut r);
        // Map θ by grouping factor, since sorting may permute terms.
        let mut by_name = Vec::new();
        for (t, re) in plain.reterms().iter().enumerate() {
            let (a, b) = plain.theta_map().term_range(t);
            by_name.push((re.grouping.clone(), theta[a..a + b].to_vec()));
        }
        let permuted: Vec<f64> = sorted
            .reterms()
            .iter()
            .flat_map(|re| by_name.iter().find(|(g, _)| *g == re.grouping).unwrap().1.clone())
            .collect();
        let a = plain.evaluate(&theta, Criterion::Ml).unwrap();
        let b = sorted.evaluate(&permuted, Criterion::Ml).unwrap();
        assert!(rel_diff(a, b) <= 1e-10, "seed {seed}: {a} vs {b}");
    }
}
